#ifndef HSSNB_METRICS_HPP
#define HSSNB_METRICS_HPP

// Confusion matrix (rows = ground truth, columns = prediction) and the three
// scores reported for HSI classification: overall accuracy, average accuracy
// (mean per-class recall) and the Kappa coefficient, plus multi-run
// mean +- sample-std reporting.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hssnb/errors.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes)
        : classes_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const { return classes_; }

    std::uint64_t count(std::size_t true_class, std::size_t predicted) const {
        return counts_[(true_class - 1) * classes_ + (predicted - 1)];
    }

    // Labels are 1-based.
    void accumulate(std::size_t true_class, std::size_t predicted) {
        if (true_class < 1 || true_class > classes_ || predicted < 1 || predicted > classes_)
            throw ParamError("confusion matrix: label out of range 1.." +
                             std::to_string(classes_));
        ++counts_[(true_class - 1) * classes_ + (predicted - 1)];
    }

    void merge(const ConfusionMatrix& other) {
        if (other.classes_ != classes_)
            throw ShapeError("confusion matrix: merging different class counts");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }

    std::uint64_t trace() const {
        std::uint64_t t = 0;
        for (std::size_t k = 0; k < classes_; ++k) t += counts_[k * classes_ + k];
        return t;
    }

    std::uint64_t row_sum(std::size_t k) const {  // 1-based class
        std::uint64_t t = 0;
        for (std::size_t j = 0; j < classes_; ++j) t += counts_[(k - 1) * classes_ + j];
        return t;
    }

    std::uint64_t col_sum(std::size_t k) const {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < classes_; ++i) t += counts_[i * classes_ + (k - 1)];
        return t;
    }

private:
    std::size_t classes_ = 0;
    std::vector<std::uint64_t> counts_;
};

inline double overall_accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ParamError("overall_accuracy: empty confusion matrix");
    return double(cm.trace()) / double(total);
}

inline double average_accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ParamError("average_accuracy: empty confusion matrix");
    double sum = 0;
    for (std::size_t k = 1; k <= cm.classes(); ++k) {
        const auto rs = cm.row_sum(k);
        if (rs == 0)
            throw ParamError("average_accuracy: class " + std::to_string(k) +
                             " has no ground-truth samples");
        sum += double(cm.count(k, k)) / double(rs);
    }
    return sum / double(cm.classes());
}

// (p_o - p_e) / (1 - p_e). The degenerate p_e == 1 case (all mass in a
// single row/column pair, exact in integer arithmetic) is 1.0 when the
// agreement is also perfect and an error otherwise.
inline double kappa(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ParamError("kappa: empty confusion matrix");

    // Marginal product sum in integers so the degenerate case is exact.
    unsigned __int128 expected = 0;
    for (std::size_t k = 1; k <= cm.classes(); ++k)
        expected += (unsigned __int128)(cm.row_sum(k)) * cm.col_sum(k);
    const unsigned __int128 total_sq = (unsigned __int128)(total)*total;

    const double p_o = double(cm.trace()) / double(total);
    if (expected == total_sq) {
        if (cm.trace() == total) return 1.0;
        throw NumericError("kappa: chance agreement is 1 but observed agreement is not");
    }
    const double p_e = double(expected) / double(total_sq);
    return (p_o - p_e) / (1.0 - p_e);
}

struct RunScores {
    double kappa = 0;
    double average_accuracy = 0;
    double overall_accuracy = 0;
};

inline RunScores score(const ConfusionMatrix& cm) {
    return {kappa(cm), average_accuracy(cm), overall_accuracy(cm)};
}

struct MeanStd {
    double mean = 0;  // percent
    double std = 0;   // percent, sample standard deviation (0 for one run)
};

namespace detail {

inline MeanStd mean_std_percent(const std::vector<double>& values) {
    MeanStd ms;
    double sum = 0;
    bool identical = true;
    for (double v : values) {
        sum += v;
        identical = identical && v == values.front();
    }
    ms.mean = 100.0 * sum / double(values.size());
    if (values.size() > 1 && !identical) {
        double sq = 0;
        for (double v : values) {
            const double d = 100.0 * v - ms.mean;
            sq += d * d;
        }
        ms.std = std::sqrt(sq / double(values.size() - 1));
    }
    return ms;
}

inline std::string format_mean_std(const MeanStd& ms) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << ms.mean << " ± " << std::setprecision(1)
       << ms.std;
    return os.str();
}

}  // namespace detail

struct MetricsReport {
    MeanStd kappa, average_accuracy, overall_accuracy;
    std::size_t runs = 0;
};

inline MetricsReport summarize_runs(const std::vector<RunScores>& runs) {
    if (runs.empty()) throw ParamError("summarize_runs: need at least one run");
    std::vector<double> ks, as, os;
    for (const auto& r : runs) {
        ks.push_back(r.kappa);
        as.push_back(r.average_accuracy);
        os.push_back(r.overall_accuracy);
    }
    MetricsReport rep;
    rep.kappa = detail::mean_std_percent(ks);
    rep.average_accuracy = detail::mean_std_percent(as);
    rep.overall_accuracy = detail::mean_std_percent(os);
    rep.runs = runs.size();
    return rep;
}

// Single line "<kappa> | <aa> | <oa>", each as "MM.MM ± S.S" in percent.
inline std::string report_line(const MetricsReport& rep) {
    return detail::format_mean_std(rep.kappa) + " | " +
           detail::format_mean_std(rep.average_accuracy) + " | " +
           detail::format_mean_std(rep.overall_accuracy);
}

inline std::string report_table(const MetricsReport& rep) {
    std::ostringstream os;
    os << "metric | mean ± std (%), " << rep.runs << " run" << (rep.runs == 1 ? "" : "s")
       << "\n";
    os << "kappa  | " << detail::format_mean_std(rep.kappa) << "\n";
    os << "aa     | " << detail::format_mean_std(rep.average_accuracy) << "\n";
    os << "oa     | " << detail::format_mean_std(rep.overall_accuracy) << "\n";
    return os.str();
}

inline nlohmann::json report_json(const MetricsReport& rep) {
    auto entry = [](const MeanStd& ms) {
        return nlohmann::json{{"mean", ms.mean}, {"std", ms.std}};
    };
    return nlohmann::json{{"kappa", entry(rep.kappa)},
                          {"aa", entry(rep.average_accuracy)},
                          {"oa", entry(rep.overall_accuracy)},
                          {"runs", rep.runs}};
}

}  // namespace hssnb

#endif  // HSSNB_METRICS_HPP
