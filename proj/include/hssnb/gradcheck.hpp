#ifndef HSSNB_GRADCHECK_HPP
#define HSSNB_GRADCHECK_HPP

// End-to-end gradient verification: central finite differences of the
// cross-entropy loss against the analytic backward pass, element by element
// over every parameter tensor. Requires a double-precision build.
//
// The finite-difference reference runs in 80-bit extended precision.
// Differencing a double-precision loss at eps=1e-5 leaves ~3e-11 of rounding
// noise in the quotient, which swamps the relative comparison for gradient
// components below ~1e-7; the extended-precision evaluator pushes that floor
// below 1e-13 so the comparison measures the gradients, not the noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hssnb/network.hpp"
#include "hssnb/tensor.hpp"

namespace hssnb {

namespace detail {

// Forward pass of the whole network in long double over a parameter copy.
// Layer structure and shapes come from the reference model; parameter values
// live in perturbable flat buffers aligned with parameter_tensors() order.
class PreciseEvaluator {
public:
    explicit PreciseEvaluator(const HssnbModel& model) : model_(&model) {
        for (const auto& [name, t] : parameter_tensors(model)) {
            index_[name] = tensors_.size();
            tensors_.emplace_back(t->values().begin(), t->values().end());
        }
    }

    std::size_t tensor_count() const { return tensors_.size(); }
    std::vector<long double>& tensor(std::size_t i) { return tensors_[i]; }

    long double loss(const Tensor& patch, const Tensor& one_hot) const {
        const Architecture& arch = model_->arch;
        std::vector<long double> x(patch.values().begin(), patch.values().end());
        std::size_t H = arch.window, W = arch.window, Dp = arch.spectral_depth, C = 1;

        for (std::size_t layer = 0; layer < 3; ++layer) {
            const auto& ref = model_->conv3d[layer].kernels;
            const std::size_t F = ref.dim(0), kh = ref.dim(1), kw = ref.dim(2), kd = ref.dim(3);
            const auto& ker = at("conv3d_" + std::to_string(layer + 1) + ".kernels");
            const auto& bias = at("conv3d_" + std::to_string(layer + 1) + ".bias");
            const std::size_t oH = H - kh + 1, oW = W - kw + 1, oD = Dp - kd + 1;
            std::vector<long double> y(oH * oW * oD * F, 0);
            for (std::size_t a = 0; a < oH; ++a)
                for (std::size_t b = 0; b < oW; ++b)
                    for (std::size_t c = 0; c < oD; ++c)
                        for (std::size_t f = 0; f < F; ++f) {
                            long double acc = bias[f];
                            for (std::size_t p = 0; p < kh; ++p)
                                for (std::size_t q = 0; q < kw; ++q)
                                    for (std::size_t r = 0; r < kd; ++r)
                                        for (std::size_t m = 0; m < C; ++m)
                                            acc += ker[((((f * kh + p) * kw + q) * kd + r) * C +
                                                        m)] *
                                                   x[(((a + p) * W + (b + q)) * Dp + (c + r)) * C +
                                                     m];
                            y[((a * oW + b) * oD + c) * F + f] = acc > 0 ? acc : 0;
                        }
            x = std::move(y);
            H = oH;
            W = oW;
            Dp = oD;
            C = F;
        }

        // (H, W, Dp, C) -> (H, W, Dp*C) is a relabeling of the same buffer.
        std::size_t C2 = Dp * C;
        for (std::size_t layer = 0; layer < 2; ++layer) {
            const auto& ref = model_->conv2d[layer].kernels;
            const std::size_t F = ref.dim(0), kh = ref.dim(1), kw = ref.dim(2);
            const auto& ker = at("conv2d_" + std::to_string(layer + 1) + ".kernels");
            const auto& bias = at("conv2d_" + std::to_string(layer + 1) + ".bias");
            const std::size_t oH = H - kh + 1, oW = W - kw + 1;
            std::vector<long double> y(oH * oW * F, 0);
            for (std::size_t a = 0; a < oH; ++a)
                for (std::size_t b = 0; b < oW; ++b)
                    for (std::size_t f = 0; f < F; ++f) {
                        long double acc = bias[f];
                        for (std::size_t p = 0; p < kh; ++p)
                            for (std::size_t q = 0; q < kw; ++q)
                                for (std::size_t m = 0; m < C2; ++m)
                                    acc += ker[((f * kh + p) * kw + q) * C2 + m] *
                                           x[((a + p) * W + (b + q)) * C2 + m];
                        y[(a * oW + b) * F + f] = acc > 0 ? acc : 0;
                    }
            x = std::move(y);
            H = oH;
            W = oW;
            C2 = F;
        }

        // (H, W*C2) sequence; first Bi-LSTM returns the full sequence.
        const std::size_t T = H;
        const std::size_t feat = W * C2;
        const std::size_t h = arch.lstm_hidden;
        std::vector<long double> seq_out(T * 2 * h);
        run_lstm("bidirectional_1.fwd", x, T, feat, false, seq_out, 0, 2 * h);
        run_lstm("bidirectional_1.bwd", x, T, feat, true, seq_out, h, 2 * h);

        // Dropout is the identity at inference. Second Bi-LSTM keeps only
        // each direction's final output.
        std::vector<long double> last_out(2 * h);
        {
            std::vector<long double> full(T * 2 * h);
            run_lstm("bidirectional_2.fwd", seq_out, T, 2 * h, false, full, 0, 2 * h);
            for (std::size_t i = 0; i < h; ++i) last_out[i] = full[(T - 1) * 2 * h + i];
            run_lstm("bidirectional_2.bwd", seq_out, T, 2 * h, true, full, h, 2 * h);
            for (std::size_t i = 0; i < h; ++i) last_out[h + i] = full[h + i];
        }

        const auto& dw = at("dense_1.weights");
        const auto& db = at("dense_1.bias");
        const std::size_t N = arch.classes;
        std::vector<long double> logits(N);
        for (std::size_t i = 0; i < N; ++i) {
            long double acc = db[i];
            for (std::size_t j = 0; j < 2 * h; ++j) acc += dw[i * 2 * h + j] * last_out[j];
            logits[i] = acc;
        }
        long double max = logits[0];
        for (std::size_t i = 1; i < N; ++i) max = std::max(max, logits[i]);
        long double sum = 0;
        for (std::size_t i = 0; i < N; ++i) sum += std::exp(logits[i] - max);
        long double loss = 0;
        for (std::size_t i = 0; i < N; ++i) {
            if (one_hot[i] == 0) continue;
            const long double prob = std::exp(logits[i] - max) / sum;
            loss -= (long double)(one_hot[i]) *
                    std::log(std::max(prob, (long double)(1e-12)));
        }
        return loss;
    }

private:
    const std::vector<long double>& at(const std::string& name) const {
        return tensors_[index_.at(name)];
    }

    // One LSTM direction; writes output rows (re-reversed when `reversed`)
    // into out[t*stride + offset .. +hidden).
    void run_lstm(const std::string& prefix, const std::vector<long double>& seq, std::size_t T,
                  std::size_t in_dim, bool reversed, std::vector<long double>& out,
                  std::size_t offset, std::size_t stride) const {
        const std::size_t h = model_->arch.lstm_hidden;
        const bool peep = model_->arch.peepholes;
        const auto& w_ib = at(prefix + ".w_ib");
        const auto& r_ib = at(prefix + ".r_ib");
        const auto& b_ib = at(prefix + ".b_ib");
        const auto& w_ig = at(prefix + ".w_ig");
        const auto& r_ig = at(prefix + ".r_ig");
        const auto& b_ig = at(prefix + ".b_ig");
        const auto& w_fg = at(prefix + ".w_fg");
        const auto& r_fg = at(prefix + ".r_fg");
        const auto& b_fg = at(prefix + ".b_fg");
        const auto& w_og = at(prefix + ".w_og");
        const auto& r_og = at(prefix + ".r_og");
        const auto& b_og = at(prefix + ".b_og");
        const std::vector<long double>* p_ig = peep ? &at(prefix + ".p_ig") : nullptr;
        const std::vector<long double>* p_fg = peep ? &at(prefix + ".p_fg") : nullptr;
        const std::vector<long double>* p_og = peep ? &at(prefix + ".p_og") : nullptr;

        std::vector<long double> o_prev(h, 0), c_prev(h, 0), o_cur(h), c_cur(h);
        auto sigmoid = [](long double v) { return 1.0L / (1.0L + std::exp(-v)); };
        for (std::size_t step = 0; step < T; ++step) {
            const std::size_t t = reversed ? T - 1 - step : step;
            const long double* xt = seq.data() + t * in_dim;
            for (std::size_t i = 0; i < h; ++i) {
                long double pre_ib = b_ib[i], pre_ig = b_ig[i], pre_fg = b_fg[i],
                            pre_og = b_og[i];
                for (std::size_t j = 0; j < in_dim; ++j) {
                    pre_ib += w_ib[i * in_dim + j] * xt[j];
                    pre_ig += w_ig[i * in_dim + j] * xt[j];
                    pre_fg += w_fg[i * in_dim + j] * xt[j];
                    pre_og += w_og[i * in_dim + j] * xt[j];
                }
                for (std::size_t j = 0; j < h; ++j) {
                    pre_ib += r_ib[i * h + j] * o_prev[j];
                    pre_ig += r_ig[i * h + j] * o_prev[j];
                    pre_fg += r_fg[i * h + j] * o_prev[j];
                    pre_og += r_og[i * h + j] * o_prev[j];
                }
                if (peep) {
                    pre_ig += (*p_ig)[i] * c_prev[i];
                    pre_fg += (*p_fg)[i] * c_prev[i];
                }
                const long double ib = std::tanh(pre_ib);
                const long double ig = sigmoid(pre_ig);
                const long double fg = sigmoid(pre_fg);
                c_cur[i] = ib * ig + c_prev[i] * fg;
                if (peep) pre_og += (*p_og)[i] * c_cur[i];
                o_cur[i] = std::tanh(c_cur[i]) * sigmoid(pre_og);
            }
            for (std::size_t i = 0; i < h; ++i) out[t * stride + offset + i] = o_cur[i];
            o_prev = o_cur;
            c_prev = c_cur;
        }
    }

    const HssnbModel* model_;
    std::vector<std::vector<long double>> tensors_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace detail

struct TensorCheck {
    std::string name;
    Real max_rel_error = 0;
    std::size_t worst_index = 0;
    Real analytic_at_worst = 0;
    Real numeric_at_worst = 0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    Real epsilon = 0;
    Real tolerance = 0;
    Real max_rel_error = 0;
    std::string worst_tensor;
    bool pass = true;
};

// Compares supplied analytic gradients against central differences of the
// extended-precision loss. Exposed separately so tests can verify the
// checker flags corrupted gradients.
inline GradCheckReport compare_gradients(HssnbModel& model, const Tensor& patch,
                                         const Tensor& one_hot, ModelGrads& analytic,
                                         Real epsilon, Real tolerance) {
    if (sizeof(Real) < 8)
        throw NumericError("gradient check requires a double-precision build");

    GradCheckReport report;
    report.epsilon = epsilon;
    report.tolerance = tolerance;

    detail::PreciseEvaluator eval(model);
    // Both forward paths must agree before any differencing is trusted.
    const Real reference = model_loss(model, patch, one_hot);
    const long double precise = eval.loss(patch, one_hot);
    if (std::abs(Real(precise) - reference) > 1e-9 * std::max<Real>(1, std::abs(reference)))
        throw NumericError(
            "gradient check: extended-precision forward disagrees with the double path");

    auto params = parameter_tensors(model);
    auto grads = analytic.tensors();

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& grad = *grads[pi].second;
        std::vector<long double>& param = eval.tensor(pi);
        TensorCheck check;
        check.name = params[pi].first;

        for (std::size_t i = 0; i < param.size(); ++i) {
            const long double saved = param[i];
            param[i] = saved + (long double)(epsilon);
            const long double plus = eval.loss(patch, one_hot);
            param[i] = saved - (long double)(epsilon);
            const long double minus = eval.loss(patch, one_hot);
            param[i] = saved;

            const Real numeric = Real((plus - minus) / (2.0L * (long double)(epsilon)));
            const Real analytic_v = grad[i];
            const Real rel = std::abs(analytic_v - numeric) /
                             std::max({std::abs(analytic_v), std::abs(numeric), Real(1e-8)});
            if (rel > check.max_rel_error) {
                check.max_rel_error = rel;
                check.worst_index = i;
                check.analytic_at_worst = analytic_v;
                check.numeric_at_worst = numeric;
            }
        }
        check.pass = check.max_rel_error < tolerance;
        if (check.max_rel_error > report.max_rel_error) {
            report.max_rel_error = check.max_rel_error;
            report.worst_tensor = check.name;
        }
        report.pass = report.pass && check.pass;
        report.tensors.push_back(std::move(check));
    }
    return report;
}

// Computes analytic gradients for one (patch, one-hot) pair and verifies
// them against finite differences, reporting per-tensor maxima.
inline GradCheckReport check_gradients(HssnbModel& model, const Tensor& patch,
                                       const Tensor& one_hot, Real epsilon = Real(1e-5),
                                       Real tolerance = Real(1e-4)) {
    ModelCache cache;
    const Tensor probs = model_forward(model, patch, false, nullptr, &cache);
    auto [loss, grad_logits] = cross_entropy_loss(probs, one_hot);
    (void)loss;
    ModelGrads grads = ModelGrads::zeros_like(model);
    model_backward(model, cache, grad_logits, grads, nullptr);
    return compare_gradients(model, patch, one_hot, grads, epsilon, tolerance);
}

}  // namespace hssnb

#endif  // HSSNB_GRADCHECK_HPP
