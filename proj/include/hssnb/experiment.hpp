#ifndef HSSNB_EXPERIMENT_HPP
#define HSSNB_EXPERIMENT_HPP

// End-to-end experiment orchestration shared by the CLI subcommands:
// dataset -> PCA -> patches -> stratified split -> train/evaluate, with
// history CSV, metrics JSON and checkpoint outputs. Every random choice
// derives from the single experiment seed (seed+1 init, seed+2 split,
// seed+3 shuffle, seed+4 dropout).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hssnb/checkpoint.hpp"
#include "hssnb/dataset.hpp"
#include "hssnb/metrics.hpp"
#include "hssnb/network.hpp"
#include "hssnb/patches.hpp"
#include "hssnb/pca.hpp"
#include "hssnb/ppm.hpp"
#include "hssnb/train.hpp"

namespace hssnb {

// Flat, JSON-round-trippable experiment description. Command-line flags
// override file values.
struct ExperimentConfig {
    std::string dataset_dir;
    std::string out_dir = ".";
    std::string preset = "standard";  // standard | desk | gradcheck
    TrainConfig train;
    std::vector<std::size_t> windows{19, 21, 23, 25};
    std::size_t runs = 1;
    bool serial = false;
    bool peepholes = false;

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"dataset", dataset_dir},
            {"out", out_dir},
            {"preset", preset},
            {"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"learning_rate", double(train.learning_rate)},
            {"beta1", double(train.beta1)},
            {"beta2", double(train.beta2)},
            {"epsilon", double(train.epsilon)},
            {"train_fraction", double(train.train_fraction)},
            {"window", train.window},
            {"pca", train.pca_dims},
            {"seed", train.seed},
            {"threads", train.threads},
            {"windows", windows},
            {"runs", runs},
            {"serial", serial},
            {"peepholes", peepholes},
        };
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        if (j.contains("dataset")) c.dataset_dir = j.at("dataset").get<std::string>();
        if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
        if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
        if (j.contains("epochs")) c.train.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("batch_size")) c.train.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("learning_rate"))
            c.train.learning_rate = Real(j.at("learning_rate").get<double>());
        if (j.contains("beta1")) c.train.beta1 = Real(j.at("beta1").get<double>());
        if (j.contains("beta2")) c.train.beta2 = Real(j.at("beta2").get<double>());
        if (j.contains("epsilon")) c.train.epsilon = Real(j.at("epsilon").get<double>());
        if (j.contains("train_fraction"))
            c.train.train_fraction = Real(j.at("train_fraction").get<double>());
        if (j.contains("window")) c.train.window = j.at("window").get<std::size_t>();
        if (j.contains("pca")) c.train.pca_dims = j.at("pca").get<std::size_t>();
        if (j.contains("seed")) c.train.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threads")) c.train.threads = j.at("threads").get<std::size_t>();
        if (j.contains("windows")) c.windows = j.at("windows").get<std::vector<std::size_t>>();
        if (j.contains("runs")) c.runs = j.at("runs").get<std::size_t>();
        if (j.contains("serial")) c.serial = j.at("serial").get<bool>();
        if (j.contains("peepholes")) c.peepholes = j.at("peepholes").get<bool>();
        return c;
    }

    std::size_t effective_threads() const { return serial ? 1 : std::max<std::size_t>(1, train.threads); }

    Architecture architecture(std::size_t classes) const {
        Architecture a;
        if (preset == "desk") a = Architecture::desk(classes);
        else if (preset == "gradcheck") a = Architecture::gradcheck_preset();
        else if (preset == "standard") a = Architecture::standard(classes);
        else throw ParamError("unknown preset \"" + preset + "\"");
        a.classes = classes;
        a.window = train.window;
        a.spectral_depth = train.pca_dims;
        a.peepholes = peepholes;
        return a;
    }
};

// Deterministic preprocessing: PCA on the whole cube, patches around every
// labeled pixel, per-class split from the derived split seed.
struct PreparedData {
    PatchSet train_set;
    PatchSet test_set;
    std::size_t classes = 0;
};

inline PreparedData prepare_data(const HsiCube& cube, const LabelMap& labels,
                                 std::size_t window, std::size_t pca_dims,
                                 Real train_fraction, std::uint64_t split_seed) {
    const PcaModel pca = pca_fit(cube, pca_dims);
    const HsiCube reduced = pca_apply(pca, cube);
    const PatchSet all = extract_patches(reduced, labels, window);
    Rng split_rng(split_seed);
    auto [train_set, test_set] = stratified_split(all, train_fraction, split_rng);
    PreparedData out;
    out.train_set = std::move(train_set);
    out.test_set = std::move(test_set);
    out.classes = labels.class_count;
    return out;
}

inline ConfusionMatrix evaluate_on(const HssnbModel& model, const PatchSet& set,
                                   std::size_t threads) {
    ConfusionMatrix cm(set.class_count());
    const auto predictions = predict(model, set, threads);
    for (std::size_t i = 0; i < set.count(); ++i)
        cm.accumulate(set.label_index(i) + 1, predictions[i]);
    return cm;
}

inline void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write history: " + path);
    out << "epoch,loss,train_accuracy\n";
    for (const auto& e : history) {
        std::ostringstream row;
        row.precision(17);
        row << e.epoch << "," << e.loss << "," << e.train_accuracy << "\n";
        out << row.str();
    }
}

struct TrainOutcome {
    std::vector<EpochStats> history;
    RunScores test_scores;
    std::string checkpoint_path;
};

// Full training run: prepare, train, score on the held-out split, then
// write checkpoint.hssnb, history.csv and metrics.json into out_dir.
inline TrainOutcome run_training(const ExperimentConfig& cfg) {
    auto [cube, labels] = load_dataset(cfg.dataset_dir);
    const Architecture arch = cfg.architecture(labels.class_count);

    TrainConfig tc = cfg.train;
    tc.threads = cfg.effective_threads();

    PreparedData data = prepare_data(cube, labels, arch.window, arch.spectral_depth,
                                     tc.train_fraction, tc.split_seed());

    Rng init_rng(tc.init_seed());
    HssnbModel model = build_model(arch, init_rng);

    TrainOutcome outcome;
    outcome.history = train(model, data.train_set, tc);

    const ConfusionMatrix cm = evaluate_on(model, data.test_set, tc.threads);
    outcome.test_scores = score(cm);

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    outcome.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.hssnb").string();
    save_checkpoint(outcome.checkpoint_path, model, tc.seed, tc.epochs);
    write_history_csv((fs::path(cfg.out_dir) / "history.csv").string(), outcome.history);
    {
        const MetricsReport rep = summarize_runs({outcome.test_scores});
        std::ofstream out(fs::path(cfg.out_dir) / "metrics.json");
        if (!out) throw DataError("cannot write metrics.json in " + cfg.out_dir);
        out << report_json(rep).dump(2) << "\n";
    }
    return outcome;
}

// Recomputes the test split from `split_base_seed` (the experiment seed, not
// the derived value) and scores the checkpointed model on it.
inline RunScores evaluate_checkpoint(const Checkpoint& ck, const std::string& dataset_dir,
                                     std::uint64_t split_base_seed, Real train_fraction,
                                     std::size_t threads) {
    auto [cube, labels] = load_dataset(dataset_dir);
    if (labels.class_count != ck.model.arch.classes)
        throw DataError("checkpoint expects " + std::to_string(ck.model.arch.classes) +
                        " classes, dataset has " + std::to_string(labels.class_count));
    if (cube.bands < ck.model.arch.spectral_depth)
        throw DataError("dataset has fewer bands than the checkpoint's spectral depth");

    TrainConfig seed_helper;
    seed_helper.seed = split_base_seed;
    PreparedData data = prepare_data(cube, labels, ck.model.arch.window,
                                     ck.model.arch.spectral_depth, train_fraction,
                                     seed_helper.split_seed());
    return score(evaluate_on(ck.model, data.test_set, threads));
}

// Predicts every labeled pixel and renders the classification map
// (unlabeled pixels stay black).
inline void write_classification_map(const Checkpoint& ck, const std::string& dataset_dir,
                                     const std::string& out_image, std::size_t threads) {
    auto [cube, labels] = load_dataset(dataset_dir);
    if (labels.class_count != ck.model.arch.classes)
        throw DataError("checkpoint expects " + std::to_string(ck.model.arch.classes) +
                        " classes, dataset has " + std::to_string(labels.class_count));

    const PcaModel pca = pca_fit(cube, ck.model.arch.spectral_depth);
    const HsiCube reduced = pca_apply(pca, cube);
    const PatchSet all = extract_patches(reduced, labels, ck.model.arch.window);
    const auto predictions = predict(ck.model, all, threads);

    LabelMap predicted;
    predicted.width = labels.width;
    predicted.height = labels.height;
    predicted.class_count = labels.class_count;
    predicted.labels.assign(labels.width * labels.height, 0);
    for (std::size_t i = 0; i < all.count(); ++i) {
        const auto [r, c] = all.coords[i];
        predicted.label(r, c) = predictions[i];
    }
    write_label_map(out_image, predicted);
}

// OA per window size over the same dataset; failures are reported per row
// and the sweep continues.
struct SweepRow {
    std::size_t window = 0;
    bool ok = false;
    double overall_accuracy = 0;
    std::string error;
};

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
    std::vector<SweepRow> rows;
    for (const std::size_t w : cfg.windows) {
        SweepRow row;
        row.window = w;
        try {
            ExperimentConfig one = cfg;
            one.train.window = w;
            namespace fs = std::filesystem;
            one.out_dir = (fs::path(cfg.out_dir) / ("window_" + std::to_string(w))).string();
            const TrainOutcome outcome = run_training(one);
            row.ok = true;
            row.overall_accuracy = outcome.test_scores.overall_accuracy;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace hssnb

#endif  // HSSNB_EXPERIMENT_HPP
