// Command-line front end: synthesize datasets, train, evaluate, export
// classification maps, run the end-to-end gradient check and sweep window
// sizes. Every experiment is reproducible from its seed; --serial forces the
// bit-reproducible single-thread path.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hssnb/hssnb.hpp"

namespace {

using namespace hssnb;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Flags override config-file values: the file (if any) is applied to the
// bound variables before CLI11 parses the command line.
nlohmann::json load_config_json(int argc, char** argv) {
    std::string path;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) path = argv[i + 1];
        else if (arg.rfind("--config=", 0) == 0) path = arg.substr(9);
    }
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed config file " + path + ": " + e.what());
    }
    return j;
}

void parse_size(const std::string& text, std::size_t& w, std::size_t& h, std::size_t& b) {
    unsigned long long pw = 0, ph = 0, pb = 0;
    if (std::sscanf(text.c_str(), "%llux%llux%llu", &pw, &ph, &pb) != 3 || !pw || !ph || !pb)
        throw ParamError("--size expects WxHxB, e.g. 32x32x16, got \"" + text + "\"");
    w = pw;
    h = ph;
    b = pb;
}

void add_experiment_options(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its values");
    cmd->add_option("--preset", cfg.preset, "architecture preset: standard|desk|gradcheck");
    cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
    cmd->add_option("--batch", cfg.train.batch_size, "mini-batch size");
    cmd->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
    cmd->add_option("--train-fraction", cfg.train.train_fraction,
                    "per-class fraction that goes to the training split");
    cmd->add_option("--window", cfg.train.window, "spatial window size D (odd)");
    cmd->add_option("--pca", cfg.train.pca_dims, "spectral depth S after PCA");
    cmd->add_option("--seed", cfg.train.seed, "experiment seed");
    cmd->add_option("--threads", cfg.train.threads, "worker threads per batch");
    cmd->add_flag("--serial", cfg.serial, "single-thread, bit-reproducible mode");
    cmd->add_flag("--peepholes", cfg.peepholes, "enable LSTM peephole connections");
    cmd->add_option("--runs", cfg.runs, "repetitions for mean±std reporting");
}

void print_layer_table(const HssnbModel& model) {
    const auto chain = compute_shape_chain(model.arch);
    const auto counts = model.layer_parameter_counts();
    std::cout << "layer              output shape        parameters\n";
    std::cout << "input_1            " << shape_to_string(chain[0].second) << "\n";
    for (const auto& [name, count] : counts) {
        Shape shape;
        for (const auto& [cname, cshape] : chain)
            if (cname == name) shape = cshape;
        std::printf("%-18s %-19s %zu\n", name.c_str(), shape_to_string(shape).c_str(), count);
    }
    std::cout << "total trainable parameters: " << model.parameter_count() << "\n";
}

int cmd_synth(const std::string& out_dir, const std::string& size_text, std::size_t classes,
              double noise, std::uint64_t seed, const std::string& name) {
    std::size_t w, h, b;
    parse_size(size_text, w, h, b);
    Rng rng(seed);
    auto [cube, labels] = synth_generate(w, h, b, classes, Real(noise), rng);
    save_dataset(out_dir, cube, labels, name);
    std::cout << "wrote " << out_dir << ": " << w << "x" << h << "x" << b << ", " << classes
              << " classes, " << labels.labeled_count() << " labeled pixels\n";
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg) {
    const TrainOutcome outcome = run_training(cfg);
    const auto& last = outcome.history.back();
    std::cout << "trained " << outcome.history.size() << " epochs; final loss " << last.loss
              << ", train accuracy " << last.train_accuracy << "\n";
    const MetricsReport rep = summarize_runs({outcome.test_scores});
    std::cout << report_table(rep);
    std::cout << "kappa | aa | oa: " << report_line(rep) << "\n";
    std::cout << "checkpoint: " << outcome.checkpoint_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const ExperimentConfig& cfg,
             bool split_seed_given, std::uint64_t split_seed) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const std::uint64_t base = split_seed_given ? split_seed : ck.seed;
    std::vector<RunScores> runs;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, cfg.runs); ++r)
        runs.push_back(evaluate_checkpoint(ck, cfg.dataset_dir, base, cfg.train.train_fraction,
                                           cfg.effective_threads()));
    const MetricsReport rep = summarize_runs(runs);
    std::cout << report_table(rep);
    std::cout << "kappa | aa | oa: " << report_line(rep) << "\n";
    if (cfg.out_dir != ".") {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out_dir, ec);
        std::ofstream out(std::filesystem::path(cfg.out_dir) / "metrics.json");
        out << report_json(rep).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_map(const std::string& checkpoint_path, const ExperimentConfig& cfg,
            const std::string& out_image) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    write_classification_map(ck, cfg.dataset_dir, out_image, cfg.effective_threads());
    std::cout << "wrote " << out_image << "\n";
    return kExitOk;
}

int cmd_gradcheck(const ExperimentConfig& cfg, const std::string& peephole_mode, double eps,
                  double tolerance) {
    std::vector<bool> modes;
    if (peephole_mode == "off") modes = {false};
    else if (peephole_mode == "on") modes = {true};
    else if (peephole_mode == "both") modes = {false, true};
    else throw ParamError("--peephole-mode expects on|off|both");

    bool all_pass = true;
    for (const bool peepholes : modes) {
        Architecture arch;
        if (cfg.preset == "desk") arch = Architecture::desk(3);
        else arch = Architecture::gradcheck_preset();
        arch.peepholes = peepholes;

        Rng init_rng(cfg.train.init_seed());
        HssnbModel model = build_model(arch, init_rng);

        Rng data_rng(cfg.train.seed);
        Tensor patch({arch.window, arch.window, arch.spectral_depth});
        for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = data_rng.uniform(-1, 1);
        Tensor one_hot({arch.classes});
        one_hot[data_rng.below(arch.classes)] = 1;

        const GradCheckReport report =
            check_gradients(model, patch, one_hot, Real(eps), Real(tolerance));
        std::cout << "peepholes " << (peepholes ? "on" : "off") << ": max relative error "
                  << report.max_rel_error << " (" << report.worst_tensor << ")\n";
        for (const auto& t : report.tensors)
            if (!t.pass)
                std::cout << "  FAIL " << t.name << ": rel error " << t.max_rel_error
                          << " (analytic " << t.analytic_at_worst << ", numeric "
                          << t.numeric_at_worst << ")\n";
        all_pass = all_pass && report.pass;
    }
    if (!all_pass) {
        std::cout << "gradient check FAILED at tolerance " << tolerance << "\n";
        return kExitNumeric;
    }
    std::cout << "gradient check passed at tolerance " << tolerance << "\n";
    return kExitOk;
}

int cmd_sweep(ExperimentConfig cfg) {
    std::sort(cfg.windows.begin(), cfg.windows.end());
    const auto rows = run_sweep(cfg);
    std::cout << "window | oa\n";
    std::size_t failures = 0;
    for (const auto& row : rows) {
        if (row.ok) {
            std::printf("%6zu | %.4f\n", row.window, row.overall_accuracy);
        } else {
            std::printf("%6zu | ERROR: %s\n", row.window, row.error.c_str());
            ++failures;
        }
    }
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    std::ofstream csv(std::filesystem::path(cfg.out_dir) / "sweep.csv");
    csv << "window,oa\n";
    for (const auto& row : rows)
        if (row.ok) csv << row.window << "," << row.overall_accuracy << "\n";
    return failures == rows.size() && !rows.empty() ? kExitData : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace hssnb;

    CLI::App app{"HSSNB hyperspectral-image classifier (3-D/2-D CNN + bidirectional LSTM)"};
    app.require_subcommand(1);

    try {
        const nlohmann::json file_cfg = load_config_json(argc, argv);
        ExperimentConfig cfg = ExperimentConfig::from_json(file_cfg);
        std::string config_path;

        // synth
        auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
        std::string synth_out = file_cfg.value("out", std::string("."));
        std::string synth_size = file_cfg.value("size", std::string("32x32x16"));
        std::size_t synth_classes = file_cfg.value("classes", std::size_t(3));
        double synth_noise = file_cfg.value("noise", 0.05);
        std::uint64_t synth_seed = file_cfg.value("seed", std::uint64_t(42));
        std::string synth_name = file_cfg.value("name", std::string("synthetic"));
        synth->add_option("--config", config_path, "JSON config file");
        synth->add_option("--out", synth_out, "output dataset directory")->required();
        synth->add_option("--size", synth_size, "dimensions WxHxB");
        synth->add_option("--classes", synth_classes, "number of classes (>= 2)");
        synth->add_option("--noise", synth_noise, "Gaussian noise sigma");
        synth->add_option("--seed", synth_seed, "generator seed");
        synth->add_option("--name", synth_name, "dataset name for the header");

        // train
        auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint/history/metrics");
        ExperimentConfig train_cfg = cfg;
        add_experiment_options(train_cmd, train_cfg, config_path);
        train_cmd->add_option("--data", train_cfg.dataset_dir, "dataset directory")->required();
        train_cmd->add_option("--out", train_cfg.out_dir, "output directory");

        // eval
        auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
        ExperimentConfig eval_cfg = cfg;
        std::string eval_ckpt;
        std::uint64_t eval_split_seed = 0;
        add_experiment_options(eval_cmd, eval_cfg, config_path);
        eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
        eval_cmd->add_option("--data", eval_cfg.dataset_dir, "dataset directory")->required();
        auto* split_seed_opt = eval_cmd->add_option(
            "--split-seed", eval_split_seed,
            "experiment seed the split derives from (default: the checkpoint's)");
        eval_cmd->add_option("--out", eval_cfg.out_dir, "directory for metrics.json");

        // map
        auto* map_cmd = app.add_subcommand("map", "export a classification map (PPM P6)");
        ExperimentConfig map_cfg = cfg;
        std::string map_ckpt, map_out = "map.ppm";
        add_experiment_options(map_cmd, map_cfg, config_path);
        map_cmd->add_option("--checkpoint", map_ckpt, "checkpoint file")->required();
        map_cmd->add_option("--data", map_cfg.dataset_dir, "dataset directory")->required();
        map_cmd->add_option("--out", map_out, "output image path");

        // gradcheck
        auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
        ExperimentConfig grad_cfg = cfg;
        grad_cfg.preset = file_cfg.value("preset", std::string("gradcheck"));
        std::string peephole_mode = file_cfg.value("peephole-mode", std::string("both"));
        double grad_eps = file_cfg.value("eps", 1e-5);
        double grad_tol = file_cfg.value("tolerance", 1e-4);
        grad_cmd->add_option("--config", config_path, "JSON config file");
        grad_cmd->add_option("--preset", grad_cfg.preset, "architecture preset");
        grad_cmd->add_option("--seed", grad_cfg.train.seed, "seed for weights and probe data");
        grad_cmd->add_option("--eps", grad_eps, "finite-difference step");
        grad_cmd->add_option("--tolerance", grad_tol, "max allowed relative error");
        grad_cmd->add_option("--peephole-mode", peephole_mode, "on|off|both");

        // sweep
        auto* sweep_cmd = app.add_subcommand("sweep", "train/evaluate once per window size");
        ExperimentConfig sweep_cfg = cfg;
        add_experiment_options(sweep_cmd, sweep_cfg, config_path);
        sweep_cmd->add_option("--data", sweep_cfg.dataset_dir, "dataset directory")->required();
        sweep_cmd->add_option("--out", sweep_cfg.out_dir, "output directory");
        sweep_cmd->add_option("--windows", sweep_cfg.windows, "window sizes to sweep");

        // summary (layer table for a preset, handy sanity view)
        auto* summary_cmd = app.add_subcommand("summary", "print the layer/parameter table");
        ExperimentConfig summary_cfg = cfg;
        std::size_t summary_classes = file_cfg.value("classes", std::size_t(16));
        add_experiment_options(summary_cmd, summary_cfg, config_path);
        summary_cmd->add_option("--classes", summary_classes, "class count");

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? kExitOk : kExitUsage;
        }

        if (synth->parsed())
            return cmd_synth(synth_out, synth_size, synth_classes, synth_noise, synth_seed,
                             synth_name);
        if (train_cmd->parsed()) return cmd_train(train_cfg);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_cfg, split_seed_opt->count() > 0, eval_split_seed);
        if (map_cmd->parsed()) return cmd_map(map_ckpt, map_cfg, map_out);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_cfg, peephole_mode, grad_eps, grad_tol);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_cfg);
        if (summary_cmd->parsed()) {
            Rng rng(summary_cfg.train.init_seed());
            print_layer_table(build_model(summary_cfg.architecture(summary_classes), rng));
            return kExitOk;
        }
        return kExitUsage;
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
