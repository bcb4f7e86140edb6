// Command-line front end: train / eval / zero-shot / sweep / analyze /
// synth / inspect-checkpoint. Exit codes: 0 success, 1 run failure, 2 usage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fpt/backbone.hpp"
#include "fpt/data.hpp"
#include "fpt/runner.hpp"
#include "json.hpp"

using namespace fpt;

namespace {

std::vector<double> parse_fraction_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

void write_failure(const std::string& out_dir, const std::string& stage,
                   const std::string& what) {
    try {
        std::filesystem::create_directories(out_dir);
        nlohmann::json j;
        j["stage"] = stage;
        j["error"] = what;
        std::ofstream f(std::filesystem::path(out_dir) / "failure.json");
        f << j.dump(2) << '\n';
    } catch (...) {
    }
}

ExperimentConfig load_with_overrides(const std::string& config_path,
                                     const std::string& variant, double fraction,
                                     long long seed, const std::string& out) {
    ExperimentConfig cfg = load_experiment(config_path);
    if (!variant.empty()) cfg.variant = variant_from_string(variant);
    if (fraction > 0.0) cfg.train.few_shot_fraction = fraction;
    if (seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.train.seed = static_cast<std::uint64_t>(seed);
        cfg.dataset.seed = static_cast<std::uint64_t>(seed);
    }
    if (!out.empty()) cfg.out_dir = out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frozen-backbone time-series engine"};
    app.require_subcommand(1);

    std::string config_path, variant, out_dir, probe, fractions_text, synth_kind, path;
    double fraction = -1.0;
    long long seed = -1;
    int synth_length = 3000, synth_channels = 1;

    auto* cmd_train = app.add_subcommand("train", "train a model from a config");
    cmd_train->add_option("--config", config_path)->required();
    cmd_train->add_option("--variant", variant);
    cmd_train->add_option("--fraction", fraction);
    cmd_train->add_option("--seed", seed);
    cmd_train->add_option("--out", out_dir);

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained run on the test split");
    cmd_eval->add_option("--config", config_path)->required();
    cmd_eval->add_option("--checkpoint", path);
    cmd_eval->add_option("--seed", seed);
    cmd_eval->add_option("--out", out_dir);

    auto* cmd_zero = app.add_subcommand("zero-shot", "evaluate on a target dataset with no updates");
    cmd_zero->add_option("--config", config_path)->required();
    cmd_zero->add_option("--variant", variant);
    cmd_zero->add_option("--seed", seed);
    cmd_zero->add_option("--out", out_dir);

    auto* cmd_sweep = app.add_subcommand("sweep", "train across training-fraction percentages");
    cmd_sweep->add_option("--config", config_path)->required();
    cmd_sweep->add_option("--fractions", fractions_text)->required();
    cmd_sweep->add_option("--variant", variant);
    cmd_sweep->add_option("--seed", seed);
    cmd_sweep->add_option("--out", out_dir);

    auto* cmd_analyze = app.add_subcommand("analyze", "numerical analysis probes");
    cmd_analyze
        ->add_option("--probe", probe)
        ->required()
        ->check(CLI::IsMember({"similarity", "pca-sub", "mix", "theorem1", "lemma-bound",
                               "convergence", "conditioning"}));
    cmd_analyze->add_option("--config", config_path);
    cmd_analyze->add_option("--seed", seed);
    cmd_analyze->add_option("--out", out_dir);

    auto* cmd_synth = app.add_subcommand("synth", "emit a synthetic dataset CSV");
    cmd_synth->add_option("--kind", synth_kind)->required();
    cmd_synth->add_option("--length", synth_length);
    cmd_synth->add_option("--channels", synth_channels);
    cmd_synth->add_option("--seed", seed);
    cmd_synth->add_option("--out", out_dir)->required();

    auto* cmd_inspect = app.add_subcommand("inspect-checkpoint", "print a checkpoint manifest");
    cmd_inspect->add_option("--path", path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*cmd_train) {
            auto cfg = load_with_overrides(config_path, variant, fraction, seed, out_dir);
            try {
                auto r = run_experiment(cfg);
                std::cout << r.metrics_json << '\n';
            } catch (const std::exception& e) {
                write_failure(cfg.out_dir, "train", e.what());
                throw;
            }
        } else if (*cmd_eval) {
            auto cfg = load_with_overrides(config_path, "", -1.0, seed, out_dir);
            try {
                auto r = run_eval(cfg, path);
                std::cout << r.metrics_json << '\n';
            } catch (const std::exception& e) {
                write_failure(cfg.out_dir, "eval", e.what());
                throw;
            }
        } else if (*cmd_zero) {
            auto cfg = load_with_overrides(config_path, variant, -1.0, seed, out_dir);
            try {
                auto r = run_zero_shot(cfg);
                std::cout << r.metrics_json << '\n';
            } catch (const std::exception& e) {
                write_failure(cfg.out_dir, "zero-shot", e.what());
                throw;
            }
        } else if (*cmd_sweep) {
            auto cfg = load_with_overrides(config_path, variant, -1.0, seed, out_dir);
            try {
                auto fr = parse_fraction_list(fractions_text);
                auto r = run_sweep(cfg, fr);
                std::cout << r.metrics_json << '\n';
            } catch (const std::exception& e) {
                write_failure(cfg.out_dir, "sweep", e.what());
                throw;
            }
        } else if (*cmd_analyze) {
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = load_experiment(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.seed;
            try {
                auto r = run_analysis(cfg, probe, s);
                std::cout << r.metrics_json << '\n';
            } catch (const std::exception& e) {
                write_failure(cfg.out_dir, "analyze", e.what());
                throw;
            }
        } else if (*cmd_synth) {
            data::SyntheticSpec spec;
            spec.kind = synth_kind;
            spec.length = synth_length;
            spec.channels = synth_channels;
            auto ds = data::generate_synthetic(spec,
                                               seed >= 0 ? static_cast<std::uint64_t>(seed) : 1);
            data::write_csv(ds, out_dir);
            std::cout << "wrote " << out_dir << '\n';
        } else if (*cmd_inspect) {
            std::string ckpt = path;
            if (std::filesystem::exists(std::filesystem::path(ckpt) / "checkpoint"))
                ckpt = (std::filesystem::path(ckpt) / "checkpoint").string();
            const auto manifest = nlohmann::json::parse(read_manifest(ckpt));
            std::size_t total = 0, tensors = 0;
            for (const auto& t : manifest.at("tensors")) {
                ++tensors;
                total += t.at("bytes").get<std::size_t>();
            }
            std::cout << "format " << manifest.at("format_version") << ", " << tensors
                      << " tensors, " << total << " bytes\n";
            std::cout << manifest.at("config").dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
