#pragma once

#include <string>
#include <vector>

#include "fpt/runconfig.hpp"

namespace fpt {

struct RunResult {
    std::string out_dir;
    std::string metrics_json;
    std::uint64_t config_fingerprint = 0;
};

// Full train/eval cycle into a self-describing run directory: resolved
// config + hash, metrics.json, prediction CSVs, gate report (adapter
// variant), training history and a summary table.
RunResult run_experiment(const ExperimentConfig& cfg);

// Evaluate a trained model (from cfg or an existing run checkpoint) on the
// test split without further updates.
RunResult run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_dir);

// Train on the source dataset (or load a checkpoint), then evaluate on the
// zero-shot target with the no-update contract enforced.
RunResult run_zero_shot(const ExperimentConfig& cfg);

// One run per training fraction; emits sweep.csv alongside the run dirs.
RunResult run_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions);

// Analysis probes: similarity | pca-sub | mix | theorem1 | lemma-bound |
// convergence | conditioning.
RunResult run_analysis(const ExperimentConfig& cfg, const std::string& probe,
                       std::uint64_t seed);

}  // namespace fpt
