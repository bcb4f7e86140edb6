#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fpt/data.hpp"
#include "fpt/model.hpp"
#include "fpt/training.hpp"

namespace fpt {

struct DataConfig {
    std::string source = "synthetic";  // synthetic | csv
    std::string csv_path;
    data::SyntheticSpec synthetic;
    data::SplitFractions split;
    std::uint64_t seed = 1;
    double anomaly_ratio = 0.01;  // detection-threshold quantile mass
};

// Everything one run needs; serializes losslessly to JSON and hashes to a
// stable run fingerprint.
struct ExperimentConfig {
    TaskSpec task;
    DataConfig dataset;
    std::optional<DataConfig> zero_shot_target;
    BackboneConfig backbone;
    PatchConfig patching;
    AdapterConfig adapters;
    double anomaly_kappa = 0.1;
    bool anomaly_squared_distance = false;
    std::string checkpoint;  // optional pretrained import
    TrainConfig train;
    Variant variant = Variant::frozen;
    std::string out_dir = "runs/out";
    std::uint64_t seed = 7;

    ModelConfig model_config(int channels) const;
};

ExperimentConfig experiment_from_json(const std::string& text);
std::string experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::string& path);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace fpt
