#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpt/backbone.hpp"
#include "fpt/graph.hpp"

namespace fpt {

struct TaskSpec {
    enum class Kind { long_forecast, short_forecast, imputation, classification, anomaly };
    Kind kind = Kind::long_forecast;
    int context_len = 96;
    int horizon = 0;      // forecasting
    int num_classes = 0;  // classification
    double mask_ratio = 0.25;  // imputation

    bool is_forecast() const {
        return kind == Kind::long_forecast || kind == Kind::short_forecast;
    }
    int output_dim() const;
    void validate() const;
};

TaskSpec::Kind task_kind_from_string(const std::string& s);
std::string task_kind_to_string(TaskSpec::Kind k);

// Flatten-project head over the last block's patch tokens.
struct Head {
    TensorPtr w, b;
    std::vector<Param> registry;

    static Head init(int in_dim, int out_dim, std::uint64_t seed);
};

// tokens [B, N, D] (already channel-grouped for classification) -> task output.
TensorPtr head_forward(Graph& g, const Head& head, const TensorPtr& tokens, int group = 1);

// MSE in normalized space.
TensorPtr mse_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target);

// MSE restricted to masked positions (mask: 1 = observed, 0 = masked);
// errors when nothing is masked.
TensorPtr masked_mse_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target,
                          const TensorPtr& mask);

// Lowest-index tie break.
int argmax_class(const std::vector<double>& logits);

}  // namespace fpt
