#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fpt/tensor.hpp"

namespace fpt {

// Per-series normalization statistics (population variance).
struct NormStats {
    double mean = 0.0;
    double variance = 0.0;
    double eps = 1e-5;
};

struct PatchConfig {
    int patch_len = 16;
    int stride = 8;
    int context_len = 96;

    int num_patches() const { return (context_len - patch_len) / stride + 1; }
    void validate() const;
};

// A batch of univariate rows cut from a multivariate series. Row i came from
// original variable channel_index[i]; stats[i] were computed from that row's
// unmasked context. mask (optional) is 1 = observed, 0 = masked.
struct SeriesBatch {
    TensorPtr values;  // [B, L]
    std::vector<int> channel_index;
    std::vector<NormStats> stats;
    TensorPtr mask;  // null or [B, L]
};

// (x - mean) / sqrt(var + eps) with population variance; L >= 2 required.
std::pair<std::vector<double>, NormStats> instance_normalize(std::span<const double> x,
                                                             double eps = 1e-5);
std::vector<double> instance_denormalize(std::span<const double> y, const NormStats& s);

// patches[i][j] = x[i*stride + j], row-major [N, P].
std::vector<double> patch(std::span<const double> x, const PatchConfig& cfg);

// One batch row per variable of an [M][L] multivariate series.
SeriesBatch flatten_channels(const std::vector<std::vector<double>>& channels);
std::vector<std::vector<double>> regroup_channels(const SeriesBatch& batch, int L);

// Exactly round(ratio * L) positions set to 0 (= masked), deterministic in
// the seed; ratio must lie in (0,1).
std::vector<double> make_imputation_mask(int L, double ratio, std::uint64_t seed);

}  // namespace fpt
