#pragma once

#include <cstdint>
#include <vector>

#include "fpt/backbone.hpp"
#include "fpt/graph.hpp"

namespace fpt {

// Learnable Gaussian-kernel prior over token distances, one sigma vector per
// layer (positivity via softplus reparameterization).
struct AnomalyAdapterParams {
    std::vector<TensorPtr> sigma_raw;  // per layer, [T]
    bool squared_distance = false;     // dis(i,j) = |i-j|^2 instead of |i-j|
    std::vector<Param> registry;

    static AnomalyAdapterParams init(int num_layers, int num_tokens, bool squared,
                                     std::uint64_t seed);
};

// (A + A^T - diag(A)) / 2, as written (symmetric off-diagonal).
std::vector<double> symmetrize_attention_raw(const std::vector<double>& a, int t);
// Same, with rows renormalized to sum 1 so KL sees distributions.
std::vector<double> symmetrize_attention(const std::vector<double>& a, int t);

// Row-normalized Gaussian kernel rows over |i-j| (or |i-j|^2) with per-row
// scale sigma[i] > 0.
std::vector<double> gaussian_prior(int t, const std::vector<double>& sigma, bool squared);

// Per-token KL(ahat_i || prior_i); cells floored at 1e-12. The symmetrized
// variant averages both directions.
std::vector<double> discrepancy(const std::vector<double>& ahat,
                                const std::vector<double>& prior, int t,
                                bool symmetric_kl = false);

// Differentiable mean KL(ahat || prior(sigma)) for one layer; ahat enters as
// a constant (stop-gradient), sigma_raw learns to fit the observed pattern.
TensorPtr discrepancy_loss(Graph& g, const TensorPtr& ahat_const, const TensorPtr& sigma_raw,
                           bool squared);

enum class ScoreMode { reconstruction_only, combined };

// combined: recon * softmax_over_time(discrepancy) * L; reconstruction_only
// reproduces the frozen-variant protocol.
std::vector<double> anomaly_score(const std::vector<double>& recon_err,
                                  const std::vector<double>& disc, ScoreMode mode);

// (1 - ratio)-quantile threshold over the pooled score distribution.
double detection_threshold(std::vector<double> scores, double ratio);
std::vector<int> threshold_and_detect(const std::vector<double>& scores, double threshold);

}  // namespace fpt
