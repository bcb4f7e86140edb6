#pragma once

#include <cstdint>
#include <vector>

#include "fpt/model.hpp"

namespace fpt::analysis {

// Layer-wise pairwise token cosine similarity over a batch; 20 histogram
// bins on [-1, 1]. Entry 0 describes the embedding output, then one entry
// per block.
struct SimilarityProfile {
    std::vector<double> layer_means;
    std::vector<std::vector<long>> histograms;
    std::vector<long> pair_counts;
};

SimilarityProfile token_similarity_profile(const Model& model, const Batch& batch,
                                           int pca_rank = 0);

// Frozen tensors of dst become alpha * pretrained + (1 - alpha) * random;
// trainable tensors stay untouched.
void mix_weights(BackboneState& dst, const BackboneState& pretrained,
                 const BackboneState& random, double alpha);

struct PcaOptimalityReport {
    std::vector<double> eigenvalues;
    double analytic_objective = 0.0;
    double eigen_tail_sum = 0.0;   // sum of lambda_k for k > m
    double identity_gap = 0.0;     // |analytic - tail|
    std::vector<double> descent_objectives;
    std::vector<double> descent_gaps;  // relative to the analytic optimum
    int good_starts = 0;               // gap < 1e-3
    bool degenerate = false;           // near-equal eigenvalues: optimum non-unique
};

PcaOptimalityReport verify_pca_optimality(int d, int n, int m, std::uint64_t seed, int starts = 10,
                               int iters = 4000);

struct JacobianBoundReport {
    double jacobian_norm = 0.0;
    double bound_strict = 0.0;   // without the additive token-count term
    double bound_relaxed = 0.0;  // bound_strict + N (token count)
    bool violates_strict = false;
    bool violates_relaxed = false;
};

JacobianBoundReport verify_jacobian_bound(int n, int d, std::uint64_t seed, double a_scale = 0.1);

struct ConvergenceReport {
    std::vector<int> ns;
    std::vector<double> mean_deviation;  // infinity norm, averaged over trials
    double slope = 0.0;
    double intercept = 0.0;
    double psi_over_sqrt_d = 0.0;   // correction-term diagnostic at this d
    double psi_over_sqrt_2d = 0.0;  // same formula at 2d (shrinks)
};

ConvergenceReport verify_convergence_rate(const std::vector<int>& ns, int d,
                                          std::uint64_t seed, int trials = 50,
                                          double noise = 1.0);

// Minimum eigenvalue of (1/N) sum g_i g_i^T for row-major features [n, d].
double conditioning_sigma_min(const std::vector<double>& features, int n, int d);

// Mean-pooled last-block token per batch row: the feature map the probe
// feeds into conditioning_sigma_min.
std::vector<double> model_feature_maps(const Model& model, const Batch& batch);

}  // namespace fpt::analysis
