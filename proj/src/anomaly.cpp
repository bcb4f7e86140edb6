#include "fpt/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fpt {

namespace {
constexpr double kKlFloor = 1e-12;

double token_distance(int i, int j, bool squared) {
    const double d = std::fabs(static_cast<double>(i - j));
    return squared ? d * d : d;
}
}  // namespace

AnomalyAdapterParams AnomalyAdapterParams::init(int num_layers, int num_tokens, bool squared,
                                                std::uint64_t seed) {
    (void)seed;
    AnomalyAdapterParams p;
    p.squared_distance = squared;
    // softplus(raw) == 1 at this raw value
    const double raw0 = std::log(std::exp(1.0) - 1.0);
    for (int l = 0; l < num_layers; ++l) {
        auto t = Tensor::full({num_tokens}, raw0, true);
        p.sigma_raw.push_back(t);
        p.registry.push_back({"h" + std::to_string(l) + ".anomaly.sigma_raw", t, true});
    }
    return p;
}

std::vector<double> symmetrize_attention_raw(const std::vector<double>& a, int t) {
    if (a.size() != static_cast<std::size_t>(t) * t)
        throw std::invalid_argument("symmetrize_attention: matrix is not " + std::to_string(t) +
                                    "x" + std::to_string(t));
    std::vector<double> out(a.size());
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) {
            const double v = 0.5 * (a[static_cast<std::size_t>(i) * t + j] +
                                    a[static_cast<std::size_t>(j) * t + i]);
            out[static_cast<std::size_t>(i) * t + j] =
                (i == j) ? v - 0.5 * a[static_cast<std::size_t>(i) * t + i] : v;
        }
    return out;
}

std::vector<double> symmetrize_attention(const std::vector<double>& a, int t) {
    std::vector<double> out = symmetrize_attention_raw(a, t);
    for (int i = 0; i < t; ++i) {
        double s = 0.0;
        for (int j = 0; j < t; ++j) s += out[static_cast<std::size_t>(i) * t + j];
        if (s <= 0.0) throw std::domain_error("symmetrize_attention: nonpositive row sum");
        for (int j = 0; j < t; ++j) out[static_cast<std::size_t>(i) * t + j] /= s;
    }
    return out;
}

std::vector<double> gaussian_prior(int t, const std::vector<double>& sigma, bool squared) {
    if (sigma.size() != static_cast<std::size_t>(t))
        throw std::invalid_argument("gaussian_prior: need one sigma per token");
    std::vector<double> out(static_cast<std::size_t>(t) * t);
    for (int i = 0; i < t; ++i) {
        const double s = sigma[i];
        if (!(s > 0.0)) throw std::invalid_argument("gaussian_prior: sigma must be positive");
        const double prefactor = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * s);
        double row_sum = 0.0;
        for (int j = 0; j < t; ++j) {
            const double w = prefactor * std::exp(-token_distance(i, j, squared) / (2.0 * s * s));
            out[static_cast<std::size_t>(i) * t + j] = w;
            row_sum += w;
        }
        for (int j = 0; j < t; ++j) out[static_cast<std::size_t>(i) * t + j] /= row_sum;
    }
    return out;
}

std::vector<double> discrepancy(const std::vector<double>& ahat,
                                const std::vector<double>& prior, int t, bool symmetric_kl) {
    if (ahat.size() != prior.size() || ahat.size() != static_cast<std::size_t>(t) * t)
        throw std::invalid_argument("discrepancy: row shapes disagree");
    std::vector<double> kl(t, 0.0);
    for (int i = 0; i < t; ++i) {
        double forward = 0.0, backward = 0.0;
        for (int j = 0; j < t; ++j) {
            const double p = std::max(ahat[static_cast<std::size_t>(i) * t + j], kKlFloor);
            const double q = std::max(prior[static_cast<std::size_t>(i) * t + j], kKlFloor);
            forward += p * std::log(p / q);
            if (symmetric_kl) backward += q * std::log(q / p);
        }
        kl[i] = symmetric_kl ? 0.5 * (forward + backward) : forward;
    }
    return kl;
}

TensorPtr discrepancy_loss(Graph& g, const TensorPtr& ahat_const, const TensorPtr& sigma_raw,
                           bool squared) {
    if (ahat_const->shape.size() != 2 || ahat_const->shape[0] != ahat_const->shape[1])
        throw std::invalid_argument("discrepancy_loss: attention must be square");
    const int t = ahat_const->shape[0];
    if (sigma_raw->numel() != static_cast<std::size_t>(t))
        throw std::invalid_argument("discrepancy_loss: sigma length mismatch");

    std::vector<double> dist(static_cast<std::size_t>(t) * t);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j)
            dist[static_cast<std::size_t>(i) * t + j] = token_distance(i, j, squared);
    auto dmat = Tensor::from({t, t}, std::move(dist), false);

    auto sigma = g.softplus(sigma_raw);
    // 1 / (2 sigma_i^2), broadcast over row i via the symmetric-distance trick
    auto inv2s2 = g.scale(g.exp(g.scale(g.log(sigma), -2.0)), 0.5);
    auto logits = g.scale(g.transpose(g.mul(dmat, inv2s2), 0, 1), -1.0);
    auto prior = g.softmax_rows(logits);
    auto logq = g.log(g.clamp_min(prior, kKlFloor));

    // KL = sum_ij ahat*(log ahat - log q) / t; the entropy part is constant
    double entropy_part = 0.0;
    for (double v : ahat_const->value) {
        const double p = std::max(v, kKlFloor);
        entropy_part += p * std::log(p);
    }
    entropy_part /= static_cast<double>(t);
    auto cross = g.scale(g.sum(g.mul(logq, ahat_const)), -1.0 / static_cast<double>(t));
    return g.affine(cross, 1.0, entropy_part);
}

std::vector<double> anomaly_score(const std::vector<double>& recon_err,
                                  const std::vector<double>& disc, ScoreMode mode) {
    if (mode == ScoreMode::reconstruction_only) return recon_err;
    if (recon_err.size() != disc.size())
        throw std::invalid_argument("anomaly_score: length mismatch " +
                                    std::to_string(recon_err.size()) + " vs " +
                                    std::to_string(disc.size()));
    const std::size_t n = recon_err.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : disc) mx = std::max(mx, v);
    std::vector<double> w(n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(disc[i] - mx);
        z += w[i];
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = recon_err[i] * (w[i] / z) * static_cast<double>(n);
    return out;
}

double detection_threshold(std::vector<double> scores, double ratio) {
    if (scores.empty()) throw std::invalid_argument("detection_threshold: empty scores");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("detection_threshold: ratio must lie in (0,1)");
    std::sort(scores.begin(), scores.end());
    const std::size_t n = scores.size();
    std::size_t k = static_cast<std::size_t>(std::floor((1.0 - ratio) * static_cast<double>(n)));
    k = std::min(std::max<std::size_t>(k, 1), n);
    return scores[k - 1];
}

std::vector<int> threshold_and_detect(const std::vector<double>& scores, double threshold) {
    std::vector<int> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) labels[i] = scores[i] > threshold ? 1 : 0;
    return labels;
}

}  // namespace fpt
