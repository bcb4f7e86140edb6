#include "fpt/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fpt {

void PatchConfig::validate() const {
    if (patch_len < 1 || patch_len > context_len)
        throw std::invalid_argument("patch config: need 1 <= patch_len <= context_len, got P=" +
                                    std::to_string(patch_len) + " L=" +
                                    std::to_string(context_len));
    if (stride < 1) throw std::invalid_argument("patch config: stride must be >= 1");
}

std::pair<std::vector<double>, NormStats> instance_normalize(std::span<const double> x,
                                                             double eps) {
    if (x.size() < 2)
        throw std::invalid_argument("instance_normalize: need at least 2 points, got " +
                                    std::to_string(x.size()));
    NormStats s;
    s.eps = eps;
    const double n = static_cast<double>(x.size());
    s.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x) var += (v - s.mean) * (v - s.mean);
    s.variance = var / n;
    const double denom = std::sqrt(s.variance + s.eps);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - s.mean) / denom;
    return {std::move(out), s};
}

std::vector<double> instance_denormalize(std::span<const double> y, const NormStats& s) {
    const double scale = std::sqrt(s.variance + s.eps);
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * scale + s.mean;
    return out;
}

std::vector<double> patch(std::span<const double> x, const PatchConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(x.size()) != cfg.context_len)
        throw std::invalid_argument("patch: series length " + std::to_string(x.size()) +
                                    " does not match context_len " +
                                    std::to_string(cfg.context_len));
    const int n = cfg.num_patches();
    std::vector<double> out(static_cast<std::size_t>(n) * cfg.patch_len);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < cfg.patch_len; ++j)
            out[static_cast<std::size_t>(i) * cfg.patch_len + j] = x[i * cfg.stride + j];
    return out;
}

SeriesBatch flatten_channels(const std::vector<std::vector<double>>& channels) {
    if (channels.empty()) throw std::invalid_argument("flatten_channels: no channels");
    const std::size_t L = channels[0].size();
    for (const auto& c : channels)
        if (c.size() != L)
            throw std::invalid_argument("flatten_channels: ragged channel lengths");
    SeriesBatch b;
    std::vector<double> data;
    data.reserve(channels.size() * L);
    for (std::size_t m = 0; m < channels.size(); ++m) {
        data.insert(data.end(), channels[m].begin(), channels[m].end());
        b.channel_index.push_back(static_cast<int>(m));
        b.stats.push_back(NormStats{});
    }
    b.values = Tensor::from({static_cast<int>(channels.size()), static_cast<int>(L)},
                            std::move(data));
    return b;
}

std::vector<std::vector<double>> regroup_channels(const SeriesBatch& batch, int L) {
    const int rows = batch.values->shape[0];
    int max_channel = 0;
    for (int c : batch.channel_index) max_channel = std::max(max_channel, c);
    std::vector<std::vector<double>> out(max_channel + 1);
    for (int r = 0; r < rows; ++r) {
        const auto begin = batch.values->value.begin() + static_cast<std::size_t>(r) * L;
        out[batch.channel_index[r]].assign(begin, begin + L);
    }
    return out;
}

std::vector<double> make_imputation_mask(int L, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("make_imputation_mask: ratio must lie in (0,1), got " +
                                    std::to_string(ratio));
    const int n_masked = static_cast<int>(std::lround(ratio * L));
    std::vector<int> idx(L);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> mask(L, 1.0);
    for (int i = 0; i < n_masked; ++i) mask[idx[i]] = 0.0;
    return mask;
}

}  // namespace fpt
