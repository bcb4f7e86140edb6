#include "fpt/adapters.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace fpt {

int AdapterBundle::temporal_rank(int d_model) const {
    return cfg.temporal_rank > 0 ? cfg.temporal_rank : std::max(1, d_model / 4);
}

int AdapterBundle::channel_rank() const {
    return cfg.channel_rank > 0 ? cfg.channel_rank : std::max(1, cfg.channels / 4);
}

AdapterBundle AdapterBundle::init(const BackboneConfig& bb, const AdapterConfig& cfg,
                                  int num_patches, std::uint64_t seed) {
    if (cfg.freq_prompts < 1)
        throw std::invalid_argument("adapters: freq_prompts must be >= 1");
    if (num_patches + cfg.freq_prompts > bb.max_tokens)
        throw std::invalid_argument("adapters: " + std::to_string(num_patches) + " patches + " +
                                    std::to_string(cfg.freq_prompts) +
                                    " prompts exceed max_tokens " +
                                    std::to_string(bb.max_tokens));
    if (cfg.channels < 1) throw std::invalid_argument("adapters: channels must be >= 1");

    AdapterBundle b;
    b.cfg = cfg;
    std::mt19937_64 rng(seed);
    const int d = bb.d_model;
    const int r_t = b.temporal_rank(d);
    const int r_c = b.channel_rank();
    const int m = cfg.channels;
    const int in_bins = num_patches / 2 + 1;
    const int out_bins = cfg.freq_prompts / 2 + 1;
    const double w_std = 0.02;

    for (int l = 0; l < bb.num_layers; ++l) {
        TemporalAdapter t;
        t.down_w = Tensor::randn({d, r_t}, rng, w_std);
        t.down_b = Tensor::zeros({r_t});
        t.up_w = Tensor::zeros({r_t, d});
        t.up_b = Tensor::zeros({d});
        t.gate = Tensor::zeros({1});
        b.temporal.push_back(t);

        ChannelAdapter c;
        c.down_w = Tensor::randn({r_c, m}, rng, w_std);
        c.mid_w = Tensor::randn({d, d}, rng, w_std);
        c.mid_b = Tensor::zeros({d});
        c.up_w = Tensor::zeros({m, r_c});
        c.gate = Tensor::zeros({1});
        b.channel.push_back(c);

        FrequencyAdapter f;
        f.wl_re = Tensor::randn({in_bins, out_bins}, rng, w_std);
        f.wl_im = Tensor::randn({in_bins, out_bins}, rng, w_std);
        f.emb_w = Tensor::randn({bb.patch_len, d}, rng, w_std);
        f.emb_b = Tensor::zeros({d});
        f.gate = Tensor::zeros({1});
        f.rho = Tensor::zeros({1});
        b.frequency.push_back(f);
    }

    auto put = [&](const std::string& name, const TensorPtr& t) {
        t->requires_grad = true;
        b.registry.push_back({name, t, true});
    };
    for (int l = 0; l < bb.num_layers; ++l) {
        const std::string lp = "h" + std::to_string(l) + ".";
        auto& t = b.temporal[l];
        put(lp + "temporal.down_w", t.down_w);
        put(lp + "temporal.down_b", t.down_b);
        put(lp + "temporal.up_w", t.up_w);
        put(lp + "temporal.up_b", t.up_b);
        put(lp + "temporal.gate", t.gate);
        auto& c = b.channel[l];
        put(lp + "channel.down_w", c.down_w);
        put(lp + "channel.mid_w", c.mid_w);
        put(lp + "channel.mid_b", c.mid_b);
        put(lp + "channel.up_w", c.up_w);
        put(lp + "channel.gate", c.gate);
        auto& f = b.frequency[l];
        put(lp + "frequency.wl_re", f.wl_re);
        put(lp + "frequency.wl_im", f.wl_im);
        put(lp + "frequency.emb_w", f.emb_w);
        put(lp + "frequency.emb_b", f.emb_b);
        put(lp + "frequency.gate", f.gate);
        put(lp + "frequency.rho", f.rho);
    }
    return b;
}

double gate_value(double g, double lambda) {
    const double x = lambda * g;
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

TensorPtr gate_tensor(Graph& g, const TensorPtr& gate, double lambda) {
    return g.sigmoid(g.scale(gate, lambda));
}

}  // namespace

TensorPtr temporal_adapter_delta(Graph& g, const TensorPtr& tokens, const TemporalAdapter& a,
                                 double lambda) {
    auto h = g.gelu(g.add(g.matmul(tokens, a.down_w), a.down_b));
    auto up = g.add(g.matmul(h, a.up_w), a.up_b);
    return g.mul(up, gate_tensor(g, a.gate, lambda));
}

TensorPtr channel_adapter_delta(Graph& g, const TensorPtr& tokens, int channels,
                                const ChannelAdapter& a, double lambda) {
    if (tokens->shape.size() != 3)
        throw std::invalid_argument("channel adapter: tokens must be [rows, T, D]");
    const int rows = tokens->shape[0];
    const int t = tokens->shape[1];
    const int d = tokens->shape[2];
    if (rows % channels != 0)
        throw std::invalid_argument("channel adapter: batch of " + std::to_string(rows) +
                                    " rows is not divisible by " + std::to_string(channels) +
                                    " channels");
    const int samples = rows / channels;
    // [B*M, T, D] -> [B, M, T, D] -> [B, T, M, D]
    auto grouped = g.transpose(g.reshape(tokens, {samples, channels, t, d}), 1, 2);
    auto down = g.gelu(g.matmul(a.down_w, grouped));            // [B, T, r_c, D]
    auto mid = g.gelu(g.add(g.matmul(down, a.mid_w), a.mid_b)); // [B, T, r_c, D]
    auto up = g.matmul(a.up_w, mid);                            // [B, T, M, D]
    auto back = g.reshape(g.transpose(up, 1, 2), {rows, t, d});
    return g.mul(back, gate_tensor(g, a.gate, lambda));
}

TensorPtr apply_temporal_adapter(Graph& g, const TensorPtr& tokens, const TemporalAdapter& a,
                                 double lambda) {
    return g.add(tokens, temporal_adapter_delta(g, tokens, a, lambda));
}

TensorPtr apply_channel_adapter(Graph& g, const TensorPtr& tokens, int channels,
                                const ChannelAdapter& a, double lambda) {
    return g.add(tokens, channel_adapter_delta(g, tokens, channels, a, lambda));
}

TensorPtr frequency_prompts(Graph& g, const TensorPtr& patches, const FrequencyAdapter& a,
                            int freq_prompts) {
    if (patches->shape.size() != 3)
        throw std::invalid_argument("frequency adapter: patches must be [B, N, P]");
    // FFT across the patch index axis: [B, N, P] -> [B, P, N] -> bins
    auto by_pos = g.transpose(patches, 1, 2);
    auto [re, im] = g.rfft(by_pos);
    // complex projection (re + i im)(W_re + i W_im)
    auto pre = g.sub(g.matmul(re, a.wl_re), g.matmul(im, a.wl_im));
    auto pim = g.add(g.matmul(re, a.wl_im), g.matmul(im, a.wl_re));
    auto slots = g.irfft(pre, pim, freq_prompts);  // [B, P, F]
    auto by_slot = g.transpose(slots, 1, 2);       // [B, F, P]
    return g.add(g.matmul(by_slot, a.emb_w), a.emb_b);  // [B, F, D]
}

TensorPtr attach_prompts(Graph& g, const TensorPtr& tokens, const TensorPtr& prompts,
                         int max_tokens) {
    const int axis = static_cast<int>(tokens->shape.size()) - 2;
    const int total = tokens->shape[axis] + prompts->shape[axis];
    if (total > max_tokens)
        throw std::invalid_argument("attach_prompts: " + std::to_string(total) +
                                    " tokens exceed max_tokens " + std::to_string(max_tokens));
    return g.concat({tokens, prompts}, axis);
}

std::string report_gate_coefficients(const AdapterBundle& bundle) {
    nlohmann::json out;
    auto coeffs = [&](auto getter) {
        std::vector<int> v;
        for (std::size_t l = 0; l < bundle.temporal.size(); ++l)
            v.push_back(gate_value(getter(l), bundle.cfg.gate_lambda) >= 0.5 ? 1 : 0);
        return v;
    };
    out["temporal"] = coeffs([&](std::size_t l) { return bundle.temporal[l].gate->value[0]; });
    out["channel"] = coeffs([&](std::size_t l) { return bundle.channel[l].gate->value[0]; });
    out["frequency"] = coeffs([&](std::size_t l) { return bundle.frequency[l].gate->value[0]; });
    return out.dump(2);
}

}  // namespace fpt
