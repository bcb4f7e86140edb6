#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpt/backbone.hpp"
#include "fpt/graph.hpp"
#include "fpt/tensor.hpp"

namespace fpt {

struct AdapterConfig {
    int freq_prompts = 4;       // F, prompt slots per layer
    double gate_lambda = 10.0;  // scale inside the sigmoid gate
    int temporal_rank = 0;      // 0 -> d_model / 4
    int channel_rank = 0;       // 0 -> max(1, channels / 4)
    int channels = 1;           // M, for the channel adapter reshape
};

// Bottleneck with zero-initialized up-projection: a fresh adapter is the
// identity map.
struct TemporalAdapter {
    TensorPtr down_w, down_b, up_w, up_b;
    TensorPtr gate;  // scalar g, used as sigmoid(lambda * g)
};

// Mixes across the channel axis after the [B*M, T, D] -> [B, T, M, D]
// reshape: channel-axis bottleneck around a pointwise D map.
struct ChannelAdapter {
    TensorPtr down_w;  // [r_c, M]
    TensorPtr mid_w, mid_b;  // [D, D], [D]
    TensorPtr up_w;    // [M, r_c], zero-initialized
    TensorPtr gate;
};

// FFT across the patch axis, complex projection to F bins, inverse FFT,
// then an embedding from patch space into model space. rho is the prompt
// presence weight: attention columns for the prompts carry
// |rho| * sigmoid(lambda * g), so a zero-initialized adapter leaves the
// backbone output untouched.
struct FrequencyAdapter {
    TensorPtr wl_re, wl_im;  // [N/2+1, F/2+1]
    TensorPtr emb_w, emb_b;  // [P, D], [D]
    TensorPtr gate;
    TensorPtr rho;
};

struct AdapterBundle {
    AdapterConfig cfg;
    std::vector<TemporalAdapter> temporal;
    std::vector<ChannelAdapter> channel;
    std::vector<FrequencyAdapter> frequency;
    std::vector<Param> registry;

    static AdapterBundle init(const BackboneConfig& bb, const AdapterConfig& cfg,
                              int num_patches, std::uint64_t seed);
    int temporal_rank(int d_model) const;
    int channel_rank() const;
};

double gate_value(double g, double lambda);

// gate * Up(GELU(Down(x))), the gated update the block sums into its
// residual alongside other adapters.
TensorPtr temporal_adapter_delta(Graph& g, const TensorPtr& tokens,
                                 const TemporalAdapter& a, double lambda);
TensorPtr channel_adapter_delta(Graph& g, const TensorPtr& tokens, int channels,
                                const ChannelAdapter& a, double lambda);

// x + gate * Up(GELU(Down(x))), applied per token position.
TensorPtr apply_temporal_adapter(Graph& g, const TensorPtr& tokens,
                                 const TemporalAdapter& a, double lambda);

// tokens laid out [B*M, T, D] with all M channels of a sample contiguous.
TensorPtr apply_channel_adapter(Graph& g, const TensorPtr& tokens, int channels,
                                const ChannelAdapter& a, double lambda);

// patches [B, N, P] -> prompts [B, F, D] for one layer.
TensorPtr frequency_prompts(Graph& g, const TensorPtr& patches, const FrequencyAdapter& a,
                            int freq_prompts);

// [tokens; prompts] along the token axis; errors past max_tokens.
TensorPtr attach_prompts(Graph& g, const TensorPtr& tokens, const TensorPtr& prompts,
                         int max_tokens);

// Per-layer {0,1} coefficients per adapter kind, 1 iff gate >= 0.5
// (JSON text; layer-indexed arrays keyed temporal/channel/frequency).
std::string report_gate_coefficients(const AdapterBundle& bundle);

}  // namespace fpt
