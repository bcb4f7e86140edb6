#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpt/adapters.hpp"
#include "fpt/anomaly.hpp"
#include "fpt/backbone.hpp"
#include "fpt/heads.hpp"
#include "fpt/preprocessing.hpp"

namespace fpt {

struct ModelConfig {
    BackboneConfig backbone;
    PatchConfig patching;
    AdapterConfig adapters;
    TaskSpec task;
    Variant variant = Variant::frozen;
    std::uint64_t init_seed = 1;
    double anomaly_kappa = 0.1;  // weight of the discrepancy term in the loss
    bool anomaly_squared_distance = false;

    int num_patches() const { return patching.num_patches(); }
    bool use_adapters() const { return variant == Variant::adapter; }
    void validate() const;
};

struct Batch {
    TensorPtr patches;        // [B, N, P], normalized space
    TensorPtr target;         // [B, out_dim] (or [B/group, ...]); null = inference
    std::vector<int> labels;  // classification targets
    TensorPtr mask;           // [B, L] imputation mask, 1 = observed
    int group = 1;            // rows per multivariate sample (M)
};

struct ForwardOptions {
    bool training = false;        // enables dropout
    bool capture_attention = false;
    bool capture_layer_tokens = false;
    // 0 = real attention; >0 = projection onto that many principal
    // directions of the layer input; -1 = identity pass-through baseline
    int pca_rank = 0;
};

struct ForwardResult {
    TensorPtr prediction;
    TensorPtr loss;
    TensorPtr recon_loss;                 // anomaly: reconstruction part only
    std::vector<TensorPtr> attention;     // per layer, [B, H, TT, TT]
    std::vector<TensorPtr> layer_tokens;  // index 0 = embeddings, then per block
};

class Model {
public:
    ModelConfig cfg;
    BackboneState backbone;
    std::optional<AdapterBundle> adapters;
    std::optional<AnomalyAdapterParams> anomaly;
    Head head;

    static Model init(const ModelConfig& cfg);

    ForwardResult forward(Graph& g, const Batch& batch, const ForwardOptions& opts = {}) const;

    std::vector<Param> all_params() const;
    std::vector<Param> trainable_params() const;
    std::size_t trainable_count() const;
    std::uint64_t param_hash() const;

    std::string config_json() const;
    void save(const std::string& dir) const;
    void load(const std::string& dir);

    int head_group() const;
};

ModelConfig model_config_from_json(const std::string& text);

// Head-averaged attention restricted to the patch block, rows renormalized;
// one [T*T] matrix per batch row.
std::vector<std::vector<double>> mean_head_patch_attention(const TensorPtr& probs,
                                                           int num_patches);

}  // namespace fpt
