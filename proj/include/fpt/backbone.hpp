#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpt/tensor.hpp"

namespace fpt {

struct BackboneConfig {
    int num_layers = 6;
    int d_model = 128;
    int num_heads = 4;
    int ffn_hidden = 512;
    int max_tokens = 64;
    int patch_len = 16;
    double dropout = 0.1;
    double ln_eps = 1e-5;
    bool causal = false;

    void validate() const;
};

enum class Variant { frozen, adapter, no_freeze, no_pretrain, no_pretrain_freeze };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

// Named parameter with its freeze flag; the registries of backbone, adapters
// and heads all use this entry type so checkpoints, the optimizer and the
// weight-mixing probe can treat them uniformly.
struct Param {
    std::string name;
    TensorPtr tensor;
    bool trainable = false;
};

struct LayerParams {
    TensorPtr ln1_g, ln1_b;
    TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
    TensorPtr ln2_g, ln2_b;
    TensorPtr w1, b1, w2, b2;
};

// K-layer pre-norm transformer, GPT-2 block layout. Attention and FFN
// weights are frozen under the frozen/adapter variants; layer norms, the
// positional table and the patch input embedding stay trainable.
class BackboneState {
public:
    BackboneConfig cfg;
    std::vector<LayerParams> layers;
    TensorPtr w_emb, b_emb;  // patch_len -> d_model
    TensorPtr pos_emb;       // [max_tokens, d_model]
    TensorPtr lnf_g, lnf_b;
    std::vector<Param> registry;

    static BackboneState init(const BackboneConfig& cfg, std::uint64_t seed);

    // Deep copy: registry entries share tensors with the copied-from state
    // otherwise, since parameters live behind shared pointers.
    BackboneState clone() const;

    // Adjusts freeze flags; the no_pretrain variants additionally re-draw all
    // weights from the given seed.
    void set_variant(Variant v, std::uint64_t reinit_seed);
    // Freeze flags only, weights untouched (used after loading a checkpoint).
    void apply_freeze_flags(Variant v);

    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;

private:
    void rebuild_registry();
    void randomize(std::uint64_t seed);
};

// Checkpoint directory layout: manifest.json (config, per-tensor names,
// shapes, dtypes, byte offsets, freeze flags) plus weights.bin, a single
// little-endian blob. Generic over any parameter registry so full models
// reuse it.
void save_params(const std::vector<Param>& params, const std::string& config_json,
                 const std::string& dir);
// Loads into an existing registry; every tensor must match by name and
// shape. Returns the stored config JSON.
std::string load_params(std::vector<Param>& params, const std::string& dir);
// Reads just the manifest for inspection.
std::string read_manifest(const std::string& dir);

void save_checkpoint(const BackboneState& state, const std::string& dir);
BackboneState load_checkpoint(const std::string& dir);

}  // namespace fpt
