#include "fpt/backbone.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fpt {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written little-endian");

void BackboneConfig::validate() const {
    if (num_layers < 1) throw std::invalid_argument("backbone: num_layers must be >= 1");
    if (d_model < 1 || num_heads < 1 || d_model % num_heads != 0)
        throw std::invalid_argument("backbone: d_model " + std::to_string(d_model) +
                                    " must be divisible by num_heads " +
                                    std::to_string(num_heads));
    if (ffn_hidden < 1) throw std::invalid_argument("backbone: ffn_hidden must be >= 1");
    if (max_tokens < 1) throw std::invalid_argument("backbone: max_tokens must be >= 1");
    if (patch_len < 1) throw std::invalid_argument("backbone: patch_len must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("backbone: dropout must lie in [0,1)");
}

Variant variant_from_string(const std::string& s) {
    if (s == "frozen") return Variant::frozen;
    if (s == "adapter") return Variant::adapter;
    if (s == "no-freeze" || s == "no_freeze") return Variant::no_freeze;
    if (s == "no-pretrain" || s == "no_pretrain") return Variant::no_pretrain;
    if (s == "no-pretrain-freeze" || s == "no_pretrain_freeze")
        return Variant::no_pretrain_freeze;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::frozen: return "frozen";
        case Variant::adapter: return "adapter";
        case Variant::no_freeze: return "no-freeze";
        case Variant::no_pretrain: return "no-pretrain";
        case Variant::no_pretrain_freeze: return "no-pretrain-freeze";
    }
    throw std::logic_error("unreachable");
}

BackboneState BackboneState::init(const BackboneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    BackboneState s;
    s.cfg = cfg;
    s.layers.resize(cfg.num_layers);
    s.randomize(seed);
    s.rebuild_registry();
    s.set_variant(Variant::frozen, seed);
    return s;
}

void BackboneState::randomize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int d = cfg.d_model;
    const double w_std = 0.02;
    auto weight = [&](Shape shape) { return Tensor::randn(shape, rng, w_std); };
    auto zeros = [&](Shape shape) { return Tensor::zeros(shape); };
    auto ones = [&](Shape shape) { return Tensor::full(shape, 1.0); };

    w_emb = weight({cfg.patch_len, d});
    b_emb = zeros({d});
    pos_emb = weight({cfg.max_tokens, d});
    lnf_g = ones({d});
    lnf_b = zeros({d});
    for (auto& l : layers) {
        l.ln1_g = ones({d});
        l.ln1_b = zeros({d});
        l.wq = weight({d, d});
        l.bq = zeros({d});
        l.wk = weight({d, d});
        l.bk = zeros({d});
        l.wv = weight({d, d});
        l.bv = zeros({d});
        l.wo = weight({d, d});
        l.bo = zeros({d});
        l.ln2_g = ones({d});
        l.ln2_b = zeros({d});
        l.w1 = weight({d, cfg.ffn_hidden});
        l.b1 = zeros({cfg.ffn_hidden});
        l.w2 = weight({cfg.ffn_hidden, d});
        l.b2 = zeros({d});
    }
}

void BackboneState::rebuild_registry() {
    registry.clear();
    auto put = [&](const std::string& name, const TensorPtr& t) {
        registry.push_back({name, t, false});
    };
    put("input_emb.w", w_emb);
    put("input_emb.b", b_emb);
    put("pos_emb", pos_emb);
    put("ln_f.g", lnf_g);
    put("ln_f.b", lnf_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "h" + std::to_string(i) + ".";
        auto& l = layers[i];
        put(p + "ln_1.g", l.ln1_g);
        put(p + "ln_1.b", l.ln1_b);
        put(p + "attn.wq", l.wq);
        put(p + "attn.bq", l.bq);
        put(p + "attn.wk", l.wk);
        put(p + "attn.bk", l.bk);
        put(p + "attn.wv", l.wv);
        put(p + "attn.bv", l.bv);
        put(p + "attn.wo", l.wo);
        put(p + "attn.bo", l.bo);
        put(p + "ln_2.g", l.ln2_g);
        put(p + "ln_2.b", l.ln2_b);
        put(p + "mlp.w1", l.w1);
        put(p + "mlp.b1", l.b1);
        put(p + "mlp.w2", l.w2);
        put(p + "mlp.b2", l.b2);
    }
}

void BackboneState::set_variant(Variant v, std::uint64_t reinit_seed) {
    if (v == Variant::no_pretrain || v == Variant::no_pretrain_freeze) {
        randomize(reinit_seed);
        rebuild_registry();
    }
    apply_freeze_flags(v);
}

void BackboneState::apply_freeze_flags(Variant v) {
    const bool freeze_core = (v == Variant::frozen || v == Variant::adapter ||
                              v == Variant::no_pretrain_freeze);
    for (auto& p : registry) {
        const bool is_core = p.name.find("attn.") != std::string::npos ||
                             p.name.find("mlp.") != std::string::npos;
        p.trainable = freeze_core ? !is_core : true;
        p.tensor->requires_grad = p.trainable;
    }
}

BackboneState BackboneState::clone() const {
    BackboneState copy = *this;
    copy.layers.clear();
    copy.registry.clear();
    auto dup = [](const TensorPtr& t) {
        auto out = Tensor::from(t->shape, t->value, t->requires_grad);
        return out;
    };
    copy.w_emb = dup(w_emb);
    copy.b_emb = dup(b_emb);
    copy.pos_emb = dup(pos_emb);
    copy.lnf_g = dup(lnf_g);
    copy.lnf_b = dup(lnf_b);
    for (const auto& l : layers) {
        LayerParams nl;
        nl.ln1_g = dup(l.ln1_g);
        nl.ln1_b = dup(l.ln1_b);
        nl.wq = dup(l.wq);
        nl.bq = dup(l.bq);
        nl.wk = dup(l.wk);
        nl.bk = dup(l.bk);
        nl.wv = dup(l.wv);
        nl.bv = dup(l.bv);
        nl.wo = dup(l.wo);
        nl.bo = dup(l.bo);
        nl.ln2_g = dup(l.ln2_g);
        nl.ln2_b = dup(l.ln2_b);
        nl.w1 = dup(l.w1);
        nl.b1 = dup(l.b1);
        nl.w2 = dup(l.w2);
        nl.b2 = dup(l.b2);
        copy.layers.push_back(nl);
    }
    copy.rebuild_registry();
    for (std::size_t i = 0; i < registry.size(); ++i) {
        copy.registry[i].trainable = registry[i].trainable;
        copy.registry[i].tensor->requires_grad = registry[i].tensor->requires_grad;
    }
    return copy;
}

Param* BackboneState::find(const std::string& name) {
    for (auto& p : registry)
        if (p.name == name) return &p;
    return nullptr;
}

const Param* BackboneState::find(const std::string& name) const {
    for (const auto& p : registry)
        if (p.name == name) return &p;
    return nullptr;
}

// ---------------------------------------------------------------------------
// checkpoint format

namespace {
constexpr int kFormatVersion = 1;
}

void save_params(const std::vector<Param>& params, const std::string& config_json,
                 const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["config"] = config_json.empty() ? json::object() : json::parse(config_json);
    json tensors = json::array();
    std::size_t offset = 0;
    for (const auto& p : params) {
        json t;
        t["name"] = p.name;
        t["shape"] = p.tensor->shape;
        t["dtype"] = "float64";
        t["offset"] = offset;
        t["bytes"] = p.tensor->numel() * sizeof(double);
        t["trainable"] = p.trainable;
        tensors.push_back(t);
        offset += p.tensor->numel() * sizeof(double);
    }
    manifest["tensors"] = tensors;

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("checkpoint: cannot write manifest under " + dir);
    mf << manifest.dump(2) << '\n';

    std::ofstream bf(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bf) throw std::runtime_error("checkpoint: cannot write weights under " + dir);
    for (const auto& p : params)
        bf.write(reinterpret_cast<const char*>(p.tensor->value.data()),
                 static_cast<std::streamsize>(p.tensor->numel() * sizeof(double)));
}

std::string read_manifest(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("checkpoint: no manifest.json under " + dir);
    std::string text((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
    return text;
}

std::string load_params(std::vector<Param>& params, const std::string& dir) {
    namespace fs = std::filesystem;
    const json manifest = json::parse(read_manifest(dir));
    if (manifest.value("format_version", -1) != kFormatVersion)
        throw std::runtime_error("checkpoint: format version mismatch in " + dir);

    std::ifstream bf(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bf) throw std::runtime_error("checkpoint: no weights.bin under " + dir);
    bf.seekg(0, std::ios::end);
    const std::size_t file_size = static_cast<std::size_t>(bf.tellg());

    for (const auto& t : manifest.at("tensors")) {
        const std::string name = t.at("name");
        Param* p = nullptr;
        for (auto& cand : params)
            if (cand.name == name) {
                p = &cand;
                break;
            }
        if (!p) throw std::runtime_error("checkpoint: tensor '" + name +
                                         "' has no destination in the model");
        const Shape shape = t.at("shape").get<Shape>();
        if (shape != p->tensor->shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file has " +
                                     shape_str(shape) + ", model expects " +
                                     shape_str(p->tensor->shape));
        if (t.at("dtype") != "float64")
            throw std::runtime_error("checkpoint: unsupported dtype for '" + name + "'");
        const std::size_t offset = t.at("offset");
        const std::size_t bytes = t.at("bytes");
        if (offset + bytes > file_size)
            throw std::runtime_error("checkpoint: weights.bin truncated at tensor '" + name +
                                     "' (need " + std::to_string(offset + bytes) + " bytes, have " +
                                     std::to_string(file_size) + ")");
        bf.seekg(static_cast<std::streamoff>(offset));
        bf.read(reinterpret_cast<char*>(p->tensor->value.data()),
                static_cast<std::streamsize>(bytes));
        p->trainable = t.value("trainable", p->trainable);
        p->tensor->requires_grad = p->trainable;
    }
    return manifest.at("config").dump();
}

void save_checkpoint(const BackboneState& state, const std::string& dir) {
    json cfg;
    cfg["num_layers"] = state.cfg.num_layers;
    cfg["d_model"] = state.cfg.d_model;
    cfg["num_heads"] = state.cfg.num_heads;
    cfg["ffn_hidden"] = state.cfg.ffn_hidden;
    cfg["max_tokens"] = state.cfg.max_tokens;
    cfg["patch_len"] = state.cfg.patch_len;
    cfg["dropout"] = state.cfg.dropout;
    cfg["ln_eps"] = state.cfg.ln_eps;
    cfg["causal"] = state.cfg.causal;
    save_params(state.registry, cfg.dump(), dir);
}

BackboneState load_checkpoint(const std::string& dir) {
    const json manifest = json::parse(read_manifest(dir));
    const json cfg_json = manifest.at("config");
    BackboneConfig cfg;
    cfg.num_layers = cfg_json.at("num_layers");
    cfg.d_model = cfg_json.at("d_model");
    cfg.num_heads = cfg_json.at("num_heads");
    cfg.ffn_hidden = cfg_json.at("ffn_hidden");
    cfg.max_tokens = cfg_json.at("max_tokens");
    cfg.patch_len = cfg_json.at("patch_len");
    cfg.dropout = cfg_json.at("dropout");
    cfg.ln_eps = cfg_json.at("ln_eps");
    cfg.causal = cfg_json.at("causal");
    BackboneState state = BackboneState::init(cfg, 0);
    load_params(state.registry, dir);
    return state;
}

}  // namespace fpt
