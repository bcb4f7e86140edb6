#include "fpt/model.hpp"

#include <cmath>
#include <stdexcept>

#include "fpt/linalg.hpp"
#include "json.hpp"

namespace fpt {

using nlohmann::json;

void ModelConfig::validate() const {
    backbone.validate();
    patching.validate();
    task.validate();
    if (backbone.patch_len != patching.patch_len)
        throw std::invalid_argument("model: backbone patch_len " +
                                    std::to_string(backbone.patch_len) +
                                    " disagrees with patching " +
                                    std::to_string(patching.patch_len));
    if (task.context_len != patching.context_len)
        throw std::invalid_argument("model: task context_len disagrees with patching");
    const int budget = use_adapters() ? num_patches() + adapters.freq_prompts : num_patches();
    if (budget > backbone.max_tokens)
        throw std::invalid_argument("model: " + std::to_string(budget) +
                                    " tokens exceed max_tokens " +
                                    std::to_string(backbone.max_tokens));
}

int Model::head_group() const {
    return cfg.task.kind == TaskSpec::Kind::classification ? cfg.adapters.channels : 1;
}

Model Model::init(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.backbone = BackboneState::init(cfg.backbone, cfg.init_seed);
    m.backbone.set_variant(cfg.variant, cfg.init_seed * 0x9E3779B97F4A7C15ULL + 1);
    if (cfg.use_adapters()) {
        m.adapters = AdapterBundle::init(cfg.backbone, cfg.adapters, cfg.num_patches(),
                                         cfg.init_seed + 101);
        if (cfg.task.kind == TaskSpec::Kind::anomaly)
            m.anomaly = AnomalyAdapterParams::init(cfg.backbone.num_layers, cfg.num_patches(),
                                                   cfg.anomaly_squared_distance,
                                                   cfg.init_seed + 202);
    }
    const int group = cfg.task.kind == TaskSpec::Kind::classification ? cfg.adapters.channels : 1;
    const int in_dim = group * cfg.num_patches() * cfg.backbone.d_model;
    m.head = Head::init(in_dim, cfg.task.output_dim(), cfg.init_seed + 303);
    return m;
}

namespace {

// Principal-direction projector of the pooled token matrix, dropping
// directions past the numerical rank.
TensorPtr pca_projector(const TensorPtr& u, int d, int rank) {
    const std::size_t rows = u->numel() / static_cast<std::size_t>(d);
    std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = u->value.data() + r * d;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                cov[static_cast<std::size_t>(i) * d + j] += x[i] * x[j];
    }
    auto eig = linalg::eigen_sym(cov, d);
    const double tol = 1e-12 * std::max(eig.values[0], 1e-300);
    const int m = std::min(rank, d);
    std::vector<double> proj(static_cast<std::size_t>(d) * d, 0.0);
    for (int k = 0; k < m; ++k) {
        if (eig.values[k] <= tol) break;  // degenerate: project onto available rank
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                proj[static_cast<std::size_t>(i) * d + j] +=
                    eig.vectors[static_cast<std::size_t>(i) * d + k] *
                    eig.vectors[static_cast<std::size_t>(j) * d + k];
    }
    return Tensor::from({d, d}, std::move(proj), false);
}

}  // namespace

ForwardResult Model::forward(Graph& g, const Batch& batch, const ForwardOptions& opts) const {
    const auto& bb = cfg.backbone;
    const int n_patches = cfg.num_patches();
    const int d = bb.d_model;
    const int heads = bb.num_heads;
    const int dh = d / heads;
    if (batch.patches->shape.size() != 3 || batch.patches->shape[1] != n_patches ||
        batch.patches->shape[2] != bb.patch_len)
        throw std::invalid_argument("forward: patches must be [B," + std::to_string(n_patches) +
                                    "," + std::to_string(bb.patch_len) + "], got " +
                                    shape_str(batch.patches->shape));
    const int b = batch.patches->shape[0];
    const int f = cfg.use_adapters() ? cfg.adapters.freq_prompts : 0;
    if (n_patches + f > bb.max_tokens)
        throw std::invalid_argument("forward: token overflow: " + std::to_string(n_patches + f) +
                                    " > " + std::to_string(bb.max_tokens));

    ForwardResult out;

    // TS input embedding plus learned positions
    auto pos = g.slice(backbone.pos_emb, 0, 0, n_patches);
    auto x = g.add(g.add(g.matmul(batch.patches, backbone.w_emb), backbone.b_emb), pos);
    if (opts.capture_layer_tokens) out.layer_tokens.push_back(x);

    TensorPtr causal_mask;
    if (bb.causal) {
        const int tt = n_patches + f;
        std::vector<double> mask(static_cast<std::size_t>(tt) * tt, 0.0);
        for (int i = 0; i < tt; ++i)
            for (int j = i + 1; j < n_patches; ++j)
                mask[static_cast<std::size_t>(i) * tt + j] = -1e30;
        causal_mask = Tensor::from({tt, tt}, std::move(mask), false);
    }

    for (int l = 0; l < bb.num_layers; ++l) {
        const auto& lp = backbone.layers[l];
        TensorPtr attn_out;  // attention sublayer output at patch positions

        if (opts.pca_rank != 0) {
            auto u = g.layer_norm(x, lp.ln1_g, lp.ln1_b, bb.ln_eps);
            attn_out = (opts.pca_rank < 0) ? u : g.matmul(u, pca_projector(u, d, opts.pca_rank));
        } else {
            TensorPtr x_full = x;
            TensorPtr prompt_weight;
            if (f > 0) {
                const auto& fa = adapters->frequency[l];
                auto prompts = frequency_prompts(g, batch.patches, fa, f);
                x_full = attach_prompts(g, x, prompts, bb.max_tokens);
                auto gate = g.sigmoid(g.scale(fa.gate, cfg.adapters.gate_lambda));
                prompt_weight = g.mul(g.absval(fa.rho), gate);
            }
            const int tt = n_patches + f;
            auto u = g.layer_norm(x_full, lp.ln1_g, lp.ln1_b, bb.ln_eps);
            auto split_heads = [&](const TensorPtr& t) {
                return g.transpose(g.reshape(t, {b, tt, heads, dh}), 1, 2);
            };
            auto q = split_heads(g.add(g.matmul(u, lp.wq), lp.bq));
            auto k = split_heads(g.add(g.matmul(u, lp.wk), lp.bk));
            auto v = split_heads(g.add(g.matmul(u, lp.wv), lp.bv));
            auto scores = g.scale(g.matmul(q, g.transpose(k, 2, 3)), 1.0 / std::sqrt(dh));
            if (causal_mask) scores = g.add(scores, causal_mask);
            auto probs = (f > 0) ? g.softmax_rows_weighted(scores, n_patches, prompt_weight)
                                 : g.softmax_rows(scores);
            if (opts.capture_attention) out.attention.push_back(probs);
            auto ctx = g.reshape(g.transpose(g.matmul(probs, v), 1, 2), {b, tt, d});
            auto a_full = g.add(g.matmul(ctx, lp.wo), lp.bo);
            if (opts.training && bb.dropout > 0.0) a_full = g.dropout(a_full, bb.dropout);
            attn_out = (f > 0) ? g.slice(a_full, 1, 0, n_patches) : a_full;

            if (cfg.use_adapters()) {
                auto acc = g.add(attn_out, temporal_adapter_delta(g, attn_out,
                                                                  adapters->temporal[l],
                                                                  cfg.adapters.gate_lambda));
                attn_out = g.add(acc, channel_adapter_delta(g, attn_out, cfg.adapters.channels,
                                                            adapters->channel[l],
                                                            cfg.adapters.gate_lambda));
            }
        }

        auto h = g.add(x, attn_out);
        auto u2 = g.layer_norm(h, lp.ln2_g, lp.ln2_b, bb.ln_eps);
        auto ff = g.add(g.matmul(g.gelu(g.add(g.matmul(u2, lp.w1), lp.b1)), lp.w2), lp.b2);
        if (opts.training && bb.dropout > 0.0) ff = g.dropout(ff, bb.dropout);
        x = g.add(h, ff);
        if (opts.capture_layer_tokens) out.layer_tokens.push_back(x);
    }

    auto y = g.layer_norm(x, backbone.lnf_g, backbone.lnf_b, bb.ln_eps);
    out.prediction = head_forward(g, head, y, head_group());

    // task loss, when targets are present
    switch (cfg.task.kind) {
        case TaskSpec::Kind::long_forecast:
        case TaskSpec::Kind::short_forecast:
            if (batch.target) out.loss = mse_loss(g, out.prediction, batch.target);
            break;
        case TaskSpec::Kind::imputation:
            if (batch.target && batch.mask)
                out.loss = masked_mse_loss(g, out.prediction, batch.target, batch.mask);
            break;
        case TaskSpec::Kind::classification:
            if (!batch.labels.empty())
                out.loss = g.cross_entropy(out.prediction, batch.labels);
            break;
        case TaskSpec::Kind::anomaly: {
            if (!batch.target) break;
            out.recon_loss = mse_loss(g, out.prediction, batch.target);
            out.loss = out.recon_loss;
            if (anomaly && !out.attention.empty()) {
                TensorPtr disc_total;
                int count = 0;
                for (int l = 0; l < bb.num_layers; ++l) {
                    const auto per_row = mean_head_patch_attention(out.attention[l], n_patches);
                    for (const auto& rowmat : per_row) {
                        auto ahat = Tensor::from({n_patches, n_patches},
                                                 symmetrize_attention(rowmat, n_patches), false);
                        auto dl = discrepancy_loss(g, ahat, anomaly->sigma_raw[l],
                                                   anomaly->squared_distance);
                        disc_total = disc_total ? g.add(disc_total, dl) : dl;
                        ++count;
                    }
                }
                if (count > 0) {
                    auto disc_mean = g.scale(disc_total, 1.0 / count);
                    out.loss = g.add(out.recon_loss, g.scale(disc_mean, cfg.anomaly_kappa));
                }
            }
            break;
        }
    }
    return out;
}

std::vector<std::vector<double>> mean_head_patch_attention(const TensorPtr& probs,
                                                           int num_patches) {
    if (probs->shape.size() != 4)
        throw std::invalid_argument("mean_head_patch_attention: expected [B,H,T,T]");
    const int b = probs->shape[0];
    const int h = probs->shape[1];
    const int tt = probs->shape[2];
    const int t = num_patches;
    if (t > tt) throw std::invalid_argument("mean_head_patch_attention: patch count too large");
    std::vector<std::vector<double>> out(b, std::vector<double>(static_cast<std::size_t>(t) * t));
    for (int bi = 0; bi < b; ++bi) {
        auto& mat = out[bi];
        for (int i = 0; i < t; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < t; ++j) {
                double s = 0.0;
                for (int hi = 0; hi < h; ++hi) {
                    const std::size_t off =
                        ((static_cast<std::size_t>(bi) * h + hi) * tt + i) * tt + j;
                    s += probs->value[off];
                }
                mat[static_cast<std::size_t>(i) * t + j] = s / h;
                row_sum += s / h;
            }
            for (int j = 0; j < t; ++j) mat[static_cast<std::size_t>(i) * t + j] /= row_sum;
        }
    }
    return out;
}

std::vector<Param> Model::all_params() const {
    std::vector<Param> out = backbone.registry;
    if (adapters)
        out.insert(out.end(), adapters->registry.begin(), adapters->registry.end());
    if (anomaly) out.insert(out.end(), anomaly->registry.begin(), anomaly->registry.end());
    out.insert(out.end(), head.registry.begin(), head.registry.end());
    return out;
}

std::vector<Param> Model::trainable_params() const {
    std::vector<Param> out;
    for (const auto& p : all_params())
        if (p.trainable) out.push_back(p);
    return out;
}

std::size_t Model::trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : trainable_params()) n += p.tensor->numel();
    return n;
}

std::uint64_t Model::param_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& p : all_params()) {
        mix(p.name.data(), p.name.size());
        mix(p.tensor->value.data(), p.tensor->numel() * sizeof(double));
    }
    return h;
}

std::string Model::config_json() const {
    json j;
    j["backbone"] = {{"num_layers", cfg.backbone.num_layers},
                     {"d_model", cfg.backbone.d_model},
                     {"num_heads", cfg.backbone.num_heads},
                     {"ffn_hidden", cfg.backbone.ffn_hidden},
                     {"max_tokens", cfg.backbone.max_tokens},
                     {"patch_len", cfg.backbone.patch_len},
                     {"dropout", cfg.backbone.dropout},
                     {"ln_eps", cfg.backbone.ln_eps},
                     {"causal", cfg.backbone.causal}};
    j["patching"] = {{"patch_len", cfg.patching.patch_len},
                     {"stride", cfg.patching.stride},
                     {"context_len", cfg.patching.context_len}};
    j["adapters"] = {{"freq_prompts", cfg.adapters.freq_prompts},
                     {"gate_lambda", cfg.adapters.gate_lambda},
                     {"temporal_rank", cfg.adapters.temporal_rank},
                     {"channel_rank", cfg.adapters.channel_rank},
                     {"channels", cfg.adapters.channels}};
    j["task"] = {{"kind", task_kind_to_string(cfg.task.kind)},
                 {"context_len", cfg.task.context_len},
                 {"horizon", cfg.task.horizon},
                 {"num_classes", cfg.task.num_classes},
                 {"mask_ratio", cfg.task.mask_ratio}};
    j["variant"] = variant_to_string(cfg.variant);
    j["init_seed"] = cfg.init_seed;
    j["anomaly_kappa"] = cfg.anomaly_kappa;
    j["anomaly_squared_distance"] = cfg.anomaly_squared_distance;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    ModelConfig c;
    const auto& bb = j.at("backbone");
    c.backbone.num_layers = bb.at("num_layers");
    c.backbone.d_model = bb.at("d_model");
    c.backbone.num_heads = bb.at("num_heads");
    c.backbone.ffn_hidden = bb.at("ffn_hidden");
    c.backbone.max_tokens = bb.at("max_tokens");
    c.backbone.patch_len = bb.at("patch_len");
    c.backbone.dropout = bb.at("dropout");
    c.backbone.ln_eps = bb.at("ln_eps");
    c.backbone.causal = bb.at("causal");
    const auto& pc = j.at("patching");
    c.patching.patch_len = pc.at("patch_len");
    c.patching.stride = pc.at("stride");
    c.patching.context_len = pc.at("context_len");
    const auto& ac = j.at("adapters");
    c.adapters.freq_prompts = ac.at("freq_prompts");
    c.adapters.gate_lambda = ac.at("gate_lambda");
    c.adapters.temporal_rank = ac.at("temporal_rank");
    c.adapters.channel_rank = ac.at("channel_rank");
    c.adapters.channels = ac.at("channels");
    const auto& tk = j.at("task");
    c.task.kind = task_kind_from_string(tk.at("kind"));
    c.task.context_len = tk.at("context_len");
    c.task.horizon = tk.at("horizon");
    c.task.num_classes = tk.at("num_classes");
    c.task.mask_ratio = tk.at("mask_ratio");
    c.variant = variant_from_string(j.at("variant"));
    c.init_seed = j.at("init_seed");
    c.anomaly_kappa = j.at("anomaly_kappa");
    c.anomaly_squared_distance = j.at("anomaly_squared_distance");
    return c;
}

void Model::save(const std::string& dir) const {
    auto params = all_params();
    save_params(params, config_json(), dir);
}

void Model::load(const std::string& dir) {
    auto params = all_params();
    load_params(params, dir);
    // load_params fills tensors in place but freeze flags live on copies;
    // re-apply the variant's flags to the real registries
    backbone.apply_freeze_flags(cfg.variant);
}

}  // namespace fpt
