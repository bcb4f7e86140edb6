#include "fpt/runconfig.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fpt {

using nlohmann::json;

namespace {

json data_to_json(const DataConfig& d) {
    json j;
    j["source"] = d.source;
    j["csv_path"] = d.csv_path;
    j["synthetic"] = {{"kind", d.synthetic.kind},
                      {"length", d.synthetic.length},
                      {"channels", d.synthetic.channels},
                      {"period", d.synthetic.period},
                      {"noise", d.synthetic.noise},
                      {"trend_slope", d.synthetic.trend_slope},
                      {"anomaly_fraction", d.synthetic.anomaly_fraction},
                      {"spike_magnitude", d.synthetic.spike_magnitude},
                      {"samples", d.synthetic.samples},
                      {"sample_len", d.synthetic.sample_len}};
    j["split"] = {d.split.train, d.split.val, d.split.test};
    j["seed"] = d.seed;
    j["anomaly_ratio"] = d.anomaly_ratio;
    return j;
}

DataConfig data_from_json(const json& j) {
    DataConfig d;
    d.source = j.value("source", d.source);
    d.csv_path = j.value("csv_path", d.csv_path);
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        d.synthetic.kind = s.value("kind", d.synthetic.kind);
        d.synthetic.length = s.value("length", d.synthetic.length);
        d.synthetic.channels = s.value("channels", d.synthetic.channels);
        d.synthetic.period = s.value("period", d.synthetic.period);
        d.synthetic.noise = s.value("noise", d.synthetic.noise);
        d.synthetic.trend_slope = s.value("trend_slope", d.synthetic.trend_slope);
        d.synthetic.anomaly_fraction =
            s.value("anomaly_fraction", d.synthetic.anomaly_fraction);
        d.synthetic.spike_magnitude =
            s.value("spike_magnitude", d.synthetic.spike_magnitude);
        d.synthetic.samples = s.value("samples", d.synthetic.samples);
        d.synthetic.sample_len = s.value("sample_len", d.synthetic.sample_len);
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        d.split.train = s.at(0);
        d.split.val = s.at(1);
        d.split.test = s.at(2);
    }
    d.seed = j.value("seed", d.seed);
    d.anomaly_ratio = j.value("anomaly_ratio", d.anomaly_ratio);
    return d;
}

}  // namespace

ModelConfig ExperimentConfig::model_config(int channels) const {
    ModelConfig m;
    m.backbone = backbone;
    m.backbone.patch_len = patching.patch_len;
    m.patching = patching;
    m.adapters = adapters;
    m.adapters.channels = channels;
    m.task = task;
    m.task.context_len = patching.context_len;
    m.variant = variant;
    m.init_seed = seed;
    m.anomaly_kappa = anomaly_kappa;
    m.anomaly_squared_distance = anomaly_squared_distance;
    return m;
}

ExperimentConfig experiment_from_json(const std::string& text) {
    const json j = json::parse(text);
    ExperimentConfig c;
    if (j.contains("task")) {
        const auto& t = j.at("task");
        c.task.kind = task_kind_from_string(t.value("kind", std::string("long_forecast")));
        c.task.context_len = t.value("context_len", c.task.context_len);
        c.task.horizon = t.value("horizon", c.task.horizon);
        c.task.num_classes = t.value("num_classes", c.task.num_classes);
        c.task.mask_ratio = t.value("mask_ratio", c.task.mask_ratio);
    }
    if (j.contains("data")) c.dataset = data_from_json(j.at("data"));
    if (j.contains("zero_shot_target"))
        c.zero_shot_target = data_from_json(j.at("zero_shot_target"));
    if (j.contains("model")) {
        const auto& m = j.at("model");
        c.backbone.num_layers = m.value("num_layers", c.backbone.num_layers);
        c.backbone.d_model = m.value("d_model", c.backbone.d_model);
        c.backbone.num_heads = m.value("num_heads", c.backbone.num_heads);
        c.backbone.ffn_hidden = m.value("ffn_hidden", c.backbone.ffn_hidden);
        c.backbone.max_tokens = m.value("max_tokens", c.backbone.max_tokens);
        c.backbone.dropout = m.value("dropout", c.backbone.dropout);
        c.backbone.ln_eps = m.value("ln_eps", c.backbone.ln_eps);
        c.backbone.causal = m.value("causal", c.backbone.causal);
        c.patching.patch_len = m.value("patch_len", c.patching.patch_len);
        c.patching.stride = m.value("stride", c.patching.stride);
        c.adapters.freq_prompts = m.value("freq_prompts", c.adapters.freq_prompts);
        c.adapters.gate_lambda = m.value("gate_lambda", c.adapters.gate_lambda);
        c.adapters.temporal_rank = m.value("temporal_rank", c.adapters.temporal_rank);
        c.adapters.channel_rank = m.value("channel_rank", c.adapters.channel_rank);
        c.anomaly_kappa = m.value("anomaly_kappa", c.anomaly_kappa);
        c.anomaly_squared_distance =
            m.value("anomaly_squared_distance", c.anomaly_squared_distance);
        c.checkpoint = m.value("checkpoint", c.checkpoint);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.lr = t.value("lr", c.train.lr);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
        c.train.patience = t.value("patience", c.train.patience);
        c.train.seed = t.value("seed", c.train.seed);
        c.train.few_shot_fraction = t.value("few_shot_fraction", c.train.few_shot_fraction);
        c.train.window_stride = t.value("window_stride", c.train.window_stride);
        c.variant = variant_from_string(t.value("variant", std::string("frozen")));
    }
    c.patching.context_len = c.task.context_len;
    c.backbone.patch_len = c.patching.patch_len;
    c.out_dir = j.value("out", c.out_dir);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::string experiment_to_json(const ExperimentConfig& c) {
    json j;
    j["task"] = {{"kind", task_kind_to_string(c.task.kind)},
                 {"context_len", c.task.context_len},
                 {"horizon", c.task.horizon},
                 {"num_classes", c.task.num_classes},
                 {"mask_ratio", c.task.mask_ratio}};
    j["data"] = data_to_json(c.dataset);
    if (c.zero_shot_target) j["zero_shot_target"] = data_to_json(*c.zero_shot_target);
    j["model"] = {{"num_layers", c.backbone.num_layers},
                  {"d_model", c.backbone.d_model},
                  {"num_heads", c.backbone.num_heads},
                  {"ffn_hidden", c.backbone.ffn_hidden},
                  {"max_tokens", c.backbone.max_tokens},
                  {"dropout", c.backbone.dropout},
                  {"ln_eps", c.backbone.ln_eps},
                  {"causal", c.backbone.causal},
                  {"patch_len", c.patching.patch_len},
                  {"stride", c.patching.stride},
                  {"freq_prompts", c.adapters.freq_prompts},
                  {"gate_lambda", c.adapters.gate_lambda},
                  {"temporal_rank", c.adapters.temporal_rank},
                  {"channel_rank", c.adapters.channel_rank},
                  {"anomaly_kappa", c.anomaly_kappa},
                  {"anomaly_squared_distance", c.anomaly_squared_distance},
                  {"checkpoint", c.checkpoint}};
    j["train"] = {{"lr", c.train.lr},
                  {"batch_size", c.train.batch_size},
                  {"max_epochs", c.train.max_epochs},
                  {"patience", c.train.patience},
                  {"seed", c.train.seed},
                  {"few_shot_fraction", c.train.few_shot_fraction},
                  {"window_stride", c.train.window_stride},
                  {"variant", variant_to_string(c.variant)}};
    j["out"] = c.out_dir;
    j["seed"] = c.seed;
    return j.dump(2);
}

ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return experiment_from_json(text);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string text = experiment_to_json(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace fpt
