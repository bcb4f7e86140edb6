#include "fpt/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fpt/anomaly.hpp"

namespace fpt {

void TrainConfig::validate() const {
    if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (!(few_shot_fraction > 0.0 && few_shot_fraction <= 1.0))
        throw std::invalid_argument("train: few_shot_fraction must lie in (0,1]");
    if (batch_size < 1 || max_epochs < 0 || window_stride < 1)
        throw std::invalid_argument("train: bad batch/epoch/stride settings");
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<Param>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& p : params) {
        if (!p.trainable || p.tensor->grad.empty()) continue;
        auto& [m, v] = slots_[p.tensor.get()];
        if (m.empty()) {
            m.assign(p.tensor->numel(), 0.0);
            v.assign(p.tensor->numel(), 0.0);
        }
        auto& val = p.tensor->value;
        const auto& grad = p.tensor->grad;
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

FewShotSlice few_shot_subset(int train_begin, int train_end, double fraction, int min_required) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("few_shot_subset: fraction must lie in (0,1]");
    const int full = train_end - train_begin;
    const int keep = static_cast<int>(std::floor(fraction * full));
    if (keep < min_required)
        throw std::invalid_argument(
            "few_shot_subset: " + std::to_string(keep) + " timesteps available after the " +
            std::to_string(fraction) + " cut but at least " + std::to_string(min_required) +
            " are required; too few timesteps remain to form one training window");
    return {train_end - keep, train_end};
}

namespace {

Batch rows_to_batch(const Model& model, const data::RowSet& rs,
                    const std::vector<std::size_t>& row_indices) {
    const auto& cfg = model.cfg;
    const int n = cfg.num_patches();
    const int p = cfg.patching.patch_len;
    const int b = static_cast<int>(row_indices.size());
    const int out_dim = static_cast<int>(rs.rows[row_indices[0]].target_norm.size());

    std::vector<double> patches;
    patches.reserve(static_cast<std::size_t>(b) * n * p);
    std::vector<double> targets;
    targets.reserve(static_cast<std::size_t>(b) * out_dim);
    std::vector<double> masks;
    const bool has_mask = !rs.rows[row_indices[0]].mask.empty();

    for (std::size_t ri : row_indices) {
        const auto& row = rs.rows[ri];
        auto pt = patch(row.context_norm, cfg.patching);
        patches.insert(patches.end(), pt.begin(), pt.end());
        targets.insert(targets.end(), row.target_norm.begin(), row.target_norm.end());
        if (has_mask) masks.insert(masks.end(), row.mask.begin(), row.mask.end());
    }
    Batch batch;
    batch.patches = Tensor::from({b, n, p}, std::move(patches));
    batch.target = Tensor::from({b, out_dim}, std::move(targets));
    if (has_mask)
        batch.mask = Tensor::from({b, cfg.patching.context_len}, std::move(masks));
    batch.group = rs.group;
    return batch;
}

Batch samples_to_batch(const Model& model, const data::ClassificationData& d,
                       const std::vector<std::size_t>& sample_indices) {
    const auto& cfg = model.cfg;
    const int n = cfg.num_patches();
    const int p = cfg.patching.patch_len;
    const int m = static_cast<int>(d.rows[0].size());
    std::vector<double> patches;
    std::vector<int> labels;
    for (std::size_t si : sample_indices) {
        for (const auto& chan : d.rows[si]) {
            auto pt = patch(chan, cfg.patching);
            patches.insert(patches.end(), pt.begin(), pt.end());
        }
        labels.push_back(d.labels[si]);
    }
    Batch batch;
    batch.patches =
        Tensor::from({static_cast<int>(sample_indices.size()) * m, n, p}, std::move(patches));
    batch.labels = std::move(labels);
    batch.group = m;
    return batch;
}

bool needs_attention_capture(const Model& model) {
    return model.cfg.task.kind == TaskSpec::Kind::anomaly && model.anomaly.has_value();
}

struct LoopHooks {
    std::function<double(std::mt19937_64&, AdamOptimizer&)> train_epoch;
    std::function<double()> validate;
};

TrainResult run_loop(Model& model, const TrainConfig& cfg, const LoopHooks& hooks) {
    cfg.validate();
    TrainResult result;
    result.trainable_parameters = model.trainable_count();
    AdamOptimizer opt(cfg.lr);
    std::mt19937_64 rng(cfg.seed);

    auto trainables = model.trainable_params();
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_weights;
    int stall = 0;

    auto snapshot = [&]() {
        best_weights.clear();
        for (const auto& p : trainables) best_weights.push_back(p.tensor->value);
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        EpochStats stats;
        stats.train_loss = hooks.train_epoch(rng, opt);
        if (std::isnan(stats.train_loss) || std::isinf(stats.train_loss))
            throw std::runtime_error("training diverged: loss " +
                                     std::to_string(stats.train_loss) + " at epoch " +
                                     std::to_string(epoch));
        stats.val_loss = hooks.validate();
        result.history.push_back(stats);
        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            result.best_epoch = epoch;
            stall = 0;
            snapshot();
        } else {
            ++stall;
            if (stall >= cfg.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }
    if (result.best_epoch >= 0 && !best_weights.empty())
        for (std::size_t i = 0; i < trainables.size(); ++i)
            trainables[i].tensor->value = best_weights[i];
    return result;
}

void zero_trainable_grads(const std::vector<Param>& params) {
    for (const auto& p : params) p.tensor->zero_grad();
}

}  // namespace

double batch_loss(const Model& model, const data::RowSet& rows, int batch_size) {
    if (rows.rows.empty()) return 0.0;
    const std::size_t groups = rows.num_groups();
    const int group = rows.group;
    double total = 0.0;
    std::size_t counted = 0;
    ForwardOptions opts;
    opts.capture_attention = needs_attention_capture(model);
    for (std::size_t g0 = 0; g0 < groups; g0 += batch_size) {
        const std::size_t g1 = std::min(groups, g0 + batch_size);
        std::vector<std::size_t> idx;
        for (std::size_t gi = g0; gi < g1; ++gi)
            for (int r = 0; r < group; ++r) idx.push_back(gi * group + r);
        Graph g;
        auto batch = rows_to_batch(model, rows, idx);
        auto out = model.forward(g, batch, opts);
        total += out.loss->value[0] * static_cast<double>(idx.size());
        counted += idx.size();
    }
    return total / static_cast<double>(counted);
}

TrainResult train(Model& model, const data::RowSet& train_rows, const data::RowSet& val_rows,
                  const TrainConfig& cfg) {
    if (train_rows.rows.empty()) throw std::invalid_argument("train: no training rows");
    const int group = train_rows.group;
    auto trainables = model.trainable_params();

    LoopHooks hooks;
    hooks.train_epoch = [&](std::mt19937_64& rng, AdamOptimizer& opt) {
        std::vector<std::size_t> group_order(train_rows.num_groups());
        std::iota(group_order.begin(), group_order.end(), 0);
        std::shuffle(group_order.begin(), group_order.end(), rng);
        double total = 0.0;
        std::size_t counted = 0;
        ForwardOptions opts;
        opts.training = true;
        opts.capture_attention = needs_attention_capture(model);
        for (std::size_t g0 = 0; g0 < group_order.size();
             g0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t g1 =
                std::min(group_order.size(), g0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx;
            for (std::size_t k = g0; k < g1; ++k)
                for (int r = 0; r < group; ++r) idx.push_back(group_order[k] * group + r);
            Graph g(&rng);
            auto batch = rows_to_batch(model, train_rows, idx);
            auto out = model.forward(g, batch, opts);
            const double loss = out.loss->value[0];
            if (std::isnan(loss))
                throw std::runtime_error("training diverged: NaN loss inside epoch");
            zero_trainable_grads(trainables);
            g.backward(out.loss);
            opt.step(trainables);
            total += loss * static_cast<double>(idx.size());
            counted += idx.size();
        }
        return total / static_cast<double>(counted);
    };
    hooks.validate = [&]() { return batch_loss(model, val_rows, cfg.batch_size); };
    return run_loop(model, cfg, hooks);
}

TrainResult train_classification(Model& model, const data::ClassificationData& train_data,
                                 const data::ClassificationData& val_data,
                                 const TrainConfig& cfg) {
    if (train_data.rows.empty()) throw std::invalid_argument("train: no training samples");
    auto trainables = model.trainable_params();

    auto eval_loss = [&](const data::ClassificationData& d) {
        double total = 0.0;
        std::size_t counted = 0;
        for (std::size_t s0 = 0; s0 < d.rows.size();
             s0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t s1 =
                std::min(d.rows.size(), s0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx(s1 - s0);
            std::iota(idx.begin(), idx.end(), s0);
            Graph g;
            auto batch = samples_to_batch(model, d, idx);
            auto out = model.forward(g, batch);
            total += out.loss->value[0] * static_cast<double>(idx.size());
            counted += idx.size();
        }
        return total / static_cast<double>(counted);
    };

    LoopHooks hooks;
    hooks.train_epoch = [&](std::mt19937_64& rng, AdamOptimizer& opt) {
        std::vector<std::size_t> order(train_data.rows.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t counted = 0;
        ForwardOptions opts;
        opts.training = true;
        for (std::size_t s0 = 0; s0 < order.size();
             s0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t s1 =
                std::min(order.size(), s0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx(order.begin() + s0, order.begin() + s1);
            Graph g(&rng);
            auto batch = samples_to_batch(model, train_data, idx);
            auto out = model.forward(g, batch, opts);
            const double loss = out.loss->value[0];
            if (std::isnan(loss))
                throw std::runtime_error("training diverged: NaN loss inside epoch");
            zero_trainable_grads(trainables);
            g.backward(out.loss);
            opt.step(trainables);
            total += loss * static_cast<double>(idx.size());
            counted += idx.size();
        }
        return total / static_cast<double>(counted);
    };
    hooks.validate = [&]() { return eval_loss(val_data); };
    return run_loop(model, cfg, hooks);
}

ForecastEval evaluate_forecast(const Model& model, const data::RowSet& rows, int batch_size) {
    ForecastEval ev;
    if (rows.rows.empty()) return ev;
    std::vector<double> pooled_pred, pooled_truth;
    const int group = rows.group;
    const std::size_t groups = rows.num_groups();
    for (std::size_t g0 = 0; g0 < groups; g0 += static_cast<std::size_t>(batch_size)) {
        const std::size_t g1 = std::min(groups, g0 + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx;
        for (std::size_t gi = g0; gi < g1; ++gi)
            for (int r = 0; r < group; ++r) idx.push_back(gi * group + r);
        Graph g;
        auto batch = rows_to_batch(model, rows, idx);
        auto out = model.forward(g, batch);
        const int out_dim = out.prediction->shape[1];
        for (std::size_t bi = 0; bi < idx.size(); ++bi) {
            const auto& row = rows.rows[idx[bi]];
            std::vector<double> pred_norm(
                out.prediction->value.begin() + bi * out_dim,
                out.prediction->value.begin() + (bi + 1) * out_dim);
            auto pred = instance_denormalize(pred_norm, row.stats);
            auto truth = instance_denormalize(row.target_norm, row.stats);
            pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
            pooled_truth.insert(pooled_truth.end(), truth.begin(), truth.end());
            ev.predictions.push_back(std::move(pred));
            ev.truths.push_back(std::move(truth));
        }
    }
    ev.mse = metrics::mse(pooled_pred, pooled_truth);
    ev.mae = metrics::mae(pooled_pred, pooled_truth);
    return ev;
}

ImputationEval evaluate_imputation(const Model& model, const data::RowSet& rows,
                                   int batch_size) {
    ImputationEval ev;
    if (rows.rows.empty()) return ev;
    std::vector<double> pooled_pred, pooled_truth;
    const int group = rows.group;
    const std::size_t groups = rows.num_groups();
    for (std::size_t g0 = 0; g0 < groups; g0 += static_cast<std::size_t>(batch_size)) {
        const std::size_t g1 = std::min(groups, g0 + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx;
        for (std::size_t gi = g0; gi < g1; ++gi)
            for (int r = 0; r < group; ++r) idx.push_back(gi * group + r);
        Graph g;
        auto batch = rows_to_batch(model, rows, idx);
        auto out = model.forward(g, batch);
        const int l = out.prediction->shape[1];
        for (std::size_t bi = 0; bi < idx.size(); ++bi) {
            const auto& row = rows.rows[idx[bi]];
            const double scale = std::sqrt(row.stats.variance + row.stats.eps);
            for (int t = 0; t < l; ++t) {
                if (row.mask[t] != 0.0) continue;  // scored on masked positions only
                const double pred =
                    out.prediction->value[bi * l + t] * scale + row.stats.mean;
                const double truth = row.target_norm[t] * scale + row.stats.mean;
                pooled_pred.push_back(pred);
                pooled_truth.push_back(truth);
            }
        }
    }
    ev.mse = metrics::mse(pooled_pred, pooled_truth);
    ev.mae = metrics::mae(pooled_pred, pooled_truth);
    return ev;
}

ClassificationEval evaluate_classification(const Model& model,
                                           const data::ClassificationData& d, int batch_size) {
    ClassificationEval ev;
    if (d.rows.empty()) return ev;
    int correct = 0;
    for (std::size_t s0 = 0; s0 < d.rows.size(); s0 += static_cast<std::size_t>(batch_size)) {
        const std::size_t s1 = std::min(d.rows.size(), s0 + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx(s1 - s0);
        std::iota(idx.begin(), idx.end(), s0);
        Graph g;
        auto batch = samples_to_batch(model, d, idx);
        auto out = model.forward(g, batch);
        const int c = out.prediction->shape[1];
        for (std::size_t bi = 0; bi < idx.size(); ++bi) {
            std::vector<double> logits(out.prediction->value.begin() + bi * c,
                                       out.prediction->value.begin() + (bi + 1) * c);
            const int pred = argmax_class(logits);
            ev.predicted.push_back(pred);
            if (pred == d.labels[idx[bi]]) ++correct;
        }
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(d.labels.size());
    return ev;
}

AnomalyEval evaluate_anomaly(const Model& model, const data::RowSet& rows, int batch_size) {
    AnomalyEval ev;
    if (rows.rows.empty()) return ev;
    const auto& cfg = model.cfg;
    const int l = cfg.patching.context_len;
    const int n = cfg.num_patches();
    const int p = cfg.patching.patch_len;
    const int s = cfg.patching.stride;
    const bool with_disc = model.anomaly.has_value();

    ForwardOptions opts;
    opts.capture_attention = with_disc;

    const std::size_t groups = rows.num_groups();
    const int group = rows.group;
    for (std::size_t g0 = 0; g0 < groups; g0 += static_cast<std::size_t>(batch_size)) {
        const std::size_t g1 = std::min(groups, g0 + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx;
        for (std::size_t gi = g0; gi < g1; ++gi)
            for (int r = 0; r < group; ++r) idx.push_back(gi * group + r);
        Graph g;
        auto batch = rows_to_batch(model, rows, idx);
        auto out = model.forward(g, batch, opts);

        // per-layer symmetrized attention vs prior, aggregated per token
        std::vector<std::vector<double>> token_disc(idx.size(), std::vector<double>(n, 0.0));
        if (with_disc) {
            for (int layer = 0; layer < cfg.backbone.num_layers; ++layer) {
                auto per_row = mean_head_patch_attention(out.attention[layer], n);
                std::vector<double> sigma(n);
                const auto& raw = model.anomaly->sigma_raw[layer]->value;
                for (int i = 0; i < n; ++i)
                    sigma[i] = std::log1p(std::exp(raw[i]));  // softplus
                auto prior = gaussian_prior(n, sigma, model.anomaly->squared_distance);
                for (std::size_t bi = 0; bi < idx.size(); ++bi) {
                    auto ahat = symmetrize_attention(per_row[bi], n);
                    auto kl = discrepancy(ahat, prior, n);
                    for (int i = 0; i < n; ++i) token_disc[bi][i] += kl[i];
                }
            }
            for (auto& td : token_disc)
                for (auto& v : td) v /= cfg.backbone.num_layers;
        }

        for (std::size_t bi = 0; bi < idx.size(); ++bi) {
            const auto& row = rows.rows[idx[bi]];
            std::vector<double> recon(l), disc_points(l, 0.0);
            for (int t = 0; t < l; ++t) {
                const double d = out.prediction->value[bi * l + t] - row.target_norm[t];
                recon[t] = d * d;
            }
            if (with_disc) {
                std::vector<int> cover(l, 0);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < p; ++j) {
                        const int t = i * s + j;
                        if (t < l) {
                            disc_points[t] += token_disc[bi][i];
                            ++cover[t];
                        }
                    }
                for (int t = 0; t < l; ++t)
                    if (cover[t] > 0) disc_points[t] /= cover[t];
            }
            auto score = anomaly_score(recon, disc_points,
                                       with_disc ? ScoreMode::combined
                                                 : ScoreMode::reconstruction_only);
            for (int t = 0; t < l; ++t) {
                ev.scores.push_back(score[t]);
                ev.point_index.push_back(row.t0 + t);
                ev.recon_err.push_back(recon[t]);
                ev.discrepancy.push_back(disc_points[t]);
            }
        }
    }
    return ev;
}

ForecastEval zero_shot_eval(const Model& model, const data::RowSet& target_rows,
                            int batch_size) {
    const std::uint64_t before = model.param_hash();
    auto ev = evaluate_forecast(model, target_rows, batch_size);
    const std::uint64_t after = model.param_hash();
    if (before != after)
        throw std::runtime_error("zero_shot_eval: parameters changed during evaluation");
    return ev;
}

}  // namespace fpt
