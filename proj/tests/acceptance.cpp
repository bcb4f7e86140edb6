// Acceptance suite: one pass/fail line per criterion. Exit code equals the
// number of failed criteria (skipped optional tiers do not fail).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fpt/analysis.hpp"
#include "fpt/anomaly.hpp"
#include "fpt/metrics.hpp"
#include "fpt/runner.hpp"
#include "fpt/training.hpp"
#include "gradcheck.hpp"
#include "json.hpp"

using namespace fpt;
using gradcheck::random_tensor;
using gradcheck::weighted_sum;

namespace {

enum class Outcome { pass, fail, skip };

struct Criterion {
    int id;
    std::string label;
    std::function<Outcome(std::string&)> run;
};

// ---------------------------------------------------------------- criterion 1

Outcome gradient_suite(std::string& note) {
    double worst = 0.0;
    for (unsigned seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        auto x23 = random_tensor({2, 3}, rng);
        auto b3 = random_tensor({3}, rng);
        auto xpos = random_tensor({2, 3}, rng);
        for (auto& v : xpos->value) v = std::fabs(v) + 0.5;
        auto a34 = random_tensor({3, 4}, rng);
        auto b45 = random_tensor({4, 5}, rng);
        auto w1 = Tensor::from({1}, {0.4}, true);
        auto re = random_tensor({2, 4}, rng);
        auto im = random_tensor({2, 4}, rng);
        auto lg = random_tensor({3, 4}, rng);
        auto gmm = random_tensor({3}, rng);
        auto bta = random_tensor({3}, rng);

        using Fn = gradcheck::ForwardFn;
        const std::vector<std::pair<Fn, std::vector<TensorPtr>>> ops = {
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.matmul(in[0], in[1]), 1);
             },
             {a34, b45}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.softmax_rows(in[0]), 2);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.softmax_rows_weighted(in[0], 2, in[1]), 3);
             },
             {x23, w1}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.layer_norm(in[0], in[1], in[2], 1e-5), 4);
             },
             {x23, gmm, bta}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 auto [rr, ii] = g.rfft(in[0]);
                 return g.add(weighted_sum(g, rr, 5), weighted_sum(g, ii, 6));
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.irfft(in[0], in[1], 6), 7);
             },
             {re, im}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.add(in[0], in[1]), 8);
             },
             {x23, b3}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.sub(in[0], in[1]), 9);
             },
             {x23, b3}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.mul(in[0], in[1]), 10);
             },
             {x23, b3}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.gelu(in[0]), 11);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.sigmoid(in[0]), 12);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.softplus(in[0]), 13);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.log(in[0]), 14);
             },
             {xpos}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.exp(in[0]), 15);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.absval(in[0]), 16);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.clamp_min(in[0], -0.2), 17);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.affine(in[0], 1.7, 0.3), 18);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) { return g.mean(in[0]); }, {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) { return g.sum(in[0]); }, {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.concat({in[0], in[1]}, 0), 19);
             },
             {x23, x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.slice(in[0], 1, 1, 2), 20);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.transpose(in[0], 0, 1), 21);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.reshape(in[0], {3, 2}), 22);
             },
             {x23}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return g.cross_entropy(in[0], {1, 3, 0});
             },
             {lg}},
        };
        for (const auto& [fn, inputs] : ops)
            worst = std::max(worst, gradcheck::check(fn, inputs));

        // composed K = 3 model: finite differences over sampled parameter
        // coordinates of every trainable tensor
        ModelConfig mc;
        mc.backbone.num_layers = 3;
        mc.backbone.d_model = 16;
        mc.backbone.num_heads = 2;
        mc.backbone.ffn_hidden = 32;
        mc.backbone.max_tokens = 16;
        mc.backbone.patch_len = 8;
        mc.backbone.dropout = 0.0;
        mc.patching = PatchConfig{8, 8, 48};
        mc.task.kind = TaskSpec::Kind::long_forecast;
        mc.task.context_len = 48;
        mc.task.horizon = 6;
        mc.variant = Variant::adapter;
        mc.init_seed = seed;
        auto model = Model::init(mc);
        // keep gates and the prompt presence in their responsive region
        for (auto& f : model.adapters->frequency) f.rho->value[0] = 0.5;
        for (auto& t : model.adapters->temporal)
            for (auto& v : t.up_w->value) v = 0.01 * (double(rng() % 100) - 50.0) / 50.0;

        Batch batch;
        {
            std::normal_distribution<double> dist(0.0, 1.0);
            std::vector<double> patches(2 * 6 * 8), target(2 * 6);
            for (auto& v : patches) v = dist(rng);
            for (auto& v : target) v = dist(rng);
            batch.patches = Tensor::from({2, 6, 8}, std::move(patches));
            batch.target = Tensor::from({2, 6}, std::move(target));
        }
        auto loss_value = [&]() {
            Graph g;
            return model.forward(g, batch).loss->value[0];
        };
        auto trainables = model.trainable_params();
        {
            Graph g;
            for (const auto& p : trainables) p.tensor->zero_grad();
            auto out = model.forward(g, batch);
            g.backward(out.loss);
        }
        const double h = 1e-5;
        for (const auto& p : trainables) {
            const std::size_t stride = std::max<std::size_t>(1, p.tensor->numel() / 3);
            for (std::size_t c = rng() % stride; c < p.tensor->numel(); c += stride) {
                const double saved = p.tensor->value[c];
                p.tensor->value[c] = saved + h;
                const double lp = loss_value();
                p.tensor->value[c] = saved - h;
                const double lm = loss_value();
                p.tensor->value[c] = saved;
                const double fd = (lp - lm) / (2.0 * h);
                const double ad = p.tensor->grad.empty() ? 0.0 : p.tensor->grad[c];
                worst = std::max(worst, gradcheck::rel_err(ad, fd));
            }
        }
    }
    std::ostringstream os;
    os << "worst rel err " << worst;
    note = os.str();
    return worst < 1e-4 ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------- criterion 2

ExperimentConfig small_forecast_cfg(Variant v, unsigned seed) {
    ExperimentConfig cfg;
    cfg.task.kind = TaskSpec::Kind::long_forecast;
    cfg.task.context_len = 48;
    cfg.task.horizon = 8;
    cfg.dataset.synthetic.kind = "sinusoid_mix";
    cfg.dataset.synthetic.length = 1500;
    cfg.dataset.seed = seed;
    cfg.backbone.num_layers = 3;
    cfg.backbone.d_model = 32;
    cfg.backbone.num_heads = 4;
    cfg.backbone.ffn_hidden = 64;
    cfg.backbone.max_tokens = 16;
    cfg.backbone.dropout = 0.0;
    cfg.patching = PatchConfig{12, 6, 48};
    cfg.train.batch_size = 16;
    cfg.train.window_stride = 4;
    cfg.train.seed = seed;
    cfg.variant = v;
    cfg.seed = seed;
    return cfg;
}

Outcome freeze_contract(std::string& note) {
    std::ostringstream os;
    for (Variant v : {Variant::frozen, Variant::adapter, Variant::no_freeze}) {
        auto cfg = small_forecast_cfg(v, 3);
        auto ds = data::generate_synthetic(cfg.dataset.synthetic, cfg.dataset.seed);
        auto sp = data::chronological_split(ds.length(), cfg.dataset.split);
        auto rows = data::build_forecast_rows(ds, sp.train_begin, sp.train_end, 48, 8,
                                              cfg.train.window_stride);
        auto val = data::build_forecast_rows(ds, sp.val_begin, sp.val_end, 48, 8,
                                             cfg.train.window_stride);
        auto model = Model::init(cfg.model_config(1));
        const std::size_t steps_per_epoch =
            (rows.num_groups() + cfg.train.batch_size - 1) / cfg.train.batch_size;
        TrainConfig tc = cfg.train;
        tc.max_epochs = static_cast<int>((100 + steps_per_epoch - 1) / steps_per_epoch);
        tc.patience = 1000;
        std::vector<std::vector<double>> frozen_before;
        for (const auto& p : model.all_params())
            if (!p.trainable) frozen_before.push_back(p.tensor->value);
        train(model, rows, val, tc);
        std::size_t k = 0;
        bool all_equal = true;
        for (const auto& p : model.all_params())
            if (!p.trainable) all_equal &= (p.tensor->value == frozen_before[k++]);
        if (v == Variant::no_freeze) {
            // nothing frozen; instead the attention cores must have moved
            const auto moved = model.backbone.layers[0].wq->value;
            auto fresh = Model::init(cfg.model_config(1));
            if (moved == fresh.backbone.layers[0].wq->value) {
                note = "no_freeze did not update attention weights";
                return Outcome::fail;
            }
        } else if (!all_equal) {
            note = "frozen tensors changed under variant " + variant_to_string(v);
            return Outcome::fail;
        }
        os << variant_to_string(v) << " ok (" << tc.max_epochs * steps_per_epoch
           << " steps); ";
    }
    note = os.str();
    return Outcome::pass;
}

// ---------------------------------------------------------------- criterion 3

Outcome adapter_identity(std::string& note) {
    auto frozen_cfg = small_forecast_cfg(Variant::frozen, 5).model_config(1);
    auto adapter_cfg = small_forecast_cfg(Variant::adapter, 5).model_config(1);
    auto frozen = Model::init(frozen_cfg);
    auto adapter = Model::init(adapter_cfg);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> patches(4 * frozen_cfg.num_patches() * 12);
        for (auto& v : patches) v = dist(rng);
        Batch batch;
        batch.patches = Tensor::from({4, frozen_cfg.num_patches(), 12}, std::move(patches));
        Graph g1, g2;
        auto a = frozen.forward(g1, batch).prediction->value;
        auto b = adapter.forward(g2, batch).prediction->value;
        if (a != b) {
            note = "outputs diverged on batch " + std::to_string(trial);
            return Outcome::fail;
        }
    }
    note = "10/10 batches bitwise equal";
    return Outcome::pass;
}

// ---------------------------------------------------------------- criterion 4

Outcome preprocessing_contracts(std::string& note) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int len = 2 + static_cast<int>(rng() % 300);
        std::vector<double> x(len);
        for (auto& v : x) v = u(rng);
        auto [norm, stats] = instance_normalize(x);
        auto back = instance_denormalize(norm, stats);
        for (int i = 0; i < len; ++i)
            if (std::fabs(back[i] - x[i]) > 1e-6) {
                note = "round trip exceeded 1e-6";
                return Outcome::fail;
            }
    }
    int cases = 0;
    for (int len = 4; len <= 28; len += 4)
        for (int p = 1; p <= len; p += 3)
            for (int s = 1; s <= 6; ++s) {
                PatchConfig cfg{p, s, len};
                std::vector<double> x(len, 0.0);
                const auto patches = patch(x, cfg);
                if (static_cast<int>(patches.size()) != cfg.num_patches() * p ||
                    cfg.num_patches() != (len - p) / s + 1) {
                    note = "patch formula broke";
                    return Outcome::fail;
                }
                ++cases;
            }
    if (cases < 200) {
        note = "grid too small: " + std::to_string(cases);
        return Outcome::fail;
    }
    const int expected[] = {12, 24, 36, 48};
    const double ratios[] = {0.125, 0.25, 0.375, 0.5};
    for (int i = 0; i < 4; ++i) {
        auto mask = make_imputation_mask(96, ratios[i], 7 + i);
        int masked = 0;
        for (double v : mask) masked += (v == 0.0) ? 1 : 0;
        if (masked != expected[i]) {
            note = "mask cardinality off at ratio " + std::to_string(ratios[i]);
            return Outcome::fail;
        }
    }
    note = std::to_string(cases) + " patch cases; ratios 12/24/36/48 of 96 exact";
    return Outcome::pass;
}

// ---------------------------------------------------------------- criterion 5

Outcome pca_optimality(std::string& note) {
    std::mt19937_64 rng(29);
    double worst_gap = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int d = 3 + static_cast<int>(rng() % 6);           // 3..8
        const int n = d + 8 + static_cast<int>(rng() % 48);      // <= 64
        const int m = 1 + static_cast<int>(rng() % (d - 1));     // < d
        auto rep = analysis::verify_pca_optimality(d, n, m, 1000 + i, 0);
        worst_gap = std::max(worst_gap, rep.identity_gap);
        if (rep.identity_gap > 1e-8) {
            note = "identity gap " + std::to_string(rep.identity_gap);
            return Outcome::fail;
        }
    }
    int good = 0, total = 0;
    for (std::uint64_t seed : {42ULL, 7ULL, 13ULL}) {
        auto rep = analysis::verify_pca_optimality(4, 50, 2, seed, 10);
        good += rep.good_starts;
        total += 10;
    }
    std::ostringstream os;
    os << "identity worst gap " << worst_gap << "; descent " << good << "/" << total;
    note = os.str();
    return (good * 10 >= total * 9) ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------- criterion 6

Outcome jacobian_bound(std::string& note) {
    int relaxed_viol = 0, strict_viol = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto rep = analysis::verify_jacobian_bound(4, 3, seed, 0.1);
        relaxed_viol += rep.violates_relaxed ? 1 : 0;
        strict_viol += rep.violates_strict ? 1 : 0;
    }
    std::ostringstream os;
    os << "relaxed-form violations " << relaxed_viol << "/50 (strict form: " << strict_viol
       << "/50, reported only)";
    note = os.str();
    return relaxed_viol == 0 ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------- criterion 7

Outcome convergence_rate(std::string& note) {
    auto rep = analysis::verify_convergence_rate({16, 64, 256, 1024}, 16, 31, 50);
    std::ostringstream os;
    os << "fitted slope " << rep.slope;
    note = os.str();
    return (rep.slope > -0.65 && rep.slope < -0.35) ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------- criterion 8

Outcome synthetic_forecast(std::string& note) {
    std::ostringstream os;
    for (unsigned seed : {1u, 2u, 3u}) {
        ExperimentConfig cfg;
        cfg.task.kind = TaskSpec::Kind::long_forecast;
        cfg.task.context_len = 96;
        cfg.task.horizon = 48;
        cfg.dataset.synthetic.kind = "trend_plus_season";
        cfg.dataset.synthetic.length = 3000;
        cfg.dataset.synthetic.period = 24;
        cfg.dataset.synthetic.noise = 0.05;
        cfg.dataset.seed = seed;
        cfg.backbone.num_layers = 3;
        cfg.backbone.d_model = 64;
        cfg.backbone.num_heads = 4;
        cfg.backbone.ffn_hidden = 128;
        cfg.backbone.max_tokens = 16;
        cfg.backbone.dropout = 0.0;
        cfg.patching = PatchConfig{16, 8, 96};
        cfg.train.lr = 1e-3;
        cfg.train.batch_size = 32;
        cfg.train.max_epochs = 4;
        cfg.train.window_stride = 2;
        cfg.train.seed = seed;
        cfg.variant = Variant::adapter;
        cfg.out_dir = "/tmp/fpt_acc_fc_" + std::to_string(seed);
        cfg.seed = seed;
        auto r = run_experiment(cfg);
        const double model_mse =
            nlohmann::json::parse(r.metrics_json).at("mse").get<double>();

        // repeat-last naive on the same test windows, scored by an inline
        // second transcription of the MSE formula
        auto ds = data::generate_synthetic(cfg.dataset.synthetic, cfg.dataset.seed);
        auto sp = data::chronological_split(ds.length(), cfg.dataset.split);
        auto rows = data::build_forecast_rows(ds, sp.test_begin, sp.test_end, 96, 48, 2);
        double acc = 0.0;
        std::size_t count = 0;
        std::vector<double> naive_pool, truth_pool;
        for (const auto& row : rows.rows) {
            auto ctx = instance_denormalize(row.context_norm, row.stats);
            auto truth = instance_denormalize(row.target_norm, row.stats);
            for (double t : truth) {
                acc += (ctx.back() - t) * (ctx.back() - t);
                naive_pool.push_back(ctx.back());
                truth_pool.push_back(t);
                ++count;
            }
        }
        const double naive_direct = acc / static_cast<double>(count);
        const double naive_metric = metrics::mse(naive_pool, truth_pool);
        if (std::fabs(naive_direct - naive_metric) > 1e-9) {
            note = "metrics module disagrees with the inline oracle";
            return Outcome::fail;
        }
        const double improvement = 1.0 - model_mse / naive_direct;
        os << "seed " << seed << ": " << static_cast<int>(improvement * 100) << "% better; ";
        if (improvement < 0.20) {
            note = "improvement below 20% at seed " + std::to_string(seed);
            return Outcome::fail;
        }
    }
    note = os.str();
    return Outcome::pass;
}

// ---------------------------------------------------------------- criterion 9

Outcome synthetic_anomaly(std::string& note) {
    ExperimentConfig cfg;
    cfg.task.kind = TaskSpec::Kind::anomaly;
    cfg.task.context_len = 96;
    cfg.dataset.synthetic.kind = "periodic_with_anomalies";
    cfg.dataset.synthetic.length = 9600;
    cfg.dataset.synthetic.period = 24;
    cfg.dataset.synthetic.noise = 0.05;
    cfg.dataset.synthetic.anomaly_fraction = 0.01;
    cfg.dataset.synthetic.spike_magnitude = 8.0;
    cfg.dataset.seed = 11;
    cfg.dataset.anomaly_ratio = 0.01;
    cfg.backbone.num_layers = 3;
    cfg.backbone.d_model = 64;
    cfg.backbone.num_heads = 4;
    cfg.backbone.ffn_hidden = 128;
    cfg.backbone.max_tokens = 16;
    cfg.backbone.dropout = 0.0;
    cfg.patching = PatchConfig{8, 8, 96};
    cfg.train.lr = 1e-3;
    cfg.train.batch_size = 16;
    cfg.train.max_epochs = 5;
    cfg.train.seed = 7;
    cfg.variant = Variant::adapter;
    cfg.out_dir = "/tmp/fpt_acc_anom";
    cfg.seed = 7;
    auto r = run_experiment(cfg);
    const auto m = nlohmann::json::parse(r.metrics_json);
    const double f1 = m.at("f1").get<double>();

    auto model = Model::init(cfg.model_config(1));
    model.load("/tmp/fpt_acc_anom/checkpoint");
    int hits = 0;
    for (int s = 0; s < 100; ++s) {
        std::mt19937_64 rng(5000 + s);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> w(96);
        const double phase = 2.0 * M_PI * u(rng);
        for (int t = 0; t < 96; ++t)
            w[t] = std::sin(2.0 * M_PI * t / 24.0 + phase) + 0.05 * gauss(rng);
        const int tstar = 2 + static_cast<int>(rng() % 92);
        w[tstar] += (rng() & 1 ? 8.0 : -8.0);
        data::Dataset one;
        one.channels.push_back(w);
        auto rows = data::build_anomaly_rows(one, 0, 96, 96);
        auto ev = evaluate_anomaly(model, rows, 1);
        int best = 0;
        for (int t = 1; t < 96; ++t)
            if (ev.scores[t] > ev.scores[best]) best = t;
        hits += (best == tstar) ? 1 : 0;
    }
    std::ostringstream os;
    os << "point-adjusted F1 " << f1 << "; spike argmax " << hits << "/100";
    note = os.str();
    return (f1 >= 0.90 && hits >= 95) ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------- criterion 10

Outcome synthetic_classification(std::string& note) {
    ExperimentConfig cfg;
    cfg.task.kind = TaskSpec::Kind::classification;
    cfg.task.context_len = 96;
    cfg.task.num_classes = 2;
    cfg.dataset.synthetic.kind = "two_class_waveforms";
    cfg.dataset.synthetic.samples = 300;
    cfg.dataset.synthetic.sample_len = 96;
    cfg.dataset.synthetic.period = 24;
    cfg.dataset.synthetic.noise = 0.1;
    cfg.dataset.seed = 5;
    cfg.backbone.num_layers = 3;
    cfg.backbone.d_model = 64;
    cfg.backbone.num_heads = 4;
    cfg.backbone.ffn_hidden = 128;
    cfg.backbone.max_tokens = 32;
    cfg.backbone.dropout = 0.0;
    cfg.patching = PatchConfig{16, 4, 96};
    cfg.train.lr = 1e-3;
    cfg.train.batch_size = 16;
    cfg.train.max_epochs = 15;
    cfg.train.patience = 5;
    cfg.train.seed = 3;
    cfg.variant = Variant::adapter;
    cfg.out_dir = "/tmp/fpt_acc_cls";
    cfg.seed = 3;
    auto r = run_experiment(cfg);
    const double acc = nlohmann::json::parse(r.metrics_json).at("accuracy").get<double>();
    std::ostringstream os;
    os << "accuracy " << acc;
    note = os.str();
    return acc >= 0.95 ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------- criterion 11

Outcome metrics_oracle(std::string& note) {
    std::mt19937_64 rng(0xFEED);
    std::uniform_real_distribution<double> u(0.5, 10.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 4 + static_cast<int>(rng() % 20);
        const int m = 1 + static_cast<int>(rng() % 6);
        const int n = m + 10 + static_cast<int>(rng() % 30);
        std::vector<double> p(h), t(h), ins(n);
        for (auto& v : p) v = u(rng);
        for (auto& v : t) v = u(rng);
        for (auto& v : ins) v = u(rng);

        // independent transcription of every formula
        auto diff = [&](double a, double b) { return std::fabs(a - b); };
        double mse_o = 0, mae_o = 0, sm_o = 0, mp_o = 0, nd_n = 0, nd_d = 0;
        for (int i = 0; i < h; ++i) {
            mse_o += (p[i] - t[i]) * (p[i] - t[i]);
            mae_o += diff(p[i], t[i]);
            sm_o += diff(p[i], t[i]) / (std::fabs(p[i]) + std::fabs(t[i]));
            mp_o += diff(p[i], t[i]) / std::fabs(t[i]);
            nd_n += diff(p[i], t[i]);
            nd_d += std::fabs(t[i]);
        }
        mse_o /= h;
        mae_o /= h;
        sm_o = 200.0 * sm_o / h;
        mp_o = 100.0 * mp_o / h;
        double den = 0;
        for (int j = m; j < n; ++j) den += diff(ins[j], ins[j - m]);
        den /= (n - m);
        double num = 0;
        for (int i = 0; i < h; ++i) num += diff(p[i], t[i]);
        const double mase_o = (num / h) / den;

        worst = std::max(worst, std::fabs(metrics::mse(p, t) - mse_o));
        worst = std::max(worst, std::fabs(metrics::mae(p, t) - mae_o));
        worst = std::max(worst, std::fabs(metrics::smape(p, t) - sm_o));
        worst = std::max(worst, std::fabs(metrics::mape(p, t) - mp_o));
        worst = std::max(worst, std::fabs(metrics::nd(p, t) - nd_n / nd_d));
        worst = std::max(worst, std::fabs(metrics::mase(p, t, ins, m) - mase_o));

        const int len = 40;
        std::vector<int> pl(len), tl(len);
        for (int i = 0; i < len; ++i) {
            pl[i] = rng() % 2;
            tl[i] = rng() % 3 == 0;
        }
        int tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < len; ++i) {
            tp += (pl[i] == 1 && tl[i] == 1);
            fp += (pl[i] == 1 && tl[i] == 0);
            fn += (pl[i] == 0 && tl[i] == 1);
        }
        const double prec = (tp + fp) ? double(tp) / (tp + fp) : 0.0;
        const double rec = (tp + fn) ? double(tp) / (tp + fn) : 0.0;
        const double f1 = (prec + rec > 0) ? 2 * prec * rec / (prec + rec) : 0.0;
        auto got = metrics::precision_recall_f1(pl, tl, false);
        worst = std::max(worst, std::fabs(got.precision - prec));
        worst = std::max(worst, std::fabs(got.recall - rec));
        worst = std::max(worst, std::fabs(got.f1 - f1));

        // OWA against an inline recomputation from its ingredients
        try {
            auto base = metrics::naive2_forecast(ins, h, m);
            const double owa_o =
                0.5 * (metrics::smape(p, t) / metrics::smape(base, t) +
                       metrics::mase(p, t, ins, m) / metrics::mase(base, t, ins, m));
            worst = std::max(worst, std::fabs(metrics::owa(p, t, ins, m) - owa_o));
        } catch (const std::domain_error&) {
        }
    }
    // MASE of the self-referential seasonal naive is exactly 1
    std::vector<double> y(60);
    for (auto& v : y) v = u(rng);
    std::vector<double> truth(y.begin() + 4, y.end());
    std::vector<double> pred(y.begin(), y.end() - 4);
    const double mase_naive = metrics::mase(pred, truth, y, 4);
    std::ostringstream os;
    os << "worst |diff| " << worst << "; seasonal-naive MASE == " << mase_naive;
    note = os.str();
    return (worst < 1e-12 && mase_naive == 1.0) ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------- criterion 12

Outcome determinism(std::string& note) {
    auto cfg = small_forecast_cfg(Variant::adapter, 9);
    cfg.backbone.dropout = 0.1;
    cfg.train.max_epochs = 2;
    cfg.out_dir = "/tmp/fpt_acc_det";
    auto r1 = run_experiment(cfg);
    auto r2 = run_experiment(cfg);
    note = (r1.metrics_json == r2.metrics_json) ? "metrics JSON byte-identical"
                                                : "metrics JSON differed";
    return (r1.metrics_json == r2.metrics_json) ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------- criterion 13

Outcome checkpoint_import_tier(std::string& note) {
    std::string dir;
    if (const char* env = std::getenv("TSFPT_PRETRAINED")) dir = env;
    if (dir.empty() && std::filesystem::exists("pretrained_checkpoint/manifest.json"))
        dir = "pretrained_checkpoint";
    if (dir.empty()) {
        note = "no pretrained checkpoint supplied (set TSFPT_PRETRAINED)";
        return Outcome::skip;
    }
    auto backbone = load_checkpoint(dir);
    ModelConfig mc;
    mc.backbone = backbone.cfg;
    mc.patching = PatchConfig{backbone.cfg.patch_len, backbone.cfg.patch_len,
                              8 * backbone.cfg.patch_len};
    mc.task.kind = TaskSpec::Kind::long_forecast;
    mc.task.context_len = mc.patching.context_len;
    mc.task.horizon = 4;
    mc.variant = Variant::frozen;
    auto model = Model::init(mc);
    load_params(model.backbone.registry, dir);
    model.backbone.apply_freeze_flags(Variant::frozen);

    data::SyntheticSpec spec;
    spec.kind = "sinusoid_mix";
    spec.length = 40 * mc.patching.context_len;
    auto ds = data::generate_synthetic(spec, 3);
    auto rows = data::build_forecast_rows(ds, 0, ds.length(), mc.task.context_len, 4,
                                          mc.task.context_len);
    const int b = std::min<std::size_t>(16, rows.rows.size());
    std::vector<double> patches;
    for (int r = 0; r < b; ++r) {
        auto pt = patch(rows.rows[r].context_norm, mc.patching);
        patches.insert(patches.end(), pt.begin(), pt.end());
    }
    Batch batch;
    batch.patches =
        Tensor::from({b, mc.num_patches(), mc.patching.patch_len}, std::move(patches));
    auto prof = analysis::token_similarity_profile(model, batch);
    std::ostringstream os;
    os << "layer0 mean " << prof.layer_means.front() << ", last layer "
       << prof.layer_means.back();
    note = os.str();
    return prof.layer_means.back() > prof.layer_means.front() ? Outcome::pass : Outcome::fail;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "gradient suite: ops + composed K=3 model vs central differences (20 seeds)",
         gradient_suite},
        {2, "freeze contract over 100 optimizer steps", freeze_contract},
        {3, "fresh-adapter forward identity on 10 random batches", adapter_identity},
        {4, "instance-norm round trip, patch-count grid, mask cardinality",
         preprocessing_contracts},
        {5, "rank-m attention optimum: eigen identity (20 instances) + descent", pca_optimality},
        {6, "attention Jacobian bound, 50 finite-difference instances", jacobian_bound},
        {7, "token-mean convergence rate slope in [-0.65, -0.35]", convergence_rate},
        {8, "synthetic forecasting beats repeat-last naive by >= 20% (3 seeds)",
         synthetic_forecast},
        {9, "synthetic anomaly: point-adjusted F1 >= 0.90 and spike argmax >= 95/100",
         synthetic_anomaly},
        {10, "synthetic two-class waveform accuracy >= 0.95", synthetic_classification},
        {11, "metrics match an independent transcription within 1e-12", metrics_oracle},
        {12, "bitwise-identical metrics JSON across two identical runs", determinism},
        {13, "checkpoint-import tier: deep-layer token similarity rises",
         checkpoint_import_tier},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string notes;
        Outcome outcome;
        try {
            outcome = c.run(notes);
        } catch (const std::exception& e) {
            outcome = Outcome::fail;
            notes = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = outcome == Outcome::pass ? "PASS"
                          : outcome == Outcome::fail ? "FAIL"
                                                     : "SKIP";
        std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", tag, c.id, c.label.c_str(), secs,
                    notes.empty() ? "" : " -- ", notes.c_str());
        std::fflush(stdout);
        failures += (outcome == Outcome::fail) ? 1 : 0;
    }
    if (failures == 0) std::printf("acceptance: all criteria green\n");
    else std::printf("acceptance: %d criterion(s) failed\n", failures);
    return failures;
}
