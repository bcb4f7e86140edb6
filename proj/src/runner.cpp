#include "fpt/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fpt/analysis.hpp"
#include "fpt/anomaly.hpp"
#include "json.hpp"

namespace fpt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!text.empty() && text.back() != '\n') f << '\n';
}

data::Dataset build_dataset(const DataConfig& cfg) {
    if (cfg.source == "csv") {
        if (cfg.csv_path.empty()) throw std::invalid_argument("data: csv source needs csv_path");
        return data::load_csv(cfg.csv_path);
    }
    if (cfg.source == "synthetic") return data::generate_synthetic(cfg.synthetic, cfg.seed);
    throw std::invalid_argument("data: unknown source '" + cfg.source + "'");
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_predictions_csv(const fs::path& path, const ForecastEval& ev) {
    std::ofstream f(path);
    f << "row,step,prediction,truth\n";
    for (std::size_t r = 0; r < ev.predictions.size(); ++r)
        for (std::size_t t = 0; t < ev.predictions[r].size(); ++t)
            f << r << ',' << t << ',' << format_double(ev.predictions[r][t]) << ','
              << format_double(ev.truths[r][t]) << '\n';
}

json history_json(const TrainResult& tr) {
    json h;
    h["best_epoch"] = tr.best_epoch;
    h["early_stopped"] = tr.early_stopped;
    h["trainable_parameters"] = tr.trainable_parameters;
    json epochs = json::array();
    for (const auto& e : tr.history)
        epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    h["epochs"] = epochs;
    return h;
}

struct PreparedRun {
    data::Dataset dataset;
    data::SplitRanges splits;
    int channels = 1;
    int train_begin = 0;  // after the few-shot cut
};

PreparedRun prepare(const ExperimentConfig& cfg) {
    PreparedRun p;
    p.dataset = build_dataset(cfg.dataset);
    if (cfg.task.kind == TaskSpec::Kind::classification) {
        p.channels = p.dataset.sequences.empty()
                         ? 1
                         : static_cast<int>(p.dataset.sequences[0].size());
        return p;
    }
    p.channels = std::max(1, p.dataset.num_channels());
    p.splits = data::chronological_split(p.dataset.length(), cfg.dataset.split);
    const int min_required =
        cfg.task.is_forecast() ? cfg.task.context_len + cfg.task.horizon : cfg.task.context_len;
    const auto slice = few_shot_subset(p.splits.train_begin, p.splits.train_end,
                                       cfg.train.few_shot_fraction, min_required);
    p.train_begin = slice.begin;
    return p;
}

Model build_model(const ExperimentConfig& cfg, int channels) {
    auto model = Model::init(cfg.model_config(channels));
    if (!cfg.checkpoint.empty()) {
        load_params(model.backbone.registry, cfg.checkpoint);
        model.backbone.apply_freeze_flags(cfg.variant);
    }
    return model;
}

json anomaly_metrics(const Model& model, const PreparedRun& prep,
                     const ExperimentConfig& cfg, const fs::path& out_dir) {
    const auto& splits = prep.splits;
    auto train_rows = data::build_anomaly_rows(prep.dataset, prep.train_begin,
                                               splits.train_end, cfg.task.context_len);
    auto test_rows = data::build_anomaly_rows(prep.dataset, splits.test_begin, splits.test_end,
                                              cfg.task.context_len);
    auto train_ev = evaluate_anomaly(model, train_rows, cfg.train.batch_size);
    auto test_ev = evaluate_anomaly(model, test_rows, cfg.train.batch_size);

    std::vector<double> combined = train_ev.scores;
    combined.insert(combined.end(), test_ev.scores.begin(), test_ev.scores.end());
    const double threshold = detection_threshold(combined, cfg.dataset.anomaly_ratio);
    auto predicted = threshold_and_detect(test_ev.scores, threshold);

    std::vector<int> truth(test_ev.scores.size(), 0);
    for (std::size_t i = 0; i < test_ev.point_index.size(); ++i)
        truth[i] = prep.dataset.anomaly_labels[test_ev.point_index[i]];

    const auto raw = metrics::precision_recall_f1(predicted, truth, false);
    const auto adj = metrics::precision_recall_f1(predicted, truth, true);

    std::ofstream f(out_dir / "scores.csv");
    f << "timestamp,score,label\n";
    for (std::size_t i = 0; i < test_ev.scores.size(); ++i)
        f << test_ev.point_index[i] << ',' << format_double(test_ev.scores[i]) << ','
          << predicted[i] << '\n';

    json m;
    m["threshold"] = threshold;
    m["precision"] = adj.precision;
    m["recall"] = adj.recall;
    m["f1"] = adj.f1;
    m["precision_raw"] = raw.precision;
    m["recall_raw"] = raw.recall;
    m["f1_raw"] = raw.f1;
    return m;
}

json forecast_metrics(const Model& model, const PreparedRun& prep,
                      const ExperimentConfig& cfg, const fs::path& out_dir,
                      const data::RowSet& test_rows) {
    auto ev = evaluate_forecast(model, test_rows, cfg.train.batch_size);
    write_predictions_csv(out_dir / "predictions.csv", ev);
    json m;
    m["mse"] = ev.mse;
    m["mae"] = ev.mae;
    if (cfg.task.kind == TaskSpec::Kind::short_forecast) {
        // M4-style metrics averaged per window, seasonal period from the data
        const int period = std::max(1, cfg.dataset.synthetic.period);
        double smape_acc = 0, mase_acc = 0, owa_acc = 0;
        int counted = 0;
        for (std::size_t r = 0; r < ev.predictions.size(); ++r) {
            const auto& row = test_rows.rows[r];
            std::vector<double> insample = instance_denormalize(row.context_norm, row.stats);
            try {
                smape_acc += metrics::smape(ev.predictions[r], ev.truths[r]);
                mase_acc += metrics::mase(ev.predictions[r], ev.truths[r], insample, period);
                owa_acc += metrics::owa(ev.predictions[r], ev.truths[r], insample, period);
                ++counted;
            } catch (const std::domain_error&) {
                // degenerate baseline on this window; skip it
            }
        }
        if (counted > 0) {
            m["smape"] = smape_acc / counted;
            m["mase"] = mase_acc / counted;
            m["owa"] = owa_acc / counted;
        }
    }
    (void)prep;
    return m;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    RunResult result;
    result.out_dir = cfg.out_dir;
    result.config_fingerprint = config_hash(cfg);
    fs::create_directories(cfg.out_dir);
    const fs::path out = cfg.out_dir;
    write_text(out / "config.json", experiment_to_json(cfg));
    write_text(out / "config_hash.txt", std::to_string(result.config_fingerprint));

    auto prep = prepare(cfg);
    auto model = build_model(cfg, prep.channels);

    json metrics;
    metrics["task"] = task_kind_to_string(cfg.task.kind);
    metrics["variant"] = variant_to_string(cfg.variant);
    metrics["config_hash"] = result.config_fingerprint;

    if (cfg.task.kind == TaskSpec::Kind::classification) {
        auto all = data::build_classification_data(prep.dataset);
        const std::size_t n = all.rows.size();
        const std::size_t n_train = static_cast<std::size_t>(cfg.dataset.split.train * n);
        const std::size_t n_val =
            n_train + static_cast<std::size_t>(cfg.dataset.split.val * n);
        data::ClassificationData tr, va, te;
        for (std::size_t i = 0; i < n; ++i) {
            auto& dst = (i < n_train) ? tr : (i < n_val) ? va : te;
            dst.rows.push_back(all.rows[i]);
            dst.labels.push_back(all.labels[i]);
        }
        auto tres = train_classification(model, tr, va, cfg.train);
        write_text(out / "history.json", history_json(tres).dump(2));
        auto ev = evaluate_classification(model, te, cfg.train.batch_size);
        metrics["accuracy"] = ev.accuracy;
        std::ofstream f(out / "predictions.csv");
        f << "sample,predicted,truth\n";
        for (std::size_t i = 0; i < ev.predicted.size(); ++i)
            f << i << ',' << ev.predicted[i] << ',' << te.labels[i] << '\n';
    } else if (cfg.task.kind == TaskSpec::Kind::anomaly) {
        auto train_rows = data::build_anomaly_rows(prep.dataset, prep.train_begin,
                                                   prep.splits.train_end, cfg.task.context_len);
        auto val_rows = data::build_anomaly_rows(prep.dataset, prep.splits.val_begin,
                                                 prep.splits.val_end, cfg.task.context_len);
        auto tres = train(model, train_rows, val_rows, cfg.train);
        write_text(out / "history.json", history_json(tres).dump(2));
        metrics.update(anomaly_metrics(model, prep, cfg, out));
    } else if (cfg.task.kind == TaskSpec::Kind::imputation) {
        const auto seed = cfg.dataset.seed;
        auto train_rows = data::build_imputation_rows(prep.dataset, prep.train_begin,
                                                      prep.splits.train_end,
                                                      cfg.task.context_len,
                                                      cfg.train.window_stride,
                                                      cfg.task.mask_ratio, seed);
        auto val_rows = data::build_imputation_rows(prep.dataset, prep.splits.val_begin,
                                                    prep.splits.val_end, cfg.task.context_len,
                                                    cfg.train.window_stride,
                                                    cfg.task.mask_ratio, seed + 1);
        auto test_rows = data::build_imputation_rows(prep.dataset, prep.splits.test_begin,
                                                     prep.splits.test_end, cfg.task.context_len,
                                                     cfg.train.window_stride,
                                                     cfg.task.mask_ratio, seed + 2);
        auto tres = train(model, train_rows, val_rows, cfg.train);
        write_text(out / "history.json", history_json(tres).dump(2));
        auto ev = evaluate_imputation(model, test_rows, cfg.train.batch_size);
        metrics["mse"] = ev.mse;
        metrics["mae"] = ev.mae;
    } else {  // forecasting
        auto train_rows = data::build_forecast_rows(prep.dataset, prep.train_begin,
                                                    prep.splits.train_end, cfg.task.context_len,
                                                    cfg.task.horizon, cfg.train.window_stride);
        auto val_rows = data::build_forecast_rows(prep.dataset, prep.splits.val_begin,
                                                  prep.splits.val_end, cfg.task.context_len,
                                                  cfg.task.horizon, cfg.train.window_stride);
        auto test_rows = data::build_forecast_rows(prep.dataset, prep.splits.test_begin,
                                                   prep.splits.test_end, cfg.task.context_len,
                                                   cfg.task.horizon, cfg.train.window_stride);
        if (train_rows.rows.empty())
            throw std::invalid_argument("run: no training windows fit the few-shot slice");
        auto tres = train(model, train_rows, val_rows, cfg.train);
        write_text(out / "history.json", history_json(tres).dump(2));
        metrics.update(forecast_metrics(model, prep, cfg, out, test_rows));
    }

    if (model.adapters)
        write_text(out / "gates.json", report_gate_coefficients(*model.adapters));
    model.save((out / "checkpoint").string());

    result.metrics_json = metrics.dump(2);
    write_text(out / "metrics.json", result.metrics_json);

    std::ostringstream summary;
    summary << "run " << result.config_fingerprint << "\n"
            << "task      " << task_kind_to_string(cfg.task.kind) << "\n"
            << "variant   " << variant_to_string(cfg.variant) << "\n"
            << "trainable " << model.trainable_count() << " parameters\n";
    for (auto it = metrics.begin(); it != metrics.end(); ++it)
        if (it->is_number()) summary << it.key() << " = " << it.value().dump() << "\n";
    write_text(out / "summary.txt", summary.str());
    return result;
}

RunResult run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_dir) {
    std::string ckpt = checkpoint_dir.empty() ? cfg.checkpoint : checkpoint_dir;
    if (ckpt.empty()) throw std::invalid_argument("eval: no checkpoint given");
    if (fs::exists(fs::path(ckpt) / "checkpoint"))
        ckpt = (fs::path(ckpt) / "checkpoint").string();

    const json manifest = json::parse(read_manifest(ckpt));
    auto model = Model::init(model_config_from_json(manifest.at("config").dump()));
    model.load(ckpt);

    RunResult result;
    result.out_dir = cfg.out_dir;
    result.config_fingerprint = config_hash(cfg);
    fs::create_directories(cfg.out_dir);
    const fs::path out = cfg.out_dir;

    auto prep = prepare(cfg);
    json metrics;
    metrics["task"] = task_kind_to_string(model.cfg.task.kind);
    if (model.cfg.task.kind == TaskSpec::Kind::classification) {
        auto all = data::build_classification_data(prep.dataset);
        auto ev = evaluate_classification(model, all, cfg.train.batch_size);
        metrics["accuracy"] = ev.accuracy;
    } else if (model.cfg.task.kind == TaskSpec::Kind::anomaly) {
        metrics.update(anomaly_metrics(model, prep, cfg, out));
    } else if (model.cfg.task.kind == TaskSpec::Kind::imputation) {
        auto rows = data::build_imputation_rows(prep.dataset, prep.splits.test_begin,
                                                prep.splits.test_end,
                                                model.cfg.task.context_len,
                                                cfg.train.window_stride,
                                                model.cfg.task.mask_ratio, cfg.dataset.seed + 2);
        auto ev = evaluate_imputation(model, rows, cfg.train.batch_size);
        metrics["mse"] = ev.mse;
        metrics["mae"] = ev.mae;
    } else {
        auto rows = data::build_forecast_rows(prep.dataset, prep.splits.test_begin,
                                              prep.splits.test_end, model.cfg.task.context_len,
                                              model.cfg.task.horizon, cfg.train.window_stride);
        metrics.update(forecast_metrics(model, prep, cfg, out, rows));
    }
    result.metrics_json = metrics.dump(2);
    write_text(out / "metrics.json", result.metrics_json);
    return result;
}

RunResult run_zero_shot(const ExperimentConfig& cfg) {
    if (!cfg.zero_shot_target)
        throw std::invalid_argument("zero-shot: config has no zero_shot_target");
    if (!cfg.task.is_forecast())
        throw std::invalid_argument("zero-shot: protocol is defined for forecasting tasks");

    // source model: trained here (sub-run) unless a checkpoint is supplied
    ExperimentConfig source_cfg = cfg;
    source_cfg.out_dir = (fs::path(cfg.out_dir) / "source").string();
    Model model = [&]() {
        if (!cfg.checkpoint.empty()) {
            std::string ckpt = cfg.checkpoint;
            if (fs::exists(fs::path(ckpt) / "checkpoint"))
                ckpt = (fs::path(ckpt) / "checkpoint").string();
            const json manifest = json::parse(read_manifest(ckpt));
            auto m = Model::init(model_config_from_json(manifest.at("config").dump()));
            m.load(ckpt);
            return m;
        }
        run_experiment(source_cfg);
        auto prep = prepare(source_cfg);
        auto m = Model::init(source_cfg.model_config(prep.channels));
        m.load((fs::path(source_cfg.out_dir) / "checkpoint").string());
        return m;
    }();

    // non-overlapping history/test pairs tiled across the whole target series
    auto target = build_dataset(*cfg.zero_shot_target);
    const int block = cfg.task.context_len + cfg.task.horizon;
    auto rows = data::build_forecast_rows(target, 0, target.length(), cfg.task.context_len,
                                          cfg.task.horizon, block);
    if (rows.rows.empty())
        throw std::invalid_argument("zero-shot: target series shorter than one window");

    const std::uint64_t hash_before = model.param_hash();
    auto ev = zero_shot_eval(model, rows, cfg.train.batch_size);

    RunResult result;
    result.out_dir = cfg.out_dir;
    result.config_fingerprint = config_hash(cfg);
    fs::create_directories(cfg.out_dir);
    const fs::path out = cfg.out_dir;
    write_text(out / "config.json", experiment_to_json(cfg));
    write_predictions_csv(out / "target_predictions.csv", ev);

    // dataset-specific conventions all emitted; the caller picks theirs
    std::vector<double> pooled_pred, pooled_truth;
    for (std::size_t r = 0; r < ev.predictions.size(); ++r) {
        pooled_pred.insert(pooled_pred.end(), ev.predictions[r].begin(),
                           ev.predictions[r].end());
        pooled_truth.insert(pooled_truth.end(), ev.truths[r].begin(), ev.truths[r].end());
    }
    json metrics;
    metrics["mse"] = ev.mse;
    metrics["mae"] = ev.mae;
    metrics["smape"] = metrics::smape(pooled_pred, pooled_truth);
    metrics["mape"] = metrics::mape(pooled_pred, pooled_truth);
    try {
        metrics["nd"] = metrics::nd(pooled_pred, pooled_truth);
    } catch (const std::domain_error&) {
    }
    metrics["model_hash_before"] = hash_before;
    metrics["model_hash_after"] = model.param_hash();
    result.metrics_json = metrics.dump(2);
    write_text(out / "metrics.json", result.metrics_json);
    return result;
}

RunResult run_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions) {
    if (fractions.empty()) throw std::invalid_argument("sweep: no fractions");
    RunResult result;
    result.out_dir = cfg.out_dir;
    result.config_fingerprint = config_hash(cfg);
    fs::create_directories(cfg.out_dir);
    std::ostringstream csv;
    csv << "fraction,mse,mae\n";
    json rows = json::array();
    for (double f : fractions) {
        ExperimentConfig sub = cfg;
        sub.train.few_shot_fraction = f;
        std::ostringstream name;
        name << "fraction_" << f;
        sub.out_dir = (fs::path(cfg.out_dir) / name.str()).string();
        auto r = run_experiment(sub);
        const json m = json::parse(r.metrics_json);
        csv << f << ',' << format_double(m.at("mse").get<double>()) << ','
            << format_double(m.at("mae").get<double>()) << '\n';
        rows.push_back({{"fraction", f}, {"mse", m.at("mse")}, {"mae", m.at("mae")}});
    }
    write_text(fs::path(cfg.out_dir) / "sweep.csv", csv.str());
    result.metrics_json = rows.dump(2);
    write_text(fs::path(cfg.out_dir) / "sweep.json", result.metrics_json);
    return result;
}

namespace {

Batch probe_batch(const ExperimentConfig& cfg, const Model& model,
                  const data::Dataset& dataset, int max_windows) {
    auto splits = data::chronological_split(dataset.length(), cfg.dataset.split);
    auto rows = data::build_forecast_rows(dataset, splits.test_begin, splits.test_end,
                                          cfg.task.context_len,
                                          std::max(1, cfg.task.horizon),
                                          std::max(1, cfg.task.context_len / 2));
    if (rows.rows.empty())
        throw std::invalid_argument("analysis: test split has no probe windows");
    const int b = std::min<int>(max_windows, static_cast<int>(rows.rows.size()));
    const int n = model.cfg.num_patches();
    const int p = model.cfg.patching.patch_len;
    std::vector<double> patches;
    for (int r = 0; r < b; ++r) {
        auto pt = patch(rows.rows[r].context_norm, model.cfg.patching);
        patches.insert(patches.end(), pt.begin(), pt.end());
    }
    Batch batch;
    batch.patches = Tensor::from({b, n, p}, std::move(patches));
    return batch;
}

void write_profile_csv(const fs::path& path, const analysis::SimilarityProfile& prof) {
    std::ofstream f(path);
    f << "layer,mean_cosine,pairs\n";
    for (std::size_t l = 0; l < prof.layer_means.size(); ++l)
        f << l << ',' << format_double(prof.layer_means[l]) << ',' << prof.pair_counts[l]
          << '\n';
}

}  // namespace

RunResult run_analysis(const ExperimentConfig& cfg, const std::string& probe,
                       std::uint64_t seed) {
    RunResult result;
    result.out_dir = cfg.out_dir;
    result.config_fingerprint = config_hash(cfg);
    fs::create_directories(cfg.out_dir);
    const fs::path out = cfg.out_dir;
    json report;
    report["probe"] = probe;
    report["seed"] = seed;

    if (probe == "similarity" || probe == "pca-sub") {
        auto dataset = build_dataset(cfg.dataset);
        auto model = build_model(cfg, std::max(1, dataset.num_channels()));
        auto batch = probe_batch(cfg, model, dataset, 16);
        auto prof = analysis::token_similarity_profile(model, batch);
        write_profile_csv(out / "similarity.csv", prof);
        report["layer_means"] = prof.layer_means;
        {
            std::ofstream f(out / "similarity_hist.csv");
            f << "layer,bin,count\n";
            for (std::size_t l = 0; l < prof.histograms.size(); ++l)
                for (std::size_t b = 0; b < prof.histograms[l].size(); ++b)
                    f << l << ',' << b << ',' << prof.histograms[l][b] << '\n';
        }
        if (probe == "pca-sub") {
            const int d = cfg.backbone.d_model;
            json ranks = json::object();
            std::ofstream f(out / "pca_similarity.csv");
            f << "layer,attention,rank_quarter,rank_half,rank_full\n";
            auto quarter = analysis::token_similarity_profile(model, batch, std::max(1, d / 4));
            auto half = analysis::token_similarity_profile(model, batch, std::max(1, d / 2));
            auto full = analysis::token_similarity_profile(model, batch, d);
            for (std::size_t l = 0; l < prof.layer_means.size(); ++l)
                f << l << ',' << format_double(prof.layer_means[l]) << ','
                  << format_double(quarter.layer_means[l]) << ','
                  << format_double(half.layer_means[l]) << ','
                  << format_double(full.layer_means[l]) << '\n';
            ranks["quarter"] = quarter.layer_means;
            ranks["half"] = half.layer_means;
            ranks["full"] = full.layer_means;
            report["pca_substitution"] = ranks;
        }
    } else if (probe == "mix") {
        auto dataset = build_dataset(cfg.dataset);
        auto model = build_model(cfg, std::max(1, dataset.num_channels()));
        // checkpoint import lands in model.backbone when given; clone() gets us
        // a detached copy to mix against
        auto pretrained = model.backbone.clone();
        auto random_state = BackboneState::init(model.cfg.backbone, seed + 777);
        auto batch = probe_batch(cfg, model, dataset, 16);
        std::ofstream f(out / "mix_similarity.csv");
        f << "alpha,last_layer_mean,layer0_mean\n";
        json curve = json::array();
        for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            analysis::mix_weights(model.backbone, pretrained, random_state, alpha);
            auto prof = analysis::token_similarity_profile(model, batch);
            f << alpha << ',' << format_double(prof.layer_means.back()) << ','
              << format_double(prof.layer_means.front()) << '\n';
            curve.push_back({{"alpha", alpha},
                             {"layer_means", prof.layer_means}});
        }
        report["mix_curve"] = curve;
    } else if (probe == "theorem1") {
        auto rep = analysis::verify_pca_optimality(4, 50, 2, seed, 10);
        report["eigenvalues"] = rep.eigenvalues;
        report["analytic_objective"] = rep.analytic_objective;
        report["eigen_tail_sum"] = rep.eigen_tail_sum;
        report["identity_gap"] = rep.identity_gap;
        report["descent_objectives"] = rep.descent_objectives;
        report["descent_gaps"] = rep.descent_gaps;
        report["good_starts"] = rep.good_starts;
        report["degenerate"] = rep.degenerate;
    } else if (probe == "lemma-bound") {
        int viol_strict = 0, viol_relaxed = 0;
        json per_seed = json::array();
        std::ofstream f(out / "lemma_bound.csv");
        f << "seed,jacobian_norm,bound_strict,bound_relaxed\n";
        for (std::uint64_t s = 1; s <= 50; ++s) {
            auto rep = analysis::verify_jacobian_bound(4, 3, seed * 1000 + s, 0.1);
            viol_strict += rep.violates_strict ? 1 : 0;
            viol_relaxed += rep.violates_relaxed ? 1 : 0;
            f << s << ',' << format_double(rep.jacobian_norm) << ','
              << format_double(rep.bound_strict) << ',' << format_double(rep.bound_relaxed)
              << '\n';
            per_seed.push_back({{"jacobian", rep.jacobian_norm},
                                {"bound_strict", rep.bound_strict},
                                {"bound_relaxed", rep.bound_relaxed}});
        }
        report["violations_strict_form"] = viol_strict;
        report["violations_relaxed_form"] = viol_relaxed;
        report["instances"] = per_seed;
    } else if (probe == "convergence") {
        auto rep = analysis::verify_convergence_rate({16, 64, 256, 1024}, 16, seed, 50);
        std::ofstream f(out / "convergence.csv");
        f << "n,mean_deviation\n";
        for (std::size_t i = 0; i < rep.ns.size(); ++i)
            f << rep.ns[i] << ',' << format_double(rep.mean_deviation[i]) << '\n';
        report["ns"] = rep.ns;
        report["mean_deviation"] = rep.mean_deviation;
        report["slope"] = rep.slope;
        report["psi_over_sqrt_d"] = rep.psi_over_sqrt_d;
        report["psi_over_sqrt_2d"] = rep.psi_over_sqrt_2d;
    } else if (probe == "conditioning") {
        auto dataset = build_dataset(cfg.dataset);
        auto model = build_model(cfg, std::max(1, dataset.num_channels()));
        auto batch = probe_batch(cfg, model, dataset, 64);
        const int d = cfg.backbone.d_model;
        const int n = batch.patches->shape[0];
        auto feats = analysis::model_feature_maps(model, batch);
        report["sigma_min"] = analysis::conditioning_sigma_min(feats, n, d);
        ExperimentConfig fresh = cfg;
        fresh.variant = Variant::no_pretrain;
        fresh.seed = seed + 4242;
        auto fresh_model = Model::init(fresh.model_config(std::max(1, dataset.num_channels())));
        auto fresh_feats = analysis::model_feature_maps(fresh_model, batch);
        report["sigma_min_no_pretrain"] =
            analysis::conditioning_sigma_min(fresh_feats, n, d);
    } else {
        throw std::invalid_argument("analyze: unknown probe '" + probe + "'");
    }

    result.metrics_json = report.dump(2);
    write_text(out / "report.json", result.metrics_json);
    return result;
}

}  // namespace fpt
