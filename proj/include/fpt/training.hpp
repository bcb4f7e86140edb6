#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fpt/data.hpp"
#include "fpt/metrics.hpp"
#include "fpt/model.hpp"

namespace fpt {

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 32;
    int max_epochs = 10;
    int patience = 3;  // early-stopping counter, strict improvement
    std::uint64_t seed = 7;
    double few_shot_fraction = 1.0;
    int window_stride = 1;

    void validate() const;
};

class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<Param>& params);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<const Tensor*, std::pair<std::vector<double>, std::vector<double>>> slots_;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    bool early_stopped = false;
    std::size_t trainable_parameters = 0;
};

// Contiguous slice of the last floor(fraction * train_len) timesteps; errors
// when the slice cannot hold one context+horizon window.
struct FewShotSlice {
    int begin = 0, end = 0;
};
FewShotSlice few_shot_subset(int train_begin, int train_end, double fraction, int min_required);

// Adam over the trainable parameters only; early stop after `patience`
// epochs without strict validation improvement; best weights restored.
TrainResult train(Model& model, const data::RowSet& train_rows, const data::RowSet& val_rows,
                  const TrainConfig& cfg);

TrainResult train_classification(Model& model, const data::ClassificationData& train_data,
                                 const data::ClassificationData& val_data,
                                 const TrainConfig& cfg);

struct ForecastEval {
    double mse = 0.0, mae = 0.0;
    // original-scale predictions and truths, one row per window row
    std::vector<std::vector<double>> predictions;
    std::vector<std::vector<double>> truths;
};
ForecastEval evaluate_forecast(const Model& model, const data::RowSet& rows, int batch_size);

struct ImputationEval {
    double mse = 0.0, mae = 0.0;  // masked positions only, original scale
};
ImputationEval evaluate_imputation(const Model& model, const data::RowSet& rows, int batch_size);

struct ClassificationEval {
    double accuracy = 0.0;
    std::vector<int> predicted;
};
ClassificationEval evaluate_classification(const Model& model,
                                           const data::ClassificationData& d, int batch_size);

struct AnomalyEval {
    std::vector<double> scores;      // per covered time point
    std::vector<int> point_index;    // absolute time of each score
    std::vector<double> recon_err;   // normalized per-point squared error
    std::vector<double> discrepancy; // per-point KL aggregate (0 without adapter)
};
AnomalyEval evaluate_anomaly(const Model& model, const data::RowSet& rows, int batch_size);

// Evaluation with a hard no-update contract: the parameter hash must be
// identical before and after, otherwise this throws.
ForecastEval zero_shot_eval(const Model& model, const data::RowSet& target_rows,
                            int batch_size);

double batch_loss(const Model& model, const data::RowSet& rows, int batch_size);

}  // namespace fpt
