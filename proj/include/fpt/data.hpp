#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpt/preprocessing.hpp"

namespace fpt::data {

struct SyntheticSpec {
    std::string kind = "sinusoid_mix";  // sinusoid_mix | trend_plus_season |
                                        // periodic_with_anomalies | two_class_waveforms
    int length = 3000;
    int channels = 1;
    int period = 24;
    double noise = 0.05;
    double trend_slope = 0.01;
    double anomaly_fraction = 0.01;  // periodic_with_anomalies
    double spike_magnitude = 8.0;
    int samples = 200;    // two_class_waveforms
    int sample_len = 96;  // two_class_waveforms
};

struct Dataset {
    // continuous multivariate series [M][L]
    std::vector<std::vector<double>> channels;
    // per-point anomaly truth (periodic_with_anomalies)
    std::vector<int> anomaly_labels;
    // labeled sequences for classification: [sample][M][len]
    std::vector<std::vector<std::vector<double>>> sequences;
    std::vector<int> class_labels;

    int num_channels() const { return static_cast<int>(channels.size()); }
    int length() const { return channels.empty() ? 0 : static_cast<int>(channels[0].size()); }
};

// ETT-style layout: header row, first column a timestamp, remaining columns
// numeric channels. Errors carry line/column coordinates.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& d, const std::string& path);

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct SplitFractions {
    double train = 0.7, val = 0.1, test = 0.2;
};

struct SplitRanges {
    int train_begin = 0, train_end = 0;
    int val_begin = 0, val_end = 0;
    int test_begin = 0, test_end = 0;
};

SplitRanges chronological_split(int length, const SplitFractions& f);

// One univariate model row cut from a window.
struct WindowRow {
    std::vector<double> context_norm;  // [L]
    std::vector<double> target_norm;   // [O] forecasting, [L] reconstruction
    std::vector<double> mask;          // imputation only, 1 = observed
    NormStats stats;
    int channel = 0;
    int t0 = 0;  // absolute start of the context window
};

// Rows grouped per window: all M channels of one window are contiguous.
struct RowSet {
    std::vector<WindowRow> rows;
    int group = 1;  // rows per window
    std::size_t num_groups() const { return group ? rows.size() / group : 0; }
};

RowSet build_forecast_rows(const Dataset& d, int begin, int end, int context_len, int horizon,
                           int stride);
RowSet build_imputation_rows(const Dataset& d, int begin, int end, int context_len, int stride,
                             double mask_ratio, std::uint64_t seed);
// Non-overlapping reconstruction windows.
RowSet build_anomaly_rows(const Dataset& d, int begin, int end, int context_len);

struct ClassificationData {
    // normalized rows per sample: [sample][M][len]
    std::vector<std::vector<std::vector<double>>> rows;
    std::vector<int> labels;
};
ClassificationData build_classification_data(const Dataset& d);

}  // namespace fpt::data
