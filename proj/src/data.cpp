#include "fpt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fpt::data {

Dataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_csv: empty file " + path);

    int num_cols = 1;
    for (char c : line)
        if (c == ',') ++num_cols;
    const int m = num_cols - 1;
    if (m < 1)
        throw std::runtime_error("load_csv: " + path +
                                 " needs a timestamp column plus at least one value column");

    Dataset d;
    d.channels.assign(m, {});
    int row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col == 0) {  // timestamp, kept only for ordering
                ++col;
                continue;
            }
            if (col > m)
                throw std::runtime_error("load_csv: row " + std::to_string(row) +
                                         " has too many columns");
            char* endp = nullptr;
            const double v = std::strtod(cell.c_str(), &endp);
            if (endp == cell.c_str() || *endp != '\0')
                throw std::runtime_error("load_csv: parse error at line " + std::to_string(row) +
                                         " column " + std::to_string(col + 1) + ": '" + cell +
                                         "'");
            if (std::isnan(v))
                throw std::runtime_error("load_csv: NaN value at row " + std::to_string(row) +
                                         " column " + std::to_string(col + 1));
            d.channels[col - 1].push_back(v);
            ++col;
        }
        if (col != m + 1)
            throw std::runtime_error("load_csv: row " + std::to_string(row) + " has " +
                                     std::to_string(col) + " columns, expected " +
                                     std::to_string(m + 1));
    }
    return d;
}

void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    f << "timestamp";
    for (int mch = 0; mch < d.num_channels(); ++mch) f << ",ch" << mch;
    if (!d.anomaly_labels.empty()) f << ",label";
    f << '\n';
    for (int t = 0; t < d.length(); ++t) {
        f << t;
        for (int mch = 0; mch < d.num_channels(); ++mch) {
            f << ',';
            f.precision(17);
            f << d.channels[mch][t];
        }
        if (!d.anomaly_labels.empty()) f << ',' << d.anomaly_labels[t];
        f << '\n';
    }
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Dataset d;
    constexpr double tau = 2.0 * std::numbers::pi;

    if (spec.kind == "sinusoid_mix") {
        for (int m = 0; m < spec.channels; ++m) {
            const double phase = tau * uni(rng);
            const double p2 = spec.period * (2.0 + uni(rng));
            std::vector<double> x(spec.length);
            for (int t = 0; t < spec.length; ++t)
                x[t] = std::cos(tau * t / spec.period + phase) +
                       0.5 * std::cos(tau * t / p2) + spec.noise * gauss(rng);
            d.channels.push_back(std::move(x));
        }
    } else if (spec.kind == "trend_plus_season") {
        for (int m = 0; m < spec.channels; ++m) {
            const double slope = spec.trend_slope * (0.5 + uni(rng));
            const double phase = tau * uni(rng);
            const double amp = 1.0 + uni(rng);
            std::vector<double> x(spec.length);
            for (int t = 0; t < spec.length; ++t)
                x[t] = slope * t + amp * std::sin(tau * t / spec.period + phase) +
                       spec.noise * gauss(rng);
            d.channels.push_back(std::move(x));
        }
    } else if (spec.kind == "periodic_with_anomalies") {
        std::vector<double> x(spec.length);
        const double phase = tau * uni(rng);
        for (int t = 0; t < spec.length; ++t)
            x[t] = std::sin(tau * t / spec.period + phase) + spec.noise * gauss(rng);
        d.anomaly_labels.assign(spec.length, 0);
        const int n_spikes =
            static_cast<int>(std::lround(spec.anomaly_fraction * spec.length));
        std::vector<int> idx(spec.length);
        for (int i = 0; i < spec.length; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int s = 0; s < n_spikes; ++s) {
            const int t = idx[s];
            const double sign = (rng() & 1) ? 1.0 : -1.0;
            x[t] += sign * spec.spike_magnitude;
            d.anomaly_labels[t] = 1;
        }
        d.channels.push_back(std::move(x));
    } else if (spec.kind == "two_class_waveforms") {
        for (int s = 0; s < spec.samples; ++s) {
            const int label = static_cast<int>(rng() % 2);
            const double phase = tau * uni(rng);
            std::vector<double> x(spec.sample_len);
            for (int t = 0; t < spec.sample_len; ++t) {
                const double arg = tau * t / spec.period + phase;
                const double base =
                    (label == 0) ? std::sin(arg) : (std::sin(arg) >= 0.0 ? 1.0 : -1.0);
                x[t] = base + spec.noise * gauss(rng);
            }
            d.sequences.push_back({std::move(x)});
            d.class_labels.push_back(label);
        }
    } else {
        throw std::invalid_argument("generate_synthetic: unknown kind '" + spec.kind + "'");
    }
    return d;
}

SplitRanges chronological_split(int length, const SplitFractions& f) {
    if (length < 3) throw std::invalid_argument("chronological_split: series too short");
    SplitRanges r;
    r.train_begin = 0;
    r.train_end = static_cast<int>(std::floor(f.train * length));
    r.val_begin = r.train_end;
    r.val_end = r.val_begin + static_cast<int>(std::floor(f.val * length));
    r.test_begin = r.val_end;
    r.test_end = length;
    if (r.train_end <= 0 || r.val_end <= r.val_begin || r.test_end <= r.test_begin)
        throw std::invalid_argument("chronological_split: degenerate split for length " +
                                    std::to_string(length));
    return r;
}

RowSet build_forecast_rows(const Dataset& d, int begin, int end, int context_len, int horizon,
                           int stride) {
    RowSet rs;
    rs.group = d.num_channels();
    const int last_start = end - context_len - horizon;
    for (int s = begin; s <= last_start; s += stride) {
        for (int m = 0; m < d.num_channels(); ++m) {
            const auto& series = d.channels[m];
            WindowRow row;
            row.channel = m;
            row.t0 = s;
            std::vector<double> ctx(series.begin() + s, series.begin() + s + context_len);
            auto [norm, stats] = instance_normalize(ctx);
            row.context_norm = std::move(norm);
            row.stats = stats;
            row.target_norm.resize(horizon);
            const double scale = std::sqrt(stats.variance + stats.eps);
            for (int h = 0; h < horizon; ++h)
                row.target_norm[h] = (series[s + context_len + h] - stats.mean) / scale;
            rs.rows.push_back(std::move(row));
        }
    }
    return rs;
}

RowSet build_imputation_rows(const Dataset& d, int begin, int end, int context_len, int stride,
                             double mask_ratio, std::uint64_t seed) {
    RowSet rs;
    rs.group = d.num_channels();
    const int last_start = end - context_len;
    int window_index = 0;
    for (int s = begin; s <= last_start; s += stride, ++window_index) {
        for (int m = 0; m < d.num_channels(); ++m) {
            const auto& series = d.channels[m];
            WindowRow row;
            row.channel = m;
            row.t0 = s;
            std::vector<double> ctx(series.begin() + s, series.begin() + s + context_len);
            auto [norm, stats] = instance_normalize(ctx);
            row.stats = stats;
            row.target_norm = norm;  // reconstruct the full normalized window
            row.mask = make_imputation_mask(
                context_len, mask_ratio,
                seed ^ (static_cast<std::uint64_t>(window_index) * 1000003ULL + m));
            row.context_norm.resize(context_len);
            for (int t = 0; t < context_len; ++t)
                row.context_norm[t] = norm[t] * row.mask[t];  // masked points read 0 (the mean)
            rs.rows.push_back(std::move(row));
        }
    }
    return rs;
}

RowSet build_anomaly_rows(const Dataset& d, int begin, int end, int context_len) {
    RowSet rs;
    rs.group = d.num_channels();
    for (int s = begin; s + context_len <= end; s += context_len) {
        for (int m = 0; m < d.num_channels(); ++m) {
            const auto& series = d.channels[m];
            WindowRow row;
            row.channel = m;
            row.t0 = s;
            std::vector<double> ctx(series.begin() + s, series.begin() + s + context_len);
            auto [norm, stats] = instance_normalize(ctx);
            row.context_norm = norm;
            row.target_norm = std::move(norm);
            row.stats = stats;
            rs.rows.push_back(std::move(row));
        }
    }
    return rs;
}

ClassificationData build_classification_data(const Dataset& d) {
    if (d.sequences.empty())
        throw std::invalid_argument("build_classification_data: dataset has no sequences");
    ClassificationData out;
    for (const auto& sample : d.sequences) {
        std::vector<std::vector<double>> rows;
        for (const auto& chan : sample) {
            auto [norm, stats] = instance_normalize(chan);
            (void)stats;
            rows.push_back(std::move(norm));
        }
        out.rows.push_back(std::move(rows));
    }
    out.labels = d.class_labels;
    return out;
}

}  // namespace fpt::data
