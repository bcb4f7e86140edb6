#include "fpt/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fpt::metrics {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth,
                   const char* op) {
    if (pred.size() != truth.size())
        throw std::invalid_argument(std::string(op) + ": length mismatch " +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()));
    if (pred.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
}

// lag-k autocorrelation of x around its mean
double acf(std::span<const double> x, int k) {
    const int n = static_cast<int>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double num = 0.0, den = 0.0;
    for (int t = 0; t < n; ++t) den += (x[t] - mean) * (x[t] - mean);
    for (int t = k; t < n; ++t) num += (x[t] - mean) * (x[t - k] - mean);
    if (den == 0.0) return 0.0;
    return num / den;
}

bool seasonality_test(std::span<const double> x, int m) {
    const int n = static_cast<int>(x.size());
    if (m <= 1 || n < 3 * m) return false;
    double sum_sq = 0.0;
    for (int i = 1; i < m; ++i) {
        const double r = acf(x, i);
        sum_sq += r * r;
    }
    const double limit = 1.645 * std::sqrt((1.0 + 2.0 * sum_sq) / n);
    return std::fabs(acf(x, m)) > limit;
}

// Multiplicative classical decomposition seasonal indices, normalized to
// mean 1. Requires at least two full periods.
std::vector<double> seasonal_indices(std::span<const double> x, int m) {
    const int n = static_cast<int>(x.size());
    std::vector<double> trend(n, std::numeric_limits<double>::quiet_NaN());
    const int half = m / 2;
    if (m % 2 == 0) {
        for (int t = half; t < n - half; ++t) {
            double s = 0.5 * x[t - half] + 0.5 * x[t + half];
            for (int j = -half + 1; j <= half - 1; ++j) s += x[t + j];
            trend[t] = s / m;
        }
    } else {
        for (int t = half; t < n - half; ++t) {
            double s = 0.0;
            for (int j = -half; j <= half; ++j) s += x[t + j];
            trend[t] = s / m;
        }
    }
    std::vector<double> sums(m, 0.0);
    std::vector<int> counts(m, 0);
    for (int t = 0; t < n; ++t) {
        if (std::isnan(trend[t]) || trend[t] == 0.0) continue;
        sums[t % m] += x[t] / trend[t];
        ++counts[t % m];
    }
    std::vector<double> idx(m, 1.0);
    for (int s = 0; s < m; ++s)
        if (counts[s] > 0) idx[s] = sums[s] / counts[s];
    double mean = 0.0;
    for (double v : idx) mean += v;
    mean /= m;
    if (mean != 0.0)
        for (double& v : idx) v /= mean;
    return idx;
}

}  // namespace

double mse(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

double smape(std::span<const double> pred, std::span<const double> truth, int* excluded) {
    check_lengths(pred, truth, "smape");
    double s = 0.0;
    int used = 0, skipped = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double denom = std::fabs(pred[i]) + std::fabs(truth[i]);
        if (denom == 0.0) {
            ++skipped;
            continue;
        }
        s += std::fabs(pred[i] - truth[i]) / denom;
        ++used;
    }
    if (excluded) *excluded = skipped;
    if (used == 0) return 0.0;
    return 200.0 * s / static_cast<double>(used);
}

double mape(std::span<const double> pred, std::span<const double> truth, int* excluded) {
    check_lengths(pred, truth, "mape");
    double s = 0.0;
    int used = 0, skipped = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i] == 0.0) {
            ++skipped;
            continue;
        }
        s += std::fabs(pred[i] - truth[i]) / std::fabs(truth[i]);
        ++used;
    }
    if (excluded) *excluded = skipped;
    if (used == 0) return 0.0;
    return 100.0 * s / static_cast<double>(used);
}

double nd(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "nd");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        num += std::fabs(pred[i] - truth[i]);
        den += std::fabs(truth[i]);
    }
    if (den == 0.0) throw std::domain_error("nd: truth is identically zero");
    return num / den;
}

double mase(std::span<const double> pred, std::span<const double> truth,
            std::span<const double> insample, int m) {
    check_lengths(pred, truth, "mase");
    const int n = static_cast<int>(insample.size());
    if (m < 1) throw std::invalid_argument("mase: seasonal period must be >= 1");
    if (n <= m)
        throw std::invalid_argument("mase: insample length " + std::to_string(n) +
                                    " must exceed seasonal period " + std::to_string(m));
    double denom = 0.0;
    for (int j = m; j < n; ++j) denom += std::fabs(insample[j] - insample[j - m]);
    denom /= static_cast<double>(n - m);
    if (denom == 0.0) throw std::domain_error("mase: seasonal naive error is zero on insample");
    double num = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) num += std::fabs(pred[i] - truth[i]);
    num /= static_cast<double>(pred.size());
    return num / denom;
}

std::vector<double> naive2_forecast(std::span<const double> insample, int horizon, int m) {
    if (insample.empty()) throw std::invalid_argument("naive2: empty insample");
    const int n = static_cast<int>(insample.size());
    std::vector<double> out(horizon);
    if (seasonality_test(insample, m)) {
        const auto idx = seasonal_indices(insample, m);
        std::vector<double> deseason(n);
        for (int t = 0; t < n; ++t)
            deseason[t] = (idx[t % m] != 0.0) ? insample[t] / idx[t % m] : insample[t];
        const double last = deseason[n - 1];
        for (int h = 0; h < horizon; ++h) out[h] = last * idx[(n + h) % m];
    } else {
        const double last = insample[n - 1];
        for (int h = 0; h < horizon; ++h) out[h] = last;
    }
    return out;
}

double owa(std::span<const double> pred, std::span<const double> truth,
           std::span<const double> insample, int m) {
    const auto base = naive2_forecast(insample, static_cast<int>(truth.size()), m);
    const double smape_model = smape(pred, truth);
    const double smape_base = smape(base, truth);
    const double mase_model = mase(pred, truth, insample, m);
    const double mase_base = mase(base, truth, insample, m);
    if (smape_base == 0.0 || mase_base == 0.0)
        throw std::domain_error("owa: Naive2 baseline error is zero");
    return 0.5 * (smape_model / smape_base + mase_model / mase_base);
}

std::vector<int> point_adjust(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("point_adjust: length mismatch");
    std::vector<int> out = pred;
    const std::size_t n = truth.size();
    std::size_t i = 0;
    while (i < n) {
        if (truth[i] != 1) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && truth[j] == 1) ++j;
        bool hit = false;
        for (std::size_t k = i; k < j; ++k)
            if (pred[k] == 1) {
                hit = true;
                break;
            }
        if (hit)
            for (std::size_t k = i; k < j; ++k) out[k] = 1;
        i = j;
    }
    return out;
}

Prf precision_recall_f1(const std::vector<int>& pred, const std::vector<int>& truth,
                        bool adjust) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("precision_recall_f1: length mismatch " +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()));
    const std::vector<int> p = adjust ? point_adjust(pred, truth) : pred;
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 1 && truth[i] == 1) ++tp;
        else if (p[i] == 1 && truth[i] == 0) ++fp;
        else if (p[i] == 0 && truth[i] == 1) ++fn;
    }
    Prf r;
    r.precision = (tp + fp == 0) ? 0.0 : static_cast<double>(tp) / (tp + fp);
    r.recall = (tp + fn == 0) ? 0.0 : static_cast<double>(tp) / (tp + fn);
    r.f1 = (r.precision + r.recall == 0.0)
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

}  // namespace fpt::metrics
