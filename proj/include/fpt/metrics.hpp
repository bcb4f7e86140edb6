#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace fpt::metrics {

// Named metric values plus the dataset convention tag and the count of
// points skipped for undefined denominators.
struct MetricReport {
    std::map<std::string, double> values;
    std::string convention;
    int excluded_points = 0;
};

double mse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

// 200/H convention; points with |p|+|t| == 0 are excluded and counted.
double smape(std::span<const double> pred, std::span<const double> truth,
             int* excluded = nullptr);
// 100/H convention; points with t == 0 are excluded and counted.
double mape(std::span<const double> pred, std::span<const double> truth,
            int* excluded = nullptr);
// sum |p-t| / sum |t|; errors when the truth is identically zero.
double nd(std::span<const double> pred, std::span<const double> truth);

// Mean absolute scaled error against the seasonal naive differences of the
// insample series (period m >= 1; insample must be longer than m).
double mase(std::span<const double> pred, std::span<const double> truth,
            std::span<const double> insample, int m);

// M4-style Naive2: seasonally adjusted naive when the insample passes a 90%
// autocorrelation seasonality test, plain naive otherwise.
std::vector<double> naive2_forecast(std::span<const double> insample, int horizon, int m);

// 0.5 * (smape/smape_naive2 + mase/mase_naive2).
double owa(std::span<const double> pred, std::span<const double> truth,
           std::span<const double> insample, int m);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Point adjustment: any hit inside a true anomalous segment marks the whole
// segment as detected.
std::vector<int> point_adjust(const std::vector<int>& pred, const std::vector<int>& truth);
Prf precision_recall_f1(const std::vector<int>& pred, const std::vector<int>& truth,
                        bool adjust);

}  // namespace fpt::metrics
