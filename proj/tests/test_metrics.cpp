#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "fpt/metrics.hpp"

using namespace fpt::metrics;

// ---------------------------------------------------------------------------
// Independent oracle: a second, deliberately naive transcription of every
// formula. The production code must agree with these to 1e-12.
namespace oracle {

double mse(const std::vector<double>& p, const std::vector<double>& t) {
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
    return acc / p.size();
}

double mae(const std::vector<double>& p, const std::vector<double>& t) {
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
    return acc / p.size();
}

double smape(const std::vector<double>& p, const std::vector<double>& t) {
    double acc = 0;
    int used = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::abs(p[i]) + std::abs(t[i]);
        if (d == 0) continue;
        acc += std::abs(p[i] - t[i]) / d;
        ++used;
    }
    return used ? 200.0 * acc / used : 0.0;
}

double mape(const std::vector<double>& p, const std::vector<double>& t) {
    double acc = 0;
    int used = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (t[i] == 0) continue;
        acc += std::abs((p[i] - t[i]) / t[i]);
        ++used;
    }
    return used ? 100.0 * acc / used : 0.0;
}

double nd(const std::vector<double>& p, const std::vector<double>& t) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        num += std::abs(p[i] - t[i]);
        den += std::abs(t[i]);
    }
    return num / den;
}

double mase(const std::vector<double>& p, const std::vector<double>& t,
            const std::vector<double>& ins, int m) {
    double den = 0;
    for (std::size_t j = m; j < ins.size(); ++j) den += std::abs(ins[j] - ins[j - m]);
    den /= static_cast<double>(ins.size() - m);
    double num = 0;
    for (std::size_t i = 0; i < p.size(); ++i) num += std::abs(p[i] - t[i]);
    num /= static_cast<double>(p.size());
    return num / den;
}

void prf(const std::vector<int>& pred, const std::vector<int>& truth, double& prec,
         double& rec, double& f1) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        tp += (pred[i] == 1 && truth[i] == 1);
        fp += (pred[i] == 1 && truth[i] == 0);
        fn += (pred[i] == 0 && truth[i] == 1);
    }
    prec = (tp + fp) ? double(tp) / (tp + fp) : 0.0;
    rec = (tp + fn) ? double(tp) / (tp + fn) : 0.0;
    f1 = (prec + rec > 0) ? 2 * prec * rec / (prec + rec) : 0.0;
}

}  // namespace oracle

TEST_CASE("trivial metric identities") {
    std::vector<double> same{1.5, -2.0, 3.25};
    CHECK(mse(same, same) == 0.0);
    CHECK(mae(same, same) == 0.0);
    CHECK(smape(same, same) == 0.0);
    CHECK(mape(same, same) == 0.0);
    CHECK(nd(same, same) == 0.0);

    std::vector<double> p{2.0}, t{0.0};
    CHECK(mse(p, t) == 4.0);
    CHECK(mae(p, t) == 2.0);

    std::vector<double> p2{2.0}, t2{1.0};
    CHECK(smape(p2, t2) == doctest::Approx(200.0 / 3).epsilon(1e-12));

    std::vector<double> p3{110.0}, t3{100.0};
    CHECK(mape(p3, t3) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(nd(p3, t3) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("scale invariance of MAPE and ND") {
    std::vector<double> p{3, 5, 2}, t{4, 4, 3};
    std::vector<double> pc(3), tc(3);
    for (int i = 0; i < 3; ++i) {
        pc[i] = 17.0 * p[i];
        tc[i] = 17.0 * t[i];
    }
    CHECK(mape(pc, tc) == doctest::Approx(mape(p, t)).epsilon(1e-12));
    CHECK(nd(pc, tc) == doctest::Approx(nd(p, t)).epsilon(1e-12));
}

TEST_CASE("sMAPE stays within [0, 200] and counts exclusions") {
    std::vector<double> p{1, 0, -1}, t{-1, 0, 1};
    int excluded = 0;
    const double v = smape(p, t, &excluded);
    CHECK(v == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(excluded == 1);
}

TEST_CASE("MASE of the self-referential seasonal naive equals one exactly") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(1.0, 9.0);
    const int m = 4, n = 40;
    std::vector<double> y(n);
    for (auto& v : y) v = u(rng);
    std::vector<double> truth(y.begin() + m, y.end());
    std::vector<double> pred(y.begin(), y.end() - m);
    CHECK(mase(pred, truth, y, m) == 1.0);
}

TEST_CASE("MASE validates the insample length") {
    std::vector<double> p{1}, t{2}, ins{1, 2};
    CHECK_THROWS_AS(mase(p, t, ins, 4), std::invalid_argument);
}

TEST_CASE("Naive2 reduces to plain naive on non-seasonal data") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> ins(50);
    for (auto& v : ins) v = u(rng);
    auto f = naive2_forecast(ins, 5, 12);
    for (double v : f) CHECK(v == ins.back());
}

TEST_CASE("Naive2 reseasonalizes strongly periodic data") {
    const int m = 12, n = 10 * m;
    std::vector<double> ins(n);
    for (int t = 0; t < n; ++t)
        ins[t] = 10.0 * (1.0 + 0.5 * std::sin(2 * M_PI * (t % m) / m));
    auto f = naive2_forecast(ins, m, m);
    // forecast repeats the seasonal shape, not the last value
    double spread = 0.0;
    for (double v : f) spread = std::max(spread, std::fabs(v - f[0]));
    CHECK(spread > 1.0);
}

TEST_CASE("OWA is 0 for perfect forecasts and 1 for Naive2 itself") {
    const int m = 4, n = 48, h = 8;
    std::vector<double> ins(n);
    for (int t = 0; t < n; ++t) ins[t] = 5.0 + 2.0 * std::sin(2 * M_PI * t / m) + 0.01 * t;
    std::vector<double> truth(h);
    for (int t = 0; t < h; ++t)
        truth[t] = 5.0 + 2.0 * std::sin(2 * M_PI * (n + t) / m) + 0.01 * (n + t);
    CHECK(owa(truth, truth, ins, m) == 0.0);
    auto base = naive2_forecast(ins, h, m);
    CHECK(owa(base, truth, ins, m) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("precision/recall/F1 conventions") {
    std::vector<int> truth{0, 1, 1, 0, 1};
    CHECK(precision_recall_f1(truth, truth, false).f1 == 1.0);
    std::vector<int> none{0, 0, 0, 0, 0};
    auto r = precision_recall_f1(none, truth, false);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
}

TEST_CASE("point adjustment marks whole hit segments") {
    std::vector<int> truth{0, 1, 1, 1, 0};
    std::vector<int> pred{0, 0, 1, 0, 0};
    auto adj = point_adjust(pred, truth);
    CHECK(adj == std::vector<int>{0, 1, 1, 1, 0});
    CHECK(precision_recall_f1(pred, truth, true).f1 == 1.0);

    std::vector<int> truth2{0, 1, 1, 0};
    std::vector<int> pred2{0, 1, 0, 0};
    CHECK(point_adjust(pred2, truth2) == std::vector<int>{0, 1, 1, 0});
}

TEST_CASE("point adjustment never hurts recall nor adds false positives") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 50;
        std::vector<int> truth(n), pred(n);
        for (int i = 0; i < n; ++i) {
            truth[i] = (rng() % 4 == 0);
            pred[i] = (rng() % 3 == 0);
        }
        auto raw = precision_recall_f1(pred, truth, false);
        auto adj_pred = point_adjust(pred, truth);
        auto adj = precision_recall_f1(pred, truth, true);
        CHECK(adj.recall >= raw.recall);
        for (int i = 0; i < n; ++i)
            if (truth[i] == 0) CHECK(adj_pred[i] == pred[i]);
    }
}

TEST_CASE("all metrics match the independent oracle on 100 random instances") {
    std::mt19937_64 rng(20240617);
    std::uniform_real_distribution<double> u(0.5, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 4 + static_cast<int>(rng() % 20);
        const int m = 1 + static_cast<int>(rng() % 6);
        const int n = m + 10 + static_cast<int>(rng() % 30);
        std::vector<double> p(h), t(h), ins(n);
        for (auto& v : p) v = u(rng);
        for (auto& v : t) v = u(rng);
        for (auto& v : ins) v = u(rng);

        CHECK(mse(p, t) == doctest::Approx(oracle::mse(p, t)).epsilon(1e-12));
        CHECK(mae(p, t) == doctest::Approx(oracle::mae(p, t)).epsilon(1e-12));
        CHECK(smape(p, t) == doctest::Approx(oracle::smape(p, t)).epsilon(1e-12));
        CHECK(mape(p, t) == doctest::Approx(oracle::mape(p, t)).epsilon(1e-12));
        CHECK(nd(p, t) == doctest::Approx(oracle::nd(p, t)).epsilon(1e-12));
        CHECK(mase(p, t, ins, m) == doctest::Approx(oracle::mase(p, t, ins, m)).epsilon(1e-12));

        const int len = 30;
        std::vector<int> pl(len), tl(len);
        for (int i = 0; i < len; ++i) {
            pl[i] = rng() % 2;
            tl[i] = rng() % 2;
        }
        double prec, rec, f1;
        oracle::prf(pl, tl, prec, rec, f1);
        auto got = precision_recall_f1(pl, tl, false);
        CHECK(got.precision == doctest::Approx(prec).epsilon(1e-12));
        CHECK(got.recall == doctest::Approx(rec).epsilon(1e-12));
        CHECK(got.f1 == doctest::Approx(f1).epsilon(1e-12));
    }
}
