#include <cmath>
#include <random>

#include "doctest.h"
#include "fpt/anomaly.hpp"
#include "gradcheck.hpp"

using namespace fpt;

TEST_CASE("symmetrization: symmetric zero-diagonal input is a fixed point") {
    const int t = 3;
    std::vector<double> a{0, 0.5, 0.5, 0.5, 0, 0.5, 0.5, 0.5, 0};
    auto raw = symmetrize_attention_raw(a, t);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(raw[i] == doctest::Approx(a[i]));
    auto norm = symmetrize_attention(a, t);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(norm[i] == doctest::Approx(a[i]));
}

TEST_CASE("symmetrization of the identity renormalizes back to the identity") {
    const int t = 4;
    std::vector<double> eye(16, 0.0);
    for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    auto raw = symmetrize_attention_raw(eye, t);
    for (int i = 0; i < 4; ++i) CHECK(raw[i * 4 + i] == doctest::Approx(0.5));
    auto norm = symmetrize_attention(eye, t);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(norm[i * 4 + j] == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("symmetrized matrix is symmetric off-diagonal for random stochastic input") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    const int t = 3;
    std::vector<double> a(9);
    for (int i = 0; i < t; ++i) {
        double s = 0;
        for (int j = 0; j < t; ++j) {
            a[i * t + j] = u(rng);
            s += a[i * t + j];
        }
        for (int j = 0; j < t; ++j) a[i * t + j] /= s;
    }
    auto raw = symmetrize_attention_raw(a, t);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j)
            CHECK(std::fabs(raw[i * t + j] - raw[j * t + i]) < 1e-12);
    // idempotence on the renormalized output when it is already symmetric
    auto norm = symmetrize_attention(a, t);
    for (int i = 0; i < t; ++i) {
        double s = 0;
        for (int j = 0; j < t; ++j) s += norm[i * t + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gaussian prior limits: delta at small sigma, uniform at huge sigma") {
    {
        auto p = gaussian_prior(5, std::vector<double>(5, 1e-3), false);
        for (int i = 0; i < 5; ++i)
            CHECK(p[i * 5 + i] == doctest::Approx(1.0).epsilon(1e-9));
    }
    {
        auto p = gaussian_prior(8, std::vector<double>(8, 1e6), false);
        for (int i = 0; i < 8; ++i) {
            double mn = 1.0, mx = 0.0;
            for (int j = 0; j < 8; ++j) {
                mn = std::min(mn, p[i * 8 + j]);
                mx = std::max(mx, p[i * 8 + j]);
            }
            CHECK(mx - mn < 1e-3);
        }
    }
}

TEST_CASE("gaussian prior rows sum to one, peak at the diagonal, decay monotonically") {
    auto p = gaussian_prior(3, {1.0, 1.0, 1.0}, false);
    for (int i = 0; i < 3; ++i) {
        double s = 0;
        for (int j = 0; j < 3; ++j) s += p[i * 3 + j];
        CHECK(std::fabs(s - 1.0) <= 1e-12);
    }
    // row 1 is symmetric around the center
    CHECK(p[1 * 3 + 0] == doctest::Approx(p[1 * 3 + 2]).epsilon(1e-12));
    // monotone decay away from the diagonal
    auto q = gaussian_prior(7, std::vector<double>(7, 1.5), false);
    for (int i = 0; i < 7; ++i)
        for (int j = 1; j < 7; ++j) {
            const int d0 = std::abs(i - (j - 1)), d1 = std::abs(i - j);
            if (d1 > d0) CHECK(q[i * 7 + j] <= q[i * 7 + (j - 1)] + 1e-15);
        }
}

TEST_CASE("discrepancy: zero at equality, log T against a one-hot, non-negative") {
    const int t = 4;
    auto prior = gaussian_prior(t, std::vector<double>(t, 1e6), false);  // near uniform
    std::vector<double> hot(t * t, 0.0);
    for (int i = 0; i < t; ++i) hot[i * t + i] = 1.0;
    auto kl = discrepancy(hot, prior, t);
    for (int i = 0; i < t; ++i) CHECK(kl[i] == doctest::Approx(std::log(4.0)).epsilon(1e-3));

    auto self = discrepancy(prior, prior, t);
    for (int i = 0; i < t; ++i) CHECK(std::fabs(self[i]) < 1e-10);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(t * t), q(t * t);
        for (int i = 0; i < t; ++i) {
            double sp = 0, sq = 0;
            for (int j = 0; j < t; ++j) {
                p[i * t + j] = u(rng);
                q[i * t + j] = u(rng);
                sp += p[i * t + j];
                sq += q[i * t + j];
            }
            for (int j = 0; j < t; ++j) {
                p[i * t + j] /= sp;
                q[i * t + j] /= sq;
            }
        }
        for (double v : discrepancy(p, q, t)) CHECK(v >= -1e-12);
        for (double v : discrepancy(p, p, t)) CHECK(std::fabs(v) < 1e-10);
        // symmetrized variant averages both directions
        auto sym = discrepancy(p, q, t, true);
        auto fwd = discrepancy(p, q, t);
        auto bwd = discrepancy(q, p, t);
        for (int i = 0; i < t; ++i)
            CHECK(sym[i] == doctest::Approx(0.5 * (fwd[i] + bwd[i])).epsilon(1e-12));
    }
}

TEST_CASE("graph discrepancy loss matches the numeric path and is differentiable") {
    const int t = 6;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> ahat(t * t);
    for (int i = 0; i < t; ++i) {
        double s = 0;
        for (int j = 0; j < t; ++j) {
            ahat[i * t + j] = u(rng);
            s += ahat[i * t + j];
        }
        for (int j = 0; j < t; ++j) ahat[i * t + j] /= s;
    }
    auto ahat_t = Tensor::from({t, t}, ahat, false);
    auto sigma_raw = Tensor::full({t}, 0.3, true);

    Graph g;
    auto loss = discrepancy_loss(g, ahat_t, sigma_raw, false);
    // numeric reference: softplus(sigma_raw), prior, mean KL
    std::vector<double> sigma(t);
    for (int i = 0; i < t; ++i) sigma[i] = std::log1p(std::exp(0.3));
    auto prior = gaussian_prior(t, sigma, false);
    auto kl = discrepancy(ahat, prior, t);
    double mean_kl = 0;
    for (double v : kl) mean_kl += v;
    mean_kl /= t;
    CHECK(loss->value[0] == doctest::Approx(mean_kl).epsilon(1e-9));

    const double err = gradcheck::check(
        [&](Graph& gg, const std::vector<TensorPtr>& in) {
            return discrepancy_loss(gg, ahat_t, in[0], false);
        },
        {sigma_raw});
    CHECK(err < 1e-5);
}

TEST_CASE("anomaly score combination") {
    std::vector<double> recon{1.0, 2.0, 3.0};
    std::vector<double> flat(3, 0.7);
    auto s = anomaly_score(recon, flat, ScoreMode::combined);
    for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(recon[i]).epsilon(1e-12));

    std::vector<double> zero(3, 0.0);
    std::vector<double> disc{0.1, 5.0, 0.2};
    auto z = anomaly_score(zero, disc, ScoreMode::combined);
    for (double v : z) CHECK(v == 0.0);

    auto passthrough = anomaly_score(recon, disc, ScoreMode::reconstruction_only);
    CHECK(passthrough == recon);
}

TEST_CASE("threshold rule: quantile, strict inequality, degenerate ties") {
    const double thr = detection_threshold({1, 2, 3, 4}, 0.5);
    CHECK(thr == 2.0);
    auto labels = threshold_and_detect({1, 2, 3, 4}, thr);
    CHECK(labels == std::vector<int>{0, 0, 1, 1});

    const double all_equal = detection_threshold({5, 5, 5, 5}, 0.25);
    auto none = threshold_and_detect({5, 5, 5, 5}, all_equal);
    CHECK(none == std::vector<int>{0, 0, 0, 0});

    CHECK_THROWS_AS(detection_threshold({}, 0.5), std::invalid_argument);
}

TEST_CASE("sigma parameters initialize to softplus inverse of one") {
    auto p = AnomalyAdapterParams::init(3, 8, false, 0);
    REQUIRE(p.sigma_raw.size() == 3);
    for (const auto& s : p.sigma_raw) {
        CHECK(s->numel() == 8);
        CHECK(std::log1p(std::exp(s->value[0])) == doctest::Approx(1.0).epsilon(1e-12));
    }
}
