#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "fpt/preprocessing.hpp"

using namespace fpt;

TEST_CASE("constant series normalizes to zeros and round-trips") {
    std::vector<double> x(4, 5.0);
    auto [norm, stats] = instance_normalize(x);
    for (double v : norm) CHECK(v == 0.0);
    CHECK(stats.mean == 5.0);
    CHECK(stats.variance == 0.0);
    auto back = instance_denormalize(norm, stats);
    for (double v : back) CHECK(v == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("hand-computed normalization of [1,2,3,4]") {
    std::vector<double> x{1, 2, 3, 4};
    auto [norm, stats] = instance_normalize(x);
    CHECK(stats.mean == doctest::Approx(2.5));
    CHECK(stats.variance == doctest::Approx(1.25));
    const double expect[4] = {-1.3416, -0.4472, 0.4472, 1.3416};
    for (int i = 0; i < 4; ++i) CHECK(norm[i] == doctest::Approx(expect[i]).epsilon(1e-3));
    auto back = instance_denormalize(norm, stats);
    for (int i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("already standardized series stays put within 1e-6") {
    // mean 0, population variance exactly 1
    std::vector<double> x{-1, -1, -1, 1, 1, 1};
    auto [norm, stats] = instance_normalize(x, 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::fabs(norm[i] - x[i]) < 1e-6);
    (void)stats;
}

TEST_CASE("normalize rejects too-short series") {
    std::vector<double> x{1.0};
    CHECK_THROWS_AS(instance_normalize(x), std::invalid_argument);
}

TEST_CASE("normalize/denormalize round trip over random series") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int L = 2 + static_cast<int>(rng() % 200);
        std::vector<double> x(L);
        for (auto& v : x) v = u(rng);
        auto [norm, stats] = instance_normalize(x);
        auto back = instance_denormalize(norm, stats);
        for (int i = 0; i < L; ++i) CHECK(std::fabs(back[i] - x[i]) < 1e-6);
    }
}

TEST_CASE("patching index formula and edge cases") {
    {
        std::vector<double> x(8);
        for (int i = 0; i < 8; ++i) x[i] = i;
        PatchConfig cfg{4, 4, 8};
        auto p = patch(x, cfg);
        CHECK(cfg.num_patches() == 2);
        for (int j = 0; j < 4; ++j) {
            CHECK(p[j] == x[j]);
            CHECK(p[4 + j] == x[4 + j]);
        }
    }
    {
        std::vector<double> x(10);
        for (int i = 0; i < 10; ++i) x[i] = 10 * i;
        PatchConfig cfg{4, 2, 10};
        CHECK(cfg.num_patches() == 4);
        auto p = patch(x, cfg);
        // patch 1 starts at index 2
        CHECK(p[4] == x[2]);
    }
    {
        std::vector<double> x{1, 2, 3};
        PatchConfig cfg{3, 1, 3};
        auto p = patch(x, cfg);
        CHECK(cfg.num_patches() == 1);
        CHECK(p == x);
    }
    PatchConfig bad{5, 1, 3};
    std::vector<double> x{1, 2, 3};
    CHECK_THROWS_AS(patch(x, bad), std::invalid_argument);
}

TEST_CASE("patch count formula exact over an (L,P,S) grid; full coverage") {
    int cases = 0;
    for (int L = 4; L <= 28; L += 4)
        for (int P = 1; P <= L; P += 3)
            for (int S = 1; S <= 6; ++S) {
                PatchConfig cfg{P, S, L};
                const int n = cfg.num_patches();
                CHECK(n == (L - P) / S + 1);
                std::vector<double> x(L);
                for (int i = 0; i < L; ++i) x[i] = i;
                auto p = patch(x, cfg);
                CHECK(static_cast<int>(p.size()) == n * P);
                // with stride <= patch length, every element before the last
                // patch end appears in at least one patch
                if (S <= P) {
                    std::set<int> covered;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < P; ++j) covered.insert(i * S + j);
                    const int last = (n - 1) * S + P;
                    for (int t = 0; t < last; ++t) CHECK(covered.count(t) == 1);
                }
                ++cases;
            }
    CHECK(cases >= 200);
}

TEST_CASE("flatten channels round trip and indices") {
    {
        std::vector<std::vector<double>> chans{{1, 2, 3, 4, 5}};
        auto b = flatten_channels(chans);
        CHECK(b.values->shape == Shape{1, 5});
        CHECK(b.channel_index == std::vector<int>{0});
    }
    {
        std::vector<std::vector<double>> chans(3, std::vector<double>(5));
        for (int m = 0; m < 3; ++m)
            for (int i = 0; i < 5; ++i) chans[m][i] = 10 * m + i;
        auto b = flatten_channels(chans);
        auto back = regroup_channels(b, 5);
        CHECK(back == chans);
    }
    {
        std::vector<std::vector<double>> chans(7, std::vector<double>(4, 1.0));
        auto b = flatten_channels(chans);
        std::vector<int> want{0, 1, 2, 3, 4, 5, 6};
        CHECK(b.channel_index == want);
    }
}

TEST_CASE("imputation mask cardinality at the published ratios") {
    for (double ratio : {0.125, 0.25, 0.375, 0.5}) {
        auto mask = make_imputation_mask(96, ratio, 7);
        int masked = 0;
        for (double v : mask)
            if (v == 0.0) ++masked;
        CHECK(masked == static_cast<int>(std::lround(ratio * 96)));
    }
    auto m = make_imputation_mask(96, 0.125, 3);
    int cnt = 0;
    for (double v : m)
        if (v == 0.0) ++cnt;
    CHECK(cnt == 12);
}

TEST_CASE("mask determinism and seed sensitivity") {
    auto a = make_imputation_mask(64, 0.25, 42);
    auto b = make_imputation_mask(64, 0.25, 42);
    CHECK(a == b);
    int distinct = 0;
    auto ref = make_imputation_mask(64, 0.25, 0);
    for (std::uint64_t s = 1; s <= 100; ++s)
        if (make_imputation_mask(64, 0.25, s) != ref) ++distinct;
    CHECK(distinct >= 99);
}

TEST_CASE("mask rejects ratios outside (0,1)") {
    CHECK_THROWS_AS(make_imputation_mask(96, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_imputation_mask(96, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_imputation_mask(96, -0.2, 1), std::invalid_argument);
}
