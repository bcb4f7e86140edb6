#include <cmath>
#include <random>

#include "doctest.h"
#include "fpt/graph.hpp"
#include "gradcheck.hpp"

using namespace fpt;
using gradcheck::random_tensor;
using gradcheck::weighted_sum;

TEST_CASE("matmul identity and hand arithmetic") {
    Graph g;
    auto i2 = Tensor::identity(2);
    auto prod = g.matmul(i2, i2);
    CHECK(prod->value == i2->value);

    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor::from({2, 1}, {1, 1});
    auto c = g.matmul(a, b);
    CHECK(c->shape == Shape{2, 1});
    CHECK(c->value[0] == 3.0);
    CHECK(c->value[1] == 7.0);
}

TEST_CASE("matmul rejects mismatched shapes with both named") {
    Graph g;
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 5});
    try {
        g.matmul(a, b);
        FAIL("expected shape mismatch");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("matmul gradient vs central differences") {
    std::mt19937_64 rng(123);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 5}, rng);
    const double err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.matmul(in[0], in[1]), 1);
        },
        {a, b});
    CHECK(err < 1e-6);
}

TEST_CASE("batched matmul gradients cover the broadcast reduce paths") {
    std::mt19937_64 rng(321);
    // shared right operand across a batch
    auto a = random_tensor({2, 3, 4}, rng);
    auto w = random_tensor({4, 5}, rng);
    double err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.matmul(in[0], in[1]), 2);
        },
        {a, w});
    CHECK(err < 1e-6);
    // shared left operand
    auto m = random_tensor({3, 6}, rng);
    auto x = random_tensor({2, 6, 2}, rng);
    err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.matmul(in[0], in[1]), 3);
        },
        {m, x});
    CHECK(err < 1e-6);
    // both batched, rank 4
    auto p = random_tensor({2, 2, 3, 4}, rng);
    auto q = random_tensor({2, 2, 4, 3}, rng);
    err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.matmul(in[0], in[1]), 4);
        },
        {p, q});
    CHECK(err < 1e-6);
}

TEST_CASE("softmax symmetry, stability and row sums") {
    Graph g;
    auto x = Tensor::from({3}, {0, 0, 0});
    auto y = g.softmax_rows(x);
    for (double v : y->value) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

    auto big = Tensor::from({2}, {1000.0, 0.0});
    auto yb = g.softmax_rows(big);
    CHECK(std::isfinite(yb->value[0]));
    CHECK(yb->value[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(yb->value[1] < 1e-300);

    std::mt19937_64 rng(5);
    auto r = random_tensor({4, 7}, rng, false, 3.0);
    auto yr = g.softmax_rows(r);
    for (int row = 0; row < 4; ++row) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) s += yr->value[row * 7 + j];
        CHECK(std::fabs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax gradient vs central differences") {
    std::mt19937_64 rng(99);
    auto x = random_tensor({5}, rng);
    const double err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.softmax_rows(in[0]), 5);
        },
        {x});
    CHECK(err < 1e-6);
}

TEST_CASE("weighted softmax: zero weight excludes the tail exactly") {
    std::mt19937_64 rng(7);
    auto x = random_tensor({2, 8}, rng, false, 2.0);
    Graph g;
    auto w0 = Tensor::from({1}, {0.0});
    auto y = g.softmax_rows_weighted(x, 5, w0);
    auto head = g.slice(x, 1, 0, 5);
    auto yh = g.softmax_rows(head);
    for (int r = 0; r < 2; ++r) {
        for (int j = 0; j < 5; ++j) CHECK(y->value[r * 8 + j] == yh->value[r * 5 + j]);
        for (int j = 5; j < 8; ++j) CHECK(y->value[r * 8 + j] == 0.0);
    }
}

TEST_CASE("weighted softmax gradients, including at w = 0") {
    std::mt19937_64 rng(8);
    auto x = random_tensor({3, 6}, rng);
    auto w = Tensor::from({1}, {0.7}, true);
    const double err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.softmax_rows_weighted(in[0], 4, in[1]), 6);
        },
        {x, w});
    CHECK(err < 1e-6);

    // the weight keeps a usable gradient at exactly zero (one-sided check)
    auto w0 = Tensor::from({1}, {0.0}, true);
    Graph g;
    auto y = g.softmax_rows_weighted(x, 4, w0);
    g.backward(weighted_sum(g, y, 6));
    REQUIRE(!w0->grad.empty());
    const double ad = w0->grad[0];
    const double h = 1e-6;
    w0->value[0] = h;
    Graph g2;
    const double lp = weighted_sum(g2, g2.softmax_rows_weighted(x, 4, w0), 6)->value[0];
    w0->value[0] = 0.0;
    Graph g3;
    const double l0 = weighted_sum(g3, g3.softmax_rows_weighted(x, 4, w0), 6)->value[0];
    const double fd = (lp - l0) / h;
    CHECK(gradcheck::rel_err(ad, fd) < 1e-4);
    CHECK(std::fabs(ad) > 1e-8);
}

TEST_CASE("layer norm basics") {
    Graph g;
    auto x = Tensor::from({3}, {1, 2, 3});
    auto gamma = Tensor::from({3}, {1, 1, 1});
    auto beta = Tensor::from({3}, {0, 0, 0});
    auto y = g.layer_norm(x, gamma, beta, 1e-9);
    double mean = 0.0, var = 0.0;
    for (double v : y->value) mean += v;
    mean /= 3;
    for (double v : y->value) var += (v - mean) * (v - mean);
    var /= 3;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(var - 1.0) < 1e-6);

    auto gz = Tensor::from({3}, {0, 0, 0});
    auto bb = Tensor::from({3}, {4, 5, 6});
    auto yb = g.layer_norm(x, gz, bb, 1e-9);
    CHECK(yb->value == bb->value);
}

TEST_CASE("layer norm gradient vs central differences") {
    std::mt19937_64 rng(77);
    auto x = random_tensor({4, 6}, rng);
    auto gamma = random_tensor({6}, rng);
    auto beta = random_tensor({6}, rng);
    const double err = gradcheck::check(
        [](Graph& g, const std::vector<TensorPtr>& in) {
            return weighted_sum(g, g.layer_norm(in[0], in[1], in[2], 1e-5), 7);
        },
        {x, gamma, beta});
    CHECK(err < 1e-5);
}

TEST_CASE("elementwise op values") {
    Graph g;
    auto zero = Tensor::from({1}, {0.0});
    CHECK(g.sigmoid(zero)->value[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.gelu(zero)->value[0] == 0.0);
    CHECK(g.softplus(zero)->value[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("every elementwise op passes a gradient check on random 2x3 input") {
    std::mt19937_64 rng(2024);
    for (unsigned seed = 0; seed < 3; ++seed) {
        auto x = random_tensor({2, 3}, rng);
        auto b = random_tensor({3}, rng);
        auto xpos = random_tensor({2, 3}, rng, true, 1.0);
        for (auto& v : xpos->value) v = std::fabs(v) + 0.5;

        using Fn = gradcheck::ForwardFn;
        const std::vector<std::pair<Fn, std::vector<TensorPtr>>> cases = {
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.add(in[0], in[1]), 11);
             },
             {x, b}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.sub(in[0], in[1]), 12);
             },
             {x, b}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.mul(in[0], in[1]), 13);
             },
             {x, b}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.gelu(in[0]), 14);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.sigmoid(in[0]), 15);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.softplus(in[0]), 16);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.log(in[0]), 17);
             },
             {xpos}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.exp(in[0]), 18);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.absval(in[0]), 19);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.affine(in[0], 2.5, -1.0), 20);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) { return g.mean(in[0]); }, {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) { return g.sum(in[0]); }, {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.concat({in[0], in[1]}, 0), 21);
             },
             {x, x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.slice(in[0], 1, 1, 2), 22);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.transpose(in[0], 0, 1), 23);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.reshape(in[0], {3, 2}), 24);
             },
             {x}},
            {[](Graph& g, const std::vector<TensorPtr>& in) {
                 return weighted_sum(g, g.clamp_min(in[0], -0.1), 25);
             },
             {x}},
        };
        for (const auto& [fn, inputs] : cases) CHECK(gradcheck::check(fn, inputs) < 1e-5);
    }
}

TEST_CASE("backward fills simple closed-form gradients") {
    {
        Graph g;
        auto x = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
        g.backward(g.sum(x));
        REQUIRE(x->grad.size() == 4);
        for (double v : x->grad) CHECK(v == 1.0);
    }
    {
        Graph g;
        auto x = Tensor::from({2, 2}, {1, -2, 3, 0.5}, true);
        auto loss = g.scale(g.sum(g.mul(x, x)), 0.5);
        g.backward(loss);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(x->grad[i] == doctest::Approx(x->value[i]).epsilon(1e-12));
    }
}

TEST_CASE("backward rejects non-scalar loss") {
    Graph g;
    auto x = Tensor::from({2}, {1, 2}, true);
    auto y = g.scale(x, 2.0);
    CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("frozen leaves keep a null gradient buffer") {
    Graph g;
    auto frozen = Tensor::from({2, 2}, {1, 2, 3, 4}, false);
    auto trainable = Tensor::from({2, 2}, {1, 1, 1, 1}, true);
    auto loss = g.mean(g.matmul(frozen, trainable));
    g.backward(loss);
    CHECK(frozen->grad.empty());
    CHECK(!trainable->grad.empty());
}

TEST_CASE("gradients accumulate additively and zero_grad resets") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    {
        Graph g;
        g.backward(g.sum(x));
    }
    {
        Graph g;
        g.backward(g.sum(x));
    }
    CHECK(x->grad[0] == 2.0);
    x->zero_grad();
    CHECK(x->grad[0] == 0.0);
}

TEST_CASE("two-layer MLP full Jacobian matches finite differences") {
    std::mt19937_64 rng(31415);
    auto x = random_tensor({2, 4}, rng);
    auto w1 = random_tensor({4, 5}, rng);
    auto b1 = random_tensor({5}, rng);
    auto w2 = random_tensor({5, 3}, rng);
    auto b2 = random_tensor({3}, rng);
    const std::vector<TensorPtr> inputs = {x, w1, b1, w2, b2};

    auto forward = [](Graph& g, const std::vector<TensorPtr>& in) {
        auto h = g.gelu(g.add(g.matmul(in[0], in[1]), in[2]));
        return g.add(g.matmul(h, in[3]), in[4]);
    };
    // one probe per output coordinate = one Jacobian row at a time
    for (int k = 0; k < 6; ++k) {
        std::vector<double> mask(6, 0.0);
        mask[k] = 1.0;
        auto probe = [&](Graph& g, const std::vector<TensorPtr>& in) {
            auto out = forward(g, in);
            auto m = Tensor::from({2, 3}, mask);
            return g.sum(g.mul(out, m));
        };
        CHECK(gradcheck::check(probe, inputs) < 1e-5);
    }
}

TEST_CASE("cross entropy values, gradient and label validation") {
    Graph g;
    auto logits = Tensor::from({1, 4}, {0, 0, 0, 0});
    auto ce = g.cross_entropy(logits, {2});
    CHECK(ce->value[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    auto hot = Tensor::from({1, 3}, {0, 50, 0});
    CHECK(g.cross_entropy(hot, {1})->value[0] < 1e-12);

    CHECK_THROWS_AS(g.cross_entropy(hot, {3}), std::invalid_argument);
    CHECK_THROWS_AS(g.cross_entropy(hot, {-1}), std::invalid_argument);

    std::mt19937_64 rng(555);
    auto x = random_tensor({3, 4}, rng);
    const double err = gradcheck::check(
        [](Graph& g2, const std::vector<TensorPtr>& in) {
            return g2.cross_entropy(in[0], {1, 3, 0});
        },
        {x});
    CHECK(err < 1e-6);
}

TEST_CASE("dropout routes gradients through its mask deterministically") {
    std::mt19937_64 rng(404);
    auto x = Tensor::full({1000}, 1.0, true);
    Graph g(&rng);
    auto y = g.dropout(x, 0.25);
    g.backward(g.sum(y));
    std::size_t kept = 0;
    for (std::size_t i = 0; i < x->numel(); ++i) {
        if (y->value[i] != 0.0) {
            ++kept;
            CHECK(x->grad[i] == doctest::Approx(1.0 / 0.75));
        } else {
            CHECK(x->grad[i] == 0.0);
        }
    }
    CHECK(kept > 600);
    CHECK(kept < 900);
    // same seed, same mask
    std::mt19937_64 rng2(404);
    Graph g2(&rng2);
    auto y2 = g2.dropout(x, 0.25);
    CHECK(y->value == y2->value);
    // p = 0 is the identity pass-through
    Graph g3;
    CHECK(g3.dropout(x, 0.0) == x);
}

TEST_CASE("gradient suite: 20 seeds across composed ops stay under 1e-4") {
    for (unsigned seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        auto x = random_tensor({3, 4}, rng);
        auto w = random_tensor({4, 4}, rng);
        auto gmm = random_tensor({4}, rng);
        auto bta = random_tensor({4}, rng);
        const double err = gradcheck::check(
            [](Graph& g, const std::vector<TensorPtr>& in) {
                auto h = g.matmul(in[0], in[1]);
                auto n = g.layer_norm(h, in[2], in[3], 1e-5);
                auto s = g.softmax_rows(n);
                return weighted_sum(g, g.gelu(s), 99);
            },
            {x, w, gmm, bta});
        CHECK(err < 1e-4);
    }
}
