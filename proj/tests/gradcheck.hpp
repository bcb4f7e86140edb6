#pragma once

// Central finite-difference gradient checker used throughout the test suite.
// The forward callable must be a pure function of the input tensors' values.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fpt/graph.hpp"

namespace gradcheck {

using fpt::Graph;
using fpt::Tensor;
using fpt::TensorPtr;

using ForwardFn = std::function<TensorPtr(Graph&, const std::vector<TensorPtr>&)>;

inline double rel_err(double a, double b) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) / scale;
}

// Returns the worst relative error between autodiff and central differences
// over every coordinate of every input.
inline double check(const ForwardFn& fn, const std::vector<TensorPtr>& inputs,
                    double h = 1e-5) {
    for (const auto& t : inputs) t->grad.clear();
    {
        Graph g;
        auto loss = fn(g, inputs);
        g.backward(loss);
    }
    std::vector<std::vector<double>> ad_grads;
    for (const auto& t : inputs)
        ad_grads.push_back(t->requires_grad ? t->grad : std::vector<double>(t->numel(), 0.0));

    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = *inputs[ti];
        if (!t.requires_grad) continue;
        for (std::size_t c = 0; c < t.numel(); ++c) {
            const double saved = t.value[c];
            t.value[c] = saved + h;
            double lp, lm;
            {
                Graph g;
                lp = fn(g, inputs)->value[0];
            }
            t.value[c] = saved - h;
            {
                Graph g;
                lm = fn(g, inputs)->value[0];
            }
            t.value[c] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            worst = std::max(worst, rel_err(ad_grads[ti].empty() ? 0.0 : ad_grads[ti][c], fd));
        }
    }
    return worst;
}

// loss = sum(out * fixed random weights); turns any output into a scalar
// probe without hiding sign errors.
inline TensorPtr weighted_sum(Graph& g, const TensorPtr& out, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(out->numel());
    for (auto& x : w) x = u(rng);
    auto wt = Tensor::from(out->shape, std::move(w), false);
    return g.sum(g.mul(out, wt));
}

inline TensorPtr random_tensor(const fpt::Shape& s, std::mt19937_64& rng, bool rg = true,
                               double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(fpt::shape_numel(s));
    for (auto& x : v) x = u(rng);
    return Tensor::from(s, std::move(v), rg);
}

}  // namespace gradcheck
