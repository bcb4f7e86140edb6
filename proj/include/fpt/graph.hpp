#pragma once

// Reverse-mode differentiation tape over fpt::Tensor.
//
// Every op appends one record; backward() replays the tape in exact reverse
// construction order and accumulates gradients additively into every
// requires_grad leaf it reaches. Frozen leaves are never touched. A Graph
// and the tensors it creates belong to one thread; independent graphs may
// run concurrently.

#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "fpt/tensor.hpp"

namespace fpt {

class Graph {
public:
    explicit Graph(std::mt19937_64* rng = nullptr) : rng_(rng) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale(const TensorPtr& a, double k) { return affine(a, k, 0.0); }
    TensorPtr affine(const TensorPtr& a, double k, double c);

    TensorPtr gelu(const TensorPtr& a);
    TensorPtr sigmoid(const TensorPtr& a);
    TensorPtr softplus(const TensorPtr& a);
    TensorPtr log(const TensorPtr& a);
    TensorPtr exp(const TensorPtr& a);
    TensorPtr absval(const TensorPtr& a);
    TensorPtr clamp_min(const TensorPtr& a, double c);

    TensorPtr softmax_rows(const TensorPtr& a);
    // Softmax over the last axis where columns [split, cols) are weighted by
    // the scalar tensor w (>= 0). w == 0 excludes them exactly.
    TensorPtr softmax_rows_weighted(const TensorPtr& a, int split, const TensorPtr& w);
    TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma,
                         const TensorPtr& beta, double eps);

    // Real FFT over the last axis; returns {real, imag} planes of n/2+1 bins.
    std::pair<TensorPtr, TensorPtr> rfft(const TensorPtr& x);
    TensorPtr irfft(const TensorPtr& re, const TensorPtr& im, int n);

    TensorPtr mean(const TensorPtr& a);
    TensorPtr sum(const TensorPtr& a);

    TensorPtr concat(const std::vector<TensorPtr>& parts, int axis);
    TensorPtr slice(const TensorPtr& a, int axis, int start, int len);
    TensorPtr transpose(const TensorPtr& a, int ax0, int ax1);
    TensorPtr reshape(const TensorPtr& a, Shape s);

    TensorPtr dropout(const TensorPtr& a, double p);
    TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);

    // Value copy detached from the tape (no gradient flows through it).
    static TensorPtr detach(const TensorPtr& a);

    void backward(const TensorPtr& loss);

    std::size_t size() const { return tape_.size(); }

private:
    struct Record {
        TensorPtr out;
        std::function<void()> fn;
    };
    std::vector<Record> tape_;
    std::mt19937_64* rng_;

    TensorPtr emit(Shape s, std::vector<double> v, bool needs_grad, std::function<void()> fn);
};

}  // namespace fpt
