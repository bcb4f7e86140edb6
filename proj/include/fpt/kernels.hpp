#pragma once

// Dense numeric kernels used by the tensor engine.
//
// Every kernel comes in two flavours: the OpenMP-parallel default in
// fpt::kern and a plain serial reference in fpt::kern::serial. The parallel
// versions split work across *independent output elements* only, so for a
// fixed input they produce bit-identical results to the serial reference
// regardless of thread count. Scalar reductions (sum over a whole buffer)
// stay serial for the same reason.

#include <cstddef>
#include <cstdint>
#include <span>

namespace fpt::kern {

// C[b] = op(A[b]) * op(B[b]) for `batch` independent problems laid out
// contiguously. trans_a/trans_b interpret A as K x M / B as N x K instead.
// A may be shared across the batch (stride_a = 0), likewise B.
void gemm_batched(const double* a, const double* b, double* c,
                  std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                  bool trans_a, bool trans_b,
                  std::size_t stride_a, std::size_t stride_b,
                  bool accumulate = false);

// Row-wise softmax with max-subtraction; rows of length `cols`.
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);

// Softmax where columns [split, cols) carry a common multiplicative weight
// w >= 0. w == 0 reproduces plain softmax over the first `split` columns
// exactly (weighted columns are skipped, including in the max).
void softmax_rows_weighted(const double* x, double* y, std::size_t rows,
                           std::size_t cols, std::size_t split, double w);

// Per-row layer norm: y = (x - mean) / sqrt(var + eps) * gamma + beta.
// Caches mean and inverse stddev per row for the backward pass.
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mean_cache, double* istd_cache,
                     std::size_t rows, std::size_t cols, double eps);

// y[i] = f(x[i]) over n elements, parallel across elements.
template <typename F>
inline void unary_apply(const double* x, double* y, std::size_t n, F f) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        y[i] = f(x[i]);
}

// y[i] = f(a[i], b[i % period]) where b cycles with the given period
// (suffix broadcast). period == n means plain elementwise.
template <typename F>
inline void binary_apply_cyclic(const double* a, const double* b, double* y,
                                std::size_t n, std::size_t period, F f) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        y[i] = f(a[i], b[i % period]);
}

// Serial scalar reduction; kept serial so results do not depend on the
// thread count.
double sum_all(const double* x, std::size_t n);

namespace serial {

void gemm_batched(const double* a, const double* b, double* c,
                  std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                  bool trans_a, bool trans_b,
                  std::size_t stride_a, std::size_t stride_b,
                  bool accumulate = false);

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);

void softmax_rows_weighted(const double* x, double* y, std::size_t rows,
                           std::size_t cols, std::size_t split, double w);

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mean_cache, double* istd_cache,
                     std::size_t rows, std::size_t cols, double eps);

template <typename F>
inline void unary_apply(const double* x, double* y, std::size_t n, F f) {
    for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

template <typename F>
inline void binary_apply_cyclic(const double* a, const double* b, double* y,
                                std::size_t n, std::size_t period, F f) {
    for (std::size_t i = 0; i < n; ++i) y[i] = f(a[i], b[i % period]);
}

}  // namespace serial

}  // namespace fpt::kern
