#include "fpt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpt::kern {

namespace {

// One output row of a single GEMM problem. Inner loops run in a fixed
// order so parallel and serial paths agree bitwise.
inline void gemm_row(const double* a, const double* b, double* c,
                     std::size_t i, std::size_t m, std::size_t k, std::size_t n,
                     bool trans_a, bool trans_b, bool accumulate) {
    (void)m;
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        if (!trans_b) {
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        } else {
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
        }
    }
}

inline void softmax_row(const double* xr, double* yr, std::size_t cols) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        yr[j] = std::exp(xr[j] - mx);
        z += yr[j];
    }
    const double inv = 1.0 / z;
    for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
}

inline void softmax_row_weighted(const double* xr, double* yr, std::size_t cols,
                                 std::size_t split, double w) {
    if (w == 0.0) {
        // Weighted columns carry exactly zero mass; skip them so the first
        // `split` columns match the plain softmax bit for bit.
        softmax_row(xr, yr, split);
        std::fill(yr + split, yr + cols, 0.0);
        return;
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        const double e = std::exp(xr[j] - mx);
        yr[j] = (j < split) ? e : w * e;
        z += yr[j];
    }
    const double inv = 1.0 / z;
    for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
}

inline void layer_norm_row(const double* xr, const double* gamma, const double* beta,
                           double* yr, double& mean_out, double& istd_out,
                           std::size_t cols, double eps) {
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        const double d = xr[j] - mean;
        var += d * d;
    }
    var /= static_cast<double>(cols);
    const double istd = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j)
        yr[j] = (xr[j] - mean) * istd * gamma[j] + beta[j];
    mean_out = mean;
    istd_out = istd;
}

}  // namespace

void gemm_batched(const double* a, const double* b, double* c,
                  std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                  bool trans_a, bool trans_b,
                  std::size_t stride_a, std::size_t stride_b, bool accumulate) {
    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(batch * m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < total; ++t) {
        const std::size_t bi = static_cast<std::size_t>(t) / m;
        const std::size_t i = static_cast<std::size_t>(t) % m;
        gemm_row(a + bi * stride_a, b + bi * stride_b, c + bi * m * n,
                 i, m, k, n, trans_a, trans_b, accumulate);
    }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_weighted(const double* x, double* y, std::size_t rows,
                           std::size_t cols, std::size_t split, double w) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        softmax_row_weighted(x + r * cols, y + r * cols, cols, split, w);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mean_cache, double* istd_cache,
                     std::size_t rows, std::size_t cols, double eps) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        layer_norm_row(x + r * cols, gamma, beta, y + r * cols,
                       mean_cache[r], istd_cache[r], cols, eps);
}

double sum_all(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

namespace serial {

void gemm_batched(const double* a, const double* b, double* c,
                  std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
                  bool trans_a, bool trans_b,
                  std::size_t stride_a, std::size_t stride_b, bool accumulate) {
    for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t i = 0; i < m; ++i)
            gemm_row(a + bi * stride_a, b + bi * stride_b, c + bi * m * n,
                     i, m, k, n, trans_a, trans_b, accumulate);
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_weighted(const double* x, double* y, std::size_t rows,
                           std::size_t cols, std::size_t split, double w) {
    for (std::size_t r = 0; r < rows; ++r)
        softmax_row_weighted(x + r * cols, y + r * cols, cols, split, w);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double* y, double* mean_cache, double* istd_cache,
                     std::size_t rows, std::size_t cols, double eps) {
    for (std::size_t r = 0; r < rows; ++r)
        layer_norm_row(x + r * cols, gamma, beta, y + r * cols,
                       mean_cache[r], istd_cache[r], cols, eps);
}

}  // namespace serial

}  // namespace fpt::kern
