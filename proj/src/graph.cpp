#include "fpt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fpt/fft.hpp"
#include "fpt/kernels.hpp"

namespace fpt {

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    for (std::size_t i = 0; i < small.size(); ++i)
        if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
    return true;
}

void check_suffix(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (b->numel() == 1) return;  // scalars broadcast everywhere
    if (!is_suffix(b->shape, a->shape))
        throw std::invalid_argument(std::string(op) + ": shape " + shape_str(b->shape) +
                                    " does not broadcast onto " + shape_str(a->shape));
}

// dst[j] += sum_c src[c * period + j] * (optional elementwise factor)
void reduce_cyclic_accum(const std::vector<double>& src, std::size_t period,
                         std::vector<double>& dst) {
    const std::size_t cycles = src.size() / period;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(period); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < cycles; ++c) s += src[c * period + j];
        dst[j] += s;
    }
}

// dst and src transposed over axes ax0 < ax1 of shape `in`.
// If accumulate, dst[i] += src[perm(i)] style scatter (used for gradients).
void transpose_copy(const std::vector<double>& src, const Shape& in_shape,
                    int ax0, int ax1, std::vector<double>& dst, bool accumulate) {
    const int rank = static_cast<int>(in_shape.size());
    Shape out_shape = in_shape;
    std::swap(out_shape[ax0], out_shape[ax1]);
    std::vector<std::size_t> in_strides(rank, 1), out_strides(rank, 1);
    for (int i = rank - 2; i >= 0; --i) {
        in_strides[i] = in_strides[i + 1] * static_cast<std::size_t>(in_shape[i + 1]);
        out_strides[i] = out_strides[i + 1] * static_cast<std::size_t>(out_shape[i + 1]);
    }
    const std::size_t n = src.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oi = 0; oi < static_cast<std::ptrdiff_t>(n); ++oi) {
        std::size_t rem = static_cast<std::size_t>(oi);
        std::size_t src_idx = 0;
        for (int d = 0; d < rank; ++d) {
            const std::size_t coord = rem / out_strides[d];
            rem %= out_strides[d];
            const int src_axis = (d == ax0) ? ax1 : (d == ax1) ? ax0 : d;
            src_idx += coord * in_strides[src_axis];
        }
        if (accumulate) dst[oi] += src[src_idx];
        else dst[oi] = src[src_idx];
    }
}

struct MatmulPlan {
    std::size_t batch, m, k, n;
    bool a_batched, b_batched;
    Shape out_shape;
};

MatmulPlan plan_matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() < 2 || b->shape.size() < 2)
        throw std::invalid_argument("matmul: operands must have rank >= 2, got " +
                                    shape_str(a->shape) + " and " + shape_str(b->shape));
    const int ra = static_cast<int>(a->shape.size());
    const int rb = static_cast<int>(b->shape.size());
    MatmulPlan p{};
    p.m = static_cast<std::size_t>(a->shape[ra - 2]);
    p.k = static_cast<std::size_t>(a->shape[ra - 1]);
    const std::size_t k2 = static_cast<std::size_t>(b->shape[rb - 2]);
    p.n = static_cast<std::size_t>(b->shape[rb - 1]);
    if (p.k != k2)
        throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                    shape_str(a->shape) + " vs " + shape_str(b->shape));
    Shape ba(a->shape.begin(), a->shape.end() - 2);
    Shape bb(b->shape.begin(), b->shape.end() - 2);
    if (!ba.empty() && !bb.empty() && ba != bb)
        throw std::invalid_argument("matmul: batch axes disagree: " + shape_str(a->shape) +
                                    " vs " + shape_str(b->shape));
    const Shape& batch_shape = ba.empty() ? bb : ba;
    p.batch = shape_numel(batch_shape);
    p.a_batched = !ba.empty();
    p.b_batched = !bb.empty();
    p.out_shape = batch_shape;
    p.out_shape.push_back(static_cast<int>(p.m));
    p.out_shape.push_back(static_cast<int>(p.n));
    return p;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

TensorPtr Graph::emit(Shape s, std::vector<double> v, bool needs_grad, std::function<void()> fn) {
    auto out = Tensor::from(std::move(s), std::move(v), false);
    out->requires_grad = needs_grad;
    if (needs_grad) tape_.push_back({out, std::move(fn)});
    return out;
}

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
    const MatmulPlan p = plan_matmul(a, b);
    std::vector<double> out(p.batch * p.m * p.n);
    kern::gemm_batched(a->value.data(), b->value.data(), out.data(), p.batch, p.m, p.k, p.n,
                       false, false, p.a_batched ? p.m * p.k : 0, p.b_batched ? p.k * p.n : 0);
    const bool needs = a->requires_grad || b->requires_grad;
    auto result = emit(p.out_shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, b, p, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const double* g = out_t->grad.data();
        if (a->requires_grad) {
            a->ensure_grad();
            if (p.a_batched || p.batch == 1) {
                kern::gemm_batched(g, b->value.data(), a->grad.data(), p.batch, p.m, p.n, p.k,
                                   false, true, p.m * p.n, p.b_batched ? p.k * p.n : 0, true);
            } else {
                for (std::size_t bi = 0; bi < p.batch; ++bi)
                    kern::gemm_batched(g + bi * p.m * p.n,
                                       b->value.data() + (p.b_batched ? bi * p.k * p.n : 0),
                                       a->grad.data(), 1, p.m, p.n, p.k, false, true, 0, 0, true);
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            if (p.b_batched || p.batch == 1) {
                kern::gemm_batched(a->value.data(), g, b->grad.data(), p.batch, p.k, p.m, p.n,
                                   true, false, p.a_batched ? p.m * p.k : 0, p.m * p.n, true);
            } else {
                for (std::size_t bi = 0; bi < p.batch; ++bi)
                    kern::gemm_batched(a->value.data() + (p.a_batched ? bi * p.m * p.k : 0),
                                       g + bi * p.m * p.n, b->grad.data(), 1, p.k, p.m, p.n,
                                       true, false, 0, 0, true);
            }
        }
    };
    return result;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
    check_suffix("add", a, b);
    const std::size_t period = b->numel();
    std::vector<double> out(a->numel());
    kern::binary_apply_cyclic(a->value.data(), b->value.data(), out.data(), a->numel(), period,
                              [](double x, double y) { return x + y; });
    const bool needs = a->requires_grad || b->requires_grad;
    auto result = emit(a->shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, b, period, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const auto& g = out_t->grad;
        if (a->requires_grad) {
            a->ensure_grad();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
                a->grad[i] += g[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            reduce_cyclic_accum(g, period, b->grad);
        }
    };
    return result;
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
    check_suffix("sub", a, b);
    const std::size_t period = b->numel();
    std::vector<double> out(a->numel());
    kern::binary_apply_cyclic(a->value.data(), b->value.data(), out.data(), a->numel(), period,
                              [](double x, double y) { return x - y; });
    const bool needs = a->requires_grad || b->requires_grad;
    auto result = emit(a->shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, b, period, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const auto& g = out_t->grad;
        if (a->requires_grad) {
            a->ensure_grad();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
                a->grad[i] += g[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            const std::size_t cycles = g.size() / period;
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(period); ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < cycles; ++c) s += g[c * period + j];
                b->grad[j] -= s;
            }
        }
    };
    return result;
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
    check_suffix("mul", a, b);
    const std::size_t period = b->numel();
    std::vector<double> out(a->numel());
    kern::binary_apply_cyclic(a->value.data(), b->value.data(), out.data(), a->numel(), period,
                              [](double x, double y) { return x * y; });
    const bool needs = a->requires_grad || b->requires_grad;
    auto result = emit(a->shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, b, period, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const auto& g = out_t->grad;
        if (a->requires_grad) {
            a->ensure_grad();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
                a->grad[i] += g[i] * b->value[i % period];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            const std::size_t cycles = g.size() / period;
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(period); ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < cycles; ++c)
                    s += g[c * period + j] * a->value[c * period + j];
                b->grad[j] += s;
            }
        }
    };
    return result;
}

TensorPtr Graph::affine(const TensorPtr& a, double k, double c) {
    std::vector<double> out(a->numel());
    kern::unary_apply(a->value.data(), out.data(), a->numel(),
                      [k, c](double x) { return k * x + c; });
    auto result = emit(a->shape, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, k, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const auto& g = out_t->grad;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
            a->grad[i] += k * g[i];
    };
    return result;
}

// Shared machinery for elementwise unary ops whose derivative depends on the
// input value only.
#define FPT_UNARY_OP(NAME, FWD_EXPR, DERIV_EXPR)                                              \
    TensorPtr Graph::NAME(const TensorPtr& a) {                                               \
        std::vector<double> out(a->numel());                                                  \
        kern::unary_apply(a->value.data(), out.data(), a->numel(),                            \
                          [](double x) { (void)x; return (FWD_EXPR); });                      \
        auto result = emit(a->shape, std::move(out), a->requires_grad, nullptr);              \
        if (!a->requires_grad) return result;                                                 \
        std::weak_ptr<Tensor> wout = result;                                                  \
        tape_.back().fn = [a, wout]() {                                                       \
            auto out_t = wout.lock();                                                         \
            if (!out_t || out_t->grad.empty()) return;                                        \
            a->ensure_grad();                                                                 \
            const auto& g = out_t->grad;                                                      \
            _Pragma("omp parallel for schedule(static)")                                      \
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i) {      \
                const double x = a->value[i];                                                 \
                (void)x;                                                                      \
                a->grad[i] += g[i] * (DERIV_EXPR);                                            \
            }                                                                                 \
        };                                                                                    \
        return result;                                                                        \
    }

FPT_UNARY_OP(gelu, 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)),
             0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x))
FPT_UNARY_OP(sigmoid, sigmoid_scalar(x), sigmoid_scalar(x) * (1.0 - sigmoid_scalar(x)))
FPT_UNARY_OP(softplus, std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x))),
             sigmoid_scalar(x))
FPT_UNARY_OP(log, std::log(x), 1.0 / x)
FPT_UNARY_OP(exp, std::exp(x), std::exp(x))
FPT_UNARY_OP(absval, std::fabs(x), x >= 0.0 ? 1.0 : -1.0)

#undef FPT_UNARY_OP

TensorPtr Graph::clamp_min(const TensorPtr& a, double c) {
    std::vector<double> out(a->numel());
    kern::unary_apply(a->value.data(), out.data(), a->numel(),
                      [c](double x) { return std::fmax(x, c); });
    auto result = emit(a->shape, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, c, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const auto& g = out_t->grad;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
            if (a->value[i] > c) a->grad[i] += g[i];
    };
    return result;
}

TensorPtr Graph::softmax_rows(const TensorPtr& a) {
    if (a->shape.empty()) throw std::invalid_argument("softmax_rows: rank-0 input");
    const std::size_t cols = static_cast<std::size_t>(a->shape.back());
    const std::size_t rows = a->numel() / cols;
    std::vector<double> out(a->numel());
    kern::softmax_rows(a->value.data(), out.data(), rows, cols);
    auto result = emit(a->shape, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, rows, cols, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const auto& g = out_t->grad;
        const auto& p = out_t->value;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += g[off + j] * p[off + j];
            for (std::size_t j = 0; j < cols; ++j)
                a->grad[off + j] += p[off + j] * (g[off + j] - dot);
        }
    };
    return result;
}

TensorPtr Graph::softmax_rows_weighted(const TensorPtr& a, int split, const TensorPtr& w) {
    if (a->shape.empty()) throw std::invalid_argument("softmax_rows_weighted: rank-0 input");
    if (w->numel() != 1) throw std::invalid_argument("softmax_rows_weighted: weight must be scalar");
    const std::size_t cols = static_cast<std::size_t>(a->shape.back());
    if (split < 0 || static_cast<std::size_t>(split) > cols)
        throw std::invalid_argument("softmax_rows_weighted: split out of range");
    const std::size_t s = static_cast<std::size_t>(split);
    const std::size_t rows = a->numel() / cols;
    const double wv = w->value[0];
    std::vector<double> out(a->numel());
    kern::softmax_rows_weighted(a->value.data(), out.data(), rows, cols, s, wv);
    const bool needs = a->requires_grad || w->requires_grad;
    auto result = emit(a->shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, w, s, rows, cols, wv, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const auto& g = out_t->grad;
        const auto& p = out_t->value;
        if (a->requires_grad) {
            a->ensure_grad();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * cols;
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += g[off + j] * p[off + j];
                for (std::size_t j = 0; j < cols; ++j)
                    a->grad[off + j] += p[off + j] * (g[off + j] - dot);
            }
        }
        if (w->requires_grad && s < cols) {
            w->ensure_grad();
            double dw = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t off = r * cols;
                // recompute the exponentials with the same max convention
                double mx = -std::numeric_limits<double>::infinity();
                const std::size_t max_cols = (wv == 0.0) ? s : cols;
                for (std::size_t j = 0; j < max_cols; ++j)
                    mx = std::fmax(mx, a->value[off + j]);
                double z_head = 0.0, z_tail = 0.0, ge_tail = 0.0, gp = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double e = std::exp(a->value[off + j] - mx);
                    if (j < s) z_head += e;
                    else {
                        z_tail += e;
                        ge_tail += g[off + j] * e;
                    }
                    gp += g[off + j] * p[off + j];
                }
                const double z = z_head + wv * z_tail;
                dw += (ge_tail - gp * z_tail) / z;
            }
            w->grad[0] += dw;
        }
    };
    return result;
}

TensorPtr Graph::layer_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                            double eps) {
    if (x->shape.empty()) throw std::invalid_argument("layer_norm: rank-0 input");
    const std::size_t cols = static_cast<std::size_t>(x->shape.back());
    if (gamma->numel() != cols || beta->numel() != cols)
        throw std::invalid_argument("layer_norm: affine shapes " + shape_str(gamma->shape) + "/" +
                                    shape_str(beta->shape) + " do not match feature axis of " +
                                    shape_str(x->shape));
    const std::size_t rows = x->numel() / cols;
    std::vector<double> out(x->numel());
    auto mean_cache = std::make_shared<std::vector<double>>(rows);
    auto istd_cache = std::make_shared<std::vector<double>>(rows);
    kern::layer_norm_rows(x->value.data(), gamma->value.data(), beta->value.data(), out.data(),
                          mean_cache->data(), istd_cache->data(), rows, cols, eps);
    const bool needs = x->requires_grad || gamma->requires_grad || beta->requires_grad;
    auto result = emit(x->shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [x, gamma, beta, rows, cols, mean_cache, istd_cache, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const auto& g = out_t->grad;
        if (gamma->requires_grad) {
            gamma->ensure_grad();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cols); ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double xh =
                        (x->value[r * cols + j] - (*mean_cache)[r]) * (*istd_cache)[r];
                    s += g[r * cols + j] * xh;
                }
                gamma->grad[j] += s;
            }
        }
        if (beta->requires_grad) {
            beta->ensure_grad();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cols); ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < rows; ++r) s += g[r * cols + j];
                beta->grad[j] += s;
            }
        }
        if (x->requires_grad) {
            x->ensure_grad();
            const double inv_cols = 1.0 / static_cast<double>(cols);
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
                const std::size_t off = static_cast<std::size_t>(r) * cols;
                const double mu = (*mean_cache)[r];
                const double istd = (*istd_cache)[r];
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double dxh = g[off + j] * gamma->value[j];
                    const double xh = (x->value[off + j] - mu) * istd;
                    m1 += dxh;
                    m2 += dxh * xh;
                }
                m1 *= inv_cols;
                m2 *= inv_cols;
                for (std::size_t j = 0; j < cols; ++j) {
                    const double dxh = g[off + j] * gamma->value[j];
                    const double xh = (x->value[off + j] - mu) * istd;
                    x->grad[off + j] += istd * (dxh - m1 - xh * m2);
                }
            }
        }
    };
    return result;
}

std::pair<TensorPtr, TensorPtr> Graph::rfft(const TensorPtr& x) {
    if (x->shape.empty()) throw std::invalid_argument("rfft: rank-0 input");
    const std::size_t n = static_cast<std::size_t>(x->shape.back());
    const std::size_t bins = n / 2 + 1;
    const std::size_t rows = x->numel() / n;
    Shape out_shape = x->shape;
    out_shape.back() = static_cast<int>(bins);
    std::vector<double> re(rows * bins), im(rows * bins);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        fft::rfft(x->value.data() + r * n, n, re.data() + r * bins, im.data() + r * bins);
    auto out_re = Tensor::from(out_shape, std::move(re), false);
    auto out_im = Tensor::from(out_shape, std::move(im), false);
    if (x->requires_grad) {
        out_re->requires_grad = true;
        out_im->requires_grad = true;
        std::weak_ptr<Tensor> wre = out_re, wim = out_im;
        tape_.push_back({out_re, [x, n, bins, rows, wre, wim]() {
            auto tre = wre.lock();
            auto tim = wim.lock();
            const bool has_re = tre && !tre->grad.empty();
            const bool has_im = tim && !tim->grad.empty();
            if (!has_re && !has_im) return;
            x->ensure_grad();
            std::vector<double> zeros;
            if (!has_re || !has_im) zeros.assign(bins, 0.0);
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
                const double* gre = has_re ? tre->grad.data() + r * bins : zeros.data();
                const double* gim = has_im ? tim->grad.data() + r * bins : zeros.data();
                fft::rfft_adjoint(gre, gim, n, x->grad.data() + r * n);
            }
        }});
    }
    return {out_re, out_im};
}

TensorPtr Graph::irfft(const TensorPtr& re, const TensorPtr& im, int n) {
    if (re->shape != im->shape)
        throw std::invalid_argument("irfft: real/imag shapes disagree: " + shape_str(re->shape) +
                                    " vs " + shape_str(im->shape));
    const std::size_t bins = static_cast<std::size_t>(re->shape.back());
    if (n < 1 || bins != static_cast<std::size_t>(n) / 2 + 1)
        throw std::invalid_argument("irfft: bin count " + std::to_string(bins) +
                                    " does not match output length " + std::to_string(n));
    const std::size_t nn = static_cast<std::size_t>(n);
    const std::size_t rows = re->numel() / bins;
    Shape out_shape = re->shape;
    out_shape.back() = n;
    std::vector<double> out(rows * nn);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        fft::irfft(re->value.data() + r * bins, im->value.data() + r * bins, nn,
                   out.data() + r * nn);
    const bool needs = re->requires_grad || im->requires_grad;
    auto result = emit(out_shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [re, im, nn, bins, rows, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        if (re->requires_grad) re->ensure_grad();
        if (im->requires_grad) im->ensure_grad();
        std::vector<double> dre(bins), dim(bins);
        for (std::size_t r = 0; r < rows; ++r) {
            std::fill(dre.begin(), dre.end(), 0.0);
            std::fill(dim.begin(), dim.end(), 0.0);
            fft::irfft_adjoint(out_t->grad.data() + r * nn, nn, dre.data(), dim.data());
            if (re->requires_grad)
                for (std::size_t k = 0; k < bins; ++k) re->grad[r * bins + k] += dre[k];
            if (im->requires_grad)
                for (std::size_t k = 0; k < bins; ++k) im->grad[r * bins + k] += dim[k];
        }
    };
    return result;
}

TensorPtr Graph::mean(const TensorPtr& a) {
    const double inv = 1.0 / static_cast<double>(a->numel());
    std::vector<double> out{kern::sum_all(a->value.data(), a->numel()) * inv};
    auto result = emit({1}, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, inv, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const double g = out_t->grad[0] * inv;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a->numel()); ++i)
            a->grad[i] += g;
    };
    return result;
}

TensorPtr Graph::sum(const TensorPtr& a) {
    std::vector<double> out{kern::sum_all(a->value.data(), a->numel())};
    auto result = emit({1}, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const double g = out_t->grad[0];
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a->numel()); ++i)
            a->grad[i] += g;
    };
    return result;
}

namespace {

// Splits a shape at `axis` into (outer, axis_len, inner) block sizes.
void axis_blocks(const Shape& s, int axis, std::size_t& outer, std::size_t& alen,
                 std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[i]);
    alen = static_cast<std::size_t>(s[axis]);
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= static_cast<std::size_t>(s[i]);
}

}  // namespace

TensorPtr Graph::concat(const std::vector<TensorPtr>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no operands");
    const int rank = static_cast<int>(parts[0]->shape.size());
    if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: axis out of range");
    Shape out_shape = parts[0]->shape;
    int total_axis = 0;
    for (const auto& p : parts) {
        if (static_cast<int>(p->shape.size()) != rank)
            throw std::invalid_argument("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && p->shape[d] != out_shape[d])
                throw std::invalid_argument("concat: shapes " + shape_str(out_shape) + " and " +
                                            shape_str(p->shape) + " disagree off axis " +
                                            std::to_string(axis));
        total_axis += p->shape[axis];
    }
    out_shape[axis] = total_axis;
    std::size_t outer, alen, inner;
    axis_blocks(out_shape, axis, outer, alen, inner);
    std::vector<double> out(shape_numel(out_shape));
    std::size_t axis_off = 0;
    for (const auto& p : parts) {
        const std::size_t pa = static_cast<std::size_t>(p->shape[axis]);
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(p->value.begin() + o * pa * inner, p->value.begin() + (o + 1) * pa * inner,
                      out.begin() + (o * alen + axis_off) * inner);
        axis_off += pa;
    }
    bool needs = false;
    for (const auto& p : parts) needs |= p->requires_grad;
    auto result = emit(out_shape, std::move(out), needs, nullptr);
    if (!needs) return result;
    std::weak_ptr<Tensor> wout = result;
    auto parts_copy = parts;
    tape_.back().fn = [parts_copy, outer, alen, inner, axis, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        const auto& g = out_t->grad;
        std::size_t axis_off = 0;
        for (const auto& p : parts_copy) {
            const std::size_t pa = static_cast<std::size_t>(p->shape[axis]);
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t o = 0; o < outer; ++o) {
                    const double* src = g.data() + (o * alen + axis_off) * inner;
                    double* dst = p->grad.data() + o * pa * inner;
                    for (std::size_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
                }
            }
            axis_off += pa;
        }
    };
    return result;
}

TensorPtr Graph::slice(const TensorPtr& a, int axis, int start, int len) {
    const int rank = static_cast<int>(a->shape.size());
    if (axis < 0 || axis >= rank) throw std::invalid_argument("slice: axis out of range");
    if (start < 0 || len < 1 || start + len > a->shape[axis])
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") exceeds axis " +
                                    std::to_string(axis) + " of " + shape_str(a->shape));
    std::size_t outer, alen, inner;
    axis_blocks(a->shape, axis, outer, alen, inner);
    Shape out_shape = a->shape;
    out_shape[axis] = len;
    std::vector<double> out(outer * static_cast<std::size_t>(len) * inner);
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(a->value.begin() + (o * alen + start) * inner,
                  a->value.begin() + (o * alen + start + len) * inner,
                  out.begin() + o * len * inner);
    auto result = emit(out_shape, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, outer, alen, inner, start, len, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const auto& g = out_t->grad;
        for (std::size_t o = 0; o < outer; ++o) {
            const double* src = g.data() + o * len * inner;
            double* dst = a->grad.data() + (o * alen + start) * inner;
            for (std::size_t i = 0; i < static_cast<std::size_t>(len) * inner; ++i)
                dst[i] += src[i];
        }
    };
    return result;
}

TensorPtr Graph::transpose(const TensorPtr& a, int ax0, int ax1) {
    const int rank = static_cast<int>(a->shape.size());
    if (ax0 < 0) ax0 += rank;
    if (ax1 < 0) ax1 += rank;
    if (ax0 < 0 || ax0 >= rank || ax1 < 0 || ax1 >= rank)
        throw std::invalid_argument("transpose: axes out of range for " + shape_str(a->shape));
    if (ax0 == ax1) return reshape(a, a->shape);
    if (ax0 > ax1) std::swap(ax0, ax1);
    Shape out_shape = a->shape;
    std::swap(out_shape[ax0], out_shape[ax1]);
    std::vector<double> out(a->numel());
    transpose_copy(a->value, a->shape, ax0, ax1, out, false);
    auto result = emit(out_shape, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    auto out_shape_copy = result->shape;
    tape_.back().fn = [a, ax0, ax1, out_shape_copy, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        transpose_copy(out_t->grad, out_shape_copy, ax0, ax1, a->grad, true);
    };
    return result;
}

TensorPtr Graph::reshape(const TensorPtr& a, Shape s) {
    if (shape_numel(s) != a->numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a->shape) + " as " +
                                    shape_str(s));
    std::vector<double> out = a->value;
    auto result = emit(std::move(s), std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const auto& g = out_t->grad;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
            a->grad[i] += g[i];
    };
    return result;
}

TensorPtr Graph::dropout(const TensorPtr& a, double p) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    if (!rng_) throw std::logic_error("dropout: graph has no RNG attached");
    const double keep = 1.0 - p;
    const double inv_keep = 1.0 / keep;
    auto mask = std::make_shared<std::vector<double>>(a->numel());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : *mask) m = (u(*rng_) < keep) ? inv_keep : 0.0;
    std::vector<double> out(a->numel());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a->numel()); ++i)
        out[i] = a->value[i] * (*mask)[i];
    auto result = emit(a->shape, std::move(out), a->requires_grad, nullptr);
    if (!a->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    tape_.back().fn = [a, mask, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        a->ensure_grad();
        const auto& g = out_t->grad;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g.size()); ++i)
            a->grad[i] += g[i] * (*mask)[i];
    };
    return result;
}

TensorPtr Graph::cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
    if (logits->shape.size() != 2)
        throw std::invalid_argument("cross_entropy: logits must be [batch, classes], got " +
                                    shape_str(logits->shape));
    const std::size_t batch = static_cast<std::size_t>(logits->shape[0]);
    const std::size_t classes = static_cast<std::size_t>(logits->shape[1]);
    if (labels.size() != batch)
        throw std::invalid_argument("cross_entropy: batch size " + std::to_string(batch) +
                                    " but " + std::to_string(labels.size()) + " labels");
    for (int lbl : labels)
        if (lbl < 0 || static_cast<std::size_t>(lbl) >= classes)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(lbl) +
                                        " outside [0," + std::to_string(classes) + ")");
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        const double* xr = logits->value.data() + r * classes;
        double mx = xr[0];
        for (std::size_t j = 1; j < classes; ++j) mx = std::fmax(mx, xr[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < classes; ++j) z += std::exp(xr[j] - mx);
        total += mx + std::log(z) - xr[labels[r]];
    }
    std::vector<double> out{total / static_cast<double>(batch)};
    auto result = emit({1}, std::move(out), logits->requires_grad, nullptr);
    if (!logits->requires_grad) return result;
    std::weak_ptr<Tensor> wout = result;
    auto labels_copy = labels;
    tape_.back().fn = [logits, labels_copy, batch, classes, wout]() {
        auto out_t = wout.lock();
        if (!out_t || out_t->grad.empty()) return;
        logits->ensure_grad();
        const double g = out_t->grad[0] / static_cast<double>(batch);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(batch); ++r) {
            const double* xr = logits->value.data() + r * classes;
            double mx = xr[0];
            for (std::size_t j = 1; j < classes; ++j) mx = std::fmax(mx, xr[j]);
            double z = 0.0;
            for (std::size_t j = 0; j < classes; ++j) z += std::exp(xr[j] - mx);
            for (std::size_t j = 0; j < classes; ++j) {
                const double p = std::exp(xr[j] - mx) / z;
                const double ind = (static_cast<std::size_t>(labels_copy[r]) == j) ? 1.0 : 0.0;
                logits->grad[r * classes + j] += g * (p - ind);
            }
        }
    };
    return result;
}

TensorPtr Graph::detach(const TensorPtr& a) {
    return Tensor::from(a->shape, a->value, false);
}

void Graph::backward(const TensorPtr& loss) {
    if (loss->numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) it->fn();
}

}  // namespace fpt
