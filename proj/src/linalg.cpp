#include "fpt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fpt::linalg {

EigenSym eigen_sym(const std::vector<double>& m, int n) {
    if (m.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("eigen_sym: matrix size does not match n");
    std::vector<double> a = m;
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto at = [&](std::vector<double>& mat, int i, int j) -> double& {
        return mat[static_cast<std::size_t>(i) * n + j];
    };

    double fro = 0.0;
    for (double x : a) fro += x * x;
    const double tol = 1e-30 * std::max(fro, 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(a, i, j) * at(a, i, j);
        if (off <= tol) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(a, p, q);
                if (apq == 0.0) continue;
                const double app = at(a, p, p), aqq = at(a, q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(a, k, p), akq = at(a, k, q);
                    at(a, k, p) = c * akp - s * akq;
                    at(a, k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(a, p, k), aqk = at(a, q, k);
                    at(a, p, k) = c * apk - s * aqk;
                    at(a, q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = at(v, k, p), vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - s * vkq;
                    at(v, k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = at(a, i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return diag[i] > diag[j]; });

    EigenSym out;
    out.n = n;
    out.values.resize(n);
    out.vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (int i = 0; i < n; ++i)
            out.vectors[static_cast<std::size_t>(i) * n + j] = at(v, i, order[j]);
    }
    return out;
}

double spectral_norm(const std::vector<double>& a, int rows, int cols, int iters) {
    if (a.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("spectral_norm: matrix size does not match dims");
    std::vector<double> x(cols, 1.0 / std::sqrt(static_cast<double>(cols)));
    std::vector<double> ax(rows), atax(cols);
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += a[static_cast<std::size_t>(i) * cols + j] * x[j];
            ax[i] = s;
        }
        for (int j = 0; j < cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < rows; ++i) s += a[static_cast<std::size_t>(i) * cols + j] * ax[i];
            atax[j] = s;
        }
        double norm = 0.0;
        for (double vv : atax) norm += vv * vv;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        double new_lam = 0.0;
        for (int j = 0; j < cols; ++j) new_lam += x[j] * atax[j];
        for (int j = 0; j < cols; ++j) x[j] = atax[j] / norm;
        if (it > 10 && std::fabs(new_lam - lam) <= 1e-15 * std::max(1.0, std::fabs(new_lam)))
            break;
        lam = new_lam;
    }
    double final_lam = 0.0;
    for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) s += a[static_cast<std::size_t>(i) * cols + j] * x[j];
        final_lam += s * s;
    }
    return std::sqrt(final_lam);
}

std::vector<double> singular_values(const std::vector<double>& a, int rows, int cols) {
    // one-sided Jacobi on columns: keeps tiny singular values accurate,
    // unlike the A^T A route which floors them at sqrt(eps) * s1
    int r = rows, c = cols;
    std::vector<double> m;
    if (rows >= cols) {
        m = a;
    } else {
        m.resize(a.size());
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                m[static_cast<std::size_t>(j) * rows + i] =
                    a[static_cast<std::size_t>(i) * cols + j];
        r = cols;
        c = rows;
    }
    auto col_dot = [&](int i, int j) {
        double s = 0.0;
        for (int k = 0; k < r; ++k)
            s += m[static_cast<std::size_t>(k) * c + i] * m[static_cast<std::size_t>(k) * c + j];
        return s;
    };
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool converged = true;
        for (int i = 0; i < c - 1; ++i) {
            for (int j = i + 1; j < c; ++j) {
                const double alpha = col_dot(i, i);
                const double beta = col_dot(j, j);
                const double gamma = col_dot(i, j);
                if (std::fabs(gamma) <= 1e-30 * std::sqrt(alpha * beta) || gamma == 0.0)
                    continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (int k = 0; k < r; ++k) {
                    const double vi = m[static_cast<std::size_t>(k) * c + i];
                    const double vj = m[static_cast<std::size_t>(k) * c + j];
                    m[static_cast<std::size_t>(k) * c + i] = cs * vi - sn * vj;
                    m[static_cast<std::size_t>(k) * c + j] = sn * vi + cs * vj;
                }
            }
        }
        if (converged) break;
    }
    std::vector<double> sv(c);
    for (int j = 0; j < c; ++j) sv[j] = std::sqrt(std::max(0.0, col_dot(j, j)));
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

}  // namespace fpt::linalg
