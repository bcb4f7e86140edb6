#include "fpt/fft.hpp"

#include <cmath>
#include <numbers>

namespace fpt::fft {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative Cooley-Tukey, n a power of two. Applies no normalization.
void fft_pow2(std::vector<std::complex<double>>& a, bool invert_sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (invert_sign ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Bluestein chirp-z transform for arbitrary n (forward DFT sign).
void bluestein(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t t = 0; t < n; ++t) {
        // angle = pi * t^2 / n, reduced mod 2n to keep the argument small
        const std::size_t t2 = (t * t) % (2 * n);
        const double ang = kPi * static_cast<double>(t2) / static_cast<double>(n);
        chirp[t] = std::complex<double>(std::cos(ang), -std::sin(ang));
    }
    std::vector<std::complex<double>> u(m, {0.0, 0.0}), v(m, {0.0, 0.0});
    for (std::size_t t = 0; t < n; ++t) u[t] = a[t] * chirp[t];
    for (std::size_t t = 0; t < n; ++t) {
        v[t] = std::conj(chirp[t]);
        if (t) v[m - t] = std::conj(chirp[t]);
    }
    fft_pow2(u, false);
    fft_pow2(v, false);
    for (std::size_t i = 0; i < m; ++i) u[i] *= v[i];
    fft_pow2(u, true);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * inv_m * chirp[k];
}

}  // namespace

void fft_complex(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    if (!inverse) {
        if (is_pow2(n)) fft_pow2(a, false);
        else bluestein(a);
        return;
    }
    // inverse via conjugation: ifft(a) = conj(fft(conj(a))) / n
    for (auto& z : a) z = std::conj(z);
    if (is_pow2(n)) fft_pow2(a, false);
    else bluestein(a);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& z : a) z = std::conj(z) * inv_n;
}

void rfft(const double* x, std::size_t n, double* re, double* im) {
    std::vector<std::complex<double>> a(n);
    for (std::size_t t = 0; t < n; ++t) a[t] = {x[t], 0.0};
    fft_complex(a, false);
    const std::size_t bins = n / 2 + 1;
    for (std::size_t k = 0; k < bins; ++k) {
        re[k] = a[k].real();
        im[k] = a[k].imag();
    }
}

void irfft(const double* re, const double* im, std::size_t n, double* x) {
    std::vector<std::complex<double>> a(n);
    const std::size_t bins = n / 2 + 1;
    for (std::size_t k = 0; k < bins; ++k) a[k] = {re[k], im[k]};
    for (std::size_t k = bins; k < n; ++k) a[k] = std::conj(a[n - k]);
    fft_complex(a, true);
    for (std::size_t t = 0; t < n; ++t) x[t] = a[t].real();
}

void rfft_adjoint(const double* gre, const double* gim, std::size_t n, double* gx) {
    const std::size_t bins = n / 2 + 1;
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            const double ang = 2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n);
            s += gre[k] * std::cos(ang) - gim[k] * std::sin(ang);
        }
        gx[t] += s;
    }
}

void irfft_adjoint(const double* gx, std::size_t n, double* gre, double* gim) {
    const std::size_t bins = n / 2 + 1;
    for (std::size_t k = 0; k < bins; ++k) {
        // interior bins appear twice in the hermitian extension
        const bool edge = (k == 0) || (2 * k == n);
        const double c = (edge ? 1.0 : 2.0) / static_cast<double>(n);
        double sre = 0.0, sim = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = 2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n);
            sre += gx[t] * std::cos(ang);
            sim -= gx[t] * std::sin(ang);
        }
        gre[k] += c * sre;
        if (!edge) gim[k] += c * sim;
    }
}

}  // namespace fpt::fft
