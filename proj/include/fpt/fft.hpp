#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace fpt::fft {

// In-place complex FFT for any length: iterative radix-2 for powers of two,
// Bluestein chirp-z otherwise. inverse applies the 1/n factor.
void fft_complex(std::vector<std::complex<double>>& a, bool inverse);

// Real forward transform, unnormalized: bins k = 0 .. n/2 as separate
// real/imag planes (length n/2 + 1 each).
void rfft(const double* x, std::size_t n, double* re, double* im);

// Inverse of rfft for the given output length n (1/n normalized).
void irfft(const double* re, const double* im, std::size_t n, double* x);

// Adjoints of the two real-linear maps above, used by the backward pass.
// They accumulate into the destination buffers.
void rfft_adjoint(const double* gre, const double* gim, std::size_t n, double* gx);
void irfft_adjoint(const double* gx, std::size_t n, double* gre, double* gim);

}  // namespace fpt::fft
