#pragma once

#include <cstddef>
#include <vector>

namespace fpt::linalg {

// Eigendecomposition of a symmetric n x n matrix (cyclic Jacobi).
// values are sorted descending; vectors is row-major n x n with column j
// holding the eigenvector for values[j].
struct EigenSym {
    int n = 0;
    std::vector<double> values;
    std::vector<double> vectors;
};

EigenSym eigen_sym(const std::vector<double>& m, int n);

// Largest singular value of a general rows x cols matrix (power iteration
// on A^T A).
double spectral_norm(const std::vector<double>& a, int rows, int cols, int iters = 500);

// All singular values, descending (via eigen_sym of A^T A).
std::vector<double> singular_values(const std::vector<double>& a, int rows, int cols);

}  // namespace fpt::linalg
