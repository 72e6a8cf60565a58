#pragma once

#include <complex>
#include <vector>

namespace attnkit {

// Eigenvalues of a real square matrix (row-major, n x n, n <= 64), computed
// by Householder reduction to Hessenberg form followed by shifted QR
// iteration with deflation. Order is unspecified.
std::vector<std::complex<double>> eigenvalues(const std::vector<double>& a, int n);

// |det| via LU decomposition with partial pivoting.
double det_abs(const std::vector<double>& a, int n);

}  // namespace attnkit
