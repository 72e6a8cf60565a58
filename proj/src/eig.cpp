#include "attnkit/eig.hpp"

#include <cmath>
#include <stdexcept>

namespace attnkit {

namespace {

using cd = std::complex<double>;
using CMat = std::vector<cd>;  // row-major n x n

// Householder reduction to upper Hessenberg form (similarity transform).
void hessenberg(CMat& h, int n) {
  for (int k = 0; k < n - 2; ++k) {
    double norm = 0.0;
    for (int i = k + 1; i < n; ++i) norm += std::norm(h[i * n + k]);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    cd pivot = h[(k + 1) * n + k];
    cd alpha = (std::abs(pivot) == 0.0) ? cd(-norm, 0.0) : -(pivot / std::abs(pivot)) * norm;

    // v = x - alpha*e1, normalized.
    std::vector<cd> v(n, cd(0.0, 0.0));
    v[k + 1] = pivot - alpha;
    for (int i = k + 2; i < n; ++i) v[i] = h[i * n + k];
    double vnorm = 0.0;
    for (int i = k + 1; i < n; ++i) vnorm += std::norm(v[i]);
    if (vnorm == 0.0) continue;
    vnorm = std::sqrt(vnorm);
    for (int i = k + 1; i < n; ++i) v[i] /= vnorm;

    // H := (I - 2 v v*) H (I - 2 v v*)
    for (int j = 0; j < n; ++j) {
      cd s(0.0, 0.0);
      for (int i = k + 1; i < n; ++i) s += std::conj(v[i]) * h[i * n + j];
      s *= 2.0;
      for (int i = k + 1; i < n; ++i) h[i * n + j] -= v[i] * s;
    }
    for (int i = 0; i < n; ++i) {
      cd s(0.0, 0.0);
      for (int j = k + 1; j < n; ++j) s += h[i * n + j] * v[j];
      s *= 2.0;
      for (int j = k + 1; j < n; ++j) h[i * n + j] -= s * std::conj(v[j]);
    }
  }
}

// Eigenvalue of the trailing 2x2 block closest to its bottom-right entry.
cd wilkinson_shift(const CMat& h, int n, int m) {
  const cd a = h[(m - 1) * n + (m - 1)];
  const cd b = h[(m - 1) * n + m];
  const cd c = h[m * n + (m - 1)];
  const cd d = h[m * n + m];
  const cd tr = a + d;
  const cd disc = std::sqrt(tr * tr - 4.0 * (a * d - b * c));
  const cd l1 = (tr + disc) / 2.0;
  const cd l2 = (tr - disc) / 2.0;
  return std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const std::vector<double>& a, int n) {
  if (n < 0 || static_cast<int64_t>(a.size()) != int64_t(n) * n)
    throw std::invalid_argument("eigenvalues: matrix size mismatch");
  if (n > 64) throw std::invalid_argument("eigenvalues: matrix larger than 64x64");
  if (n == 0) return {};

  CMat h(a.begin(), a.end());
  hessenberg(h, n);

  std::vector<cd> eigs;
  eigs.reserve(n);
  int m = n - 1;  // active block is rows/cols [0, m]
  int iterations = 0;
  const int max_iterations = 200 * n + 200;
  const double eps = 1e-14;

  while (m >= 0) {
    if (m == 0) {
      eigs.push_back(h[0]);
      break;
    }
    // Deflate converged subdiagonal entries at the bottom of the block.
    const double sub = std::abs(h[m * n + (m - 1)]);
    if (sub <= eps * (std::abs(h[(m - 1) * n + (m - 1)]) + std::abs(h[m * n + m]))) {
      eigs.push_back(h[m * n + m]);
      --m;
      continue;
    }
    if (++iterations > max_iterations)
      throw std::runtime_error("eigenvalues: QR iteration failed to converge");

    const cd mu = wilkinson_shift(h, n, m);
    for (int i = 0; i <= m; ++i) h[i * n + i] -= mu;

    // QR step on the active Hessenberg block via Givens rotations: zero the
    // subdiagonal (H -> R), then multiply by the rotations on the right.
    std::vector<cd> cs(m), sn(m);
    for (int i = 0; i < m; ++i) {
      const cd x = h[i * n + i];
      const cd y = h[(i + 1) * n + i];
      const double r = std::sqrt(std::norm(x) + std::norm(y));
      if (r == 0.0) {
        cs[i] = cd(1.0, 0.0);
        sn[i] = cd(0.0, 0.0);
        continue;
      }
      cs[i] = x / r;
      sn[i] = y / r;
      for (int j = i; j <= m; ++j) {
        const cd hi = h[i * n + j];
        const cd hj = h[(i + 1) * n + j];
        h[i * n + j] = std::conj(cs[i]) * hi + std::conj(sn[i]) * hj;
        h[(i + 1) * n + j] = -sn[i] * hi + cs[i] * hj;
      }
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j <= std::min(i + 1, m); ++j) {
        const cd hji = h[j * n + i];
        const cd hji1 = h[j * n + i + 1];
        h[j * n + i] = hji * cs[i] + hji1 * sn[i];
        h[j * n + i + 1] = -hji * std::conj(sn[i]) + hji1 * std::conj(cs[i]);
      }
    }
    for (int i = 0; i <= m; ++i) h[i * n + i] += mu;
  }
  return eigs;
}

double det_abs(const std::vector<double>& a, int n) {
  if (n < 0 || static_cast<int64_t>(a.size()) != int64_t(n) * n)
    throw std::invalid_argument("det_abs: matrix size mismatch");
  if (n == 0) return 1.0;

  std::vector<double> lu = a;
  double logdet = 0.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(lu[i * n + k]) > std::fabs(lu[piv * n + k])) piv = i;
    if (lu[piv * n + k] == 0.0) return 0.0;
    if (piv != k)
      for (int j = 0; j < n; ++j) std::swap(lu[k * n + j], lu[piv * n + j]);
    logdet += std::log(std::fabs(lu[k * n + k]));
    for (int i = k + 1; i < n; ++i) {
      const double f = lu[i * n + k] / lu[k * n + k];
      for (int j = k; j < n; ++j) lu[i * n + j] -= f * lu[k * n + j];
    }
  }
  return std::exp(logdet);
}

}  // namespace attnkit
