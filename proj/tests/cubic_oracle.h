#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <vector>

// Independent characteristic-polynomial oracle for 3x3 eigenvalue tests:
// solves lambda^3 - tr*lambda^2 + m2*lambda - det = 0 by Cardano's method
// in complex arithmetic and returns the root magnitudes, sorted.
inline std::vector<double> char_poly_eig_magnitudes_3x3(const std::vector<double>& a) {
  const auto at = [&](int r, int c) { return a[r * 3 + c]; };
  const double tr = at(0, 0) + at(1, 1) + at(2, 2);
  const double m2 = at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0) + at(0, 0) * at(2, 2) -
                    at(0, 2) * at(2, 0) + at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1);
  const double det = at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
                     at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
                     at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));

  // lambda = t + tr/3 turns the polynomial into t^3 + p t + q.
  using cd = std::complex<double>;
  const double b = -tr, c = m2, d = -det;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;

  const cd disc = std::sqrt(cd(q * q / 4.0 + p * p * p / 27.0, 0.0));
  cd u3 = cd(-q / 2.0, 0.0) + disc;
  if (std::abs(u3) < 1e-30) u3 = cd(-q / 2.0, 0.0) - disc;
  const cd u = std::pow(u3, 1.0 / 3.0);
  const cd omega(-0.5, std::sqrt(3.0) / 2.0);

  std::vector<double> mags;
  for (int k = 0; k < 3; ++k) {
    cd uk = u;
    for (int i = 0; i < k; ++i) uk *= omega;
    const cd t = (std::abs(uk) < 1e-30) ? cd(0.0, 0.0) : uk - cd(p, 0.0) / (3.0 * uk);
    mags.push_back(std::abs(t + cd(-b / 3.0, 0.0)));
  }
  std::sort(mags.begin(), mags.end());
  return mags;
}
