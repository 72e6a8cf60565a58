#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>

#include "attnkit/eig.hpp"
#include "attnkit/rng.hpp"
#include "cubic_oracle.h"

using namespace attnkit;

namespace {

std::vector<double> sorted_magnitudes(const std::vector<std::complex<double>>& eigs) {
  std::vector<double> mags;
  for (const auto& e : eigs) mags.push_back(std::abs(e));
  std::sort(mags.begin(), mags.end());
  return mags;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) CHECK(std::fabs(got[i] - want[i]) < tol);
}

}  // namespace

TEST_CASE("identity and diagonal matrices") {
  const std::vector<double> eye{1, 0, 0, 1};
  for (const auto& e : eigenvalues(eye, 2)) {
    CHECK(e.real() == doctest::Approx(1.0));
    CHECK(e.imag() == doctest::Approx(0.0));
  }

  const std::vector<double> diag{2, 0, 0, 4};
  check_close(sorted_magnitudes(eigenvalues(diag, 2)), {2.0, 4.0}, 1e-12);
  CHECK(det_abs(diag, 2) == doctest::Approx(8.0));
}

TEST_CASE("ninety-degree rotation has eigenvalues plus and minus i") {
  const std::vector<double> rot{0, -1, 1, 0};
  auto eigs = eigenvalues(rot, 2);
  REQUIRE(eigs.size() == 2);
  std::sort(eigs.begin(), eigs.end(),
            [](const auto& a, const auto& b) { return a.imag() < b.imag(); });
  CHECK(eigs[0].real() == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(eigs[0].imag() == doctest::Approx(-1.0));
  CHECK(eigs[1].imag() == doctest::Approx(1.0));
}

TEST_CASE("upper-triangular eigenvalues are the diagonal") {
  const std::vector<double> t{3, 5, -2, 0, -1, 7, 0, 0, 0.5};
  check_close(sorted_magnitudes(eigenvalues(t, 3)), {0.5, 1.0, 3.0}, 1e-10);
}

TEST_CASE("random matrices agree with the characteristic-polynomial oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> a(9);
    for (double& v : a) v = rng.normal();
    const auto got = sorted_magnitudes(eigenvalues(a, 3));
    const auto want = char_poly_eig_magnitudes_3x3(a);
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(got[i] - want[i]) < 1e-8);
  }
}

TEST_CASE("determinant magnitude of a singular matrix is zero") {
  const std::vector<double> s{1, 2, 2, 4};
  CHECK(det_abs(s, 2) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(eigenvalues({1.0}, 2), std::invalid_argument);
}
