#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hvfwi/banded.hpp"
#include "hvfwi/errors.hpp"

using namespace hvfwi;

namespace {

// y = A x for the symmetric pentadiagonal matrix stored by diagonals.
std::vector<double> apply(const std::vector<double>& d, const std::vector<double>& e,
                          const std::vector<double>& g, const std::vector<double>& x) {
  const int n = static_cast<int>(d.size());
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    y[i] += d[i] * x[i];
    if (i + 1 < n) {
      y[i] += e[i] * x[i + 1];
      y[i + 1] += e[i] * x[i];
    }
    if (i + 2 < n) {
      y[i] += g[i] * x[i + 2];
      y[i + 2] += g[i] * x[i];
    }
  }
  return y;
}

}  // namespace

TEST_CASE("pentadiagonal solve recovers a manufactured solution") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + 7 * trial;
    std::vector<double> d(n), e(n - 1), g(n - 2), x(n);
    for (int i = 0; i < n - 1; ++i) e[i] = U(rng);
    for (int i = 0; i < n - 2; ++i) g[i] = U(rng);
    // Diagonal dominance keeps the pivot-free factorization stable.
    for (int i = 0; i < n; ++i) d[i] = 5.0 + U(rng);
    for (int i = 0; i < n; ++i) x[i] = U(rng);

    const auto rhs = apply(d, e, g, x);
    const auto sol = solve_pentadiagonal(d, e, g, rhs);
    REQUIRE(sol.size() == x.size());
    for (int i = 0; i < n; ++i) CHECK(sol[i] == doctest::Approx(x[i]).epsilon(1e-10));
  }
}

TEST_CASE("pentadiagonal solve handles a pure tridiagonal system") {
  const int n = 40;
  std::vector<double> d(n, 2.0), e(n - 1, -1.0), g(n - 2, 0.0), x(n);
  for (int i = 0; i < n; ++i) x[i] = std::sin(0.3 * i);
  const auto rhs = apply(d, e, g, x);
  const auto sol = solve_pentadiagonal(d, e, g, rhs);
  for (int i = 0; i < n; ++i) CHECK(sol[i] == doctest::Approx(x[i]).epsilon(1e-10));
}

TEST_CASE("pentadiagonal solve rejects a singular system") {
  std::vector<double> d(6, 0.0), e(5, 0.0), g(4, 0.0), rhs(6, 1.0);
  CHECK_THROWS_AS(solve_pentadiagonal(d, e, g, rhs), SingularSystem);
}
