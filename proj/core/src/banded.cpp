#include "hvfwi/banded.hpp"

#include <cmath>
#include <cstddef>

#include "hvfwi/errors.hpp"

namespace hvfwi {

// LDL^T factorization of a symmetric pentadiagonal matrix, no pivoting.
// gamma[i] is the (i+1,i) multiplier, delta[i] the (i+2,i) multiplier.
std::vector<double> solve_pentadiagonal(std::vector<double> d, std::vector<double> e,
                                        std::vector<double> g, std::vector<double> rhs) {
  const size_t n = d.size();
  if (n == 0) return {};
  e.resize(n, 0.0);
  g.resize(n, 0.0);

  std::vector<double> alpha(n), gamma(n, 0.0), delta(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double a = d[i];
    if (i >= 1) a -= gamma[i - 1] * gamma[i - 1] * alpha[i - 1];
    if (i >= 2) a -= delta[i - 2] * delta[i - 2] * alpha[i - 2];
    if (!(std::abs(a) > 1e-300))
      throw SingularSystem("pentadiagonal factorization hit a zero pivot");
    alpha[i] = a;
    if (i + 1 < n) {
      double ei = e[i];
      if (i >= 1) ei -= gamma[i - 1] * delta[i - 1] * alpha[i - 1];
      gamma[i] = ei / a;
    }
    if (i + 2 < n) delta[i] = g[i] / a;
  }

  // Forward substitution L z = rhs (reusing rhs as z).
  for (size_t i = 1; i < n; ++i) {
    rhs[i] -= gamma[i - 1] * rhs[i - 1];
    if (i >= 2) rhs[i] -= delta[i - 2] * rhs[i - 2];
  }
  for (size_t i = 0; i < n; ++i) rhs[i] /= alpha[i];
  // Back substitution L^T x = z.
  for (size_t k = n; k-- > 0;) {
    if (k + 1 < n) rhs[k] -= gamma[k] * rhs[k + 1];
    if (k + 2 < n) rhs[k] -= delta[k] * rhs[k + 2];
  }
  return rhs;
}

}  // namespace hvfwi
