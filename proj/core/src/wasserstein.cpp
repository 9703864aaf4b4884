#include "hvfwi/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hvfwi {

double shared_beta(const std::vector<double>& f0, const std::vector<double>& f1,
                   double beta_margin) {
  double lo = std::numeric_limits<double>::infinity();
  double amp = 0.0;
  for (double x : f0) {
    lo = std::min(lo, x);
    amp = std::max(amp, std::abs(x));
  }
  for (double x : f1) {
    lo = std::min(lo, x);
    amp = std::max(amp, std::abs(x));
  }
  if (amp == 0.0) amp = 1.0;  // degenerate all-zero pair still gets a positive shift
  return std::max(0.0, -lo) + beta_margin * amp;
}

NormalizedDensity normalize_with_beta(const std::vector<double>& f, double beta) {
  const int n = static_cast<int>(f.size());
  NormalizedDensity out;
  out.shift_beta = beta;
  out.pdf.resize(n);
  out.cdf.assign(n + 1, 0.0);
  const double cell = 1.0 / n;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) mass += (f[i] + beta) * cell;
  if (!(mass > 0.0)) throw ZeroMass("normalized signal has nonpositive mass");
  out.mass = mass;
  for (int i = 0; i < n; ++i) {
    out.pdf[i] = (f[i] + beta) / mass;
    out.cdf[i + 1] = out.cdf[i] + out.pdf[i] * cell;
  }
  out.cdf[n] = 1.0;  // clamp accumulated round-off
  return out;
}

NormalizedDensity normalize_linear(const std::vector<double>& f, double beta_margin) {
  return normalize_with_beta(f, shared_beta(f, f, beta_margin));
}

double quantile(const NormalizedDensity& p, double s) {
  const int n = static_cast<int>(p.pdf.size());
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  // Leftmost cell whose right edge reaches s.
  const auto it = std::lower_bound(p.cdf.begin() + 1, p.cdf.end(), s);
  const int i = static_cast<int>(it - p.cdf.begin()) - 1;
  const double span = p.cdf[i + 1] - p.cdf[i];
  const double a = span > 0.0 ? (s - p.cdf[i]) / span : 0.0;
  return (i + std::clamp(a, 0.0, 1.0)) / n;
}

double w2_transport_map(const NormalizedDensity& p, const NormalizedDensity& q, double s) {
  const int n = static_cast<int>(p.pdf.size());
  const double pos = std::clamp(s, 0.0, 1.0) * n;
  int i = std::min(static_cast<int>(pos), n - 1);
  const double F = p.cdf[i] + (pos - i) * p.pdf[i] / n;
  return quantile(q, F);
}

double w2_distance_1d(const NormalizedDensity& p, const NormalizedDensity& q) {
  // Breakpoints: both cdfs' edge values plus a uniform refinement; between
  // consecutive values both quantile functions are linear, so per-interval
  // Simpson integrates the squared difference exactly.
  std::vector<double> s;
  s.reserve(p.cdf.size() + q.cdf.size() + 4 * p.pdf.size());
  s.insert(s.end(), p.cdf.begin(), p.cdf.end());
  s.insert(s.end(), q.cdf.begin(), q.cdf.end());
  const int fine = 4 * static_cast<int>(std::max(p.pdf.size(), q.pdf.size()));
  for (int k = 0; k <= fine; ++k) s.push_back(double(k) / fine);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());

  auto diff2 = [&](double t) {
    const double d = quantile(p, t) - quantile(q, t);
    return d * d;
  };
  double total = 0.0;
  for (size_t k = 0; k + 1 < s.size(); ++k) {
    const double a = s[k], b = s[k + 1];
    if (b <= a) continue;
    total += (b - a) / 6.0 * (diff2(a) + 4.0 * diff2(0.5 * (a + b)) + diff2(b));
  }
  return total;
}

namespace {

// Gradient of W2^2(S(a), S(b)) with respect to the samples of a, with the
// pairwise shift treated as a constant of the comparison.
std::vector<double> w2_component_gradient(const std::vector<double>& a,
                                          const NormalizedDensity& p,
                                          const NormalizedDensity& q) {
  const int n = static_cast<int>(a.size());
  const double cell = 1.0 / n;

  // K(s) = int_0^s 2 (tau - T(tau)) dtau on edges and midpoints.
  std::vector<double> K(2 * n + 1, 0.0);
  auto integrand = [&](double s) { return 2.0 * (s - w2_transport_map(p, q, s)); };
  for (int k = 0; k < 2 * n; ++k) {
    const double s0 = k * 0.5 * cell, s1 = (k + 1) * 0.5 * cell;
    K[k + 1] = K[k] + (s1 - s0) / 6.0 *
                          (integrand(s0) + 4.0 * integrand(0.5 * (s0 + s1)) + integrand(s1));
  }
  // Simpson cell averages of K.
  std::vector<double> Kbar(n);
  for (int r = 0; r < n; ++r)
    Kbar[r] = (K[2 * r] + 4.0 * K[2 * r + 1] + K[2 * r + 2]) / 6.0;

  double inner = 0.0;  // <K, p>
  for (int r = 0; r < n; ++r) inner += Kbar[r] * p.pdf[r] * cell;

  std::vector<double> grad(n);
  for (int r = 0; r < n; ++r) grad[r] = cell / p.mass * (Kbar[r] - inner);
  return grad;
}

}  // namespace

W2Eval w2_misfit_complex(const std::vector<std::complex<double>>& f0,
                         const std::vector<std::complex<double>>& f1, double beta_margin) {
  if (f0.size() != f1.size()) throw MismatchedGeometry("w2_misfit_complex: length mismatch");
  if (f0.size() < 5) throw ConfigError("w2_misfit_complex: signals need at least 5 samples");
  const int n = static_cast<int>(f0.size());

  W2Eval out;
  out.gradient.assign(n, {0.0, 0.0});
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = comp == 0 ? f0[i].real() : f0[i].imag();
      b[i] = comp == 0 ? f1[i].real() : f1[i].imag();
    }
    const double beta = shared_beta(a, b, beta_margin);
    const auto p = normalize_with_beta(a, beta);
    const auto q = normalize_with_beta(b, beta);
    out.value += w2_distance_1d(p, q);
    auto grad = w2_component_gradient(a, p, q);

    // The shared shift depends on the compared pair, so the chain rule has
    // an extra term through beta wherever the first signal attains the pair
    // minimum or the peak amplitude.  d(value)/d(beta) sums both signals'
    // fixed-beta gradients because beta shifts both before normalization.
    const auto grad_q = w2_component_gradient(b, q, p);
    double dv_dbeta = 0.0;
    for (int i = 0; i < n; ++i) dv_dbeta += grad[i] + grad_q[i];
    double lo = b[0], amp = std::abs(b[0]);
    for (int i = 0; i < n; ++i) {
      lo = std::min({lo, a[i], b[i]});
      amp = std::max({amp, std::abs(a[i]), std::abs(b[i])});
    }
    for (int i = 0; i < n; ++i) {
      double dbeta = 0.0;
      if (lo < 0.0 && a[i] == lo) dbeta -= 1.0;
      if (amp > 0.0 && std::abs(a[i]) == amp) dbeta += beta_margin * (a[i] >= 0.0 ? 1.0 : -1.0);
      grad[i] += dv_dbeta * dbeta;
    }

    for (int i = 0; i < n; ++i) {
      if (comp == 0)
        out.gradient[i] += grad[i];
      else
        out.gradient[i] += std::complex<double>(0.0, grad[i]);
    }
  }
  return out;
}

std::pair<double, std::vector<std::complex<double>>> l2_misfit_complex(
    const std::vector<std::complex<double>>& f0, const std::vector<std::complex<double>>& f1) {
  if (f0.size() != f1.size()) throw MismatchedGeometry("l2_misfit_complex: length mismatch");
  const int n = static_cast<int>(f0.size());
  const double dx = n > 1 ? 1.0 / (n - 1) : 1.0;
  double value = 0.0;
  std::vector<std::complex<double>> grad(n);
  for (int i = 0; i < n; ++i) {
    const auto r = f0[i] - f1[i];
    value += 0.5 * std::norm(r) * dx;
    grad[i] = r * dx;
  }
  return {value, std::move(grad)};
}

}  // namespace hvfwi
