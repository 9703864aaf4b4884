#pragma once

#include <complex>
#include <vector>

#include "hvfwi/errors.hpp"

namespace hvfwi {

/// A signal turned into a probability density on [0,1]: n samples become a
/// piecewise-constant density on n equal cells.  The cdf lives on the n+1
/// cell edges.
struct NormalizedDensity {
  std::vector<double> pdf;   // cell values, nonnegative, integrates to 1
  std::vector<double> cdf;   // edge values, 0 to 1, nondecreasing
  double shift_beta = 0.0;   // additive constant applied before scaling
  double mass = 0.0;         // pre-normalization integral <T(f)>
};

/// Shift shared by a compared pair: lifts the joint minimum to zero and adds
/// beta_margin times the pair's peak amplitude.
double shared_beta(const std::vector<double>& f0, const std::vector<double>& f1,
                   double beta_margin);

NormalizedDensity normalize_with_beta(const std::vector<double>& f, double beta);

/// Single-signal convenience: the "pair" is the signal itself.
NormalizedDensity normalize_linear(const std::vector<double>& f, double beta_margin);

/// Squared quadratic Wasserstein distance via quantile functions, exact for
/// the piecewise-linear cdf model.
double w2_distance_1d(const NormalizedDensity& p, const NormalizedDensity& q);

/// Optimal map T(s) = G^{-1}(F(s)) between two normalized densities.
double w2_transport_map(const NormalizedDensity& p, const NormalizedDensity& q, double s);

/// Leftmost quantile of a normalized density.
double quantile(const NormalizedDensity& p, double s);

struct W2Eval {
  double value = 0.0;
  std::vector<std::complex<double>> gradient;  // w.r.t. the first signal's samples
};

/// Trace-normalized W2 misfit for complex gathers: real and imaginary parts
/// are normalized (shared beta per pair) and compared independently; the
/// gradient runs the perturbation formula through the normalization chain.
W2Eval w2_misfit_complex(const std::vector<std::complex<double>>& f0,
                         const std::vector<std::complex<double>>& f1,
                         double beta_margin = 0.1);

std::pair<double, std::vector<std::complex<double>>> l2_misfit_complex(
    const std::vector<std::complex<double>>& f0, const std::vector<std::complex<double>>& f1);

}  // namespace hvfwi
