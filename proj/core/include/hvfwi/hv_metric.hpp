#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "hvfwi/array2.hpp"
#include "hvfwi/errors.hpp"
#include "hvfwi/grid_signal.hpp"

namespace hvfwi {

/// Hyperparameters and discretization controls of the HV metric solver.
/// The defaults are the transport-like setting used as the FWI misfit.
struct HVParams {
  double kappa = 1e-10;
  double lambda = 1e-10;
  double epsilon = 1e-7;
  int n_x = 0;   // spatial intervals on [0,1]; 0 = signal length - 1
  int n_t = 16;  // temporal intervals on [0,1]
  int max_iters = 100;
  double tol = 1e-8;       // relative quad-energy change stopping threshold
  int flow_substeps = 2;   // RK4 substeps per time interval

  void validate() const {
    if (!(kappa > 0.0)) throw ConfigError("HVParams: kappa must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("HVParams: epsilon must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("HVParams: lambda must be nonnegative");
    if (n_x != 0 && n_x < 4) throw ConfigError("HVParams: n_x must be at least 4");
    if (n_t < 2) throw ConfigError("HVParams: n_t must be at least 2");
    if (max_iters < 1) throw ConfigError("HVParams: max_iters must be positive");
    if (!(tol > 0.0)) throw ConfigError("HVParams: tol must be positive");
  }
};

/// Discrete admissible path on the unit space-time square.  Rows are time
/// levels 0..n_t, columns space nodes 0..n_x.  v is piecewise constant in
/// time: row j applies on [t_j, t_{j+1}); row n_t duplicates row n_t-1.
struct HVPath {
  int n_x = 0;
  int n_t = 0;
  Field2D f, v, z;
};

/// Characteristics of the velocity field: positions phi, the auxiliary
/// Jacobian J, and the interpolation weight eta, indexed [space][time].
struct FlowMap {
  int n_x = 0;
  int n_t = 0;
  Field2D phi, jac, eta;
  std::vector<double> int_jac;  // per start point, left-rectangle time integral of J
};

struct HVResult {
  double distance = 0.0;     // d_HV = sqrt(action)
  double action = 0.0;       // A at the converged path
  double quad_energy = 0.0;  // double integral of kappa v^2 + lambda v_x^2 + eps v_xx^2 + z^2
  int iterations = 0;
  bool converged = false;
  std::vector<double> energy_history;  // quad energy after each accepted iteration
  HVPath path;
};

struct HVCResult {
  double distance = 0.0;  // sqrt(d_re^2 + d_im^2)
  HVResult re;
  HVResult im;
};

/// Integrate the characteristics of v (zero at the spatial boundaries)
/// with RK4 in time and piecewise-linear interpolation of v in space.
/// Throws MonotonicityLoss if characteristics cross on the grid.
FlowMap integrate_flow(const Field2D& v, int n_substeps);

/// Analytic representation of the constrained minimizer (f, z) at fixed v,
/// resampled from characteristic to uniform coordinates.
std::pair<Field2D, Field2D> solve_fz_given_v(const GridSignal& f0, const GridSignal& f1,
                                             const FlowMap& flow);

/// Per-time-level fourth-order boundary value solve for v at fixed f.
Field2D solve_v_given_f(const Field2D& f, const HVParams& params);

/// Action (with the square root) and quadratic energy (without it) of a path,
/// trapezoid in space and midpoint in time.
std::pair<double, double> evaluate_action(const HVPath& path, const HVParams& params);

/// Alternating-direction minimization of the action between f0 and f1.
HVResult hv_distance(const GridSignal& f0, const GridSignal& f1, const HVParams& params);

/// Frechet derivative of f0 -> d_HV^2(f0, f1): minus the source term at t=0,
/// sampled on the solver grid.
std::vector<double> hv_gradient_f0(const HVResult& result);

/// Complex extension: independent HV problems for the real and imaginary parts.
HVCResult hvc_distance(const ComplexGridSignal& f0, const ComplexGridSignal& f1,
                       const HVParams& params);

std::vector<std::complex<double>> hvc_gradient_f0(const HVResult& re_result,
                                                  const HVResult& im_result);

namespace detail {

/// Quadratic energy of the eliminated path at fixed v: f and z are solved
/// analytically along the characteristics of v, leaving a function of v alone.
double flow_energy(const Field2D& v, const GridSignal& f0, const GridSignal& f1,
                   const HVParams& params);

/// Exact gradient of flow_energy in the free v nodes (rows 0..n_t-1,
/// interior columns; the duplicated last row and boundaries stay zero).
Field2D flow_energy_gradient(const Field2D& v, const GridSignal& f0, const GridSignal& f1,
                             const HVParams& params);

}  // namespace detail

}  // namespace hvfwi
