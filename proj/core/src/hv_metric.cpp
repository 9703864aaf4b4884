#include "hvfwi/hv_metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "hvfwi/banded.hpp"

namespace hvfwi {
namespace {

// Second-order spatial derivative samples: central in the interior,
// one-sided at the ends.
std::vector<double> d_dx(const double* f, int n_x) {
  const double h = 1.0 / n_x;
  std::vector<double> out(n_x + 1);
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  for (int i = 1; i < n_x; ++i) out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  out[n_x] = (3.0 * f[n_x] - 4.0 * f[n_x - 1] + f[n_x - 2]) / (2.0 * h);
  return out;
}

double interp_row(const double* row, int n_x, double x) {
  if (x <= 0.0) return row[0];
  if (x >= 1.0) return row[n_x];
  const double s = x * n_x;
  int i = static_cast<int>(s);
  if (i >= n_x) i = n_x - 1;
  const double a = s - i;
  return (1.0 - a) * row[i] + a * row[i + 1];
}

// Resample values given at monotone abscissae x (x[0]=0, x[n]=1) onto the
// uniform grid, piecewise linearly.
void resample_to_uniform(const std::vector<double>& x, const std::vector<double>& val,
                         double* out, int n_x) {
  int seg = 0;
  for (int k = 0; k <= n_x; ++k) {
    const double xt = double(k) / n_x;
    while (seg + 1 < n_x && x[seg + 1] < xt) ++seg;
    const double dx = x[seg + 1] - x[seg];
    const double a = dx > 0.0 ? std::clamp((xt - x[seg]) / dx, 0.0, 1.0) : 0.0;
    out[k] = val[seg] + a * (val[seg + 1] - val[seg]);
  }
}

// Path energy with the z part accumulated along characteristics instead of
// the resampled grid.  The time quadrature of J matches int_jac, so the z
// energy collapses to sum_i w_i (f1(phi_i(1)) - f0_i)^2 / int_jac_i and its
// derivative in f0_i is exactly -w_i z_i(0).  This keeps the reported energy
// differentiable where the resampled z field is too rough to integrate well.
std::pair<double, double> evaluate_with_flow(const HVPath& path, const FlowMap& flow,
                                             const HVParams& params) {
  const int n_t = path.n_t;
  const int n_x = path.n_x;
  const double h = 1.0 / n_x;
  const double dt = 1.0 / n_t;

  // v is piecewise constant in time, so row j is exact on [t_j, t_{j+1}).
  std::vector<double> level_v(n_t);
  for (int j = 0; j < n_t; ++j) {
    const double* v = path.v.row(j);
    const auto vx = d_dx(v, n_x);
    double sum = 0.0;
    for (int i = 0; i <= n_x; ++i) {
      const double vxx =
          (i == 0 || i == n_x) ? 0.0 : (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
      const double integrand = params.kappa * v[i] * v[i] + params.lambda * vx[i] * vx[i] +
                               params.epsilon * vxx * vxx;
      sum += ((i == 0 || i == n_x) ? 0.5 : 1.0) * integrand * h;
    }
    level_v[j] = sum;
  }

  std::vector<double> level_z(n_t + 1);
  for (int j = 0; j <= n_t; ++j) {
    double sum = 0.0;
    for (int i = 0; i <= n_x; ++i) {
      const double z0 = path.z(0, i);
      sum += ((i == 0 || i == n_x) ? 0.5 : 1.0) * z0 * z0 * flow.jac(i, j) * h;
    }
    level_z[j] = sum;
  }

  double action = 0.0, quad = 0.0;
  for (int j = 0; j < n_t; ++j) {
    // Trapezoid in time for the z part, matching the quadrature behind int_jac.
    const double level = level_v[j] + 0.5 * (level_z[j] + level_z[j + 1]);
    action += 0.5 * dt * std::sqrt(std::max(level, 0.0));
    quad += dt * level;
  }
  return {action, quad};
}

// Piecewise-linear cell lookup on uniform [0,1] nodes.
struct Lin {
  int p = 0;
  double a = 0.0;
  double slope_scale = 0.0;  // 0 outside the domain
};

Lin locate(double x, int n) {
  if (x <= 0.0) return {0, 0.0, 0.0};
  if (x >= 1.0) return {n - 1, 1.0, 0.0};
  const double s = x * n;
  int i = static_cast<int>(s);
  if (i >= n) i = n - 1;
  return {i, s - i, double(n)};
}

double lin_eval(const double* row, const Lin& l) {
  return (1.0 - l.a) * row[l.p] + l.a * row[l.p + 1];
}

double lin_slope(const double* row, const Lin& l) {
  return (row[l.p + 1] - row[l.p]) * l.slope_scale;
}

// Characteristics of v recorded densely enough to replay each RK4 stage.
struct FlowTrace {
  int n_x = 0, n_t = 0, sub = 0;
  Array2<double> phi_sub;  // (n_x+1) x (n_t*sub+1), state at every substep start
  Field2D jac;             // (n_x+1) x (n_t+1)
  std::vector<double> int_jac, phi_end;
  bool monotone = true;
};

FlowTrace trace_flow(const Field2D& v, int sub) {
  const int n_t = v.rows() - 1;
  const int n_x = v.cols() - 1;
  FlowTrace tr;
  tr.n_x = n_x;
  tr.n_t = n_t;
  tr.sub = sub;
  tr.phi_sub = Array2<double>(n_x + 1, n_t * sub + 1);
  tr.jac = Field2D(n_x + 1, n_t + 1);
  tr.int_jac.assign(n_x + 1, 0.0);
  tr.phi_end.assign(n_x + 1, 0.0);

  Array2<double> vx(n_t + 1, n_x + 1);
  for (int j = 0; j <= n_t; ++j) {
    auto d = d_dx(v.row(j), n_x);
    std::copy(d.begin(), d.end(), vx.row(j));
  }

  const double dt = 1.0 / n_t;
  const double hh = dt / sub;
  for (int i = 0; i <= n_x; ++i) {
    double phi = double(i) / n_x;
    double ell = 0.0;
    tr.jac(i, 0) = 1.0;
    for (int j = 0; j < n_t; ++j) {
      const double* vr = v.row(j);
      const double* vxr = vx.row(j);
      for (int s = 0; s < sub; ++s) {
        tr.phi_sub(i, j * sub + s) = phi;
        const double k1 = lin_eval(vr, locate(phi, n_x));
        const double m1 = lin_eval(vxr, locate(phi, n_x));
        const Lin l2 = locate(phi + 0.5 * hh * k1, n_x);
        const double k2 = lin_eval(vr, l2), m2 = lin_eval(vxr, l2);
        const Lin l3 = locate(phi + 0.5 * hh * k2, n_x);
        const double k3 = lin_eval(vr, l3), m3 = lin_eval(vxr, l3);
        const Lin l4 = locate(phi + hh * k3, n_x);
        const double k4 = lin_eval(vr, l4), m4 = lin_eval(vxr, l4);
        phi += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ell += hh / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
      }
      phi = std::clamp(phi, 0.0, 1.0);
      tr.jac(i, j + 1) = std::exp(-ell);
    }
    tr.phi_sub(i, n_t * sub) = phi;
    tr.phi_end[i] = phi;
    double total = 0.0;
    for (int j = 0; j < n_t; ++j) total += 0.5 * (tr.jac(i, j) + tr.jac(i, j + 1));
    tr.int_jac[i] = total * dt;
  }
  for (int j = 1; j <= n_t; ++j)
    for (int i = 0; i < n_x; ++i)
      if (!(tr.phi_sub(i + 1, j * sub) > tr.phi_sub(i, j * sub))) tr.monotone = false;
  return tr;
}

double trapezoid_weight(int i, int n_x) { return (i == 0 || i == n_x) ? 0.5 : 1.0; }

// Quadratic energy of the eliminated-path objective:
//   F(v) = R(v) + sum_i w_i (f1(phi_i(1)) - f0_i)^2 / int_jac_i
// with R the piecewise-constant-in-time quadrature of the v regularizer terms.
// Matches evaluate_with_flow's quad_energy by construction.
double flow_objective(const Field2D& v, const FlowTrace& tr, const GridSignal& f0,
                      const GridSignal& f1, const HVParams& params) {
  const int n_t = tr.n_t, n_x = tr.n_x;
  const double h = 1.0 / n_x, dt = 1.0 / n_t;

  double reg = 0.0;
  for (int j = 0; j < n_t; ++j) {
    const double* row = v.row(j);
    const auto vx = d_dx(row, n_x);
    double sum = 0.0;
    for (int i = 0; i <= n_x; ++i) {
      const double vxx =
          (i == 0 || i == n_x) ? 0.0 : (row[i - 1] - 2.0 * row[i] + row[i + 1]) / (h * h);
      sum += trapezoid_weight(i, n_x) * h *
             (params.kappa * row[i] * row[i] + params.lambda * vx[i] * vx[i] +
              params.epsilon * vxx * vxx);
    }
    reg += dt * sum;
  }

  double zpart = 0.0;
  for (int i = 0; i <= n_x; ++i) {
    if (!(tr.int_jac[i] > 1e-300))
      throw DegenerateFlow("time integral of the flow Jacobian underflowed");
    const double delta = interp_unit(f1.values, tr.phi_end[i]) - f0.values[i];
    zpart += trapezoid_weight(i, n_x) * h * delta * delta / tr.int_jac[i];
  }
  return reg + zpart;
}

// Reverse sweep through the recorded RK4 stages: adjoint of the map
// v -> (phi_end, int_jac) applied to the seeds (phi_bar0, int_bar).
// Only the data coupling; regularizer terms live in regularizer_gradient.
Field2D characteristic_vjp(const Field2D& v, const FlowTrace& tr,
                           const std::vector<double>& phi_bar0,
                           const std::vector<double>& int_bar) {
  const int n_t = tr.n_t, n_x = tr.n_x, sub = tr.sub;
  const double h = 1.0 / n_x, dt = 1.0 / n_t;
  (void)h;
  const double hh = dt / sub;

  Array2<double> vx(n_t + 1, n_x + 1);
  for (int j = 0; j <= n_t; ++j) {
    auto d = d_dx(v.row(j), n_x);
    std::copy(d.begin(), d.end(), vx.row(j));
  }

  Field2D grad(n_t + 1, n_x + 1, 0.0);
  Array2<double> vx_bar(n_t, n_x + 1);
  for (int j = 0; j < n_t; ++j)
    for (int i = 0; i <= n_x; ++i) vx_bar(j, i) = 0.0;

  for (int i = 0; i <= n_x; ++i) {
    double phi_bar = phi_bar0[i];
    double ell_bar = 0.0;
    const double dF_dI = int_bar[i];

    for (int j = n_t - 1; j >= 0; --j) {
      // Trapezoid weight of jac(i, j+1) in int_jac; jac(i, 0) = 1 is fixed.
      const double cw = (j + 1 == n_t) ? 0.5 : 1.0;
      ell_bar += dF_dI * dt * cw * (-tr.jac(i, j + 1));
      const double* vr = v.row(j);
      const double* vxr = vx.row(j);
      for (int s = sub - 1; s >= 0; --s) {
        const double phi0 = tr.phi_sub(i, j * sub + s);
        const Lin l1 = locate(phi0, n_x);
        const double k1 = lin_eval(vr, l1);
        const Lin l2 = locate(phi0 + 0.5 * hh * k1, n_x);
        const double k2 = lin_eval(vr, l2);
        const Lin l3 = locate(phi0 + 0.5 * hh * k2, n_x);
        const double k3 = lin_eval(vr, l3);
        const Lin l4 = locate(phi0 + hh * k3, n_x);

        double k1b = phi_bar * hh / 6.0, k2b = phi_bar * hh / 3.0;
        double k3b = phi_bar * hh / 3.0, k4b = phi_bar * hh / 6.0;
        const double m1b = ell_bar * hh / 6.0, m2b = ell_bar * hh / 3.0;
        const double m3b = ell_bar * hh / 3.0, m4b = ell_bar * hh / 6.0;

        const double a4b = k4b * lin_slope(vr, l4) + m4b * lin_slope(vxr, l4);
        k3b += a4b * hh;
        const double a3b = k3b * lin_slope(vr, l3) + m3b * lin_slope(vxr, l3);
        k2b += a3b * 0.5 * hh;
        const double a2b = k2b * lin_slope(vr, l2) + m2b * lin_slope(vxr, l2);
        k1b += a2b * 0.5 * hh;
        const double a1b = k1b * lin_slope(vr, l1) + m1b * lin_slope(vxr, l1);

        auto scatter = [&](const Lin& l, double kb, double mb) {
          grad(j, l.p) += kb * (1.0 - l.a);
          grad(j, l.p + 1) += kb * l.a;
          vx_bar(j, l.p) += mb * (1.0 - l.a);
          vx_bar(j, l.p + 1) += mb * l.a;
        };
        scatter(l1, k1b, m1b);
        scatter(l2, k2b, m2b);
        scatter(l3, k3b, m3b);
        scatter(l4, k4b, m4b);
        phi_bar += a1b + a2b + a3b + a4b;
      }
    }
  }

  // Transpose of the node-derivative stencil maps the v_x adjoint back to v.
  for (int j = 0; j < n_t; ++j) {
    const double* gbar = vx_bar.row(j);
    const double s = 0.5 * n_x;
    grad(j, 0) += -3.0 * s * gbar[0];
    grad(j, 1) += 4.0 * s * gbar[0];
    grad(j, 2) += -s * gbar[0];
    for (int i = 1; i < n_x; ++i) {
      grad(j, i - 1) += -s * gbar[i];
      grad(j, i + 1) += s * gbar[i];
    }
    grad(j, n_x) += 3.0 * s * gbar[n_x];
    grad(j, n_x - 1) += -4.0 * s * gbar[n_x];
    grad(j, n_x - 2) += s * gbar[n_x];
  }

  for (int j = 0; j <= n_t; ++j) {
    grad(j, 0) = 0.0;
    grad(j, n_x) = 0.0;
  }
  for (int i = 0; i <= n_x; ++i) grad(n_t, i) = 0.0;
  return grad;
}

// Forward tangent sweep: directional derivative of (phi_end, int_jac) along
// a perturbation dv of the velocity field.
std::pair<std::vector<double>, std::vector<double>> characteristic_jvp(const Field2D& v,
                                                                       const FlowTrace& tr,
                                                                       const Field2D& dv) {
  const int n_t = tr.n_t, n_x = tr.n_x, sub = tr.sub;
  const double dt = 1.0 / n_t;
  const double hh = dt / sub;

  Array2<double> vx(n_t + 1, n_x + 1), dvx(n_t + 1, n_x + 1);
  for (int j = 0; j <= n_t; ++j) {
    auto d = d_dx(v.row(j), n_x);
    std::copy(d.begin(), d.end(), vx.row(j));
    auto dd = d_dx(dv.row(j), n_x);
    std::copy(dd.begin(), dd.end(), dvx.row(j));
  }

  std::vector<double> d_phi_end(n_x + 1), d_int(n_x + 1);
  for (int i = 0; i <= n_x; ++i) {
    double dphi = 0.0, dell = 0.0, di = 0.0;
    for (int j = 0; j < n_t; ++j) {
      const double* vr = v.row(j);
      const double* vxr = vx.row(j);
      const double* dvr = dv.row(j);
      const double* dvxr = dvx.row(j);
      for (int s = 0; s < sub; ++s) {
        const double phi0 = tr.phi_sub(i, j * sub + s);
        const Lin l1 = locate(phi0, n_x);
        const double k1 = lin_eval(vr, l1);
        const double dk1 = lin_slope(vr, l1) * dphi + lin_eval(dvr, l1);
        const double dm1 = lin_slope(vxr, l1) * dphi + lin_eval(dvxr, l1);
        const Lin l2 = locate(phi0 + 0.5 * hh * k1, n_x);
        const double k2 = lin_eval(vr, l2);
        const double da2 = dphi + 0.5 * hh * dk1;
        const double dk2 = lin_slope(vr, l2) * da2 + lin_eval(dvr, l2);
        const double dm2 = lin_slope(vxr, l2) * da2 + lin_eval(dvxr, l2);
        const Lin l3 = locate(phi0 + 0.5 * hh * k2, n_x);
        const double k3 = lin_eval(vr, l3);
        const double da3 = dphi + 0.5 * hh * dk2;
        const double dk3 = lin_slope(vr, l3) * da3 + lin_eval(dvr, l3);
        const double dm3 = lin_slope(vxr, l3) * da3 + lin_eval(dvxr, l3);
        const Lin l4 = locate(phi0 + hh * k3, n_x);
        const double da4 = dphi + hh * dk3;
        const double dk4 = lin_slope(vr, l4) * da4 + lin_eval(dvr, l4);
        const double dm4 = lin_slope(vxr, l4) * da4 + lin_eval(dvxr, l4);
        dphi += hh / 6.0 * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
        dell += hh / 6.0 * (dm1 + 2.0 * dm2 + 2.0 * dm3 + dm4);
      }
      const double cw = (j + 1 == n_t) ? 0.5 : 1.0;
      di += dt * cw * (-tr.jac(i, j + 1)) * dell;
    }
    d_phi_end[i] = dphi;
    d_int[i] = di;
  }
  return {std::move(d_phi_end), std::move(d_int)};
}

// Gradient of the regularizer part of flow_objective (linear in v).
Field2D regularizer_gradient(const Field2D& v, const HVParams& params) {
  const int n_t = v.rows() - 1;
  const int n_x = v.cols() - 1;
  const double h = 1.0 / n_x, dt = 1.0 / n_t;

  Field2D grad(n_t + 1, n_x + 1, 0.0);
  for (int j = 0; j < n_t; ++j) {
    const double* row = v.row(j);
    const auto vxr = d_dx(row, n_x);
    std::vector<double> gbar(n_x + 1);
    for (int i = 0; i <= n_x; ++i) {
      const double w = trapezoid_weight(i, n_x) * h * dt;
      grad(j, i) += w * 2.0 * params.kappa * row[i];
      gbar[i] = w * 2.0 * params.lambda * vxr[i];
    }
    {
      const double s = 0.5 * n_x;
      grad(j, 0) += -3.0 * s * gbar[0];
      grad(j, 1) += 4.0 * s * gbar[0];
      grad(j, 2) += -s * gbar[0];
      for (int i = 1; i < n_x; ++i) {
        grad(j, i - 1) += -s * gbar[i];
        grad(j, i + 1) += s * gbar[i];
      }
      grad(j, n_x) += 3.0 * s * gbar[n_x];
      grad(j, n_x - 1) += -4.0 * s * gbar[n_x];
      grad(j, n_x - 2) += s * gbar[n_x];
    }
    for (int i = 1; i < n_x; ++i) {
      const double vxx = (row[i - 1] - 2.0 * row[i] + row[i + 1]) / (h * h);
      const double c = trapezoid_weight(i, n_x) * h * dt * 2.0 * params.epsilon * vxx / (h * h);
      grad(j, i - 1) += c;
      grad(j, i) += -2.0 * c;
      grad(j, i + 1) += c;
    }
  }

  for (int j = 0; j <= n_t; ++j) {
    grad(j, 0) = 0.0;
    grad(j, n_x) = 0.0;
  }
  for (int i = 0; i <= n_x; ++i) grad(n_t, i) = 0.0;
  return grad;
}

// Exact gradient of flow_objective with respect to the v nodes (rows
// 0..n_t-1; the duplicated last row and the boundary columns are not free).
Field2D flow_objective_gradient(const Field2D& v, const FlowTrace& tr, const GridSignal& f0,
                                const GridSignal& f1, const HVParams& params) {
  const int n_x = tr.n_x;
  const double h = 1.0 / n_x;

  std::vector<double> phi_bar0(n_x + 1), int_bar(n_x + 1);
  for (int i = 0; i <= n_x; ++i) {
    const double wgt = trapezoid_weight(i, n_x) * h;
    const double inv_int = 1.0 / tr.int_jac[i];
    const Lin lend = locate(tr.phi_end[i], n_x);
    const double delta = lin_eval(f1.values.data(), lend) - f0.values[i];
    phi_bar0[i] = wgt * 2.0 * delta * inv_int * lin_slope(f1.values.data(), lend);
    int_bar[i] = -wgt * delta * delta * inv_int * inv_int;
  }

  Field2D grad = characteristic_vjp(v, tr, phi_bar0, int_bar);
  const Field2D reg = regularizer_gradient(v, params);
  for (int j = 0; j < tr.n_t; ++j)
    for (int i = 0; i <= n_x; ++i) grad(j, i) += reg(j, i);
  return grad;
}

}  // namespace

namespace detail {

double flow_energy(const Field2D& v, const GridSignal& f0, const GridSignal& f1,
                   const HVParams& params) {
  return flow_objective(v, trace_flow(v, params.flow_substeps), f0, f1, params);
}

Field2D flow_energy_gradient(const Field2D& v, const GridSignal& f0, const GridSignal& f1,
                             const HVParams& params) {
  return flow_objective_gradient(v, trace_flow(v, params.flow_substeps), f0, f1, params);
}

}  // namespace detail

FlowMap integrate_flow(const Field2D& v, int n_substeps) {
  const int n_t = v.rows() - 1;
  const int n_x = v.cols() - 1;
  if (n_substeps < 1) throw ConfigError("integrate_flow: n_substeps must be >= 1");

  // Node-centered v_x per time row, interpolated linearly like v itself.
  Array2<double> vx(n_t + 1, n_x + 1);
  for (int j = 0; j <= n_t; ++j) {
    auto d = d_dx(v.row(j), n_x);
    std::copy(d.begin(), d.end(), vx.row(j));
  }

  FlowMap flow;
  flow.n_x = n_x;
  flow.n_t = n_t;
  flow.phi = Field2D(n_x + 1, n_t + 1);
  flow.jac = Field2D(n_x + 1, n_t + 1);
  flow.eta = Field2D(n_x + 1, n_t + 1);
  flow.int_jac.assign(n_x + 1, 0.0);

  const double dt = 1.0 / n_t;
  const double h = dt / n_substeps;
  for (int i = 0; i <= n_x; ++i) {
    double phi = double(i) / n_x;
    double ell = 0.0;  // integral of v_x along the characteristic
    flow.phi(i, 0) = phi;
    flow.jac(i, 0) = 1.0;
    for (int j = 0; j < n_t; ++j) {
      // v is piecewise constant in time on [t_j, t_{j+1}); the subinterval
      // problem is autonomous and RK4 applies directly.
      const double* vr = v.row(j);
      const double* vxr = vx.row(j);
      for (int s = 0; s < n_substeps; ++s) {
        const double k1 = interp_row(vr, n_x, phi);
        const double m1 = interp_row(vxr, n_x, phi);
        const double k2 = interp_row(vr, n_x, phi + 0.5 * h * k1);
        const double m2 = interp_row(vxr, n_x, phi + 0.5 * h * k1);
        const double k3 = interp_row(vr, n_x, phi + 0.5 * h * k2);
        const double m3 = interp_row(vxr, n_x, phi + 0.5 * h * k2);
        const double k4 = interp_row(vr, n_x, phi + h * k3);
        const double m4 = interp_row(vxr, n_x, phi + h * k3);
        phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ell += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
      }
      phi = std::clamp(phi, 0.0, 1.0);  // absorbs round-off only; v = 0 at the ends
      flow.phi(i, j + 1) = phi;
      flow.jac(i, j + 1) = std::exp(-ell);
    }
  }

  for (int j = 1; j <= n_t; ++j)
    for (int i = 0; i < n_x; ++i)
      if (!(flow.phi(i + 1, j) > flow.phi(i, j)))
        throw MonotonicityLoss("characteristics crossed at time level " + std::to_string(j));

  // eta via trapezoid quadrature; the dt factors cancel in eta itself.
  for (int i = 0; i <= n_x; ++i) {
    double total = 0.0;
    for (int j = 0; j < n_t; ++j) total += 0.5 * (flow.jac(i, j) + flow.jac(i, j + 1));
    flow.int_jac[i] = total * dt;
    double acc = 0.0;
    flow.eta(i, 0) = 0.0;
    for (int j = 1; j <= n_t; ++j) {
      acc += 0.5 * (flow.jac(i, j - 1) + flow.jac(i, j));
      flow.eta(i, j) = acc / total;
    }
  }
  return flow;
}

std::pair<Field2D, Field2D> solve_fz_given_v(const GridSignal& f0, const GridSignal& f1,
                                             const FlowMap& flow) {
  const int n_x = flow.n_x;
  const int n_t = flow.n_t;

  std::vector<double> f1_end(n_x + 1), z0(n_x + 1);
  for (int i = 0; i <= n_x; ++i) {
    if (!(flow.int_jac[i] > 1e-300))
      throw DegenerateFlow("time integral of the flow Jacobian underflowed");
    f1_end[i] = interp_unit(f1.values, flow.phi(i, n_t));
    z0[i] = (f1_end[i] - f0.values[i]) / flow.int_jac[i];
  }

  Field2D f(n_t + 1, n_x + 1), z(n_t + 1, n_x + 1);
  std::vector<double> xs(n_x + 1), fv(n_x + 1), zv(n_x + 1);
  for (int j = 0; j <= n_t; ++j) {
    for (int i = 0; i <= n_x; ++i) {
      xs[i] = flow.phi(i, j);
      zv[i] = z0[i] * flow.jac(i, j);
      const double eta = flow.eta(i, j);
      fv[i] = (1.0 - eta) * f0.values[i] + eta * f1_end[i];
    }
    resample_to_uniform(xs, fv, f.row(j), n_x);
    resample_to_uniform(xs, zv, z.row(j), n_x);
  }
  return {std::move(f), std::move(z)};
}

Field2D solve_v_given_f(const Field2D& f, const HVParams& params) {
  const int n_t = f.rows() - 1;
  const int n_x = f.cols() - 1;
  const double h = 1.0 / n_x;
  const double c4 = params.epsilon / (h * h * h * h);
  const double c2 = params.lambda / (h * h);

  Field2D v(n_t + 1, n_x + 1, 0.0);
  std::vector<double> fmid(n_x + 1);
  const int m = n_x - 1;  // interior unknowns
  for (int j = 0; j < n_t; ++j) {
    for (int i = 0; i <= n_x; ++i) fmid[i] = 0.5 * (f(j, i) + f(j + 1, i));
    const auto w = d_dx(fmid.data(), n_x);

    std::vector<double> d(m), e(m > 1 ? m - 1 : 0, -4.0 * c4 - c2),
        g(m > 2 ? m - 2 : 0, c4), rhs(m);
    for (int k = 0; k < m; ++k) {
      const int i = k + 1;
      // Ghost closure v_xx = 0 at both ends turns the 6 into a 5.
      const double diag4 = (i == 1 || i == n_x - 1) ? 5.0 : 6.0;
      d[k] = c4 * diag4 + 2.0 * c2 + params.kappa + w[i] * w[i];
      const double tau = (f(j + 1, i) - f(j, i)) * n_t;
      rhs[k] = -tau * w[i];
    }
    auto sol = solve_pentadiagonal(std::move(d), std::move(e), std::move(g), std::move(rhs));
    for (int k = 0; k < m; ++k) v(j, k + 1) = sol[k];
  }
  for (int i = 0; i <= n_x; ++i) v(n_t, i) = v(n_t - 1, i);
  return v;
}

std::pair<double, double> evaluate_action(const HVPath& path, const HVParams& params) {
  const int n_t = path.n_t;
  const int n_x = path.n_x;
  const double h = 1.0 / n_x;
  const double dt = 1.0 / n_t;

  std::vector<double> level(n_t + 1);
  for (int j = 0; j <= n_t; ++j) {
    const double* v = path.v.row(j);
    const double* z = path.z.row(j);
    const auto vx = d_dx(v, n_x);
    double sum = 0.0;
    for (int i = 0; i <= n_x; ++i) {
      double vxx;
      if (i == 0 || i == n_x) {
        vxx = 0.0;  // boundary condition v_xx = 0
      } else {
        vxx = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
      }
      const double integrand = params.kappa * v[i] * v[i] + params.lambda * vx[i] * vx[i] +
                               params.epsilon * vxx * vxx + z[i] * z[i];
      const double wt = (i == 0 || i == n_x) ? 0.5 : 1.0;  // trapezoid
      sum += wt * integrand * h;
    }
    level[j] = sum;
  }

  double action = 0.0, quad = 0.0;
  for (int j = 0; j < n_t; ++j) {
    const double mid = 0.5 * (level[j] + level[j + 1]);
    action += 0.5 * dt * std::sqrt(std::max(mid, 0.0));
    quad += dt * mid;
  }
  return {action, quad};
}

HVResult hv_distance(const GridSignal& f0_in, const GridSignal& f1_in, const HVParams& params) {
  params.validate();
  f0_in.validate();
  f1_in.validate();
  if (f0_in.values.size() != f1_in.values.size())
    throw MismatchedGeometry("hv_distance: signals must share one grid");

  const int n_x = params.n_x > 0 ? params.n_x : f0_in.n_intervals();
  GridSignal f0 = f0_in, f1 = f1_in;
  if (n_x != f0_in.n_intervals()) {
    f0.values = resample_unit(f0_in.values, n_x);
    f1.values = resample_unit(f1_in.values, n_x);
  }
  const int n_t = params.n_t;

  HVResult res;
  res.path.n_x = n_x;
  res.path.n_t = n_t;

  // The velocity field is sought in the steady subspace v(x, t) = v(x).
  // Time-dependent fields admit spurious discrete minimizers: a velocity
  // that oscillates in time inflates int J through the convexity of
  // exp(-int v_x) and pushes the energy below the smooth-path value at a
  // rate the regularizer cannot control when kappa and lambda are small.
  // Restricting to steady fields removes those modes, leaves the constant
  // and transport optima intact, and makes the minimum a true minimum, so
  // the solver can be driven to stationarity.  Stationarity in turn makes
  // -z(.,0) the exact derivative of the energy in f0.
  const int sub = params.flow_substeps;
  const int m = n_x - 1;
  const double h = 1.0 / n_x;
  const auto broadcast = [&](const std::vector<double>& u) {
    Field2D field(n_t + 1, n_x + 1, 0.0);
    for (int j = 0; j <= n_t; ++j)
      for (int k = 0; k < m; ++k) field(j, k + 1) = u[k];
    return field;
  };
  const auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  const auto norm2 = [&](const std::vector<double>& a) { return std::sqrt(dot(a, a)); };
  const double inf = std::numeric_limits<double>::infinity();
  const auto energy_at = [&](const std::vector<double>& u) {
    const auto tr = trace_flow(broadcast(u), sub);
    if (!tr.monotone) return inf;
    try {
      return flow_objective(broadcast(u), tr, f0, f1, params);
    } catch (const DegenerateFlow&) {
      return inf;
    }
  };
  const auto grad_at = [&](const std::vector<double>& u) {
    const Field2D vf = broadcast(u);
    const Field2D gf = flow_objective_gradient(vf, trace_flow(vf, sub), f0, f1, params);
    std::vector<double> g(m, 0.0);
    for (int j = 0; j < n_t; ++j)
      for (int k = 0; k < m; ++k) g[k] += gf(j, k + 1);
    return g;
  };

  std::vector<double> u(m, 0.0);
  double energy = energy_at(u);

  // Multi-start over smooth constant-shift profiles.  Local descent from
  // v = 0 cannot discover registrations whose displacement exceeds the
  // width of the nearest basin, so a coarse deterministic grid of shift
  // candidates picks the best starting basin first.
  for (int k = -32; k <= 32; ++k) {
    if (k == 0) continue;
    const double s = k / 64.0;
    std::vector<double> cand(m);
    for (int i = 0; i < m; ++i) {
      const double x = double(i + 1) / n_x;
      cand[i] = 4.0 * s * x * (1.0 - x);
    }
    const double e = energy_at(cand);
    if (e < energy) {
      u = std::move(cand);
      energy = e;
    }
  }
  res.energy_history.push_back(energy);

  // Phase 1: relaxed alternation.  Each iteration aims at the time average
  // of the analytic v-solve for the current path and backtracks until the
  // energy drops, so the energy history is non-increasing by construction.
  int it = 0;
  for (; it < params.max_iters && energy > 0.0; ++it) {
    const double before = energy;
    bool moved = false;
    try {
      const auto flow_cur = integrate_flow(broadcast(u), sub);
      const auto fz = solve_fz_given_v(f0, f1, flow_cur);
      const Field2D valt = solve_v_given_f(fz.first, params);
      std::vector<double> dir(m, 0.0);
      for (int j = 0; j < n_t; ++j)
        for (int k = 0; k < m; ++k) dir[k] += valt(j, k + 1) / n_t;
      for (int k = 0; k < m; ++k) dir[k] -= u[k];
      for (double t = 1.0; t >= 1.0 / 4096.0; t *= 0.5) {
        std::vector<double> trial = u;
        for (int k = 0; k < m; ++k) trial[k] += t * dir[k];
        const double e2 = energy_at(trial);
        if (e2 <= energy * (1.0 - 1e-14)) {
          u = std::move(trial);
          energy = e2;
          moved = true;
          break;
        }
      }
    } catch (const MonotonicityLoss&) {
    } catch (const DegenerateFlow&) {
    }
    if (!moved) break;

    res.iterations = it + 1;
    res.energy_history.push_back(energy);
    if ((before - energy) / std::max(before, 1e-300) < params.tol) break;
  }

  // Phase 2: Levenberg-Marquardt to stationarity.  Matrix-free Gauss-Newton
  // system (H + mu M) s = -g with exact Hessian-vector products from tangent
  // and adjoint sweeps, preconditioned by the steady regularizer operator M,
  // which carries the stiff epsilon modes of H.
  {
    const double c4 = params.epsilon / (h * h * h * h);
    const double c2 = params.lambda / (h * h);
    const double sc = 2.0 * h;
    // Identity part so the damping also controls the smooth transport modes
    // the regularizer barely sees.
    const double alpha = sc;
    std::vector<double> md(m), me(m > 1 ? m - 1 : 0, sc * (-4.0 * c4 - c2)),
        mg(m > 2 ? m - 2 : 0, sc * c4);
    for (int k = 0; k < m; ++k) {
      const double diag4 = (k == 0 || k == m - 1) ? 5.0 : 6.0;
      md[k] = sc * (c4 * diag4 + 2.0 * c2 + params.kappa) + alpha;
    }
    const auto m_apply = [&](const std::vector<double>& p) {
      std::vector<double> out(m, 0.0);
      for (int k = 0; k < m; ++k) {
        double s = md[k] * p[k];
        if (k > 0) s += me[k - 1] * p[k - 1];
        if (k + 1 < m) s += me[k] * p[k + 1];
        if (k > 1) s += mg[k - 2] * p[k - 2];
        if (k + 2 < m) s += mg[k] * p[k + 2];
        out[k] = s;
      }
      return out;
    };
    const auto m_solve = [&](const std::vector<double>& r) {
      return solve_pentadiagonal(md, me, mg, r);
    };
    const auto steady_sum = [&](const Field2D& gf) {
      std::vector<double> g(m, 0.0);
      for (int j = 0; j < n_t; ++j)
        for (int k = 0; k < m; ++k) g[k] += gf(j, k + 1);
      return g;
    };

    auto g = grad_at(u);
    double gn = norm2(g);
    const bool dbg = std::getenv("HVFWI_POLISH_DEBUG") != nullptr;
    if (dbg) std::fprintf(stderr, "polish start gn=%.3e F=%.12e\n", gn, energy);
    const double g_tol = 1e-10 * (1.0 + energy);
    double mu = 1.0;
    bool stalled = false;
    for (int step = 0; step < 150 && gn > g_tol; ++step) {
      // Gauss-Newton model of the energy at the current field: the data
      // term is sum_i r_i^2 with r_i = sqrt(w_i h) (f1(phi_i(1)) - f0_i) /
      // sqrt(int_jac_i), so 2 J^T J plus the (linear) regularizer Hessian
      // is positive semidefinite and exact products come from one tangent
      // and one adjoint sweep along the characteristics.
      const Field2D vcur = broadcast(u);
      const FlowTrace tr_cur = trace_flow(vcur, sub);
      std::vector<double> sqw(n_x + 1), s_phi(n_x + 1), s_int(n_x + 1);
      for (int i = 0; i <= n_x; ++i) {
        sqw[i] = std::sqrt(trapezoid_weight(i, n_x) * h);
        const double inv = 1.0 / tr_cur.int_jac[i];
        const Lin lend = locate(tr_cur.phi_end[i], n_x);
        const double delta = lin_eval(f1.values.data(), lend) - f0.values[i];
        s_phi[i] = lin_slope(f1.values.data(), lend) * std::sqrt(inv);
        s_int[i] = -0.5 * delta * inv * std::sqrt(inv);
      }
      const auto gn_prod = [&](const std::vector<double>& p) {
        const Field2D pf = broadcast(p);
        const auto [dphi, dint] = characteristic_jvp(vcur, tr_cur, pf);
        std::vector<double> phi_bar0(n_x + 1), int_bar(n_x + 1);
        for (int i = 0; i <= n_x; ++i) {
          const double dr = sqw[i] * (s_phi[i] * dphi[i] + s_int[i] * dint[i]);
          phi_bar0[i] = 2.0 * dr * sqw[i] * s_phi[i];
          int_bar[i] = 2.0 * dr * sqw[i] * s_int[i];
        }
        auto out = steady_sum(characteristic_vjp(vcur, tr_cur, phi_bar0, int_bar));
        const auto rp = steady_sum(regularizer_gradient(pf, params));
        for (int k = 0; k < m; ++k) out[k] += rp[k];
        return out;
      };

      // Preconditioned CG on (H_gn + mu M) s = -g.
      std::vector<double> s(m, 0.0), r(m);
      for (int k = 0; k < m; ++k) r[k] = -g[k];
      auto z = m_solve(r);
      auto p = z;
      double rho = dot(r, z);
      for (int cg = 0; cg < 40 && rho > 0.0; ++cg) {
        auto q = gn_prod(p);
        const auto mp = m_apply(p);
        for (int k = 0; k < m; ++k) q[k] += mu * mp[k];
        const double pq = dot(p, q);
        if (!(pq > 0.0)) {
          if (cg == 0) s = z;
          break;
        }
        const double alpha = rho / pq;
        for (int k = 0; k < m; ++k) {
          s[k] += alpha * p[k];
          r[k] -= alpha * q[k];
        }
        if (norm2(r) <= std::min(0.1, std::sqrt(gn)) * gn) break;
        z = m_solve(r);
        const double rho2 = dot(r, z);
        const double beta = rho2 / rho;
        rho = rho2;
        for (int k = 0; k < m; ++k) p[k] = z[k] + beta * p[k];
      }

      if (norm2(s) <= 1e-13 * (1.0 + norm2(u))) {
        stalled = true;
        break;
      }
      std::vector<double> trial = u;
      for (int k = 0; k < m; ++k) trial[k] += s[k];
      const double e2 = energy_at(trial);
      bool ok = e2 < energy;
      double gn2 = 0.0;
      std::vector<double> g2;
      if (e2 <= energy) {
        g2 = grad_at(trial);
        gn2 = norm2(g2);
        ok = ok || gn2 < gn;
      }
      if (dbg)
        std::fprintf(stderr, "  step=%d mu=%.3e |s|=%.3e e2=%.12e gn2=%.3e ok=%d\n", step, mu,
                     norm2(s), e2, gn2, int(ok));
      if (ok) {
        u = std::move(trial);
        g = std::move(g2);
        gn = gn2;
        energy = e2;
        res.energy_history.push_back(energy);
        mu = std::max(mu / 3.0, 1e-12);
      } else {
        mu *= 8.0;
        // Damping escalated past any useful scale: steps of every length
        // failed to decrease the energy, so the iterate is stationary to
        // machine precision even if the (kink-limited) gradient norm is not.
        if (mu > 1e9) {
          stalled = e2 >= energy * (1.0 - 1e-10);
          break;
        }
      }
    }
    if (stalled || gn <= 1e-7 * (1.0 + energy)) res.converged = true;
  }
  if (res.iterations == 0 && !(energy > 0.0)) res.converged = true;

  res.path.v = broadcast(u);
  auto flow = integrate_flow(res.path.v, params.flow_substeps);
  std::tie(res.path.f, res.path.z) = solve_fz_given_v(f0, f1, flow);
  std::tie(res.action, res.quad_energy) = evaluate_with_flow(res.path, flow, params);
  res.distance = std::sqrt(std::max(res.action, 0.0));
  return res;
}

std::vector<double> hv_gradient_f0(const HVResult& result) {
  const int n_x = result.path.n_x;
  std::vector<double> g(n_x + 1);
  for (int i = 0; i <= n_x; ++i) g[i] = -result.path.z(0, i);
  return g;
}

HVCResult hvc_distance(const ComplexGridSignal& f0, const ComplexGridSignal& f1,
                       const HVParams& params) {
  HVCResult out;
  out.re = hv_distance(f0.re, f1.re, params);
  out.im = hv_distance(f0.im, f1.im, params);
  out.distance = std::sqrt(out.re.action + out.im.action);
  return out;
}

std::vector<std::complex<double>> hvc_gradient_f0(const HVResult& re_result,
                                                  const HVResult& im_result) {
  const auto gre = hv_gradient_f0(re_result);
  const auto gim = hv_gradient_f0(im_result);
  std::vector<std::complex<double>> g(gre.size());
  for (size_t i = 0; i < g.size(); ++i) g[i] = {gre[i], gim[i]};
  return g;
}

}  // namespace hvfwi
