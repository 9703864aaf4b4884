// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS or FAIL line.  The process exits nonzero if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvfwi/harness.hpp"
#include "hvfwi/helmholtz.hpp"
#include "hvfwi/hv_metric.hpp"
#include "hvfwi/inversion.hpp"
#include "hvfwi/io.hpp"
#include "hvfwi/misfit.hpp"
#include "hvfwi/wasserstein.hpp"

using namespace hvfwi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %2d %-24s %s  (%s)\n", index, name.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

GridSignal smooth_random(std::mt19937& rng, int n, double amp) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> c(7);
  for (auto& x : c) x = N(rng);
  const double tp = 2.0 * std::numbers::pi;
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double x = double(i) / n;
    v[i] = amp * (c[0] + 0.5 * c[1] * std::sin(tp * x) + 0.5 * c[2] * std::cos(tp * x) +
                  0.3 * c[3] * std::sin(2 * tp * x) + 0.3 * c[4] * std::cos(2 * tp * x) +
                  0.2 * c[5] * std::sin(3 * tp * x) + 0.2 * c[6] * std::cos(3 * tp * x));
  }
  return GridSignal(std::move(v));
}

HVParams transport_params(int n_x) {
  HVParams p;
  p.kappa = 1.0;
  p.lambda = 1.0;
  p.epsilon = 1e-3;
  p.n_x = n_x;
  p.n_t = 16;
  p.max_iters = 500;
  p.tol = 1e-12;
  return p;
}

// 1: identity, symmetry, and triangle inequality on random smooth signals.
void criterion_axioms() {
  const auto p = transport_params(128);
  std::mt19937 rng(42);
  double worst_id = 0.0, worst_sym = 0.0, worst_tri = -1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = smooth_random(rng, 128, 0.5);
    const auto b = smooth_random(rng, 128, 0.5);
    const auto c = smooth_random(rng, 128, 0.5);
    double na = 0.0;
    for (double x : a.values) na += x * x / 128.0;
    const auto raa = hv_distance(a, a, p);
    const auto rab = hv_distance(a, b, p);
    const auto rba = hv_distance(b, a, p);
    const auto rbc = hv_distance(b, c, p);
    const auto rac = hv_distance(a, c, p);
    worst_id = std::max(worst_id, raa.distance / (1.0 + std::sqrt(na)));
    worst_sym = std::max(worst_sym,
                         std::abs(rab.distance - rba.distance) / std::max(rab.distance, 1e-300));
    worst_tri = std::max(worst_tri, (rac.distance - rab.distance - rbc.distance) /
                                        std::max(rac.distance, 1e-300));
  }
  const bool pass = worst_id <= 1e-8 && worst_sym <= 1e-3 && worst_tri <= 1e-3;
  report(1, "metric-axioms", pass,
         fmt("identity %.1e, symmetry %.1e, triangle %.1e", worst_id, worst_sym, worst_tri));
}

// 2: squared distance from zero to a constant equals half the offset.
void criterion_constant_oracle() {
  const auto p = transport_params(128);
  double worst = 0.0;
  for (double c : {0.5, 1.0, 2.0}) {
    std::vector<double> zero(129, 0.0), level(129, c);
    const auto r = hv_distance(GridSignal(zero), GridSignal(level), p);
    worst = std::max(worst, std::abs(r.action - c / 2.0) / (c / 2.0));
  }
  report(2, "constant-oracle", worst <= 0.01, fmt("worst relative error %.1e", worst));
}

// 3: the alternation never increases the quadratic energy on accepted steps.
void criterion_descent() {
  const auto p = transport_params(64);
  std::mt19937 rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = smooth_random(rng, 64, 1.0);
    const auto b = smooth_random(rng, 64, 1.0);
    const auto r = hv_distance(a, b, p);
    for (size_t k = 1; k < r.energy_history.size(); ++k) {
      const double rise = (r.energy_history[k] - r.energy_history[k - 1]) /
                          std::max(r.energy_history[k - 1], 1e-300);
      worst = std::max(worst, rise);
    }
  }
  report(3, "monotone-descent", worst <= 1e-10, fmt("worst relative increase %.1e", worst));
}

// 4: endpoint derivatives of all misfit building blocks match finite
// differences.
void criterion_frechet() {
  // Real HV endpoint gradient.
  double hv_err = 0.0;
  {
    const int n = 64;
    HVParams p = transport_params(n);
    p.max_iters = 2000;
    p.tol = 1e-13;
    std::vector<double> a(n + 1), b(n + 1);
    for (int i = 0; i <= n; ++i) {
      const double x = double(i) / n;
      a[i] = std::exp(-80.0 * (x - 0.4) * (x - 0.4)) + 0.3 * std::sin(5.0 * x);
      b[i] = std::exp(-80.0 * (x - 0.6) * (x - 0.6)) + 0.25 * std::cos(4.0 * x);
    }
    const GridSignal f1(b);
    const auto base = hv_distance(GridSignal(a), f1, p);
    const auto g = hv_gradient_f0(base);
    const double h = 1e-4;
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= n; ++i) {
      auto ap = a, am = a;
      ap[i] += h;
      am[i] -= h;
      const double fd = (hv_distance(GridSignal(ap), f1, p).quad_energy -
                         hv_distance(GridSignal(am), f1, p).quad_energy) /
                        (4.0 * h);
      const double w = (i == 0 || i == n) ? 0.5 / n : 1.0 / n;
      num += (fd - g[i] * w) * (fd - g[i] * w);
      den += fd * fd;
    }
    hv_err = std::sqrt(num / den);
  }

  // Complex HV endpoint gradient along random directions.
  double hvc_err = 0.0;
  {
    const int n = 48;
    HVParams p = transport_params(n);
    p.max_iters = 1000;
    std::mt19937 rng(9);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<std::complex<double>> s0(n + 1), s1(n + 1);
    for (int i = 0; i <= n; ++i) {
      const double x = double(i) / n;
      s0[i] = {std::sin(5.0 * x) + 0.1 * N(rng), std::cos(4.0 * x) + 0.1 * N(rng)};
      s1[i] = {std::sin(5.0 * x + 0.4) + 0.1 * N(rng), std::cos(4.0 * x + 0.3) + 0.1 * N(rng)};
    }
    const auto f1 = ComplexGridSignal::from_samples(s1);
    const auto base = hvc_distance(ComplexGridSignal::from_samples(s0), f1, p);
    const auto g = hvc_gradient_f0(base.re, base.im);
    auto J = [&](const std::vector<std::complex<double>>& s) {
      const auto r = hvc_distance(ComplexGridSignal::from_samples(s), f1, p);
      return 0.5 * (r.re.quad_energy + r.im.quad_energy);
    };
    const double h = 1e-4;
    std::uniform_int_distribution<int> node(1, n - 1);
    double num = 0.0, den = 0.0;
    for (int t = 0; t < 10; ++t) {
      const int i = node(rng);
      const bool imag = t % 2 == 1;
      auto sp = s0, sm = s0;
      const std::complex<double> d =
          imag ? std::complex<double>(0.0, h) : std::complex<double>(h, 0.0);
      sp[i] += d;
      sm[i] -= d;
      const double fd = (J(sp) - J(sm)) / (2.0 * h);
      const double an = (imag ? g[i].imag() : g[i].real()) / n;
      num += (fd - an) * (fd - an);
      den += fd * fd;
    }
    hvc_err = std::sqrt(num / den);
  }

  // Normalized transport misfit gradient through the shift chain rule.
  double w2_err = 0.0;
  {
    const int n = 24;
    std::mt19937 rng(5);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<std::complex<double>> f0(n), f1(n);
    for (int i = 0; i < n; ++i) {
      const double x = double(i) / (n - 1);
      f0[i] = {std::sin(6 * x) + 0.3 * N(rng), std::cos(5 * x) + 0.3 * N(rng)};
      f1[i] = {std::sin(6 * x + 0.7) + 0.3 * N(rng), std::cos(5 * x + 0.4) + 0.3 * N(rng)};
    }
    const auto ev = w2_misfit_complex(f0, f1);
    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i)
      for (int part = 0; part < 2; ++part) {
        auto fp = f0, fm = f0;
        const std::complex<double> d =
            part ? std::complex<double>(0.0, h) : std::complex<double>(h, 0.0);
        fp[i] += d;
        fm[i] -= d;
        const double fd =
            (w2_misfit_complex(fp, f1).value - w2_misfit_complex(fm, f1).value) / (2.0 * h);
        const double an = part ? ev.gradient[i].imag() : ev.gradient[i].real();
        num += (fd - an) * (fd - an);
        den += fd * fd;
      }
    w2_err = std::sqrt(num / den);
  }

  // Quadratic misfit gradient, exact up to round-off.
  double l2_err = 0.0;
  {
    const int n = 64;
    std::mt19937 rng(15);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<std::complex<double>> f0(n), f1(n);
    for (int i = 0; i < n; ++i) {
      f0[i] = {N(rng), N(rng)};
      f1[i] = {N(rng), N(rng)};
    }
    const auto [value, grad] = l2_misfit_complex(f0, f1);
    (void)value;
    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i)
      for (int part = 0; part < 2; ++part) {
        auto fp = f0, fm = f0;
        const std::complex<double> d =
            part ? std::complex<double>(0.0, h) : std::complex<double>(h, 0.0);
        fp[i] += d;
        fm[i] -= d;
        const double fd =
            (l2_misfit_complex(fp, f1).first - l2_misfit_complex(fm, f1).first) / (2.0 * h);
        const double an = part ? grad[i].imag() : grad[i].real();
        num += (fd - an) * (fd - an);
        den += fd * fd;
      }
    l2_err = std::sqrt(num / den);
  }

  const bool pass = hv_err < 1e-2 && hvc_err < 1e-2 && w2_err < 1e-2 && l2_err < 1e-8;
  report(4, "frechet-derivatives", pass,
         fmt("hv %.1e, hvc %.1e, w2 %.1e, l2 %.1e", hv_err, hvc_err, w2_err, l2_err));
}

// 5: the quantile formula agrees with an independent transport computation.
void criterion_w2_oracle() {
  auto brute_force = [](const NormalizedDensity& p, const NormalizedDensity& q) {
    auto breaks = p.cdf;
    breaks.insert(breaks.end(), q.cdf.begin(), q.cdf.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    auto inv = [](const NormalizedDensity& d, double s) {
      const int n = static_cast<int>(d.pdf.size());
      if (s <= 0.0) return 0.0;
      if (s >= 1.0) return 1.0;
      for (int i = 0; i < n; ++i)
        if (s <= d.cdf[i + 1]) {
          const double span = d.cdf[i + 1] - d.cdf[i];
          const double frac = span > 0.0 ? (s - d.cdf[i]) / span : 0.0;
          return (i + frac) / n;
        }
      return 1.0;
    };
    double total = 0.0;
    for (size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double a = breaks[k], b = breaks[k + 1];
      if (b <= a) continue;
      auto f = [&](double s) {
        const double d = inv(p, s) - inv(q, s);
        return d * d;
      };
      total += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    return total;
  };

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> U(0.05, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f0(16), f1(16);
    for (double& x : f0) x = U(rng);
    for (double& x : f1) x = U(rng);
    const auto p = normalize_with_beta(f0, 0.2);
    const auto q = normalize_with_beta(f1, 0.2);
    worst = std::max(worst, std::abs(w2_distance_1d(p, q) - brute_force(p, q)));
  }

  const int n = 64;
  const double s = 0.2;
  std::vector<double> f0(n), f1(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    f0[i] = std::exp(-800.0 * (x - 0.35) * (x - 0.35));
    f1[i] = std::exp(-800.0 * (x - 0.35 - s) * (x - 0.35 - s));
  }
  const double moved =
      std::sqrt(w2_distance_1d(normalize_with_beta(f0, 0.0), normalize_with_beta(f1, 0.0)));
  const double shift_err = std::abs(moved - s);

  const bool pass = worst <= 1e-8 && shift_err <= 1.0 / n;
  report(5, "w2-oracle", pass,
         fmt("oracle gap %.1e, translation error %.1e (cell %.1e)", worst, shift_err, 1.0 / n));
}

// 6: homogeneous-model fields match the free-space response and converge at
// second order under grid refinement.
void criterion_helmholtz() {
  const double c = 1500.0, f = 5.0;
  const double k = 2.0 * std::numbers::pi * f / c;

  auto reference = [&](double r) {
    return std::complex<double>(0.0, 0.25) *
           std::complex<double>(std::cyl_bessel_j(0, k * r), std::cyl_neumann(0, k * r));
  };

  double max_phase = 0.0, max_amp = 0.0;
  {
    const double dx = 10.0;
    const int n = 441;
    auto model = VelocityModel2D::constant(n, n, dx, c);
    PMLSpec pml;
    const double W = model.width();
    HelmholtzSystem sys(model, 2.0 * std::numbers::pi * f, pml);
    const auto u = sys.solve_point_source({W / 2, W / 2}, {1.0, 0.0});
    const double r_lo = 3.0 * c / f, r_hi = W / 2 - pml.width_cells * dx;
    for (int iz = 0; iz < n; ++iz)
      for (int ix = 0; ix < n; ++ix) {
        const double x = ix * dx - W / 2, z = iz * dx - W / 2;
        const double r = std::hypot(x, z);
        if (r < r_lo || r > r_hi) continue;
        const auto ref = reference(r);
        max_phase = std::max(max_phase, std::abs(std::arg(u.at(iz, ix) / ref)));
        max_amp = std::max(max_amp, std::abs(std::abs(u.at(iz, ix)) / std::abs(ref) - 1.0));
      }
  }

  // Mean phase error in a fixed annulus with a fixed-width absorber.
  auto mean_phase = [&](double dx) {
    const int n = static_cast<int>(std::lround(4400.0 / dx)) + 1;
    auto model = VelocityModel2D::constant(n, n, dx, c);
    PMLSpec pml;
    pml.width_cells = static_cast<int>(std::lround(400.0 / dx));
    const double W = model.width();
    HelmholtzSystem sys(model, 2.0 * std::numbers::pi * f, pml);
    const auto u = sys.solve_point_source({W / 2, W / 2}, {1.0, 0.0});
    double acc = 0.0;
    int cnt = 0;
    for (int iz = 0; iz < n; ++iz)
      for (int ix = 0; ix < n; ++ix) {
        const double x = ix * dx - W / 2, z = iz * dx - W / 2;
        const double r = std::hypot(x, z);
        if (r < 900.0 || r > 1400.0) continue;
        acc += std::abs(std::arg(u.at(iz, ix) / reference(r)));
        ++cnt;
      }
    return acc / cnt;
  };
  const double e40 = mean_phase(40.0), e20 = mean_phase(20.0), e10 = mean_phase(10.0);
  const double order1 = std::log2(e40 / e20), order2 = std::log2(e20 / e10);

  const double phase_frac = max_phase / (2.0 * std::numbers::pi);
  const bool pass = phase_frac < 0.02 && max_amp < 0.05 && order1 >= 1.8 && order2 >= 1.8;
  report(6, "helmholtz-validation", pass,
         fmt("phase %.2f%% of a cycle, amplitude %.2f%%, orders %.2f / %.2f", 100.0 * phase_frac,
             100.0 * max_amp, order1, order2));
}

// 7: assembled model gradients match finite differences for all metrics.
void criterion_fwi_gradient() {
  const int n = 32;
  const double dx = 20.0, freq = 5.0;
  VelocityModel2D model = VelocityModel2D::constant(n, n, dx, 1500.0);
  VelocityModel2D truth = model;
  for (int iz = 0; iz < n; ++iz)
    for (int ix = 0; ix < n; ++ix) {
      const double gx = (ix - 13.0) / 6.0, gz = (iz - 18.0) / 6.0;
      truth.at(iz, ix) += 60.0 * std::exp(-0.5 * (gx * gx + gz * gz));
      model.at(iz, ix) += 25.0 * std::sin(2.0 * std::numbers::pi * ix / n) *
                          std::cos(2.0 * std::numbers::pi * iz / n);
    }

  AcquisitionGeometry geo;
  geo.sources.push_back({model.width() * 0.3, dx});
  geo.sources.push_back({model.width() * 0.7, dx});
  for (int r = 0; r < 24; ++r)
    geo.receivers.push_back({model.width() * r / 23.0, model.depth() - dx});

  PMLSpec pml;
  pml.width_cells = 8;
  const auto obs = forward_data(truth, geo, {freq}, pml);

  std::vector<MisfitChoice> choices(3);
  choices[0].kind = MetricKind::L2;
  choices[1].kind = MetricKind::W2;
  choices[2].kind = MetricKind::HV;
  choices[2].hv = transport_params(0);
  choices[2].hv.n_x = 0;
  choices[2].hv.max_iters = 300;

  std::mt19937 rng(123);
  std::uniform_int_distribution<int> cell(0, n * n - 1);
  std::vector<int> cells;
  for (int t = 0; t < 20; ++t) cells.push_back(cell(rng));

  const double h = 0.1;
  double errs[3] = {0.0, 0.0, 0.0};
  for (int m = 0; m < 3; ++m) {
    const auto& mc = choices[m];
    auto [val, grad] = misfit_value_and_gradient(model, geo, obs, freq, mc, pml);
    (void)val;
    double num = 0.0, den = 0.0;
    for (int idx : cells) {
      VelocityModel2D mp = model, mm = model;
      mp.c[idx] += h;
      mm.c[idx] -= h;
      double vp = 0.0, vm = 0.0;
      const auto dp = forward_data(mp, geo, {freq}, pml);
      const auto dm = forward_data(mm, geo, {freq}, pml);
      for (size_t k = 0; k < obs.size(); ++k) {
        vp += misfit_value(dp[k], obs[k], mc);
        vm += misfit_value(dm[k], obs[k], mc);
      }
      const double fd = (vp - vm) / (2.0 * h);
      num += (fd - grad[idx]) * (fd - grad[idx]);
      den += fd * fd;
    }
    errs[m] = std::sqrt(num / den);
  }
  const bool pass = errs[0] < 1e-2 && errs[1] < 1e-2 && errs[2] < 3e-2;
  report(7, "fwi-gradient", pass,
         fmt("l2 %.1e, w2 %.1e, hv %.1e", errs[0], errs[1], errs[2]));
}

// 8: constant-velocity misfit landscapes; transport-like curves unimodal with
// the minimum at the reference, quadratic curve with spurious extrema.
void criterion_landscape() {
  std::vector<double> cs(31), cs_l2(31);
  for (int i = 0; i < 31; ++i) {
    cs[i] = 1350.0 + 10.0 * i;
    cs_l2[i] = 1300.0 + (400.0 / 30.0) * i;
  }

  LineScanGeometry hv_geom;
  hv_geom.domain_width_m = 3000.0;
  std::vector<std::pair<std::string, MisfitChoice>> metrics;
  for (double eps : {1e-5, 1e-6, 1e-7}) {
    MisfitChoice mc;
    mc.kind = MetricKind::HV;
    mc.hv.kappa = 1e-10;
    mc.hv.lambda = 1e-10;
    mc.hv.epsilon = eps;
    metrics.emplace_back(fmt("hv_eps_%g", eps), mc);
  }
  const auto hv_scan = scan_constant_velocity(cs, 1500.0, hv_geom, 4.0, metrics);

  bool hv_ok = true;
  std::string hv_detail;
  for (const auto& [name, curve] : hv_scan.curves) {
    int arg = 0;
    for (size_t i = 1; i < curve.size(); ++i)
      if (curve[i] < curve[arg]) arg = static_cast<int>(i);
    const int mins = count_strict_local_minima(curve);
    const int maxs = count_strict_local_maxima(curve);
    hv_ok = hv_ok && cs[arg] == 1500.0 && mins == 1 && maxs == 0;
    hv_detail += fmt("%s argmin %g min %d max %d; ", name.c_str(), cs[arg], mins, maxs);
  }

  LineScanGeometry l2_geom;
  MisfitChoice l2;
  const auto l2_scan = scan_constant_velocity(cs_l2, 1500.0, l2_geom, 6.0, {{"l2", l2}});
  const auto& l2_curve = l2_scan.curves[0].second;
  const int l2_mins = count_strict_local_minima(l2_curve);
  const int l2_maxs = count_strict_local_maxima(l2_curve);
  const bool l2_ok = l2_mins > 1 || l2_maxs >= 1;

  report(8, "velocity-landscape", hv_ok && l2_ok,
         hv_detail + fmt("l2 min %d max %d", l2_mins, l2_maxs));
}

// 9: shifted-wavelet landscapes; large parameters reproduce the multimodal
// quadratic shape, small parameters give a single basin.
void criterion_ricker() {
  std::vector<double> shifts(101);
  for (int i = 0; i < 101; ++i) shifts[i] = -0.5 + i / 100.0;

  HVParams strong;
  strong.kappa = strong.lambda = strong.epsilon = 10.0;
  HVParams weak;
  weak.kappa = weak.lambda = 1e-5;
  weak.epsilon = 1e-3;
  weak.n_x = 512;

  const auto scan = ricker_shift_scan(shifts, {{"hv_strong", strong}, {"hv_weak", weak}});
  int strong_mins = -1, weak_mins = -1;
  for (const auto& [name, curve] : scan.curves) {
    if (name == "hv_strong") strong_mins = count_strict_local_minima(curve);
    if (name == "hv_weak") weak_mins = count_strict_local_minima(curve);
  }
  const bool pass = strong_mins >= 3 && weak_mins == 1;
  report(9, "ricker-landscape", pass,
         fmt("strong minima %d, weak minima %d", strong_mins, weak_mins));
}

// 10: the phantom regression, noise free and at 10 dB.
void criterion_phantom() {
  PhantomSpec spec;
  MisfitChoice hv;
  hv.kind = MetricKind::HV;
  hv.hv = transport_params(0);
  hv.hv.n_x = 0;
  const auto initial =
      VelocityModel2D::constant(spec.n, spec.n, spec.spacing_m, spec.background_mps);

  InversionConfig clean_cfg;
  clean_cfg.frequency_schedule = {20000.0, 35000.0};
  clean_cfg.c_min = 1400.0;
  clean_cfg.c_max = 1600.0;
  clean_cfg.optimizer.max_iters_per_freq = 20;
  const auto clean = phantom_experiment(spec, GeometryMode::Ring, {{"hv", hv}},
                                        std::numeric_limits<double>::infinity(), 20260823ull,
                                        clean_cfg, initial);
  const double clean_ratio = clean[0].score.rmse / clean[0].initial_score.rmse;

  // The noisy run regularizes with a smoothed gradient and early stopping.
  InversionConfig noisy_cfg = clean_cfg;
  noisy_cfg.optimizer.max_iters_per_freq = 2;
  noisy_cfg.optimizer.gradient_smoothing_sigma = 4.0;
  const auto noisy = phantom_experiment(spec, GeometryMode::Ring, {{"hv", hv}}, 10.0,
                                        20260823ull, noisy_cfg, initial);
  const double noisy_ratio = noisy[0].score.rmse / noisy[0].initial_score.rmse;

  const bool pass = clean_ratio <= 0.5 && noisy_ratio <= 0.7;
  report(10, "phantom-regression", pass,
         fmt("noise-free rmse ratio %.3f, 10 dB ratio %.3f", clean_ratio, noisy_ratio));
}

// 11: repeated runs of the command-line pipeline produce bit-identical files.
void criterion_determinism(const char* cli_path) {
  if (cli_path == nullptr) {
    report(11, "determinism", false, "command-line binary path not supplied");
    return;
  }

  const fs::path root =
      fs::temp_directory_path() / ("hvfwi_accept_" + std::to_string(std::random_device{}()));

  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  auto run = [&](const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };

  bool ok = true;
  std::vector<std::string> outputs = {"data.bin", "noisy.bin", "final.bin"};
  for (int rep = 0; rep < 2 && ok; ++rep) {
    const fs::path dir = root / ("run" + std::to_string(rep));
    fs::create_directories(dir);

    auto truth = VelocityModel2D::constant(24, 24, 20.0, 1500.0);
    for (int iz = 0; iz < 24; ++iz)
      for (int ix = 0; ix < 24; ++ix)
        truth.at(iz, ix) += 40.0 * std::exp(-0.05 * ((ix - 12) * (ix - 12) + (iz - 14) * (iz - 14)));
    write_grid_file((dir / "truth.bin").string(), truth);
    write_grid_file((dir / "initial.bin").string(),
                    VelocityModel2D::constant(24, 24, 20.0, 1500.0));

    const json geometry{{"sources", {{120.0, 20.0}, {340.0, 20.0}}},
                        {"receivers",
                         {{0.0, 440.0}, {77.0, 440.0}, {154.0, 440.0}, {231.0, 440.0},
                          {308.0, 440.0}, {385.0, 440.0}, {460.0, 440.0}}}};
    std::ofstream(dir / "forward.json") << json{{"model", (dir / "truth.bin").string()},
                                                {"freqs_hz", {5.0}},
                                                {"geometry", geometry},
                                                {"pml", {{"width_cells", 6}}},
                                                {"out", (dir / "data.bin").string()}};
    std::ofstream(dir / "noise.json")
        << json{{"gather", (dir / "data.bin").string()},
                {"noise", {{"snr_db", 10.0}, {"seed", 99}}},
                {"out", (dir / "noisy.bin").string()}};
    std::ofstream(dir / "invert.json")
        << json{{"initial_model", (dir / "initial.bin").string()},
                {"observed", (dir / "noisy.bin").string()},
                {"metric", "hv"},
                {"hv", {{"kappa", 1.0}, {"lambda", 1.0}, {"epsilon", 1e-3}}},
                {"pml", {{"width_cells", 6}}},
                {"inversion", {{"c_min", 1400.0}, {"c_max", 1600.0}}},
                {"optimizer", {{"max_iters_per_freq", 3}}},
                {"out", (dir / "final.bin").string()}};

    const std::string cli = std::string("\"") + cli_path + "\"";
    ok = ok && run(cli + " forward --config " + (dir / "forward.json").string());
    ok = ok && run(cli + " noise --config " + (dir / "noise.json").string());
    ok = ok && run(cli + " invert --config " + (dir / "invert.json").string());
  }

  std::string detail = "forward, noise, and inversion outputs identical across runs";
  if (!ok) {
    detail = "pipeline command failed";
  } else {
    for (const auto& name : outputs) {
      const auto a = read_bytes(root / "run0" / name);
      const auto b = read_bytes(root / "run1" / name);
      if (a.empty() || a != b) {
        ok = false;
        detail = name + " differs between runs";
        break;
      }
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  report(11, "determinism", ok, detail);
}

// 12: solver wall-clock grows about linearly in the spatial resolution.
void criterion_complexity() {
  std::vector<double> lx, lt;
  std::string detail;
  for (int n : {64, 128, 256, 512}) {
    HVParams p = transport_params(n);
    p.max_iters = 8;
    p.tol = 1e-14;
    std::vector<double> a(n + 1), b(n + 1);
    for (int i = 0; i <= n; ++i) {
      const double x = double(i) / n;
      a[i] = std::exp(-60.0 * (x - 0.4) * (x - 0.4)) + 0.2 * std::sin(4.0 * x);
      b[i] = std::exp(-60.0 * (x - 0.6) * (x - 0.6)) + 0.2 * std::cos(3.0 * x);
    }
    const GridSignal f0(a), f1(b);
    hv_distance(f0, f1, p);  // warm up
    double best = 1e300;
    for (int rep = 0; rep < (n <= 128 ? 5 : 3); ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      hv_distance(f0, f1, p);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    lx.push_back(std::log(double(n)));
    lt.push_back(std::log(best));
    detail += fmt("n=%d %.3fs; ", n, best);
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int m = static_cast<int>(lx.size());
  for (int i = 0; i < m; ++i) {
    sx += lx[i];
    sy += lt[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * lt[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const bool pass = slope >= 0.8 && slope <= 1.3;
  report(12, "complexity", pass, detail + fmt("exponent %.2f", slope));
}

}  // namespace

int main(int argc, char** argv) {
  criterion_axioms();
  criterion_constant_oracle();
  criterion_descent();
  criterion_frechet();
  criterion_w2_oracle();
  criterion_helmholtz();
  criterion_fwi_gradient();
  criterion_landscape();
  criterion_ricker();
  criterion_phantom();
  criterion_determinism(argc > 1 ? argv[1] : nullptr);
  criterion_complexity();

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
