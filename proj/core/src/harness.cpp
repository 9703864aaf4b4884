#include "hvfwi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hvfwi/parallel.hpp"

namespace hvfwi {

namespace {

AcquisitionGeometry line_geometry(const LineScanGeometry& g) {
  AcquisitionGeometry geo;
  for (int k = 0; k < g.n_sources; ++k) {
    const double x = g.domain_width_m * (k + 1) / (g.n_sources + 1);
    geo.sources.push_back({x, g.line_depth_m});
  }
  for (int r = 0; r < g.n_receivers; ++r) {
    const double x = g.n_receivers > 1 ? g.domain_width_m * r / (g.n_receivers - 1) : 0.0;
    geo.receivers.push_back({x, g.line_depth_m});
  }
  return geo;
}

std::vector<FrequencyGather> line_scan_data(double c, const LineScanGeometry& g,
                                            const AcquisitionGeometry& geo, double freq_hz) {
  const int n_x = static_cast<int>(std::lround(g.domain_width_m / g.spacing_m)) + 1;
  const int n_z = static_cast<int>(std::lround(g.domain_depth_m / g.spacing_m)) + 1;
  const auto model = VelocityModel2D::constant(n_x, n_z, g.spacing_m, c);
  return forward_data(model, geo, {freq_hz}, g.pml);
}

}  // namespace

ScanResult scan_constant_velocity(
    const std::vector<double>& c_values, double c_star, const LineScanGeometry& geometry,
    double freq_hz, const std::vector<std::pair<std::string, MisfitChoice>>& metrics) {
  const auto geo = line_geometry(geometry);
  const auto ref = line_scan_data(c_star, geometry, geo, freq_hz);

  ScanResult out;
  out.parameter_name = "c_mps";
  out.parameter = c_values;
  for (const auto& [name, choice] : metrics) out.curves.emplace_back(name, c_values.size());

  std::vector<std::vector<FrequencyGather>> per_c(c_values.size());
  for (size_t ci = 0; ci < c_values.size(); ++ci)
    per_c[ci] = line_scan_data(c_values[ci], geometry, geo, freq_hz);

  parallel_for(static_cast<int>(c_values.size()), [&](int ci) {
    for (size_t mi = 0; mi < metrics.size(); ++mi) {
      double total = 0.0;
      for (size_t k = 0; k < per_c[ci].size(); ++k)
        total += misfit_value(per_c[ci][k], ref[k], metrics[mi].second);
      out.curves[mi].second[ci] = total;
    }
  });
  return out;
}

std::vector<double> ricker_signal(const RickerScanSpec& spec, double shift) {
  std::vector<double> f(spec.n_samples);
  const double nu = spec.peak_freq;
  for (int i = 0; i < spec.n_samples; ++i) {
    const double t =
        spec.axis_start + (spec.axis_end - spec.axis_start) * i / (spec.n_samples - 1);
    const double arg = std::numbers::pi * nu * (t - spec.center - shift);
    const double a2 = arg * arg;
    f[i] = (1.0 - 2.0 * a2) * std::exp(-a2);
  }
  return f;
}

ScanResult ricker_shift_scan(const std::vector<double>& shift_values,
                             const std::vector<std::pair<std::string, HVParams>>& hv_param_sets,
                             const RickerScanSpec& spec) {
  ScanResult out;
  out.parameter_name = "shift";
  out.parameter = shift_values;
  out.curves.emplace_back("l2", std::vector<double>(shift_values.size()));
  for (const auto& [name, params] : hv_param_sets)
    out.curves.emplace_back(name, std::vector<double>(shift_values.size()));

  const auto f = ricker_signal(spec, 0.0);
  const GridSignal ref{std::vector<double>(f), spec.axis_start,
                       (spec.axis_end - spec.axis_start) / (spec.n_samples - 1)};

  parallel_for(static_cast<int>(shift_values.size()), [&](int si) {
    const auto g = ricker_signal(spec, shift_values[si]);
    double l2 = 0.0;
    for (size_t i = 0; i < f.size(); ++i) l2 += (f[i] - g[i]) * (f[i] - g[i]);
    out.curves[0].second[si] = l2 / (spec.n_samples - 1);
    const GridSignal moved{std::vector<double>(g), ref.axis_start, ref.axis_step};
    for (size_t pi = 0; pi < hv_param_sets.size(); ++pi) {
      const auto res = hv_distance(moved, ref, hv_param_sets[pi].second);
      out.curves[pi + 1].second[si] = res.distance * res.distance;
    }
  });

  for (auto& [name, curve] : out.curves) {
    const double peak = *std::max_element(curve.begin(), curve.end());
    if (peak > 0.0)
      for (double& v : curve) v /= peak;
  }
  return out;
}

VelocityModel2D make_phantom(const PhantomSpec& spec) {
  VelocityModel2D m = VelocityModel2D::constant(spec.n, spec.n, spec.spacing_m,
                                                spec.background_mps);
  const double cx = spec.center_frac_x * (spec.n - 1);
  const double cz = spec.center_frac_z * (spec.n - 1);
  const double s2 = spec.inclusion_sigma_cells * spec.inclusion_sigma_cells;
  for (int iz = 0; iz < spec.n; ++iz)
    for (int ix = 0; ix < spec.n; ++ix) {
      const double r2 = (ix - cx) * (ix - cx) + (iz - cz) * (iz - cz);
      m.at(iz, ix) += spec.inclusion_amplitude_mps * std::exp(-0.5 * r2 / s2);
    }
  return m;
}

AcquisitionGeometry phantom_geometry(const PhantomSpec& spec, GeometryMode mode,
                                     int n_transducers) {
  AcquisitionGeometry geo;
  const double extent = (spec.n - 1) * spec.spacing_m;
  if (mode == GeometryMode::Ring) {
    const double radius = 0.42 * extent;
    const double cx = 0.5 * extent, cz = 0.5 * extent;
    // Receivers sit half a slot away from sources so no receiver coincides
    // with the emitting element; a collocated trace samples the near field
    // and dominates the gather energy.
    for (int k = 0; k < n_transducers; ++k) {
      const double th = 2.0 * std::numbers::pi * k / n_transducers;
      const double tr = 2.0 * std::numbers::pi * (k + 0.5) / n_transducers;
      geo.sources.push_back({cx + radius * std::cos(th), cz + radius * std::sin(th)});
      geo.receivers.push_back({cx + radius * std::cos(tr), cz + radius * std::sin(tr)});
    }
  } else {
    const double depth = 0.08 * extent;
    for (int k = 0; k < n_transducers; ++k) {
      const double x = extent * (k + 1) / (n_transducers + 1);
      geo.sources.push_back({x, depth});
    }
    for (int r = 0; r < 2 * n_transducers; ++r) {
      const double x = extent * r / (2.0 * n_transducers - 1.0);
      geo.receivers.push_back({x, depth});
    }
  }
  return geo;
}

std::vector<PhantomOutcome> phantom_experiment(
    const PhantomSpec& phantom, GeometryMode mode,
    const std::vector<std::pair<std::string, MisfitChoice>>& metrics, double snr_db,
    std::uint64_t seed, const InversionConfig& config, const VelocityModel2D& initial_model) {
  const auto truth = make_phantom(phantom);
  const auto geo = phantom_geometry(phantom, mode);
  auto observed = forward_data(truth, geo, config.frequency_schedule, config.pml);
  add_noise(observed, snr_db, seed);

  std::vector<PhantomOutcome> out;
  for (const auto& [name, choice] : metrics) {
    PhantomOutcome o;
    o.metric = name;
    o.initial_score = score(initial_model, truth);
    o.report = fwi_invert(observed, geo, initial_model, config, choice);
    o.score = score(o.report.final_model, truth);
    out.push_back(std::move(o));
  }
  return out;
}

QualityScore score(const VelocityModel2D& model, const VelocityModel2D& reference) {
  if (model.n_x != reference.n_x || model.n_z != reference.n_z)
    throw MismatchedGeometry("score: grids differ");
  double acc = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (size_t i = 0; i < model.c.size(); ++i) {
    const double d = model.c[i] - reference.c[i];
    acc += d * d;
    lo = std::min(lo, reference.c[i]);
    hi = std::max(hi, reference.c[i]);
  }
  QualityScore s;
  s.rmse = std::sqrt(acc / model.c.size());
  const double peak = hi - lo;  // reference dynamic range
  if (s.rmse == 0.0 || peak == 0.0)
    s.psnr = std::numeric_limits<double>::infinity();
  else
    s.psnr = 20.0 * std::log10(peak / s.rmse);
  return s;
}

int count_strict_local_minima(const std::vector<double>& curve) {
  int count = 0;
  for (size_t i = 1; i + 1 < curve.size(); ++i)
    if (curve[i] < curve[i - 1] && curve[i] < curve[i + 1]) ++count;
  return count;
}

int count_strict_local_maxima(const std::vector<double>& curve) {
  int count = 0;
  for (size_t i = 1; i + 1 < curve.size(); ++i)
    if (curve[i] > curve[i - 1] && curve[i] > curve[i + 1]) ++count;
  return count;
}

}  // namespace hvfwi
