#include "hvfwi/inversion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>

#include "hvfwi/parallel.hpp"

namespace hvfwi {

Wavefield solve_adjoint(const HelmholtzSystem& handle,
                        const std::vector<std::complex<double>>& adjoint_sources,
                        const std::vector<std::array<double, 2>>& receiver_positions) {
  if (adjoint_sources.size() != receiver_positions.size())
    throw MismatchedGeometry("adjoint source count does not match receivers");
  std::vector<std::complex<double>> conj_src(adjoint_sources.size());
  for (size_t i = 0; i < adjoint_sources.size(); ++i) conj_src[i] = std::conj(adjoint_sources[i]);
  Wavefield w = handle.solve_injected(receiver_positions, conj_src);
  for (auto& u : w.u) u = std::conj(u);
  return w;
}

std::vector<double> assemble_gradient(const std::vector<Wavefield>& forward_fields,
                                      const std::vector<Wavefield>& adjoint_fields,
                                      const VelocityModel2D& model, double omega) {
  if (forward_fields.size() != adjoint_fields.size())
    throw MismatchedGeometry("forward/adjoint field counts differ");
  const size_t n = model.c.size();
  std::vector<double> grad(n, 0.0);
  const double measure = model.d_x * model.d_z;
  for (size_t k = 0; k < forward_fields.size(); ++k) {
    const auto& u = forward_fields[k].u;
    const auto& lam = adjoint_fields[k].u;
    for (size_t j = 0; j < n; ++j) {
      const double c = model.c[j];
      grad[j] += -2.0 * omega * omega * measure *
                 std::real(std::conj(lam[j]) * u[j]) / (c * c * c);
    }
  }
  return grad;
}

namespace {

const FrequencyGather& observed_for(const std::vector<FrequencyGather>& observed,
                                    double freq_hz, int source_index) {
  for (const auto& g : observed)
    if (g.source_index == source_index && std::abs(g.freq_hz - freq_hz) < 1e-9 * (1.0 + freq_hz))
      return g;
  throw MismatchedGeometry("observed data lacks a gather for the requested source/frequency");
}

double misfit_value_at(const VelocityModel2D& model, const AcquisitionGeometry& geometry,
                       const std::vector<FrequencyGather>& observed, double freq_hz,
                       const MisfitChoice& choice, const PMLSpec& pml) {
  const double omega = 2.0 * std::numbers::pi * freq_hz;
  HelmholtzSystem sys(model, omega, pml);
  const int n_src = static_cast<int>(geometry.sources.size());
  std::vector<FrequencyGather> syn(n_src);
  for (int k = 0; k < n_src; ++k) {
    const auto field = sys.solve_point_source(geometry.sources[k], geometry.amplitude(freq_hz));
    syn[k].freq_hz = freq_hz;
    syn[k].source_index = k;
    syn[k].data.reserve(geometry.receivers.size());
    for (const auto& r : geometry.receivers)
      syn[k].data.push_back(field.at(sys.nearest_node_z(r[1]), sys.nearest_node_x(r[0])));
  }
  std::vector<double> values(n_src);
  parallel_for(n_src, [&](int k) {
    values[k] = misfit_value(syn[k], observed_for(observed, freq_hz, k), choice);
  });
  double total = 0.0;
  for (double v : values) total += v;  // fixed order, commutative by construction
  return total;
}

}  // namespace

std::pair<double, std::vector<double>> misfit_value_and_gradient(
    const VelocityModel2D& model, const AcquisitionGeometry& geometry,
    const std::vector<FrequencyGather>& observed, double freq_hz, const MisfitChoice& choice,
    const PMLSpec& pml) {
  const double omega = 2.0 * std::numbers::pi * freq_hz;
  HelmholtzSystem sys(model, omega, pml);
  const int n_src = static_cast<int>(geometry.sources.size());

  std::vector<CollarField> fwd(n_src);
  std::vector<FrequencyGather> syn(n_src);
  for (int k = 0; k < n_src; ++k) {
    fwd[k] = sys.solve_point_source_collar(geometry.sources[k], geometry.amplitude(freq_hz));
    const Wavefield field = sys.crop(fwd[k]);
    syn[k].freq_hz = freq_hz;
    syn[k].source_index = k;
    for (const auto& r : geometry.receivers)
      syn[k].data.push_back(field.at(sys.nearest_node_z(r[1]), sys.nearest_node_x(r[0])));
  }

  std::vector<MisfitEval> evals(n_src);
  parallel_for(n_src, [&](int k) {
    evals[k] = misfit_and_adjoint(syn[k], observed_for(observed, freq_hz, k), choice);
  });

  double value = 0.0;
  std::vector<double> grad(model.c.size(), 0.0);
  for (int k = 0; k < n_src; ++k) {
    std::vector<std::complex<double>> conj_src(evals[k].adjoint_sources.size());
    for (size_t i = 0; i < conj_src.size(); ++i)
      conj_src[i] = std::conj(evals[k].adjoint_sources[i]);
    CollarField adj = sys.solve_injected_collar(geometry.receivers, conj_src);
    for (auto& u : adj.u) u = std::conj(u);
    sys.accumulate_gradient(fwd[k], adj, model, grad);
    value += evals[k].value;
  }
  return {value, std::move(grad)};
}

namespace {

void project_bounds(VelocityModel2D& m, double c_min, double c_max) {
  for (double& v : m.c) v = std::clamp(v, c_min, c_max);
}

/// L-BFGS two-loop recursion with projection onto the velocity box.
struct LbfgsStage {
  const AcquisitionGeometry& geometry;
  const std::vector<FrequencyGather>& observed;
  const InversionConfig& config;
  const MisfitChoice& choice;
  double freq_hz;

  bool run(VelocityModel2D& model, std::vector<double>& misfit_history,
           bool& line_search_failed) const {
    const auto& opt = config.optimizer;
    if (opt.max_iters_per_freq <= 0) return true;

    // Optional Gaussian smoothing of the gradient keeps model updates in a
    // smooth subspace, which regularizes inversions of noisy data.
    auto eval_full = [&](const VelocityModel2D& m) {
      auto [J_m, g_m] = misfit_value_and_gradient(m, geometry, observed, freq_hz, choice, config.pml);
      if (opt.gradient_smoothing_sigma > 0.0) {
        VelocityModel2D wrap = m;
        wrap.c = std::move(g_m);
        wrap = gaussian_smooth(wrap, opt.gradient_smoothing_sigma);
        g_m = std::move(wrap.c);
      }
      return std::make_pair(J_m, std::move(g_m));
    };
    auto eval_value = [&](const VelocityModel2D& m) {
      return misfit_value_at(m, geometry, observed, freq_hz, choice, config.pml);
    };

    auto [J, g] = eval_full(model);
    misfit_history.push_back(J);
    const size_t n = g.size();
    std::deque<std::vector<double>> s_hist, y_hist;

    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
      double r = 0.0;
      for (size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
      return r;
    };

    for (int it = 0; it < opt.max_iters_per_freq; ++it) {
      if (opt.grad_tol > 0.0) {
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax < opt.grad_tol) return true;
      }

      // Two-loop recursion for p = -H g.
      std::vector<double> q = g;
      std::vector<double> alpha(s_hist.size());
      for (size_t i = s_hist.size(); i-- > 0;) {
        const double rho = 1.0 / dot(y_hist[i], s_hist[i]);
        alpha[i] = rho * dot(s_hist[i], q);
        for (size_t j = 0; j < n; ++j) q[j] -= alpha[i] * y_hist[i][j];
      }
      if (!s_hist.empty()) {
        const double gamma =
            dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        for (auto& v : q) v *= gamma;
      }
      for (size_t i = 0; i < s_hist.size(); ++i) {
        const double rho = 1.0 / dot(y_hist[i], s_hist[i]);
        const double beta = rho * dot(y_hist[i], q);
        for (size_t j = 0; j < n; ++j) q[j] += (alpha[i] - beta) * s_hist[i][j];
      }
      std::vector<double> p(n);
      for (size_t j = 0; j < n; ++j) p[j] = -q[j];

      double gTp = dot(g, p);
      if (!(gTp < 0.0)) {  // not a descent direction: restart from steepest descent
        s_hist.clear();
        y_hist.clear();
        for (size_t j = 0; j < n; ++j) p[j] = -g[j];
        gTp = dot(g, p);
        if (!(gTp < 0.0)) return true;  // zero gradient
      }
      if (s_hist.empty()) {
        double pmax = 0.0;
        for (double v : p) pmax = std::max(pmax, std::abs(v));
        if (pmax > 0.0) {
          const double scale = opt.initial_step_mps / pmax;
          for (auto& v : p) v *= scale;
          gTp *= scale;
        }
      }

      double step = 1.0;
      VelocityModel2D trial = model;
      double J_trial = 0.0;
      bool accepted = false;
      while (step > 1e-12) {
        trial = model;
        for (size_t j = 0; j < n; ++j) trial.c[j] = model.c[j] + step * p[j];
        project_bounds(trial, config.c_min, config.c_max);
        J_trial = eval_value(trial);
        if (J_trial <= J + opt.armijo_c * step * gTp) {
          accepted = true;
          break;
        }
        step *= opt.step_shrink;
      }
      if (!accepted) {
        line_search_failed = true;
        return false;  // stage terminates, model retained
      }

      auto [J_new, g_new] = eval_full(trial);
      std::vector<double> s(n), y(n);
      for (size_t j = 0; j < n; ++j) {
        s[j] = trial.c[j] - model.c[j];
        y[j] = g_new[j] - g[j];
      }
      if (dot(s, y) > 1e-14 * std::max(dot(s, s), 1e-300)) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        while (static_cast<int>(s_hist.size()) > opt.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      model = std::move(trial);
      J = J_new;
      g = std::move(g_new);
      misfit_history.push_back(J);
    }
    return true;
  }
};

}  // namespace

InversionReport fwi_invert(const std::vector<FrequencyGather>& data_obs,
                           const AcquisitionGeometry& geometry,
                           const VelocityModel2D& initial_model, const InversionConfig& config,
                           const MisfitChoice& choice) {
  config.validate();
  initial_model.validate();

  InversionReport report;
  VelocityModel2D model = initial_model;
  project_bounds(model, config.c_min, config.c_max);

  for (int round = 0; round < config.rounds; ++round) {
    if (round > 0 && config.inter_round_smoothing_sigma > 0.0) {
      model = gaussian_smooth(model, config.inter_round_smoothing_sigma);
      project_bounds(model, config.c_min, config.c_max);
    }
    for (double freq : config.frequency_schedule) {
      const auto t0 = std::chrono::steady_clock::now();
      LbfgsStage stage{geometry, data_obs, config, choice, freq};
      const bool ok = stage.run(model, report.misfit_history, report.line_search_failed);
      report.stage_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      report.snapshots.push_back(model);
      if (!ok) break;
    }
  }
  report.final_model = std::move(model);
  return report;
}

void add_noise(std::vector<FrequencyGather>& data, double snr_db, std::uint64_t rng_seed) {
  if (std::isinf(snr_db) && snr_db > 0.0) return;
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite or +inf");

  double energy = 0.0;
  size_t count = 0;
  for (const auto& g : data) {
    for (const auto& d : g.data) energy += std::norm(d);
    count += g.data.size();
  }
  if (count == 0) return;
  // Per-sample complex variance so that 10 log10(E_signal / E_noise) = snr_db.
  const double sigma2 = energy * std::pow(10.0, -snr_db / 10.0) / double(count);
  const double sigma_comp = std::sqrt(sigma2 / 2.0);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& g : data)
    for (auto& d : g.data)
      d += std::complex<double>(sigma_comp * normal(rng), sigma_comp * normal(rng));
}

VelocityModel2D gaussian_smooth(const VelocityModel2D& model, double sigma_cells) {
  if (sigma_cells < 0.0) throw ConfigError("gaussian_smooth: sigma must be nonnegative");
  if (sigma_cells == 0.0) return model;

  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_cells)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma_cells * sigma_cells));
    sum += kernel[k + radius];
  }
  for (double& v : kernel) v /= sum;

  VelocityModel2D tmp = model, out = model;
  // Horizontal pass with edge replication.
  for (int iz = 0; iz < model.n_z; ++iz)
    for (int ix = 0; ix < model.n_x; ++ix) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * model.at(iz, std::clamp(ix + k, 0, model.n_x - 1));
      tmp.at(iz, ix) = acc;
    }
  for (int iz = 0; iz < model.n_z; ++iz)
    for (int ix = 0; ix < model.n_x; ++ix) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * tmp.at(std::clamp(iz + k, 0, model.n_z - 1), ix);
      out.at(iz, ix) = acc;
    }
  return out;
}

}  // namespace hvfwi
