// Command-line front end: forward modeling, inversion, metric evaluation,
// landscape scans, and file utilities over the shared binary formats.

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hvfwi/harness.hpp"
#include "hvfwi/helmholtz.hpp"
#include "hvfwi/hv_metric.hpp"
#include "hvfwi/inversion.hpp"
#include "hvfwi/io.hpp"
#include "hvfwi/misfit.hpp"
#include "hvfwi/wasserstein.hpp"

using nlohmann::json;
using namespace hvfwi;

namespace {

struct Overrides {
  std::optional<std::string> metric;
  std::optional<double> snr_db;
  std::optional<long long> seed;
  std::optional<std::string> out;
  std::optional<int> max_iters;
};

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key)) throw ConfigError("missing key '" + key + "' in " + context);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' in " + context + " has the wrong type");
  }
}

template <typename T>
T optional_of(const json& j, const std::string& key, const std::string& context, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' in " + context + " has the wrong type");
  }
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  reject_unknown(j,
                 {"model", "initial_model", "reference", "observed", "gather", "signal_a",
                  "signal_b", "out", "geometry", "freqs_hz", "pml", "metric", "hv",
                  "beta_margin", "optimizer", "inversion", "noise", "scan", "ricker",
                  "require_convergence"},
                 "config");
  return j;
}

std::string out_path(const json& cfg, const Overrides& ov) {
  if (ov.out) return *ov.out;
  return require<std::string>(cfg, "out", "config");
}

PMLSpec parse_pml(const json& cfg) {
  PMLSpec pml;
  if (!cfg.contains("pml")) return pml;
  const json& p = cfg["pml"];
  reject_unknown(p, {"width_cells", "max_damping", "profile_power"}, "pml");
  pml.width_cells = optional_of(p, "width_cells", "pml", pml.width_cells);
  pml.max_damping = optional_of(p, "max_damping", "pml", pml.max_damping);
  pml.profile_power = optional_of(p, "profile_power", "pml", pml.profile_power);
  pml.validate();
  return pml;
}

AcquisitionGeometry parse_geometry(const json& cfg) {
  const json& g = cfg.contains("geometry") ? cfg["geometry"] : json::object();
  reject_unknown(g, {"sources", "receivers", "source_amplitude"}, "geometry");
  AcquisitionGeometry geo;
  for (const auto& s : require<json>(g, "sources", "geometry")) geo.sources.push_back({s.at(0), s.at(1)});
  for (const auto& r : require<json>(g, "receivers", "geometry"))
    geo.receivers.push_back({r.at(0), r.at(1)});
  if (g.contains("source_amplitude")) {
    const auto& a = g["source_amplitude"];
    geo.source_amplitude = {a.at(0).get<double>(), a.at(1).get<double>()};
  }
  if (geo.sources.empty() || geo.receivers.empty())
    throw ConfigError("geometry needs at least one source and one receiver");
  return geo;
}

HVParams parse_hv(const json& cfg, const Overrides& ov) {
  HVParams hv;
  if (cfg.contains("hv")) {
    const json& h = cfg["hv"];
    reject_unknown(h, {"kappa", "lambda", "epsilon", "n_x", "n_t", "max_iters", "tol",
                       "flow_substeps"},
                   "hv");
    hv.kappa = optional_of(h, "kappa", "hv", hv.kappa);
    hv.lambda = optional_of(h, "lambda", "hv", hv.lambda);
    hv.epsilon = optional_of(h, "epsilon", "hv", hv.epsilon);
    hv.n_x = optional_of(h, "n_x", "hv", hv.n_x);
    hv.n_t = optional_of(h, "n_t", "hv", hv.n_t);
    hv.max_iters = optional_of(h, "max_iters", "hv", hv.max_iters);
    hv.tol = optional_of(h, "tol", "hv", hv.tol);
    hv.flow_substeps = optional_of(h, "flow_substeps", "hv", hv.flow_substeps);
  }
  if (ov.max_iters) hv.max_iters = std::max(1, *ov.max_iters);
  hv.validate();
  return hv;
}

MisfitChoice parse_metric(const json& cfg, const Overrides& ov) {
  MisfitChoice choice;
  std::string name = optional_of<std::string>(cfg, "metric", "config", "l2");
  if (ov.metric) name = *ov.metric;
  choice.kind = metric_kind_from_string(name);
  choice.hv = parse_hv(cfg, Overrides{});
  choice.beta_margin = optional_of(cfg, "beta_margin", "config", choice.beta_margin);
  return choice;
}

InversionConfig parse_inversion(const json& cfg, const VelocityModel2D& initial,
                                const Overrides& ov) {
  InversionConfig c;
  c.frequency_schedule = require<std::vector<double>>(cfg, "freqs_hz", "config");
  c.pml = parse_pml(cfg);

  double lo = initial.c[0], hi = initial.c[0];
  for (double v : initial.c) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  c.c_min = 0.5 * lo;
  c.c_max = 2.0 * hi;

  if (cfg.contains("inversion")) {
    const json& i = cfg["inversion"];
    reject_unknown(i, {"rounds", "inter_round_smoothing_sigma", "c_min", "c_max"}, "inversion");
    c.rounds = optional_of(i, "rounds", "inversion", c.rounds);
    c.inter_round_smoothing_sigma =
        optional_of(i, "inter_round_smoothing_sigma", "inversion", c.inter_round_smoothing_sigma);
    c.c_min = optional_of(i, "c_min", "inversion", c.c_min);
    c.c_max = optional_of(i, "c_max", "inversion", c.c_max);
  }
  if (cfg.contains("optimizer")) {
    const json& o = cfg["optimizer"];
    reject_unknown(o, {"memory", "max_iters_per_freq", "armijo_c", "step_shrink", "grad_tol",
                       "initial_step_mps", "gradient_smoothing_sigma"},
                   "optimizer");
    auto& opt = c.optimizer;
    opt.memory = optional_of(o, "memory", "optimizer", opt.memory);
    opt.max_iters_per_freq = optional_of(o, "max_iters_per_freq", "optimizer", opt.max_iters_per_freq);
    opt.armijo_c = optional_of(o, "armijo_c", "optimizer", opt.armijo_c);
    opt.step_shrink = optional_of(o, "step_shrink", "optimizer", opt.step_shrink);
    opt.grad_tol = optional_of(o, "grad_tol", "optimizer", opt.grad_tol);
    opt.initial_step_mps = optional_of(o, "initial_step_mps", "optimizer", opt.initial_step_mps);
    opt.gradient_smoothing_sigma =
        optional_of(o, "gradient_smoothing_sigma", "optimizer", opt.gradient_smoothing_sigma);
  }
  if (ov.max_iters) c.optimizer.max_iters_per_freq = *ov.max_iters;
  c.validate();
  return c;
}

GridSignal load_signal(const json& cfg, const std::string& key) {
  const auto path = require<std::string>(cfg, key, "config");
  auto values = read_signal_file(path);
  GridSignal s(std::move(values));
  s.validate();
  return s;
}

void emit(const json& summary) { std::cout << summary.dump() << "\n"; }

int cmd_forward(const json& cfg, const Overrides& ov) {
  auto model = read_grid_file(require<std::string>(cfg, "model", "config"));
  model.validate();
  const auto geo = parse_geometry(cfg);
  const auto freqs = require<std::vector<double>>(cfg, "freqs_hz", "config");
  const auto pml = parse_pml(cfg);
  std::cerr << "forward: " << geo.sources.size() << " sources, " << freqs.size()
            << " frequencies on " << model.n_x << "x" << model.n_z << " grid\n";

  GatherDataset ds;
  ds.freqs_hz = freqs;
  ds.geometry = geo;
  ds.gathers = forward_data(model, geo, freqs, pml);
  const auto out = out_path(cfg, ov);
  write_gather_file(out, ds);
  emit({{"command", "forward"},
        {"out", out},
        {"n_gathers", ds.gathers.size()},
        {"n_receivers", geo.receivers.size()}});
  return 0;
}

int cmd_invert(const json& cfg, const Overrides& ov) {
  auto initial = read_grid_file(require<std::string>(cfg, "initial_model", "config"));
  initial.validate();
  const auto observed = read_gather_file(require<std::string>(cfg, "observed", "config"));
  json cfg_full = cfg;
  if (!cfg_full.contains("freqs_hz")) cfg_full["freqs_hz"] = observed.freqs_hz;
  const auto inv = parse_inversion(cfg_full, initial, ov);
  const auto choice = parse_metric(cfg, ov);
  std::cerr << "invert: metric " << to_string(choice.kind) << ", "
            << inv.frequency_schedule.size() << " frequencies, " << inv.rounds << " round(s)\n";

  const auto report = fwi_invert(observed.gathers, observed.geometry, initial, inv, choice);
  const auto out = out_path(cfg, ov);
  write_grid_file(out, report.final_model);

  json summary{{"command", "invert"},
               {"out", out},
               {"metric", to_string(choice.kind)},
               {"line_search_failed", report.line_search_failed},
               {"misfit_history", report.misfit_history}};
  emit(summary);
  if (optional_of(cfg, "require_convergence", "config", false) && report.line_search_failed)
    return 3;
  return 0;
}

int cmd_hv_dist(const json& cfg, const Overrides& ov) {
  const auto a = load_signal(cfg, "signal_a");
  const auto b = load_signal(cfg, "signal_b");
  const auto hv = parse_hv(cfg, ov);
  const auto res = hv_distance(a, b, hv);
  emit({{"command", "hv-dist"},
        {"distance", res.distance},
        {"squared", res.action},
        {"iterations", res.iterations},
        {"converged", res.converged}});
  if (optional_of(cfg, "require_convergence", "config", false) && !res.converged) return 3;
  return 0;
}

int cmd_w2_dist(const json& cfg, const Overrides&) {
  const auto a = load_signal(cfg, "signal_a");
  const auto b = load_signal(cfg, "signal_b");
  const double margin = optional_of(cfg, "beta_margin", "config", 0.1);
  const double beta = shared_beta(a.values, b.values, margin);
  const auto p = normalize_with_beta(a.values, beta);
  const auto q = normalize_with_beta(b.values, beta);
  const double squared = w2_distance_1d(p, q);
  emit({{"command", "w2-dist"},
        {"distance", std::sqrt(squared)},
        {"squared", squared},
        {"beta", beta}});
  return 0;
}

int cmd_noise(const json& cfg, const Overrides& ov) {
  auto ds = read_gather_file(require<std::string>(cfg, "gather", "config"));
  const json& n = cfg.contains("noise") ? cfg["noise"] : json::object();
  reject_unknown(n, {"snr_db", "seed"}, "noise");
  double snr_db = optional_of(n, "snr_db", "noise",
                              std::numeric_limits<double>::infinity());
  std::uint64_t seed = optional_of<std::uint64_t>(n, "seed", "noise", 0);
  if (ov.snr_db) snr_db = *ov.snr_db;
  if (ov.seed) seed = static_cast<std::uint64_t>(*ov.seed);
  add_noise(ds.gathers, snr_db, seed);
  const auto out = out_path(cfg, ov);
  write_gather_file(out, ds);
  emit({{"command", "noise"}, {"out", out}, {"snr_db", snr_db}, {"seed", seed}});
  return 0;
}

int cmd_score(const json& cfg, const Overrides& ov) {
  auto model = read_grid_file(require<std::string>(cfg, "model", "config"));
  auto reference = read_grid_file(require<std::string>(cfg, "reference", "config"));
  const auto s = score(model, reference);
  json summary{{"command", "score"}, {"rmse", s.rmse}};
  if (std::isfinite(s.psnr))
    summary["psnr"] = s.psnr;
  else
    summary["psnr"] = "inf";
  if (ov.out || cfg.contains("out")) {
    const auto out = out_path(cfg, ov);
    atomic_write_text(out, summary.dump(2) + "\n");
    summary["out"] = out;
  }
  emit(summary);
  return 0;
}

int cmd_export_image(const json& cfg, const Overrides& ov) {
  const auto model = read_grid_file(require<std::string>(cfg, "model", "config"));
  const auto out = out_path(cfg, ov);
  export_image(model, out);
  emit({{"command", "export-image"}, {"out", out}});
  return 0;
}

int cmd_scan_velocity(const json& cfg, const Overrides& ov) {
  const json& s = cfg.contains("scan") ? cfg["scan"] : json::object();
  reject_unknown(s,
                 {"c_min", "c_max", "n_points", "c_star", "freq_hz", "domain_width_m",
                  "domain_depth_m", "spacing_m", "line_depth_m", "n_sources", "n_receivers",
                  "metrics"},
                 "scan");
  const double c_min = require<double>(s, "c_min", "scan");
  const double c_max = require<double>(s, "c_max", "scan");
  const int n_points = require<int>(s, "n_points", "scan");
  const double c_star = require<double>(s, "c_star", "scan");
  const double freq_hz = require<double>(s, "freq_hz", "scan");
  if (n_points < 2 || !(c_min < c_max))
    throw ConfigError("scan needs n_points >= 2 and c_min < c_max");

  LineScanGeometry geom;
  geom.domain_width_m = optional_of(s, "domain_width_m", "scan", geom.domain_width_m);
  geom.domain_depth_m = optional_of(s, "domain_depth_m", "scan", geom.domain_depth_m);
  geom.spacing_m = optional_of(s, "spacing_m", "scan", geom.spacing_m);
  geom.line_depth_m = optional_of(s, "line_depth_m", "scan", geom.line_depth_m);
  geom.n_sources = optional_of(s, "n_sources", "scan", geom.n_sources);
  geom.n_receivers = optional_of(s, "n_receivers", "scan", geom.n_receivers);
  geom.pml = parse_pml(cfg);

  std::vector<double> c_values(n_points);
  for (int i = 0; i < n_points; ++i)
    c_values[i] = c_min + (c_max - c_min) * i / (n_points - 1);

  std::vector<std::pair<std::string, MisfitChoice>> metrics;
  const auto names = optional_of<std::vector<std::string>>(s, "metrics", "scan", {"l2", "hv", "w2"});
  for (const auto& name : names) {
    json sub = cfg;
    sub["metric"] = name;
    metrics.emplace_back(name, parse_metric(sub, Overrides{}));
  }

  std::cerr << "scan-velocity: " << n_points << " points, " << metrics.size() << " metrics\n";
  const auto result = scan_constant_velocity(c_values, c_star, geom, freq_hz, metrics);
  const auto out = out_path(cfg, ov);
  write_scan_csv(out, result);

  json extrema = json::object();
  for (const auto& [name, curve] : result.curves)
    extrema[name] = {{"minima", count_strict_local_minima(curve)},
                     {"maxima", count_strict_local_maxima(curve)}};
  emit({{"command", "scan-velocity"}, {"out", out}, {"extrema", extrema}});
  return 0;
}

int cmd_scan_ricker(const json& cfg, const Overrides& ov) {
  const json& r = cfg.contains("ricker") ? cfg["ricker"] : json::object();
  reject_unknown(r,
                 {"shift_min", "shift_max", "n_shifts", "peak_freq", "center", "axis_start",
                  "axis_end", "n_samples", "param_sets"},
                 "ricker");
  const double shift_min = optional_of(r, "shift_min", "ricker", -0.5);
  const double shift_max = optional_of(r, "shift_max", "ricker", 0.5);
  const int n_shifts = optional_of(r, "n_shifts", "ricker", 101);
  if (n_shifts < 2) throw ConfigError("ricker needs n_shifts >= 2");

  RickerScanSpec spec;
  spec.peak_freq = optional_of(r, "peak_freq", "ricker", spec.peak_freq);
  spec.center = optional_of(r, "center", "ricker", spec.center);
  spec.axis_start = optional_of(r, "axis_start", "ricker", spec.axis_start);
  spec.axis_end = optional_of(r, "axis_end", "ricker", spec.axis_end);
  spec.n_samples = optional_of(r, "n_samples", "ricker", spec.n_samples);

  std::vector<std::pair<std::string, HVParams>> param_sets;
  if (r.contains("param_sets")) {
    for (const auto& ps : r["param_sets"]) {
      reject_unknown(ps, {"name", "kappa", "lambda", "epsilon", "n_t", "max_iters"},
                     "ricker.param_sets entry");
      HVParams hv = parse_hv(cfg, Overrides{});
      hv.kappa = optional_of(ps, "kappa", "param_sets", hv.kappa);
      hv.lambda = optional_of(ps, "lambda", "param_sets", hv.lambda);
      hv.epsilon = optional_of(ps, "epsilon", "param_sets", hv.epsilon);
      hv.n_t = optional_of(ps, "n_t", "param_sets", hv.n_t);
      hv.max_iters = optional_of(ps, "max_iters", "param_sets", hv.max_iters);
      hv.validate();
      param_sets.emplace_back(require<std::string>(ps, "name", "param_sets"), hv);
    }
  } else {
    param_sets.emplace_back("hv", parse_hv(cfg, Overrides{}));
  }

  std::vector<double> shifts(n_shifts);
  for (int i = 0; i < n_shifts; ++i)
    shifts[i] = shift_min + (shift_max - shift_min) * i / (n_shifts - 1);

  std::cerr << "scan-ricker: " << n_shifts << " shifts, " << param_sets.size()
            << " parameter sets\n";
  const auto result = ricker_shift_scan(shifts, param_sets, spec);
  const auto out = out_path(cfg, ov);
  write_scan_csv(out, result);

  json minima = json::object();
  for (const auto& [name, curve] : result.curves)
    minima[name] = count_strict_local_minima(curve);
  emit({{"command", "scan-ricker"}, {"out", out}, {"local_minima", minima}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain waveform inversion toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::string metric_flag, out_flag;
  double snr_flag = 0.0;
  long long seed_flag = 0;
  int max_iters_flag = 0;

  const std::vector<std::pair<std::string, int (*)(const json&, const Overrides&)>> commands{
      {"forward", cmd_forward},       {"invert", cmd_invert},
      {"hv-dist", cmd_hv_dist},       {"w2-dist", cmd_w2_dist},
      {"scan-velocity", cmd_scan_velocity}, {"scan-ricker", cmd_scan_ricker},
      {"noise", cmd_noise},           {"score", cmd_score},
      {"export-image", cmd_export_image}};

  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--metric", metric_flag, "misfit metric: l2, hv, w2")
        ->check(CLI::IsMember({"l2", "hv", "w2"}));
    sub->add_option("--snr-db", snr_flag, "signal-to-noise ratio in dB");
    sub->add_option("--seed", seed_flag, "random seed");
    sub->add_option("--out", out_flag, "output path");
    sub->add_option("--max-iters", max_iters_flag, "iteration cap override");
    const auto runner = fn;
    sub->callback([&, runner, sub]() {
      if (sub->count("--metric")) ov.metric = metric_flag;
      if (sub->count("--snr-db")) ov.snr_db = snr_flag;
      if (sub->count("--seed")) ov.seed = seed_flag;
      if (sub->count("--out")) ov.out = out_flag;
      if (sub->count("--max-iters")) ov.max_iters = max_iters_flag;
      const json cfg = load_config(config_path);
      const int code = runner(cfg, ov);
      if (code != 0) throw CLI::RuntimeError(code);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::RuntimeError& e) {
    return e.get_exit_code();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
