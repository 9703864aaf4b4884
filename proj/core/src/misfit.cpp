#include "hvfwi/misfit.hpp"

#include <algorithm>

#include "hvfwi/wasserstein.hpp"

namespace hvfwi {

MetricKind metric_kind_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "l2") return MetricKind::L2;
  if (s == "hv") return MetricKind::HV;
  if (s == "w2") return MetricKind::W2;
  throw ConfigError("unknown metric '" + name + "' (expected l2, hv, or w2)");
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::L2: return "l2";
    case MetricKind::HV: return "hv";
    case MetricKind::W2: return "w2";
  }
  return "?";
}

namespace {

MisfitEval hv_eval(const std::vector<std::complex<double>>& syn,
                   const std::vector<std::complex<double>>& obs, HVParams params) {
  params.n_x = 0;  // metric grid = receiver grid so the gradient maps to samples
  const auto f0 = ComplexGridSignal::from_samples(syn);
  const auto f1 = ComplexGridSignal::from_samples(obs);
  const auto res = hvc_distance(f0, f1, params);

  MisfitEval out;
  // Energy form of the squared metric: the exact antiderivative of the
  // -z(.,0) adjoint source, and a monotone function of the distance on
  // constant-speed optimal paths.
  out.value = 0.5 * (res.re.quad_energy + res.im.quad_energy);
  const auto g = hvc_gradient_f0(res.re, res.im);
  const int n_x = static_cast<int>(g.size()) - 1;
  out.adjoint_sources.resize(g.size());
  // Continuous L2(0,1) gradient to per-sample derivative: trapezoid weights.
  for (int i = 0; i <= n_x; ++i) {
    const double w = ((i == 0 || i == n_x) ? 0.5 : 1.0) / n_x;
    out.adjoint_sources[i] = g[i] * w;
  }
  return out;
}

}  // namespace

MisfitEval misfit_and_adjoint(const FrequencyGather& gather_syn,
                              const FrequencyGather& gather_obs, const MisfitChoice& choice) {
  if (gather_syn.data.size() != gather_obs.data.size())
    throw MismatchedGeometry("gather receiver counts differ");
  switch (choice.kind) {
    case MetricKind::L2: {
      auto [value, grad] = l2_misfit_complex(gather_syn.data, gather_obs.data);
      return {value, std::move(grad)};
    }
    case MetricKind::W2: {
      auto eval = w2_misfit_complex(gather_syn.data, gather_obs.data, choice.beta_margin);
      return {eval.value, std::move(eval.gradient)};
    }
    case MetricKind::HV:
      return hv_eval(gather_syn.data, gather_obs.data, choice.hv);
  }
  throw ConfigError("invalid metric choice");
}

double misfit_value(const FrequencyGather& gather_syn, const FrequencyGather& gather_obs,
                    const MisfitChoice& choice) {
  if (gather_syn.data.size() != gather_obs.data.size())
    throw MismatchedGeometry("gather receiver counts differ");
  if (choice.kind == MetricKind::HV) {
    HVParams params = choice.hv;
    params.n_x = 0;
    const auto res = hvc_distance(ComplexGridSignal::from_samples(gather_syn.data),
                                  ComplexGridSignal::from_samples(gather_obs.data), params);
    return 0.5 * (res.re.quad_energy + res.im.quad_energy);
  }
  return misfit_and_adjoint(gather_syn, gather_obs, choice).value;
}

}  // namespace hvfwi
