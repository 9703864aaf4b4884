#pragma once

#include <complex>
#include <string>
#include <vector>

#include "hvfwi/hv_metric.hpp"
#include "hvfwi/velocity_model.hpp"

namespace hvfwi {

enum class MetricKind { L2, HV, W2 };

MetricKind metric_kind_from_string(const std::string& name);
std::string to_string(MetricKind kind);

struct MisfitChoice {
  MetricKind kind = MetricKind::L2;
  HVParams hv;              // used when kind == HV
  double beta_margin = 0.1;  // used when kind == W2
};

/// Misfit value and its per-sample derivative with respect to the synthetic
/// gather.  The directional derivative along a complex perturbation theta is
/// sum_r (Re a_r Re theta_r + Im a_r Im theta_r).
struct MisfitEval {
  double value = 0.0;
  std::vector<std::complex<double>> adjoint_sources;
};

/// Evaluate the chosen metric on one gather pair; the receiver axis is the
/// metric's unit spatial domain.
MisfitEval misfit_and_adjoint(const FrequencyGather& gather_syn,
                              const FrequencyGather& gather_obs, const MisfitChoice& choice);

/// Value-only variant (skips gradient work where possible).
double misfit_value(const FrequencyGather& gather_syn, const FrequencyGather& gather_obs,
                    const MisfitChoice& choice);

}  // namespace hvfwi
