#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hvfwi/misfit.hpp"

using namespace hvfwi;

namespace {

FrequencyGather random_gather(std::mt19937& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  FrequencyGather g;
  g.freq_hz = 5.0;
  g.data.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = double(i) / (n - 1);
    g.data[i] = {std::sin(5.0 * x) + 0.2 * N(rng), std::cos(4.0 * x) + 0.2 * N(rng)};
  }
  return g;
}

MisfitChoice choice_of(MetricKind kind) {
  MisfitChoice c;
  c.kind = kind;
  c.hv.kappa = 1.0;
  c.hv.lambda = 1.0;
  c.hv.epsilon = 1e-3;
  c.hv.max_iters = 500;
  c.hv.tol = 1e-12;
  return c;
}

}  // namespace

TEST_CASE("metric names round-trip") {
  for (auto kind : {MetricKind::L2, MetricKind::HV, MetricKind::W2})
    CHECK(metric_kind_from_string(to_string(kind)) == kind);
  CHECK_THROWS_AS(metric_kind_from_string("nope"), ConfigError);
}

TEST_CASE("all metrics vanish on identical gathers") {
  std::mt19937 rng(23);
  const auto g = random_gather(rng, 32);
  for (auto kind : {MetricKind::L2, MetricKind::HV, MetricKind::W2}) {
    const auto ev = misfit_and_adjoint(g, g, choice_of(kind));
    CHECK(ev.value <= 1e-12);
    REQUIRE(ev.adjoint_sources.size() == g.data.size());
    for (const auto& a : ev.adjoint_sources) CHECK(std::abs(a) < 1e-8);
  }
}

TEST_CASE("value-only evaluation agrees with the adjoint path") {
  std::mt19937 rng(29);
  const auto syn = random_gather(rng, 32);
  const auto obs = random_gather(rng, 32);
  for (auto kind : {MetricKind::L2, MetricKind::HV, MetricKind::W2}) {
    const auto choice = choice_of(kind);
    const auto ev = misfit_and_adjoint(syn, obs, choice);
    CHECK(misfit_value(syn, obs, choice) == doctest::Approx(ev.value).epsilon(1e-10));
    CHECK(ev.value >= 0.0);
  }
}

TEST_CASE("adjoint sources are the per-sample misfit derivative") {
  std::mt19937 rng(31);
  const auto syn = random_gather(rng, 32);
  const auto obs = random_gather(rng, 32);
  const double h = 1e-5;
  for (auto kind : {MetricKind::L2, MetricKind::HV, MetricKind::W2}) {
    const auto choice = choice_of(kind);
    const auto ev = misfit_and_adjoint(syn, obs, choice);
    double num = 0.0, den = 0.0;
    for (int i : {3, 11, 16, 24, 28})
      for (int part = 0; part < 2; ++part) {
        auto sp = syn, sm = syn;
        const std::complex<double> d =
            part ? std::complex<double>(0.0, h) : std::complex<double>(h, 0.0);
        sp.data[i] += d;
        sm.data[i] -= d;
        const double fd =
            (misfit_value(sp, obs, choice) - misfit_value(sm, obs, choice)) / (2.0 * h);
        const double an = part ? ev.adjoint_sources[i].imag() : ev.adjoint_sources[i].real();
        num += (fd - an) * (fd - an);
        den += fd * fd;
      }
    const double tol = kind == MetricKind::L2 ? 1e-8 : 1e-2;
    CHECK(std::sqrt(num / den) < tol);
  }
}
