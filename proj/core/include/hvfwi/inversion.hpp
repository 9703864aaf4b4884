#pragma once

#include <cstdint>
#include <vector>

#include "hvfwi/helmholtz.hpp"
#include "hvfwi/misfit.hpp"
#include "hvfwi/velocity_model.hpp"

namespace hvfwi {

struct OptimizerConfig {
  int memory = 10;
  int max_iters_per_freq = 20;
  double armijo_c = 1e-4;
  double step_shrink = 0.5;
  double grad_tol = 0.0;         // sup-norm stop; 0 disables
  double initial_step_mps = 10;  // first-iteration model update cap in m/s
  double gradient_smoothing_sigma = 0.0;  // Gaussian sigma in grid cells; 0 disables
};

struct InversionConfig {
  std::vector<double> frequency_schedule;  // Hz, ascending
  int rounds = 1;
  double inter_round_smoothing_sigma = 0.0;  // grid cells
  OptimizerConfig optimizer;
  double c_min = 0.0;
  double c_max = 0.0;
  PMLSpec pml;

  void validate() const {
    if (frequency_schedule.empty()) throw ConfigError("frequency schedule is empty");
    for (size_t i = 1; i < frequency_schedule.size(); ++i)
      if (frequency_schedule[i] < frequency_schedule[i - 1])
        throw ConfigError("frequency schedule must be ascending");
    if (!(c_min < c_max)) throw ConfigError("velocity bounds need c_min < c_max");
    if (rounds < 1) throw ConfigError("rounds must be positive");
    if (optimizer.memory < 1) throw ConfigError("optimizer memory must be positive");
    if (optimizer.gradient_smoothing_sigma < 0.0)
      throw ConfigError("gradient smoothing sigma must be nonnegative");
  }
};

struct InversionReport {
  VelocityModel2D final_model;
  std::vector<double> misfit_history;           // accepted-step values, all stages
  std::vector<VelocityModel2D> snapshots;       // model after each frequency stage
  std::vector<double> stage_seconds;
  bool line_search_failed = false;
};

/// Adjoint wavefield for given receiver-side sources: conjugate-source solve
/// plus output conjugation (valid for the symmetric discrete operator).
Wavefield solve_adjoint(const HelmholtzSystem& handle,
                        const std::vector<std::complex<double>>& adjoint_sources,
                        const std::vector<std::array<double, 2>>& receiver_positions);

/// Cellwise misfit gradient with respect to the wave speed from one or more
/// forward/adjoint field pairs at a single frequency.
std::vector<double> assemble_gradient(const std::vector<Wavefield>& forward_fields,
                                      const std::vector<Wavefield>& adjoint_fields,
                                      const VelocityModel2D& model, double omega);

/// Full misfit value and model gradient at one frequency (forward solves,
/// metric evaluation, adjoint solves, gradient assembly).
std::pair<double, std::vector<double>> misfit_value_and_gradient(
    const VelocityModel2D& model, const AcquisitionGeometry& geometry,
    const std::vector<FrequencyGather>& observed, double freq_hz, const MisfitChoice& choice,
    const PMLSpec& pml);

/// Frequency-marching bounded L-BFGS inversion.
InversionReport fwi_invert(const std::vector<FrequencyGather>& data_obs,
                           const AcquisitionGeometry& geometry,
                           const VelocityModel2D& initial_model, const InversionConfig& config,
                           const MisfitChoice& choice);

/// Dataset-global circular complex Gaussian noise at the requested SNR.
void add_noise(std::vector<FrequencyGather>& data, double snr_db, std::uint64_t rng_seed);

/// Separable Gaussian convolution with edge replication; sigma 0 is identity.
VelocityModel2D gaussian_smooth(const VelocityModel2D& model, double sigma_cells);

}  // namespace hvfwi
