#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hvfwi/inversion.hpp"
#include "hvfwi/misfit.hpp"

namespace hvfwi {

/// One misfit curve per named configuration over a shared parameter grid.
struct ScanResult {
  std::string parameter_name;
  std::vector<double> parameter;
  std::vector<std::pair<std::string, std::vector<double>>> curves;
};

struct QualityScore {
  double rmse = 0.0;  // m/s
  double psnr = 0.0;  // dB; +inf for a perfect or degenerate-reference match
};

/// Desk-scale analogue of the constant-velocity landscape experiment:
/// homogeneous model, sources/receivers on a horizontal line.
struct LineScanGeometry {
  double domain_width_m = 8000.0;
  double domain_depth_m = 1000.0;
  double spacing_m = 20.0;
  double line_depth_m = 100.0;
  int n_sources = 3;
  int n_receivers = 101;
  PMLSpec pml;
};

ScanResult scan_constant_velocity(const std::vector<double>& c_values, double c_star,
                                  const LineScanGeometry& geometry, double freq_hz,
                                  const std::vector<std::pair<std::string, MisfitChoice>>& metrics);

/// Ricker wavelet and its time-shifted copy compared under L2 and a family
/// of HV parameter sets; every curve is normalized to peak 1.
struct RickerScanSpec {
  double peak_freq = 4.0;    // on the physical time axis
  double center = 0.5;       // wavelet center
  double axis_start = -1.0;  // physical axis remapped to [0,1]
  double axis_end = 2.0;
  int n_samples = 241;
};

ScanResult ricker_shift_scan(const std::vector<double>& shift_values,
                             const std::vector<std::pair<std::string, HVParams>>& hv_param_sets,
                             const RickerScanSpec& spec = {});

std::vector<double> ricker_signal(const RickerScanSpec& spec, double shift);

/// Gaussian-bump wave-speed phantom on a square grid.
struct PhantomSpec {
  int n = 64;
  double spacing_m = 0.004;
  double background_mps = 1500.0;
  double inclusion_amplitude_mps = 75.0;
  double inclusion_sigma_cells = 6.0;
  double center_frac_x = 0.42;  // inclusion center as a fraction of the extent
  double center_frac_z = 0.55;
};

VelocityModel2D make_phantom(const PhantomSpec& spec);

enum class GeometryMode { Line, Ring };

AcquisitionGeometry phantom_geometry(const PhantomSpec& spec, GeometryMode mode,
                                     int n_transducers = 32);

struct PhantomOutcome {
  std::string metric;
  InversionReport report;
  QualityScore score;
  QualityScore initial_score;
};

/// Generate observed data with the forward solver, optionally add noise,
/// invert per metric from the given initial model, score against truth.
std::vector<PhantomOutcome> phantom_experiment(
    const PhantomSpec& phantom, GeometryMode mode,
    const std::vector<std::pair<std::string, MisfitChoice>>& metrics, double snr_db,
    std::uint64_t seed, const InversionConfig& config, const VelocityModel2D& initial_model);

QualityScore score(const VelocityModel2D& model, const VelocityModel2D& reference);

/// Strict interior local minima of a scan sequence.
int count_strict_local_minima(const std::vector<double>& curve);
int count_strict_local_maxima(const std::vector<double>& curve);

}  // namespace hvfwi
