#pragma once

#include <array>
#include <complex>
#include <map>
#include <vector>

#include "hvfwi/array2.hpp"
#include "hvfwi/errors.hpp"

namespace hvfwi {

/// Gridded wave speed c(x,z) in m/s, row-major [z][x].
struct VelocityModel2D {
  int n_x = 0;
  int n_z = 0;
  double d_x = 0.0;  // meters
  double d_z = 0.0;
  std::vector<double> c;

  double& at(int iz, int ix) { return c[static_cast<size_t>(iz) * n_x + ix]; }
  double at(int iz, int ix) const { return c[static_cast<size_t>(iz) * n_x + ix]; }

  double width() const { return (n_x - 1) * d_x; }
  double depth() const { return (n_z - 1) * d_z; }

  void validate() const {
    if (n_x < 2 || n_z < 2) throw ConfigError("VelocityModel2D: grid too small");
    if (!(d_x > 0.0 && d_z > 0.0)) throw ConfigError("VelocityModel2D: spacings must be positive");
    if (c.size() != static_cast<size_t>(n_x) * n_z)
      throw ConfigError("VelocityModel2D: value count does not match grid");
    for (double v : c)
      if (!(v > 0.0)) throw ConfigError("VelocityModel2D: wave speed must be positive");
  }

  static VelocityModel2D constant(int n_x, int n_z, double d, double speed) {
    VelocityModel2D m;
    m.n_x = n_x;
    m.n_z = n_z;
    m.d_x = m.d_z = d;
    m.c.assign(static_cast<size_t>(n_x) * n_z, speed);
    return m;
  }
};

/// Source and receiver positions in meters, plus the emitted spectrum.
struct AcquisitionGeometry {
  std::vector<std::array<double, 2>> sources;    // (x, z)
  std::vector<std::array<double, 2>> receivers;  // (x, z)
  std::complex<double> source_amplitude = {1.0, 0.0};
  std::map<double, std::complex<double>> amplitude_per_freq;  // optional overrides

  std::complex<double> amplitude(double freq_hz) const {
    const auto it = amplitude_per_freq.find(freq_hz);
    return it == amplitude_per_freq.end() ? source_amplitude : it->second;
  }
};

struct PMLSpec {
  int width_cells = 20;
  double max_damping = 0.0;  // 1/s; 0 selects the reflection-coefficient formula
  double profile_power = 2.0;

  void validate() const {
    if (width_cells < 0) throw ConfigError("PMLSpec: width_cells must be nonnegative");
    if (max_damping < 0.0) throw ConfigError("PMLSpec: max_damping must be nonnegative");
  }
};

struct Wavefield {
  int n_x = 0;
  int n_z = 0;
  double omega = 0.0;
  std::vector<std::complex<double>> u;  // physical region only, row-major [z][x]

  std::complex<double> at(int iz, int ix) const {
    return u[static_cast<size_t>(iz) * n_x + ix];
  }
};

/// Complex receiver-axis data for one source at one frequency; the 1D
/// signal the misfit metrics compare.
struct FrequencyGather {
  double freq_hz = 0.0;
  int source_index = 0;
  std::vector<std::complex<double>> data;  // ordered by receiver index
};

}  // namespace hvfwi
