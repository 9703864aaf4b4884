#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "hvfwi/errors.hpp"

namespace hvfwi {

/// A real 1D signal sampled on uniform nodes of [0,1].  The original
/// physical axis (start, step) is kept so results can be reported back
/// on the caller's coordinates.
struct GridSignal {
  std::vector<double> values;
  double axis_start = 0.0;
  double axis_step = 0.0;  // physical step between samples; 0 for unit grid

  GridSignal() = default;
  explicit GridSignal(std::vector<double> v, double start = 0.0, double step = 0.0)
      : values(std::move(v)), axis_start(start), axis_step(step) {}

  int n_intervals() const { return static_cast<int>(values.size()) - 1; }

  void validate() const {
    if (values.size() < 5) throw ConfigError("GridSignal needs at least 5 samples");
    for (double x : values)
      if (!std::isfinite(x)) throw ConfigError("GridSignal has non-finite sample");
  }
};

struct ComplexGridSignal {
  GridSignal re;
  GridSignal im;

  ComplexGridSignal() = default;
  ComplexGridSignal(GridSignal r, GridSignal i) : re(std::move(r)), im(std::move(i)) {
    if (re.values.size() != im.values.size())
      throw ConfigError("ComplexGridSignal components must share one grid");
  }

  static ComplexGridSignal from_samples(const std::vector<std::complex<double>>& s,
                                        double start = 0.0, double step = 0.0) {
    std::vector<double> re(s.size()), im(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
      re[i] = s[i].real();
      im[i] = s[i].imag();
    }
    return {GridSignal(std::move(re), start, step), GridSignal(std::move(im), start, step)};
  }
};

/// Piecewise-linear evaluation of samples on uniform [0,1] nodes.
inline double interp_unit(const std::vector<double>& values, double x) {
  const int n = static_cast<int>(values.size()) - 1;
  if (x <= 0.0) return values.front();
  if (x >= 1.0) return values.back();
  const double s = x * n;
  int i = static_cast<int>(s);
  if (i >= n) i = n - 1;
  const double a = s - i;
  return (1.0 - a) * values[i] + a * values[i + 1];
}

/// Resample a signal to m+1 uniform nodes by linear interpolation.
inline std::vector<double> resample_unit(const std::vector<double>& values, int m) {
  std::vector<double> out(m + 1);
  for (int i = 0; i <= m; ++i) out[i] = interp_unit(values, double(i) / m);
  return out;
}

}  // namespace hvfwi
