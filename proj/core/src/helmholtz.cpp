#include "hvfwi/helmholtz.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>

namespace hvfwi {

namespace {
using Complex = std::complex<double>;
using SpMat = Eigen::SparseMatrix<Complex>;
using CVec = Eigen::VectorXcd;
}  // namespace

struct HelmholtzSystem::Impl {
  int n_x, n_z, pad;
  int n_xe, n_ze;
  double d_x, d_z, omega;
  std::vector<Complex> mass;  // s_x s_z weight on the omega^2/c^2 term, per extended node
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  mutable std::mutex solve_mutex;

  int idx(int iz, int ix) const { return iz * n_xe + ix; }

  CVec solve(const CVec& rhs) const {
    std::lock_guard<std::mutex> lock(solve_mutex);
    return lu.solve(rhs);
  }

  Wavefield extract(const CVec& full) const {
    Wavefield w;
    w.n_x = n_x;
    w.n_z = n_z;
    w.omega = omega;
    w.u.resize(static_cast<size_t>(n_x) * n_z);
    for (int iz = 0; iz < n_z; ++iz)
      for (int ix = 0; ix < n_x; ++ix)
        w.u[static_cast<size_t>(iz) * n_x + ix] = full[idx(iz + pad, ix + pad)];
    return w;
  }
};

HelmholtzSystem::HelmholtzSystem(const VelocityModel2D& model, double omega,
                                 const PMLSpec& pml) {
  model.validate();
  pml.validate();
  if (!(omega > 0.0)) throw FactorizationFailure("Helmholtz assembly needs omega > 0");

  impl_ = std::make_unique<Impl>();
  auto& im = *impl_;
  im.n_x = model.n_x;
  im.n_z = model.n_z;
  im.pad = pml.width_cells;
  im.n_xe = im.n_x + 2 * im.pad;
  im.n_ze = im.n_z + 2 * im.pad;
  im.d_x = model.d_x;
  im.d_z = model.d_z;
  im.omega = omega;

  const double c_min = *std::min_element(model.c.begin(), model.c.end());
  const double c_max = *std::max_element(model.c.begin(), model.c.end());
  const double freq = omega / (2.0 * std::numbers::pi);
  const double ppw = c_min / (freq * std::max(model.d_x, model.d_z));
  if (ppw < 8.0)
    std::fprintf(stderr,
                 "[hvfwi] warning: %.2f points per minimum wavelength at %.3f Hz "
                 "(below 8), expect dispersion\n",
                 ppw, freq);

  // Quadratic-profile damping sized from a target reflection coefficient.
  double sigma_max = pml.max_damping;
  if (sigma_max <= 0.0 && im.pad > 0) {
    const double L = im.pad * std::max(model.d_x, model.d_z);
    sigma_max = (pml.profile_power + 1.0) * c_max * std::log(1e4) / (2.0 * L);
  }
  auto sigma = [&](double depth_frac) {
    return sigma_max * std::pow(std::clamp(depth_frac, 0.0, 1.0), pml.profile_power);
  };
  // Stretch factor at fractional extended-grid coordinate along one axis.
  auto stretch = [&](double pos, int n_phys) {
    double depth = 0.0;
    if (pos < im.pad)
      depth = (im.pad - pos) / im.pad;
    else if (pos > im.pad + n_phys - 1)
      depth = (pos - (im.pad + n_phys - 1)) / im.pad;
    else
      return Complex(1.0, 0.0);
    if (im.pad == 0) return Complex(1.0, 0.0);
    return Complex(1.0, sigma(depth) / omega);
  };

  auto c_at = [&](int iz, int ix) {
    const int pz = std::clamp(iz - im.pad, 0, im.n_z - 1);
    const int px = std::clamp(ix - im.pad, 0, im.n_x - 1);
    return model.at(pz, px);
  };

  const int N = im.n_xe * im.n_ze;
  im.mass.resize(N);
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(static_cast<size_t>(N) * 5);
  const double idx2 = 1.0 / (model.d_x * model.d_x);
  const double idz2 = 1.0 / (model.d_z * model.d_z);
  for (int iz = 0; iz < im.n_ze; ++iz) {
    for (int ix = 0; ix < im.n_xe; ++ix) {
      const int r = im.idx(iz, ix);
      const Complex sx = stretch(ix, im.n_x);
      const Complex sz = stretch(iz, im.n_z);
      const Complex axp = sz / stretch(ix + 0.5, im.n_x) * idx2;
      const Complex axm = sz / stretch(ix - 0.5, im.n_x) * idx2;
      const Complex azp = sx / stretch(iz + 0.5, im.n_z) * idz2;
      const Complex azm = sx / stretch(iz - 0.5, im.n_z) * idz2;
      const double c = c_at(iz, ix);
      im.mass[r] = sx * sz;
      Complex diag = -(axp + axm + azp + azm) + sx * sz * omega * omega / (c * c);
      trips.emplace_back(r, r, diag);
      if (ix + 1 < im.n_xe) trips.emplace_back(r, im.idx(iz, ix + 1), axp);
      if (ix - 1 >= 0) trips.emplace_back(r, im.idx(iz, ix - 1), axm);
      if (iz + 1 < im.n_ze) trips.emplace_back(r, im.idx(iz + 1, ix), azp);
      if (iz - 1 >= 0) trips.emplace_back(r, im.idx(iz - 1, ix), azm);
    }
  }
  SpMat A(N, N);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  im.lu.compute(A);
  if (im.lu.info() != Eigen::Success)
    throw FactorizationFailure("sparse LU of the Helmholtz operator failed");
}

HelmholtzSystem::~HelmholtzSystem() = default;
HelmholtzSystem::HelmholtzSystem(HelmholtzSystem&&) noexcept = default;
HelmholtzSystem& HelmholtzSystem::operator=(HelmholtzSystem&&) noexcept = default;

double HelmholtzSystem::omega() const { return impl_->omega; }

int HelmholtzSystem::nearest_node_x(double x_m) const {
  const int i = static_cast<int>(std::lround(x_m / impl_->d_x));
  if (i < 0 || i >= impl_->n_x) throw ConfigError("position outside the physical region");
  return i;
}

int HelmholtzSystem::nearest_node_z(double z_m) const {
  const int i = static_cast<int>(std::lround(z_m / impl_->d_z));
  if (i < 0 || i >= impl_->n_z) throw ConfigError("position outside the physical region");
  return i;
}

Wavefield HelmholtzSystem::solve_point_source(std::array<double, 2> pos,
                                              Complex amplitude) const {
  return solve_injected({pos}, {amplitude});
}

Wavefield HelmholtzSystem::solve_injected(const std::vector<std::array<double, 2>>& positions,
                                          const std::vector<Complex>& values) const {
  auto& im = *impl_;
  CVec rhs = CVec::Zero(im.n_xe * im.n_ze);
  const double scale = 1.0 / (im.d_x * im.d_z);
  for (size_t k = 0; k < positions.size(); ++k) {
    const int ix = nearest_node_x(positions[k][0]) + im.pad;
    const int iz = nearest_node_z(positions[k][1]) + im.pad;
    // Equation rhs is -s with s the injected density.
    rhs[im.idx(iz, ix)] += -values[k] * scale;
  }
  return im.extract(im.solve(rhs));
}

Wavefield HelmholtzSystem::solve_raw(const std::vector<Complex>& rhs_physical) const {
  auto& im = *impl_;
  if (rhs_physical.size() != static_cast<size_t>(im.n_x) * im.n_z)
    throw ConfigError("solve_raw: rhs size does not match the physical grid");
  CVec rhs = CVec::Zero(im.n_xe * im.n_ze);
  for (int iz = 0; iz < im.n_z; ++iz)
    for (int ix = 0; ix < im.n_x; ++ix)
      rhs[im.idx(iz + im.pad, ix + im.pad)] = rhs_physical[static_cast<size_t>(iz) * im.n_x + ix];
  return im.extract(im.solve(rhs));
}

CollarField HelmholtzSystem::solve_point_source_collar(std::array<double, 2> pos,
                                                       Complex amplitude) const {
  return solve_injected_collar({pos}, {amplitude});
}

CollarField HelmholtzSystem::solve_injected_collar(
    const std::vector<std::array<double, 2>>& positions,
    const std::vector<Complex>& values) const {
  auto& im = *impl_;
  CVec rhs = CVec::Zero(im.n_xe * im.n_ze);
  const double scale = 1.0 / (im.d_x * im.d_z);
  for (size_t k = 0; k < positions.size(); ++k) {
    const int ix = nearest_node_x(positions[k][0]) + im.pad;
    const int iz = nearest_node_z(positions[k][1]) + im.pad;
    rhs[im.idx(iz, ix)] += -values[k] * scale;
  }
  const CVec full = im.solve(rhs);
  CollarField f;
  f.n_xe = im.n_xe;
  f.n_ze = im.n_ze;
  f.pad = im.pad;
  f.u.assign(full.data(), full.data() + full.size());
  return f;
}

Wavefield HelmholtzSystem::crop(const CollarField& field) const {
  auto& im = *impl_;
  if (field.n_xe != im.n_xe || field.n_ze != im.n_ze)
    throw MismatchedGeometry("crop: collar field does not match this system");
  Wavefield w;
  w.n_x = im.n_x;
  w.n_z = im.n_z;
  w.omega = im.omega;
  w.u.resize(static_cast<size_t>(im.n_x) * im.n_z);
  for (int iz = 0; iz < im.n_z; ++iz)
    for (int ix = 0; ix < im.n_x; ++ix)
      w.u[static_cast<size_t>(iz) * im.n_x + ix] = field.u[im.idx(iz + im.pad, ix + im.pad)];
  return w;
}

void HelmholtzSystem::accumulate_gradient(const CollarField& forward, const CollarField& adjoint,
                                          const VelocityModel2D& model,
                                          std::vector<double>& grad) const {
  auto& im = *impl_;
  if (forward.u.size() != adjoint.u.size() ||
      forward.u.size() != static_cast<size_t>(im.n_xe) * im.n_ze)
    throw MismatchedGeometry("accumulate_gradient: field sizes do not match this system");
  if (grad.size() != model.c.size())
    throw MismatchedGeometry("accumulate_gradient: gradient size does not match the model");
  const double measure = im.d_x * im.d_z;
  const double w2 = im.omega * im.omega;
  for (int iz = 0; iz < im.n_ze; ++iz) {
    const int pz = std::clamp(iz - im.pad, 0, im.n_z - 1);
    for (int ix = 0; ix < im.n_xe; ++ix) {
      const int px = std::clamp(ix - im.pad, 0, im.n_x - 1);
      const int r = im.idx(iz, ix);
      const double c = model.at(pz, px);
      grad[static_cast<size_t>(pz) * im.n_x + px] +=
          -2.0 * w2 * measure *
          std::real(im.mass[r] * std::conj(adjoint.u[r]) * forward.u[r]) / (c * c * c);
    }
  }
}

std::vector<FrequencyGather> forward_data(const VelocityModel2D& model,
                                          const AcquisitionGeometry& geometry,
                                          const std::vector<double>& freqs_hz,
                                          const PMLSpec& pml) {
  std::vector<FrequencyGather> out;
  out.reserve(freqs_hz.size() * geometry.sources.size());
  for (double f : freqs_hz) {
    const double omega = 2.0 * std::numbers::pi * f;
    HelmholtzSystem sys(model, omega, pml);
    std::vector<std::pair<int, int>> rec_nodes;
    rec_nodes.reserve(geometry.receivers.size());
    for (const auto& r : geometry.receivers)
      rec_nodes.emplace_back(sys.nearest_node_x(r[0]), sys.nearest_node_z(r[1]));
    for (size_t k = 0; k < geometry.sources.size(); ++k) {
      const auto field = sys.solve_point_source(geometry.sources[k], geometry.amplitude(f));
      FrequencyGather g;
      g.freq_hz = f;
      g.source_index = static_cast<int>(k);
      g.data.reserve(rec_nodes.size());
      for (const auto& [ix, iz] : rec_nodes) g.data.push_back(field.at(iz, ix));
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace hvfwi
