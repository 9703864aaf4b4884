#pragma once

#include <complex>
#include <memory>
#include <utility>
#include <vector>

#include "hvfwi/velocity_model.hpp"

namespace hvfwi {

/// Solution on the extended grid including the absorbing collar.  Collar
/// nodes inherit the wave speed of the nearest physical cell, so exact
/// model gradients must fold their contributions back into that cell.
struct CollarField {
  int n_xe = 0;
  int n_ze = 0;
  int pad = 0;
  std::vector<std::complex<double>> u;  // row-major on the extended grid
};

/// Factored 2D Helmholtz operator at one (model, omega): 5-point stencil
/// with complex coordinate-stretching absorbers, symmetric assembly, sparse
/// LU.  Immutable after construction; concurrent solves are serialized
/// internally.
class HelmholtzSystem {
 public:
  HelmholtzSystem(const VelocityModel2D& model, double omega, const PMLSpec& pml);
  ~HelmholtzSystem();
  HelmholtzSystem(HelmholtzSystem&&) noexcept;
  HelmholtzSystem& operator=(HelmholtzSystem&&) noexcept;

  /// Discrete delta at the nearest grid node, scaled amplitude / (d_x d_z).
  Wavefield solve_point_source(std::array<double, 2> pos, std::complex<double> amplitude) const;

  /// Solve with values injected at the nearest nodes to the given physical
  /// positions, scaled 1 / (d_x d_z); used for adjoint sources.
  Wavefield solve_injected(const std::vector<std::array<double, 2>>& positions,
                           const std::vector<std::complex<double>>& values) const;

  /// Solve with an arbitrary physical-region right-hand side already in
  /// node units (no delta scaling).
  Wavefield solve_raw(const std::vector<std::complex<double>>& rhs_physical) const;

  /// Collar-retaining variants of the solves above, for gradient assembly.
  CollarField solve_point_source_collar(std::array<double, 2> pos,
                                        std::complex<double> amplitude) const;
  CollarField solve_injected_collar(const std::vector<std::array<double, 2>>& positions,
                                    const std::vector<std::complex<double>>& values) const;
  Wavefield crop(const CollarField& field) const;

  /// Adds one forward/adjoint pair's cellwise wave-speed derivative to grad,
  /// including the collar nodes clamped to each edge cell and the complex
  /// coordinate-stretch weight on the mass term.
  void accumulate_gradient(const CollarField& forward, const CollarField& adjoint,
                           const VelocityModel2D& model, std::vector<double>& grad) const;

  double omega() const;
  int nearest_node_x(double x_m) const;
  int nearest_node_z(double z_m) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// For each frequency: assemble once, solve per source, sample at receivers.
std::vector<FrequencyGather> forward_data(const VelocityModel2D& model,
                                          const AcquisitionGeometry& geometry,
                                          const std::vector<double>& freqs_hz,
                                          const PMLSpec& pml = {});

}  // namespace hvfwi
