#pragma once

#include <array>
#include <optional>
#include <vector>

#include "lpqsm/grid.hpp"

namespace lpqsm {

/// B0 direction in image coordinates. When constructed from a rotation R
/// (object rotated, field fixed in the lab frame), h = R * z_hat.
struct Orientation {
  std::array<double, 3> h{0.0, 0.0, 1.0};
  std::optional<std::array<double, 9>> rotation;  // row-major R

  static Orientation from_axis(const std::array<double, 3>& h);
  static Orientation from_rotation(const std::array<double, 9>& r);

  /// Throws InvalidArgument unless |h| = 1 within 1e-12 and, when present,
  /// R is orthonormal within 1e-10 with det R = +1.
  void validate() const;

  /// Tilt of h away from z_hat, degrees.
  double tilt_deg() const;
};

/// Diagonal Fourier-domain dipole kernel D for one orientation; the forward
/// field model is y = real(ifft3(D .* fft3(x))).
struct DipoleOperator {
  GridSpec grid;
  Orientation orientation;
  std::vector<double> kernel;  // D over the DFT frequency grid, x fastest
};

/// D(k) = 1/3 - (k.h)^2 / |k|^2 with D(0) = 0. Frequencies are physical:
/// k_i = dft_frequency(j_i, n_i) / voxel_mm_i (cycles per mm).
DipoleOperator dipole_kernel(const GridSpec& grid, const Orientation& orientation);

/// y = Phi x. The kernel is real and even, so the spatial result is real up to
/// roundoff; throws NumericalError if the imaginary residue exceeds 1e-10
/// relative.
RealVolume forward(const DipoleOperator& op, const RealVolume& x);

/// Phi^H y; equal to forward() because D is real and even.
RealVolume adjoint(const DipoleOperator& op, const RealVolume& y);

/// L >= 1 dipole operators on one grid; the stacked operator
/// [Phi_1; ...; Phi_L] of multi-orientation deployment.
struct StackedOperator {
  std::vector<DipoleOperator> ops;

  StackedOperator() = default;
  explicit StackedOperator(std::vector<DipoleOperator> o) : ops(std::move(o)) {}

  void validate() const;
  [[nodiscard]] int count() const { return static_cast<int>(ops.size()); }
  [[nodiscard]] const GridSpec& grid() const { return ops.front().grid; }
};

/// (1/L) sum_l Phi_l^H (Phi_l x - y_l), the gradient of
/// f(x) = (1/2L) sum_l |Phi_l x - y_l|^2.
RealVolume grad_datafit(const StackedOperator& ops, const RealVolume& x,
                        const std::vector<RealVolume>& ys);

/// f(x) = (1/2L) sum_l |Phi_l x - y_l|^2.
double datafit(const StackedOperator& ops, const RealVolume& x,
               const std::vector<RealVolume>& ys);

/// Patch placement inside a full grid: P zero-pads a patch into the full
/// grid, C = P^T crops it back.
struct PadSpec {
  std::array<int, 3> patch_dims{};
  std::array<int, 3> offset{};
  std::array<int, 3> full_dims{};

  void validate() const;
};

RealVolume zero_pad(const RealVolume& patch, const PadSpec& pad);
RealVolume crop(const RealVolume& full, const PadSpec& pad);

/// Phi' = C Phi P: the full-grid dipole operator applied to a patch.
RealVolume padded_forward(const DipoleOperator& op, const RealVolume& patch,
                          const PadSpec& pad);

}  // namespace lpqsm
