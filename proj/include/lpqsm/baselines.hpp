#pragma once

#include <iosfwd>
#include <vector>

#include "lpqsm/solver.hpp"

namespace lpqsm {

struct TkdConfig {
  double threshold = 0.2;  // kernel magnitude cutoff t, 0 < t < 2/3

  void validate() const;
};

struct CosmosConfig {
  double threshold = 1e-6;  // floor on sum_l D_l^2

  void validate() const;
};

/// Thresholded k-space division: x = real(ifft3(fft3(y) / D~)) where
/// D~ = D when |D| >= t, else sign(D) * t with sign(0) = +1.
RealVolume tkd(const RealVolume& y, const DipoleOperator& op, const TkdConfig& cfg = {});

/// Per-frequency least squares over orientations:
/// X(k) = sum_l D_l(k) Y_l(k) / sum_l D_l(k)^2, zeroed where the denominator
/// falls below the threshold. Writes a note to `warnings` when all
/// orientations coincide (no conditioning gain).
RealVolume cosmos_lsq(const std::vector<RealVolume>& ys,
                      const std::vector<DipoleOperator>& ops, const CosmosConfig& cfg = {},
                      std::ostream* warnings = nullptr);

/// Elementwise sign(z) * max(|z| - tau, 0); the proximal map of tau * |.|_1.
RealVolume soft_threshold_prox(const RealVolume& z, double tau);

class SoftThresholdProx final : public ProximalMap {
 public:
  explicit SoftThresholdProx(double tau);
  RealVolume apply(const RealVolume& v, int) const override;
  std::string_view family() const override { return "soft-threshold"; }

 private:
  double tau_;
};

}  // namespace lpqsm
