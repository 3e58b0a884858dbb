#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "lpqsm/dipole.hpp"

namespace lpqsm {

/// Proximal operator plugged into the gradient step. Implementations must be
/// deterministic for fixed parameters and preserve the grid.
class ProximalMap {
 public:
  virtual ~ProximalMap() = default;
  /// `iteration` is the 0-based solver iteration; maps with shared parameters
  /// ignore it.
  virtual RealVolume apply(const RealVolume& v, int iteration) const = 0;
  virtual std::string_view family() const = 0;
};

class IdentityProx final : public ProximalMap {
 public:
  RealVolume apply(const RealVolume& v, int) const override { return v; }
  std::string_view family() const override { return "identity"; }
};

struct ReconConfig {
  double alpha = 1.0;  // safe default: |Phi|^2 <= 4/9 < 1
  int iterations = 3;
  std::optional<RealVolume> initial;  // zero start when absent

  void validate() const;
};

struct IterTrace {
  std::vector<double> datafit;        // f(x_i) after each iteration, length k
  std::vector<double> nrmse_percent;  // vs reference when one was given
};

/// (alpha/L) sum_l Phi_l'^H y_l, the constant part of the data-consistency
/// step. With `pad` set the padded operator Phi' = C Phi P is used and the
/// y_l are patch-sized.
RealVolume data_consistency_bias(const StackedOperator& ops, const std::vector<RealVolume>& ys,
                                 double alpha, const std::optional<PadSpec>& pad = {});

/// (I - (alpha/L) sum_l Phi_l'^H Phi_l') x, the linear part.
RealVolume data_consistency_linear(const StackedOperator& ops, const RealVolume& x,
                                   double alpha, const std::optional<PadSpec>& pad = {});

/// The affine pre-proximal update
///   (alpha/L) Phi^H y + (I - (alpha/L) Phi^H Phi) x.
RealVolume data_consistency_step(const StackedOperator& ops, const std::vector<RealVolume>& ys,
                                 const RealVolume& x, double alpha,
                                 const std::optional<PadSpec>& pad = {});

/// Proximal gradient descent: k iterations of x <- prox(dc_step(x)) from the
/// configured start. Aborts with NumericalError on non-finite iterates or when
/// |x_i| exceeds 1e6 x |(alpha/L) Phi^H y|. When `reference` is given the
/// trace also records per-iteration NRMSE against it.
std::pair<RealVolume, IterTrace> pgd_reconstruct(const StackedOperator& ops,
                                                 const std::vector<RealVolume>& ys,
                                                 const ProximalMap& prox,
                                                 const ReconConfig& cfg,
                                                 const RealVolume* reference = nullptr);

}  // namespace lpqsm
