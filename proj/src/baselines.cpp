#include "lpqsm/baselines.hpp"

#include <cmath>
#include <ostream>

#include "lpqsm/errors.hpp"
#include "lpqsm/fft.hpp"

namespace lpqsm {

void TkdConfig::validate() const {
  if (!(threshold > 0.0) || !(threshold < 2.0 / 3.0)) {
    throw InvalidArgument("tkd threshold must lie in (0, 2/3)");
  }
}

void CosmosConfig::validate() const {
  if (!(threshold > 0.0)) throw InvalidArgument("cosmos threshold must be positive");
}

RealVolume tkd(const RealVolume& y, const DipoleOperator& op, const TkdConfig& cfg) {
  cfg.validate();
  require_same_grid(y.grid, op.grid, "tkd");
  ComplexVolume ky = fft3(y);
  const double t = cfg.threshold;
  for (std::size_t i = 0; i < ky.data.size(); ++i) {
    const double d = op.kernel[i];
    const double clamped = std::abs(d) >= t ? d : (d < 0.0 ? -t : t);  // sign(0) = +1
    ky.data[i] /= clamped;
  }
  return real_part(ifft3(ky));
}

RealVolume cosmos_lsq(const std::vector<RealVolume>& ys,
                      const std::vector<DipoleOperator>& ops, const CosmosConfig& cfg,
                      std::ostream* warnings) {
  cfg.validate();
  if (ops.empty() || ys.size() != ops.size()) {
    throw InvalidArgument("cosmos needs matching, non-empty measurement/operator lists");
  }
  const GridSpec& grid = ops.front().grid;
  for (const auto& op : ops) require_same_grid(op.grid, grid, "cosmos operators");
  for (const auto& y : ys) require_same_grid(y.grid, grid, "cosmos measurements");

  if (warnings != nullptr && ops.size() >= 2) {
    bool identical = true;
    for (std::size_t l = 1; l < ops.size() && identical; ++l) {
      identical = ops[l].orientation.h == ops.front().orientation.h;
    }
    if (identical) {
      *warnings << "cosmos: all orientations are identical; no conditioning gain over a "
                   "single measurement\n";
    }
  }

  ComplexVolume num(grid);
  std::vector<double> den(static_cast<std::size_t>(grid.voxel_count()), 0.0);
  for (std::size_t l = 0; l < ops.size(); ++l) {
    ComplexVolume ky = fft3(ys[l]);
    const auto& d = ops[l].kernel;
    for (std::size_t i = 0; i < ky.data.size(); ++i) {
      num.data[i] += d[i] * ky.data[i];
      den[i] += d[i] * d[i];
    }
  }
  for (std::size_t i = 0; i < num.data.size(); ++i) {
    if (den[i] >= cfg.threshold) {
      num.data[i] /= den[i];
    } else {
      num.data[i] = 0.0;  // joint null set: mean-free convention
    }
  }
  return real_part(ifft3(num));
}

RealVolume soft_threshold_prox(const RealVolume& z, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("soft threshold tau must be positive");
  RealVolume out = z;
  for (double& v : out.data) {
    const double mag = std::abs(v) - tau;
    v = mag > 0.0 ? (v < 0.0 ? -mag : mag) : 0.0;
  }
  return out;
}

SoftThresholdProx::SoftThresholdProx(double tau) : tau_(tau) {
  if (!(tau > 0.0)) throw InvalidArgument("soft threshold tau must be positive");
}

RealVolume SoftThresholdProx::apply(const RealVolume& v, int) const {
  return soft_threshold_prox(v, tau_);
}

}  // namespace lpqsm
