#include "lpqsm/solver.hpp"

#include <cmath>
#include <string>

#include "lpqsm/errors.hpp"

namespace lpqsm {

void ReconConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("recon alpha must be positive");
  }
  if (iterations < 1) throw InvalidArgument("recon iterations must be >= 1");
}

namespace {

RealVolume apply_once(const DipoleOperator& op, const RealVolume& v,
                      const std::optional<PadSpec>& pad) {
  return pad ? padded_forward(op, v, *pad) : forward(op, v);
}

GridSpec working_grid(const StackedOperator& ops, const std::optional<PadSpec>& pad) {
  if (!pad) return ops.grid();
  pad->validate();
  if (ops.grid().dims != pad->full_dims) {
    throw InvalidArgument("pad spec full dims do not match operator grid");
  }
  return GridSpec{pad->patch_dims, ops.grid().voxel_mm};
}

}  // namespace

RealVolume data_consistency_bias(const StackedOperator& ops, const std::vector<RealVolume>& ys,
                                 double alpha, const std::optional<PadSpec>& pad) {
  ops.validate();
  const GridSpec grid = working_grid(ops, pad);
  if (ys.size() != ops.ops.size()) {
    throw InvalidArgument("measurement count does not match orientation count");
  }
  RealVolume b(grid, 0.0);
  for (std::size_t l = 0; l < ops.ops.size(); ++l) {
    require_same_grid(ys[l].grid, grid, "data consistency measurement");
    add_scaled(b, apply_once(ops.ops[l], ys[l], pad), 1.0);
  }
  scale(b, alpha / static_cast<double>(ops.count()));
  return b;
}

RealVolume data_consistency_linear(const StackedOperator& ops, const RealVolume& x,
                                   double alpha, const std::optional<PadSpec>& pad) {
  ops.validate();
  const GridSpec grid = working_grid(ops, pad);
  require_same_grid(x.grid, grid, "data consistency iterate");
  RealVolume acc(grid, 0.0);
  for (const auto& op : ops.ops) {
    add_scaled(acc, apply_once(op, apply_once(op, x, pad), pad), 1.0);
  }
  RealVolume out = x;
  add_scaled(out, acc, -alpha / static_cast<double>(ops.count()));
  return out;
}

RealVolume data_consistency_step(const StackedOperator& ops, const std::vector<RealVolume>& ys,
                                 const RealVolume& x, double alpha,
                                 const std::optional<PadSpec>& pad) {
  RealVolume out = data_consistency_linear(ops, x, alpha, pad);
  add_scaled(out, data_consistency_bias(ops, ys, alpha, pad), 1.0);
  return out;
}

std::pair<RealVolume, IterTrace> pgd_reconstruct(const StackedOperator& ops,
                                                 const std::vector<RealVolume>& ys,
                                                 const ProximalMap& prox,
                                                 const ReconConfig& cfg,
                                                 const RealVolume* reference) {
  cfg.validate();
  ops.validate();
  const RealVolume bias = data_consistency_bias(ops, ys, cfg.alpha);
  const double guard = 1e6 * norm2(bias);

  RealVolume x = cfg.initial ? *cfg.initial : RealVolume(ops.grid(), 0.0);
  require_same_grid(x.grid, ops.grid(), "pgd initial iterate");
  if (reference != nullptr) require_same_grid(reference->grid, ops.grid(), "pgd reference");
  const double ref_norm = reference != nullptr ? norm2(*reference) : 0.0;

  IterTrace trace;
  trace.datafit.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    RealVolume z = data_consistency_linear(ops, x, cfg.alpha);
    add_scaled(z, bias, 1.0);
    x = prox.apply(z, it);
    require_same_grid(x.grid, ops.grid(), "proximal output");

    const double xn = norm2(x);
    if (!std::isfinite(xn)) {
      throw NumericalError("pgd iterate is non-finite at iteration " + std::to_string(it));
    }
    if (guard > 0.0 && xn > guard) {
      throw NumericalError("pgd diverged at iteration " + std::to_string(it) +
                           ": |x| = " + std::to_string(xn));
    }
    trace.datafit.push_back(datafit(ops, x, ys));
    if (reference != nullptr && ref_norm > 0.0) {
      RealVolume d = x;
      add_scaled(d, *reference, -1.0);
      trace.nrmse_percent.push_back(100.0 * norm2(d) / ref_norm);
    }
  }
  return {std::move(x), std::move(trace)};
}

}  // namespace lpqsm
