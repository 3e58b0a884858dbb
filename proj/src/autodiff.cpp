#include "lpqsm/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "lpqsm/errors.hpp"
#include "lpqsm/solver.hpp"

namespace lpqsm::ad {

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  std::int64_t n = 1;
  for (int d : t.shape) n *= d;
  t.values.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

Tensor tensor_from_volume(const RealVolume& v) {
  Tensor t;
  t.shape = {1, v.grid.dims[0], v.grid.dims[1], v.grid.dims[2]};
  t.values = v.data;
  return t;
}

RealVolume volume_from_tensor(const Tensor& t, const GridSpec& grid) {
  if (t.numel() != grid.voxel_count()) {
    throw InvalidArgument("tensor size does not match grid voxel count");
  }
  return RealVolume(grid, t.values);
}

bool tensor_finite(const Tensor& t) {
  return std::all_of(t.values.begin(), t.values.end(),
                     [](double x) { return std::isfinite(x); });
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  throw InvalidArgument("unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
  }
  throw InvalidArgument("bad activation enum");
}

namespace {

struct ConvGeom {
  int oc, ic, k, nx, ny, nz;
  std::int64_t chan_vol() const { return static_cast<std::int64_t>(nx) * ny * nz; }
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape.size() != 4 || w.shape.size() != 5 || b.shape.size() != 1) {
    throw InvalidArgument("conv3d expects x {c,nx,ny,nz}, w {oc,ic,k,k,k}, bias {oc}");
  }
  ConvGeom g{w.shape[0], w.shape[1], w.shape[2], x.shape[1], x.shape[2], x.shape[3]};
  if (w.shape[3] != g.k || w.shape[4] != g.k) {
    throw InvalidArgument("conv3d kernel must be cubic");
  }
  if (g.k % 2 == 0 || g.k < 1) throw InvalidArgument("conv3d kernel side must be odd");
  if (x.shape[0] != g.ic) throw InvalidArgument("conv3d input channel mismatch");
  if (b.shape[0] != g.oc) throw InvalidArgument("conv3d bias channel mismatch");
  if (g.nx < g.k || g.ny < g.k || g.nz < g.k) {
    throw InvalidArgument("conv3d volume dims must be >= kernel side");
  }
  return g;
}

// out[o][p] = bias[o] + sum_{c,t} w[o][c][t] * x[c][p + t], zero padded.
void conv3d_forward(const ConvGeom& g, const double* x, const double* w, const double* b,
                    double* out) {
  const std::int64_t vol = g.chan_vol();
  const std::int64_t plane = static_cast<std::int64_t>(g.nx) * g.ny;
  const int r = g.k / 2;
  const int k3 = g.k * g.k * g.k;
  for (int o = 0; o < g.oc; ++o) {
    std::fill(out + o * vol, out + (o + 1) * vol, b[o]);
  }
  for (int o = 0; o < g.oc; ++o) {
    double* outc = out + o * vol;
    for (int c = 0; c < g.ic; ++c) {
      const double* xc = x + c * vol;
      const double* wk = w + (static_cast<std::int64_t>(o) * g.ic + c) * k3;
      for (int dz = -r; dz <= r; ++dz) {
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double wv = wk[((dz + r) * g.k + (dy + r)) * g.k + (dx + r)];
            if (wv == 0.0) continue;
            const int z0 = std::max(0, -dz), z1 = g.nz - std::max(0, dz);
            const int y0 = std::max(0, -dy), y1 = g.ny - std::max(0, dy);
            const int x0 = std::max(0, -dx), x1 = g.nx - std::max(0, dx);
            for (int z = z0; z < z1; ++z) {
              for (int y = y0; y < y1; ++y) {
                double* orow = outc + z * plane + static_cast<std::int64_t>(y) * g.nx;
                const double* xrow =
                    xc + (z + dz) * plane + static_cast<std::int64_t>(y + dy) * g.nx + dx;
                for (int xi = x0; xi < x1; ++xi) orow[xi] += wv * xrow[xi];
              }
            }
          }
        }
      }
    }
  }
}

// gx[c][p] += sum_{o,t} w[o][c][t] * gout[o][p - t]
void conv3d_backward_x(const ConvGeom& g, const double* w, const double* gout, double* gx) {
  const std::int64_t vol = g.chan_vol();
  const std::int64_t plane = static_cast<std::int64_t>(g.nx) * g.ny;
  const int r = g.k / 2;
  const int k3 = g.k * g.k * g.k;
  for (int c = 0; c < g.ic; ++c) {
    double* gxc = gx + c * vol;
    for (int o = 0; o < g.oc; ++o) {
      const double* gc = gout + o * vol;
      const double* wk = w + (static_cast<std::int64_t>(o) * g.ic + c) * k3;
      for (int dz = -r; dz <= r; ++dz) {
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double wv = wk[((r - dz) * g.k + (r - dy)) * g.k + (r - dx)];
            if (wv == 0.0) continue;
            const int z0 = std::max(0, -dz), z1 = g.nz - std::max(0, dz);
            const int y0 = std::max(0, -dy), y1 = g.ny - std::max(0, dy);
            const int x0 = std::max(0, -dx), x1 = g.nx - std::max(0, dx);
            for (int z = z0; z < z1; ++z) {
              for (int y = y0; y < y1; ++y) {
                double* grow = gxc + z * plane + static_cast<std::int64_t>(y) * g.nx;
                const double* srow =
                    gc + (z + dz) * plane + static_cast<std::int64_t>(y + dy) * g.nx + dx;
                for (int xi = x0; xi < x1; ++xi) grow[xi] += wv * srow[xi];
              }
            }
          }
        }
      }
    }
  }
}

// gw[o][c][t] += sum_p gout[o][p] * x[c][p + t];  gb[o] += sum_p gout[o][p]
void conv3d_backward_wb(const ConvGeom& g, const double* x, const double* gout, double* gw,
                        double* gb) {
  const std::int64_t vol = g.chan_vol();
  const std::int64_t plane = static_cast<std::int64_t>(g.nx) * g.ny;
  const int r = g.k / 2;
  const int k3 = g.k * g.k * g.k;
  for (int o = 0; o < g.oc; ++o) {
    const double* gc = gout + o * vol;
    double acc_b = 0.0;
    for (std::int64_t i = 0; i < vol; ++i) acc_b += gc[i];
    gb[o] += acc_b;
    for (int c = 0; c < g.ic; ++c) {
      const double* xc = x + c * vol;
      double* wk = gw + (static_cast<std::int64_t>(o) * g.ic + c) * k3;
      for (int dz = -r; dz <= r; ++dz) {
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int z0 = std::max(0, -dz), z1 = g.nz - std::max(0, dz);
            const int y0 = std::max(0, -dy), y1 = g.ny - std::max(0, dy);
            const int x0 = std::max(0, -dx), x1 = g.nx - std::max(0, dx);
            double acc = 0.0;
            for (int z = z0; z < z1; ++z) {
              for (int y = y0; y < y1; ++y) {
                const double* grow = gc + z * plane + static_cast<std::int64_t>(y) * g.nx;
                const double* xrow =
                    xc + (z + dz) * plane + static_cast<std::int64_t>(y + dy) * g.nx + dx;
                for (int xi = x0; xi < x1; ++xi) acc += grow[xi] * xrow[xi];
              }
            }
            wk[((dz + r) * g.k + (dy + r)) * g.k + (dx + r)] += acc;
          }
        }
      }
    }
  }
}

double activate_one(double x, Activation a) {
  switch (a) {
    case Activation::linear: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? x : kLeakyReluSlope * x;
  }
  return x;
}

double activate_slope(double x, Activation a) {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? 1.0 : kLeakyReluSlope;
  }
  return 1.0;
}

GridSpec dc_working_grid(const StackedOperator& ops, const std::optional<PadSpec>& pad) {
  if (!pad) return ops.grid();
  return GridSpec{pad->patch_dims, ops.grid().voxel_mm};
}

}  // namespace

Tape::NodeId Tape::push(Tensor value, std::function<void(Tape&)> backprop) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backprop)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

Tape::NodeId Tape::conv3d(NodeId x, NodeId w, NodeId bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(bias);
  const ConvGeom g = conv_geometry(xv, wv, bv);
  Tensor out = Tensor::zeros({g.oc, g.nx, g.ny, g.nz});
  conv3d_forward(g, xv.values.data(), wv.values.data(), bv.values.data(), out.values.data());
  NodeId id = push(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(id)].backprop = [x, w, bias, g, id](Tape& t) {
    const double* gout = t.grad(id).values.data();
    conv3d_backward_x(g, t.value(w).values.data(), gout, t.grad_mut(x).values.data());
    conv3d_backward_wb(g, t.value(x).values.data(), gout, t.grad_mut(w).values.data(),
                       t.grad_mut(bias).values.data());
  };
  return id;
}

Tape::NodeId Tape::activation(NodeId x, Activation act) {
  const Tensor& xv = value(x);
  Tensor out = xv;
  for (double& v : out.values) v = activate_one(v, act);
  NodeId id = push(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(id)].backprop = [x, act, id](Tape& t) {
    const Tensor& gout = t.grad(id);
    const Tensor& input = t.value(x);
    Tensor& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < gx.values.size(); ++i) {
      gx.values[i] += gout.values[i] * activate_slope(input.values[i], act);
    }
  };
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape != bv.shape) throw InvalidArgument("add: tensor shape mismatch");
  Tensor out = av;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += bv.values[i];
  NodeId id = push(std::move(out), nullptr);
  nodes_[static_cast<std::size_t>(id)].backprop = [a, b, id](Tape& t) {
    const Tensor& gout = t.grad(id);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < gout.values.size(); ++i) {
      ga.values[i] += gout.values[i];
      gb.values[i] += gout.values[i];
    }
  };
  return id;
}

Tape::NodeId Tape::dropout(NodeId x, std::vector<double> mask) {
  const Tensor& xv = value(x);
  if (mask.size() != xv.values.size()) throw InvalidArgument("dropout mask size mismatch");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask[i];
  NodeId id = push(std::move(out), nullptr);
  auto shared_mask = std::make_shared<std::vector<double>>(std::move(mask));
  nodes_[static_cast<std::size_t>(id)].backprop = [x, id, shared_mask](Tape& t) {
    const Tensor& gout = t.grad(id);
    Tensor& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < gx.values.size(); ++i) {
      gx.values[i] += gout.values[i] * (*shared_mask)[i];
    }
  };
  return id;
}

Tape::NodeId Tape::data_consistency(NodeId x, const StackedOperator& ops, double alpha,
                                    std::optional<PadSpec> pad, Tensor bias) {
  const Tensor& xv = value(x);
  if (xv.shape.size() != 4 || xv.shape[0] != 1) {
    throw InvalidArgument("data_consistency expects a single-channel volume tensor");
  }
  const GridSpec grid = dc_working_grid(ops, pad);
  if (bias.numel() != grid.voxel_count()) {
    throw InvalidArgument("data_consistency bias size mismatch");
  }
  RealVolume lin = data_consistency_linear(ops, volume_from_tensor(xv, grid), alpha, pad);
  Tensor out = tensor_from_volume(lin);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += bias.values[i];
  NodeId id = push(std::move(out), nullptr);
  const StackedOperator* ops_ptr = &ops;
  nodes_[static_cast<std::size_t>(id)].backprop = [x, ops_ptr, alpha, pad, grid, id](Tape& t) {
    // The linear part is self-adjoint: each Phi' is.
    RealVolume g = data_consistency_linear(*ops_ptr, volume_from_tensor(t.grad(id), grid),
                                           alpha, pad);
    Tensor& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < gx.values.size(); ++i) gx.values[i] += g.data[i];
  };
  return id;
}

Tape::NodeId Tape::l2_loss(NodeId pred, Tensor target) {
  const Tensor& pv = value(pred);
  if (pv.shape != target.shape) throw InvalidArgument("l2_loss shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.values.size(); ++i) {
    const double d = pv.values[i] - target.values[i];
    acc += d * d;
  }
  Tensor out;
  out.shape = {1};
  out.values = {acc};
  NodeId id = push(std::move(out), nullptr);
  auto shared_target = std::make_shared<Tensor>(std::move(target));
  nodes_[static_cast<std::size_t>(id)].backprop = [pred, id, shared_target](Tape& t) {
    const double g0 = t.grad(id).values[0];
    const Tensor& pv = t.value(pred);
    Tensor& gp = t.grad_mut(pred);
    for (std::size_t i = 0; i < gp.values.size(); ++i) {
      gp.values[i] += 2.0 * (pv.values[i] - shared_target->values[i]) * g0;
    }
  };
  return id;
}

const Tensor& Tape::value(NodeId id) const {
  return nodes_.at(static_cast<std::size_t>(id)).value;
}

void Tape::backward(NodeId root) {
  if (swept_) throw InvalidArgument("tape backward may only run once");
  swept_ = true;
  Node& r = nodes_.at(static_cast<std::size_t>(root));
  if (r.value.numel() != 1) throw InvalidArgument("backward root must be scalar");
  for (Node& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
  r.grad.values[0] = 1.0;
  for (std::int64_t i = root; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backprop) n.backprop(*this);
  }
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad.values.empty()) throw InvalidArgument("gradients not computed; call backward()");
  return n.grad;
}

}  // namespace lpqsm::ad
