#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lpqsm/dipole.hpp"

namespace lpqsm::ad {

/// Dense tensor of doubles. Volume tensors have shape {channels, nx, ny, nz}
/// with x fastest in memory (matching RealVolume per channel); convolution
/// weights have shape {oc, ic, k, k, k} with the kernel x offset fastest.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  static Tensor zeros(std::vector<int> shape);
  [[nodiscard]] std::int64_t numel() const;
};

Tensor tensor_from_volume(const RealVolume& v);
RealVolume volume_from_tensor(const Tensor& t, const GridSpec& grid);
bool tensor_finite(const Tensor& t);

enum class Activation { linear, relu, leaky_relu };
inline constexpr double kLeakyReluSlope = 0.1;

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

/// Reverse-mode tape over the unrolled reconstruction pipeline. Node values
/// are computed eagerly; backward() fills exact gradients for every node.
/// One tape must not be used from multiple threads. Operators referenced by
/// data_consistency nodes must outlive the tape.
class Tape {
 public:
  using NodeId = std::int32_t;

  NodeId leaf(Tensor value);

  /// Same-size zero-padded cross-correlation, stride 1, odd kernel.
  /// x: {ic, nx, ny, nz}, w: {oc, ic, k, k, k}, bias: {oc}.
  NodeId conv3d(NodeId x, NodeId w, NodeId bias);

  NodeId activation(NodeId x, Activation act);

  NodeId add(NodeId a, NodeId b);

  /// Elementwise multiply by a fixed mask (inverted-dropout scaling baked in).
  NodeId dropout(NodeId x, std::vector<double> mask);

  /// The affine data-consistency step: linear part applied to x plus the
  /// fixed bias (alpha/L) Phi'^H y, see data_consistency_bias(). x must be a
  /// single-channel volume tensor on the working grid of (ops, pad).
  NodeId data_consistency(NodeId x, const StackedOperator& ops, double alpha,
                          std::optional<PadSpec> pad, Tensor bias);

  /// Scalar sum((pred - target)^2).
  NodeId l2_loss(NodeId pred, Tensor target);

  [[nodiscard]] const Tensor& value(NodeId id) const;

  /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse; root must be
  /// scalar. May be called once per tape.
  void backward(NodeId root);

  /// Gradient of the backward root with respect to this node.
  [[nodiscard]] const Tensor& grad(NodeId id) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> backprop;  // empty for leaves
  };

  NodeId push(Tensor value, std::function<void(Tape&)> backprop);
  Tensor& grad_mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace lpqsm::ad
