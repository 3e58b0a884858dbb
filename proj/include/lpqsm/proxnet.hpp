#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpqsm/autodiff.hpp"
#include "lpqsm/solver.hpp"

namespace lpqsm {

/// Residual 3D conv net standing in for the proximal operator. The layout is
///   h = conv_in(z); B times { h += conv2(act(drop(conv1(act(h))))) };
///   out = z + conv_out(act(h))
/// so a zero-weight network is exactly the identity map.
struct ArchSpec {
  int blocks = 4;
  int width = 16;
  int kernel = 3;  // odd
  std::string activation = "leaky_relu";
  double dropout_rate = 0.0;  // applied between the two block convs while training

  void validate() const;
  [[nodiscard]] int tensors_per_stack() const { return 4 * blocks + 4; }
};

/// Learnable parameters: one weight stack when shared across the unrolled
/// iterations, otherwise one stack per iteration.
struct ProxParams {
  ArchSpec arch;
  bool shared_across_iterations = true;
  int stacks = 1;
  std::vector<ad::Tensor> weights;  // declaration order, stack-major

  void validate() const;
  [[nodiscard]] std::span<const ad::Tensor> stack(int i) const;
};

/// Fan-in-scaled uniform init for conv_in and the first conv of each block;
/// the closing conv of each block, conv_out, and all biases start at zero so
/// the network begins as the identity proximal.
ProxParams init_prox_params(const ArchSpec& arch, std::uint64_t seed,
                            bool shared_across_iterations = true, int stacks = 1);

/// Builds the network graph on `tape`. `weight_ids` is one stack (leaf ids in
/// declaration order). `dropout_masks`, when non-null, supplies one mask per
/// block (training mode); evaluation passes nullptr.
ad::Tape::NodeId prox_forward(ad::Tape& tape, ad::Tape::NodeId z,
                              std::span<const ad::Tape::NodeId> weight_ids,
                              const ArchSpec& arch,
                              const std::vector<std::vector<double>>* dropout_masks);

/// Evaluation-mode application (dropout disabled, deterministic).
RealVolume prox_apply(const ProxParams& params, const RealVolume& z, int stack = 0);

class LearnedProx final : public ProximalMap {
 public:
  explicit LearnedProx(ProxParams params);
  RealVolume apply(const RealVolume& v, int iteration) const override;
  std::string_view family() const override { return "learned"; }
  [[nodiscard]] const ProxParams& params() const { return params_; }

 private:
  ProxParams params_;
};

/// Versioned container: magic "LPCNNW1", u32-length-prefixed UTF-8 JSON header
/// (arch + flags), then tensors in declaration order, each as u32 rank,
/// rank x u32 dims, and little-endian f64 payload.
void save_params(const std::filesystem::path& path, const ProxParams& params);
ProxParams load_params(const std::filesystem::path& path);

struct TrainConfig {
  int unroll_k = 3;
  int epochs = 100;
  int batch_size = 2;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double lr_decay_ratio = 0.8;
  int lr_decay_every = 25;
  std::array<int, 3> patch_dims{64, 64, 64};
  std::uint64_t seed = 0;
  double alpha = 1.0;
  // Ablation only: build the dipole kernel on the patch grid instead of
  // padding into the full grid.
  bool naive_patch_kernel = false;

  void validate() const;
};

struct TrainPair {
  RealVolume y;        // local phase (full grid, or patch when pad is set)
  DipoleOperator op;   // full-grid operator
  RealVolume x_c;      // target susceptibility
  std::optional<PadSpec> pad;
};

struct TrainResult {
  ProxParams params;
  std::vector<double> epoch_mean_loss;  // mean per-sample l2 loss, one per epoch
};

/// Unrolled end-to-end training: k data-consistency steps interleaved with the
/// network, Adam with decoupled weight decay and a stepped learning-rate
/// schedule, fully reproducible from cfg.seed.
TrainResult train(const std::vector<TrainPair>& dataset, const ArchSpec& arch,
                  const TrainConfig& cfg, bool shared_across_iterations = true);

}  // namespace lpqsm
