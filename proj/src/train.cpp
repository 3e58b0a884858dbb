#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lpqsm/errors.hpp"
#include "lpqsm/proxnet.hpp"
#include "lpqsm/rng.hpp"

namespace lpqsm {

void TrainConfig::validate() const {
  if (unroll_k < 1) throw InvalidArgument("train unroll_k must be >= 1");
  if (epochs < 0) throw InvalidArgument("train epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("train learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train weight_decay must be >= 0");
  if (!(lr_decay_ratio > 0.0 && lr_decay_ratio <= 1.0)) {
    throw InvalidArgument("train lr_decay_ratio must lie in (0, 1]");
  }
  if (lr_decay_every < 1) throw InvalidArgument("train lr_decay_every must be >= 1");
  for (int d : patch_dims) {
    if (d < 1) throw InvalidArgument("train patch_dims must be positive");
  }
  if (!(alpha > 0.0)) throw InvalidArgument("train alpha must be positive");
}

namespace {

struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::int64_t step = 0;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  explicit AdamState(const ProxParams& p) {
    for (const auto& w : p.weights) {
      m.push_back(ad::Tensor::zeros(w.shape));
      v.push_back(ad::Tensor::zeros(w.shape));
    }
  }

  // Adam with decoupled weight decay; both terms scale with lr, so lr = 0
  // leaves parameters bitwise unchanged.
  void update(ProxParams& p, const std::vector<ad::Tensor>& grads, double lr,
              double weight_decay) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t t = 0; t < p.weights.size(); ++t) {
      auto& w = p.weights[t].values;
      const auto& g = grads[t].values;
      auto& mt = m[t].values;
      auto& vt = v[t].values;
      for (std::size_t i = 0; i < w.size(); ++i) {
        mt[i] = beta1 * mt[i] + (1.0 - beta1) * g[i];
        vt[i] = beta2 * vt[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = mt[i] / c1;
        const double vhat = vt[i] / c2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
      }
    }
  }
};

struct SampleContext {
  StackedOperator ops;          // single orientation, full grid
  std::optional<PadSpec> pad;   // set while patch training
  RealVolume y;                 // working-grid measurement
  ad::Tensor target;            // working-grid ground truth
  ad::Tensor bias;              // (alpha/L) Phi'^H y
  GridSpec work_grid;
  // Ablation mode: the operator is rebuilt on the patch grid and applied
  // without padding.
  std::optional<StackedOperator> naive_ops;
};

std::vector<std::vector<double>> make_dropout_masks(const ArchSpec& arch,
                                                    const GridSpec& grid, Rng& rng) {
  std::vector<std::vector<double>> masks;
  if (arch.dropout_rate <= 0.0) return masks;
  const double keep = 1.0 - arch.dropout_rate;
  const std::size_t n =
      static_cast<std::size_t>(arch.width) * static_cast<std::size_t>(grid.voxel_count());
  for (int b = 0; b < arch.blocks; ++b) {
    std::vector<double> mask(n);
    for (double& v : mask) v = rng.uniform01() < keep ? 1.0 / keep : 0.0;
    masks.push_back(std::move(mask));
  }
  return masks;
}

}  // namespace

TrainResult train(const std::vector<TrainPair>& dataset, const ArchSpec& arch,
                  const TrainConfig& cfg, bool shared_across_iterations) {
  cfg.validate();
  arch.validate();
  if (dataset.empty()) throw InvalidArgument("training dataset is empty");
  const GridSpec full_grid = dataset.front().op.grid;
  for (const auto& pair : dataset) {
    require_same_grid(pair.op.grid, full_grid, "training dataset grids");
    require_same_grid(pair.x_c.grid, full_grid, "training target grids");
    if (pair.pad) {
      pair.pad->validate();
      if (pair.pad->full_dims != full_grid.dims) {
        throw InvalidArgument("training pad spec does not match the full grid");
      }
      if (pair.y.grid.dims != pair.pad->patch_dims) {
        throw InvalidArgument("patched training measurement has wrong dims");
      }
    } else {
      require_same_grid(pair.y.grid, full_grid, "training measurement grids");
    }
  }
  const bool patching = cfg.patch_dims != full_grid.dims;
  if (patching) {
    for (int a = 0; a < 3; ++a) {
      if (cfg.patch_dims[a] > full_grid.dims[a]) {
        throw InvalidArgument("train patch_dims exceed the data grid");
      }
    }
  }

  TrainResult result;
  result.params =
      init_prox_params(arch, derive_seed(cfg.seed, 0), shared_across_iterations,
                       shared_across_iterations ? 1 : cfg.unroll_k);
  ProxParams& params = result.params;
  AdamState adam(params);

  Rng order_rng(derive_seed(cfg.seed, 1));
  Rng patch_rng(derive_seed(cfg.seed, 2));
  Rng dropout_rng(derive_seed(cfg.seed, 3));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.learning_rate * std::pow(cfg.lr_decay_ratio, epoch / cfg.lr_decay_every);
    // Fisher-Yates on the deterministic stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }

    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end = std::min(pos + static_cast<std::size_t>(cfg.batch_size),
                                             order.size());
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);

      std::vector<ad::Tensor> grads;
      for (const auto& w : params.weights) grads.push_back(ad::Tensor::zeros(w.shape));

      for (std::size_t bi = pos; bi < batch_end; ++bi) {
        const TrainPair& pair = dataset[order[bi]];

        SampleContext sc;
        sc.ops = StackedOperator{{pair.op}};
        sc.pad = pair.pad;
        if (patching && !sc.pad) {
          PadSpec pad;
          pad.patch_dims = cfg.patch_dims;
          pad.full_dims = full_grid.dims;
          for (int a = 0; a < 3; ++a) {
            pad.offset[a] = patch_rng.uniform_int(0, full_grid.dims[a] - cfg.patch_dims[a]);
          }
          sc.pad = pad;
        }
        if (sc.pad) {
          sc.work_grid = GridSpec{sc.pad->patch_dims, full_grid.voxel_mm};
          sc.y = pair.pad ? pair.y : crop(pair.y, *sc.pad);
          sc.target = ad::tensor_from_volume(crop(pair.x_c, *sc.pad));
        } else {
          sc.work_grid = full_grid;
          sc.y = pair.y;
          sc.target = ad::tensor_from_volume(pair.x_c);
        }
        std::optional<PadSpec> dc_pad = sc.pad;
        const StackedOperator* dc_ops = &sc.ops;
        if (cfg.naive_patch_kernel && sc.pad) {
          sc.naive_ops =
              StackedOperator{{dipole_kernel(sc.work_grid, pair.op.orientation)}};
          dc_ops = &*sc.naive_ops;
          dc_pad.reset();
        }
        const std::vector<RealVolume> ys{sc.y};
        RealVolume bias_vol = data_consistency_bias(*dc_ops, ys, cfg.alpha, dc_pad);
        sc.bias = ad::tensor_from_volume(bias_vol);

        ad::Tape tape;
        std::vector<std::vector<ad::Tape::NodeId>> stack_ids;
        for (int s = 0; s < params.stacks; ++s) {
          std::vector<ad::Tape::NodeId> ids;
          for (const auto& w : params.stack(s)) ids.push_back(tape.leaf(w));
          stack_ids.push_back(std::move(ids));
        }

        ad::Tape::NodeId x = tape.leaf(ad::tensor_from_volume(RealVolume(sc.work_grid, 0.0)));
        for (int it = 0; it < cfg.unroll_k; ++it) {
          ad::Tape::NodeId z = tape.data_consistency(x, *dc_ops, cfg.alpha, dc_pad, sc.bias);
          const auto masks = make_dropout_masks(arch, sc.work_grid, dropout_rng);
          const auto& ids = params.shared_across_iterations
                                ? stack_ids[0]
                                : stack_ids[static_cast<std::size_t>(
                                      std::min(it, params.stacks - 1))];
          x = prox_forward(tape, z, ids, arch,
                           arch.dropout_rate > 0.0 ? &masks : nullptr);
        }
        ad::Tape::NodeId loss = tape.l2_loss(x, sc.target);
        const double loss_value = tape.value(loss).values[0];
        if (!std::isfinite(loss_value)) {
          throw NumericalError("training loss diverged at epoch " + std::to_string(epoch) +
                               ", step " + std::to_string(adam.step));
        }
        epoch_loss += loss_value;
        tape.backward(loss);

        for (int s = 0; s < params.stacks; ++s) {
          const auto& ids = stack_ids[static_cast<std::size_t>(s)];
          const int per = params.arch.tensors_per_stack();
          for (int t = 0; t < per; ++t) {
            const auto& g = tape.grad(ids[static_cast<std::size_t>(t)]);
            auto& acc = grads[static_cast<std::size_t>(s * per + t)].values;
            for (std::size_t i = 0; i < acc.size(); ++i) {
              acc[i] += inv_batch * g.values[i];
            }
          }
        }
      }

      adam.update(params, grads, lr, cfg.weight_decay);
      pos = batch_end;
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return result;
}

}  // namespace lpqsm
