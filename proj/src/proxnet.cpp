#include "lpqsm/proxnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "lpqsm/errors.hpp"
#include "lpqsm/rng.hpp"

namespace lpqsm {

using nlohmann::json;

void ArchSpec::validate() const {
  if (blocks < 1) throw InvalidArgument("arch blocks must be >= 1");
  if (width < 1) throw InvalidArgument("arch width must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw InvalidArgument("arch kernel must be odd >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("arch dropout_rate must lie in [0, 1)");
  }
  ad::parse_activation(activation);
}

namespace {

std::vector<std::vector<int>> stack_shapes(const ArchSpec& a) {
  std::vector<std::vector<int>> shapes;
  shapes.push_back({a.width, 1, a.kernel, a.kernel, a.kernel});  // conv_in
  shapes.push_back({a.width});
  for (int b = 0; b < a.blocks; ++b) {
    shapes.push_back({a.width, a.width, a.kernel, a.kernel, a.kernel});  // conv1
    shapes.push_back({a.width});
    shapes.push_back({a.width, a.width, a.kernel, a.kernel, a.kernel});  // conv2
    shapes.push_back({a.width});
  }
  shapes.push_back({1, a.width, a.kernel, a.kernel, a.kernel});  // conv_out
  shapes.push_back({1});
  return shapes;
}

}  // namespace

void ProxParams::validate() const {
  arch.validate();
  if (stacks < 1) throw InvalidArgument("params need at least one weight stack");
  if (shared_across_iterations && stacks != 1) {
    throw InvalidArgument("shared parameters must have exactly one stack");
  }
  const auto shapes = stack_shapes(arch);
  if (weights.size() != shapes.size() * static_cast<std::size_t>(stacks)) {
    throw InvalidArgument("weight tensor count does not match architecture");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].shape != shapes[i % shapes.size()]) {
      throw InvalidArgument("weight tensor " + std::to_string(i) +
                            " shape does not match architecture");
    }
    if (!ad::tensor_finite(weights[i])) {
      throw InvalidArgument("weight tensor " + std::to_string(i) + " has non-finite values");
    }
  }
}

std::span<const ad::Tensor> ProxParams::stack(int i) const {
  const int per = arch.tensors_per_stack();
  const int s = shared_across_iterations ? 0 : std::min(i, stacks - 1);
  return {weights.data() + static_cast<std::size_t>(s) * per, static_cast<std::size_t>(per)};
}

ProxParams init_prox_params(const ArchSpec& arch, std::uint64_t seed,
                            bool shared_across_iterations, int stacks) {
  arch.validate();
  ProxParams p;
  p.arch = arch;
  p.shared_across_iterations = shared_across_iterations;
  p.stacks = shared_across_iterations ? 1 : stacks;
  if (p.stacks < 1) throw InvalidArgument("stack count must be >= 1");
  Rng rng(seed);
  const auto shapes = stack_shapes(arch);
  for (int s = 0; s < p.stacks; ++s) {
    for (std::size_t t = 0; t < shapes.size(); ++t) {
      ad::Tensor w = ad::Tensor::zeros(shapes[t]);
      // Within a stack: index 0 is conv_in and then blocks alternate
      // conv1/conv2; odd indices are biases and the last pair is conv_out.
      const bool is_conv = shapes[t].size() == 5;
      const bool is_block_conv2 = is_conv && t >= 2 && t + 2 < shapes.size() && ((t - 2) % 4 == 2);
      const bool is_conv_out = is_conv && t + 2 == shapes.size();
      if (is_conv && !is_block_conv2 && !is_conv_out) {
        const int fan_in = shapes[t][1] * arch.kernel * arch.kernel * arch.kernel;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.values) v = rng.uniform(-bound, bound);
      }
      p.weights.push_back(std::move(w));
    }
  }
  p.validate();
  return p;
}

ad::Tape::NodeId prox_forward(ad::Tape& tape, ad::Tape::NodeId z,
                              std::span<const ad::Tape::NodeId> weight_ids,
                              const ArchSpec& arch,
                              const std::vector<std::vector<double>>* dropout_masks) {
  if (static_cast<int>(weight_ids.size()) != arch.tensors_per_stack()) {
    throw InvalidArgument("prox_forward: wrong number of weight tensors");
  }
  if (dropout_masks != nullptr &&
      static_cast<int>(dropout_masks->size()) != arch.blocks) {
    throw InvalidArgument("prox_forward: need one dropout mask per block");
  }
  const ad::Activation act = ad::parse_activation(arch.activation);
  int layer = 0;
  auto checked = [&](ad::Tape::NodeId id) {
    if (!ad::tensor_finite(tape.value(id))) {
      throw NumericalError("non-finite activation at layer " + std::to_string(layer));
    }
    ++layer;
    return id;
  };

  std::size_t w = 0;
  auto conv = [&](ad::Tape::NodeId in) {
    ad::Tape::NodeId out = tape.conv3d(in, weight_ids[w], weight_ids[w + 1]);
    w += 2;
    return checked(out);
  };

  ad::Tape::NodeId h = conv(z);
  for (int b = 0; b < arch.blocks; ++b) {
    ad::Tape::NodeId a1 = tape.activation(h, act);
    ad::Tape::NodeId c1 = conv(a1);
    ad::Tape::NodeId a2 = tape.activation(c1, act);
    if (dropout_masks != nullptr && arch.dropout_rate > 0.0) {
      a2 = tape.dropout(a2, (*dropout_masks)[static_cast<std::size_t>(b)]);
    }
    ad::Tape::NodeId c2 = conv(a2);
    h = tape.add(h, c2);
  }
  ad::Tape::NodeId r = conv(tape.activation(h, act));
  return tape.add(z, r);
}

RealVolume prox_apply(const ProxParams& params, const RealVolume& z, int stack) {
  params.validate();
  ad::Tape tape;
  ad::Tape::NodeId zin = tape.leaf(ad::tensor_from_volume(z));
  std::vector<ad::Tape::NodeId> wids;
  for (const auto& w : params.stack(stack)) wids.push_back(tape.leaf(w));
  ad::Tape::NodeId out = prox_forward(tape, zin, wids, params.arch, nullptr);
  return ad::volume_from_tensor(tape.value(out), z.grid);
}

LearnedProx::LearnedProx(ProxParams params) : params_(std::move(params)) {
  params_.validate();
}

RealVolume LearnedProx::apply(const RealVolume& v, int iteration) const {
  return prox_apply(params_, v, iteration);
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("weight file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("weight file truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

constexpr char kMagic[] = "LPCNNW1";
constexpr std::size_t kMagicLen = 7;

}  // namespace

void save_params(const std::filesystem::path& path, const ProxParams& params) {
  params.validate();
  json header = {
      {"container_version", 1},
      {"arch",
       {{"blocks", params.arch.blocks},
        {"width", params.arch.width},
        {"kernel", params.arch.kernel},
        {"activation", params.arch.activation},
        {"dropout_rate", params.arch.dropout_rate}}},
      {"shared_across_iterations", params.shared_across_iterations},
      {"stacks", params.stacks},
      {"tensor_count", params.weights.size()},
  };
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open weight file for writing: " + path.string());
  os.write(kMagic, kMagicLen);
  put_u32(os, static_cast<std::uint32_t>(header_str.size()));
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& t : params.weights) {
    put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : t.values) put_f64(os, v);
  }
  if (!os) throw DataError("failed writing weight file: " + path.string());
}

ProxParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open weight file: " + path.string());
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw DataError("not a LPCNNW1 weight file: " + path.string());
  }
  const std::uint32_t header_len = get_u32(is);
  std::string header_str(header_len, '\0');
  if (!is.read(header_str.data(), header_len)) throw DataError("weight file truncated");
  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw DataError(std::string("weight file header is not valid JSON: ") + e.what());
  }
  if (header.value("container_version", -1) != 1) {
    throw DataError("unsupported weight container version");
  }

  ProxParams p;
  try {
    const json& a = header.at("arch");
    p.arch.blocks = a.at("blocks").get<int>();
    p.arch.width = a.at("width").get<int>();
    p.arch.kernel = a.at("kernel").get<int>();
    p.arch.activation = a.at("activation").get<std::string>();
    p.arch.dropout_rate = a.at("dropout_rate").get<double>();
    p.shared_across_iterations = header.at("shared_across_iterations").get<bool>();
    p.stacks = header.at("stacks").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("weight file header field error: ") + e.what());
  }
  const auto tensor_count = header.at("tensor_count").get<std::size_t>();

  for (std::size_t i = 0; i < tensor_count; ++i) {
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw DataError("weight tensor rank out of range");
    ad::Tensor t;
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = static_cast<int>(get_u32(is));
      t.shape.push_back(dim);
      n *= dim;
    }
    if (n < 0 || n > (1LL << 32)) throw DataError("weight tensor size out of range");
    t.values.resize(static_cast<std::size_t>(n));
    for (auto& v : t.values) v = get_f64(is);
    p.weights.push_back(std::move(t));
  }
  is.peek();
  if (!is.eof()) throw DataError("trailing bytes in weight file: " + path.string());
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw DataError("weight file does not match its declared architecture: " +
                    std::string(e.what()));
  }
  return p;
}

}  // namespace lpqsm
