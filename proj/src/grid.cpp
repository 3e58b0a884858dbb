#include "lpqsm/grid.hpp"

#include <cmath>
#include <string>

#include "lpqsm/errors.hpp"

namespace lpqsm {

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) {
      throw InvalidArgument("grid dims must all be >= 2, got dim[" + std::to_string(a) +
                            "] = " + std::to_string(dims[a]));
    }
    if (!(voxel_mm[a] > 0.0) || !std::isfinite(voxel_mm[a])) {
      throw InvalidArgument("voxel sizes must be positive and finite");
    }
  }
}

RealVolume::RealVolume(const GridSpec& g, double fill) : grid(g) {
  grid.validate();
  data.assign(static_cast<std::size_t>(grid.voxel_count()), fill);
}

RealVolume::RealVolume(const GridSpec& g, std::vector<double> values)
    : grid(g), data(std::move(values)) {
  grid.validate();
  if (static_cast<std::int64_t>(data.size()) != grid.voxel_count()) {
    throw InvalidArgument("volume data length does not match grid voxel count");
  }
}

ComplexVolume::ComplexVolume(const GridSpec& g) : grid(g) {
  grid.validate();
  data.assign(static_cast<std::size_t>(grid.voxel_count()), {0.0, 0.0});
}

ComplexVolume::ComplexVolume(const GridSpec& g, std::vector<std::complex<double>> values)
    : grid(g), data(std::move(values)) {
  grid.validate();
  if (static_cast<std::int64_t>(data.size()) != grid.voxel_count()) {
    throw InvalidArgument("volume data length does not match grid voxel count");
  }
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) {
    throw InvalidArgument(std::string(what) + ": grid mismatch");
  }
}

double inner_product(const RealVolume& a, const RealVolume& b) {
  require_same_grid(a.grid, b.grid, "inner_product");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

double norm2(const RealVolume& v) {
  double acc = 0.0;
  for (double x : v.data) acc += x * x;
  return std::sqrt(acc);
}

double norm2(const ComplexVolume& v) {
  double acc = 0.0;
  for (const auto& x : v.data) acc += std::norm(x);
  return std::sqrt(acc);
}

double max_abs(const RealVolume& v) {
  double m = 0.0;
  for (double x : v.data) m = std::max(m, std::abs(x));
  return m;
}

double mean(const RealVolume& v) {
  double acc = 0.0;
  for (double x : v.data) acc += x;
  return v.data.empty() ? 0.0 : acc / static_cast<double>(v.data.size());
}

bool all_finite(const RealVolume& v) {
  for (double x : v.data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void add_scaled(RealVolume& dst, const RealVolume& src, double s) {
  require_same_grid(dst.grid, src.grid, "add_scaled");
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += s * src.data[i];
}

void scale(RealVolume& v, double s) {
  for (double& x : v.data) x *= s;
}

}  // namespace lpqsm
