#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace lpqsm {

/// Regular 3D grid: dimensions and voxel size. Data layout everywhere in this
/// library is x fastest, then y, then z.
struct GridSpec {
  std::array<int, 3> dims{0, 0, 0};            // (nx, ny, nz)
  std::array<double, 3> voxel_mm{1.0, 1.0, 1.0};

  [[nodiscard]] std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }
  [[nodiscard]] std::int64_t index(int ix, int iy, int iz) const {
    return ix + static_cast<std::int64_t>(dims[0]) *
                    (iy + static_cast<std::int64_t>(dims[1]) * iz);
  }
  /// Throws InvalidArgument unless all dims >= 2 and all voxel sizes > 0.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

struct RealVolume {
  GridSpec grid;
  std::vector<double> data;

  RealVolume() = default;
  explicit RealVolume(const GridSpec& g, double fill = 0.0);
  RealVolume(const GridSpec& g, std::vector<double> values);

  double& operator()(int ix, int iy, int iz) { return data[grid.index(ix, iy, iz)]; }
  double operator()(int ix, int iy, int iz) const { return data[grid.index(ix, iy, iz)]; }
};

struct ComplexVolume {
  GridSpec grid;
  std::vector<std::complex<double>> data;

  ComplexVolume() = default;
  explicit ComplexVolume(const GridSpec& g);
  ComplexVolume(const GridSpec& g, std::vector<std::complex<double>> values);

  std::complex<double>& operator()(int ix, int iy, int iz) {
    return data[grid.index(ix, iy, iz)];
  }
  const std::complex<double>& operator()(int ix, int iy, int iz) const {
    return data[grid.index(ix, iy, iz)];
  }
};

/// Throws InvalidArgument when the two grids differ; `what` names the operation.
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

/// Sum_i a_i * b_i over matching grids.
double inner_product(const RealVolume& a, const RealVolume& b);

double norm2(const RealVolume& v);
double norm2(const ComplexVolume& v);
double max_abs(const RealVolume& v);
double mean(const RealVolume& v);
bool all_finite(const RealVolume& v);

/// dst += s * src
void add_scaled(RealVolume& dst, const RealVolume& src, double s);
void scale(RealVolume& v, double s);

}  // namespace lpqsm
