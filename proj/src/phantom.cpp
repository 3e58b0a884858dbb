#include "lpqsm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpqsm/errors.hpp"
#include "lpqsm/fft.hpp"

namespace lpqsm {

namespace {

std::array<double, 3> grid_extent_mm(const GridSpec& g) {
  return {g.dims[0] * g.voxel_mm[0], g.dims[1] * g.voxel_mm[1], g.dims[2] * g.voxel_mm[2]};
}

void validate_shape(const ShapeSpec& shape, const GridSpec& grid) {
  const auto ext = grid_extent_mm(grid);
  if (const auto* s = std::get_if<SphereSpec>(&shape)) {
    if (!(s->radius_mm > 0.0)) throw InvalidArgument("sphere radius must be positive");
    for (int a = 0; a < 3; ++a) {
      if (s->center_mm[a] - s->radius_mm < 0.0 || s->center_mm[a] + s->radius_mm > ext[a]) {
        throw InvalidArgument("sphere does not fit the grid");
      }
    }
  } else {
    const auto& c = std::get<CylinderSpec>(shape);
    if (!(c.radius_mm > 0.0)) throw InvalidArgument("cylinder radius must be positive");
    const double an =
        std::sqrt(c.axis[0] * c.axis[0] + c.axis[1] * c.axis[1] + c.axis[2] * c.axis[2]);
    if (std::abs(an - 1.0) > 1e-9) throw InvalidArgument("cylinder axis must be unit length");
    for (int a = 0; a < 3; ++a) {
      if (c.point_mm[a] < 0.0 || c.point_mm[a] > ext[a]) {
        throw InvalidArgument("cylinder anchor point lies outside the grid");
      }
    }
    if (2.0 * c.radius_mm > *std::min_element(ext.begin(), ext.end())) {
      throw InvalidArgument("cylinder radius too large for the grid");
    }
  }
}

void smooth_gaussian(RealVolume& v, double sigma_mm) {
  ComplexVolume kx = fft3(v);
  const auto [nx, ny, nz] = v.grid.dims;
  const double s2 = 2.0 * M_PI * M_PI * sigma_mm * sigma_mm;
  std::size_t idx = 0;
  for (int iz = 0; iz < nz; ++iz) {
    const double kz = dft_frequency(iz, nz) / v.grid.voxel_mm[2];
    for (int iy = 0; iy < ny; ++iy) {
      const double ky = dft_frequency(iy, ny) / v.grid.voxel_mm[1];
      for (int ix = 0; ix < nx; ++ix, ++idx) {
        const double kxf = dft_frequency(ix, nx) / v.grid.voxel_mm[0];
        kx.data[idx] *= std::exp(-s2 * (kxf * kxf + ky * ky + kz * kz));
      }
    }
  }
  v = real_part(ifft3(kx));
}

}  // namespace

void PhantomSpec::validate() const {
  grid.validate();
  if (smooth_sigma_mm < 0.0) throw InvalidArgument("smooth_sigma_mm must be >= 0");
  for (const auto& s : shapes) validate_shape(s, grid);
}

RealVolume make_phantom(const PhantomSpec& spec) {
  spec.validate();
  RealVolume v(spec.grid, spec.background_chi_ppm);
  const auto [nx, ny, nz] = spec.grid.dims;
  for (const auto& shape : spec.shapes) {
    std::size_t idx = 0;
    if (const auto* s = std::get_if<SphereSpec>(&shape)) {
      const double r2 = s->radius_mm * s->radius_mm;
      for (int iz = 0; iz < nz; ++iz) {
        const double pz = (iz + 0.5) * spec.grid.voxel_mm[2] - s->center_mm[2];
        for (int iy = 0; iy < ny; ++iy) {
          const double py = (iy + 0.5) * spec.grid.voxel_mm[1] - s->center_mm[1];
          for (int ix = 0; ix < nx; ++ix, ++idx) {
            const double px = (ix + 0.5) * spec.grid.voxel_mm[0] - s->center_mm[0];
            if (px * px + py * py + pz * pz <= r2) v.data[idx] += s->delta_chi_ppm;
          }
        }
      }
    } else {
      const auto& c = std::get<CylinderSpec>(shape);
      const double r2 = c.radius_mm * c.radius_mm;
      for (int iz = 0; iz < nz; ++iz) {
        const double pz = (iz + 0.5) * spec.grid.voxel_mm[2] - c.point_mm[2];
        for (int iy = 0; iy < ny; ++iy) {
          const double py = (iy + 0.5) * spec.grid.voxel_mm[1] - c.point_mm[1];
          for (int ix = 0; ix < nx; ++ix, ++idx) {
            const double px = (ix + 0.5) * spec.grid.voxel_mm[0] - c.point_mm[0];
            const double dot = px * c.axis[0] + py * c.axis[1] + pz * c.axis[2];
            const double d2 = px * px + py * py + pz * pz - dot * dot;
            if (d2 <= r2) v.data[idx] += c.delta_chi_ppm;
          }
        }
      }
    }
  }
  if (spec.smooth_sigma_mm > 0.0) smooth_gaussian(v, spec.smooth_sigma_mm);
  const double m = mean(v);
  for (double& x : v.data) x -= m;
  return v;
}

void AcqSpec::validate() const {
  if (orientations.empty()) throw InvalidArgument("acquisition needs >= 1 orientation");
  for (const auto& o : orientations) o.validate();
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (mask) {
    for (double v : mask->data) {
      if (v != 0.0 && v != 1.0) throw InvalidArgument("mask entries must be 0 or 1");
    }
  }
}

std::vector<RealVolume> simulate_phase(const RealVolume& x, const AcqSpec& acq) {
  acq.validate();
  if (acq.mask) require_same_grid(acq.mask->grid, x.grid, "acquisition mask");
  std::vector<RealVolume> ys;
  ys.reserve(acq.orientations.size());
  for (std::size_t l = 0; l < acq.orientations.size(); ++l) {
    const DipoleOperator op = dipole_kernel(x.grid, acq.orientations[l]);
    RealVolume y = forward(op, x);
    if (acq.noise_sigma > 0.0) {
      Rng noise(derive_seed(acq.seed, l));
      for (double& v : y.data) v += acq.noise_sigma * noise.normal();
    }
    if (acq.mask) {
      for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= acq.mask->data[i];
    }
    ys.push_back(std::move(y));
  }
  return ys;
}

Orientation random_orientation(double max_tilt_deg, Rng& rng) {
  if (!(max_tilt_deg >= 0.0 && max_tilt_deg <= 90.0)) {
    throw InvalidArgument("max_tilt_deg must lie in [0, 90]");
  }
  const double cos_max = std::cos(max_tilt_deg * M_PI / 180.0);
  // Cap-uniform: cos(theta) uniform on [cos_max, 1], azimuth uniform.
  const double c = 1.0 - rng.uniform01() * (1.0 - cos_max);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double phi = 2.0 * M_PI * rng.uniform01();
  Orientation o;
  o.h = {s * std::cos(phi), s * std::sin(phi), c};
  return o;
}

Orientation random_orientation(double max_tilt_deg, std::uint64_t seed) {
  Rng rng(seed);
  return random_orientation(max_tilt_deg, rng);
}

void DatasetSpec::validate() const {
  grid.validate();
  if (n_pairs < 1) throw InvalidArgument("dataset n_pairs must be >= 1");
  if (min_shapes < 1 || max_shapes < min_shapes) {
    throw InvalidArgument("dataset shape counts must satisfy 1 <= min <= max");
  }
  if (!(cylinder_fraction >= 0.0 && cylinder_fraction <= 1.0)) {
    throw InvalidArgument("cylinder_fraction must lie in [0, 1]");
  }
  if (!(radius_range_mm[0] > 0.0 && radius_range_mm[1] >= radius_range_mm[0])) {
    throw InvalidArgument("dataset radius range is invalid");
  }
  if (!(delta_chi_range_ppm[1] >= delta_chi_range_ppm[0])) {
    throw InvalidArgument("dataset delta chi range is invalid");
  }
  if (!(max_tilt_deg >= 0.0 && max_tilt_deg <= 90.0)) {
    throw InvalidArgument("max_tilt_deg must lie in [0, 90]");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  const auto ext = grid_extent_mm(grid);
  const double min_ext = *std::min_element(ext.begin(), ext.end());
  if (2.0 * radius_range_mm[1] >= min_ext) {
    throw InvalidArgument("dataset radius range too large for the grid");
  }
}

PhantomSpec dataset_phantom(const DatasetSpec& spec, int index) {
  spec.validate();
  if (index < 0 || index >= spec.n_pairs) throw InvalidArgument("dataset index out of range");
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index) * 2));
  const auto ext = grid_extent_mm(spec.grid);

  PhantomSpec ph;
  ph.grid = spec.grid;
  ph.smooth_sigma_mm = spec.smooth_sigma_mm;
  const int n_shapes = rng.uniform_int(spec.min_shapes, spec.max_shapes);
  for (int s = 0; s < n_shapes; ++s) {
    const double radius = rng.uniform(spec.radius_range_mm[0], spec.radius_range_mm[1]);
    const double chi = rng.uniform(spec.delta_chi_range_ppm[0], spec.delta_chi_range_ppm[1]);
    const bool cylinder = rng.uniform01() < spec.cylinder_fraction;
    if (cylinder) {
      CylinderSpec c;
      c.radius_mm = radius;
      c.delta_chi_ppm = chi;
      for (int a = 0; a < 3; ++a) c.point_mm[a] = rng.uniform(radius, ext[a] - radius);
      // Random axis via cap sampling over the full sphere.
      const double cz = rng.uniform(-1.0, 1.0);
      const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
      const double phi = 2.0 * M_PI * rng.uniform01();
      c.axis = {sz * std::cos(phi), sz * std::sin(phi), cz};
      ph.shapes.push_back(c);
    } else {
      SphereSpec sp;
      sp.radius_mm = radius;
      sp.delta_chi_ppm = chi;
      for (int a = 0; a < 3; ++a) sp.center_mm[a] = rng.uniform(radius, ext[a] - radius);
      ph.shapes.push_back(sp);
    }
  }
  return ph;
}

std::vector<TrainPair> make_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<TrainPair> pairs;
  pairs.reserve(static_cast<std::size_t>(spec.n_pairs));
  for (int j = 0; j < spec.n_pairs; ++j) {
    const PhantomSpec ph = dataset_phantom(spec, j);
    RealVolume x = make_phantom(ph);

    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(j) * 2 + 1));
    AcqSpec acq;
    acq.orientations = {random_orientation(spec.max_tilt_deg, rng)};
    acq.noise_sigma = spec.noise_sigma;
    acq.seed = rng.next_u64();
    std::vector<RealVolume> ys = simulate_phase(x, acq);

    TrainPair pair;
    pair.op = dipole_kernel(spec.grid, acq.orientations.front());
    pair.y = std::move(ys.front());
    pair.x_c = std::move(x);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace lpqsm
