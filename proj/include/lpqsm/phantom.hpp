#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "lpqsm/proxnet.hpp"
#include "lpqsm/rng.hpp"

namespace lpqsm {

struct SphereSpec {
  std::array<double, 3> center_mm{};
  double radius_mm = 0.0;
  double delta_chi_ppm = 0.0;
};

struct CylinderSpec {
  std::array<double, 3> point_mm{};   // a point on the axis
  std::array<double, 3> axis{0, 0, 1};  // unit direction
  double radius_mm = 0.0;
  double delta_chi_ppm = 0.0;
};

using ShapeSpec = std::variant<SphereSpec, CylinderSpec>;

/// Parametric synthetic susceptibility source. Voxel centers sit at
/// (i + 1/2) * voxel_mm. Values are in ppm and the result is mean-free.
struct PhantomSpec {
  GridSpec grid;
  std::vector<ShapeSpec> shapes;
  double background_chi_ppm = 0.0;
  double smooth_sigma_mm = 0.0;  // 0 disables boundary smoothing

  void validate() const;
};

RealVolume make_phantom(const PhantomSpec& spec);

/// Multi-orientation acquisition: y_l = Phi_l x + sigma * noise, one
/// orientation per entry, Gaussian noise streams derived from (seed, index).
struct AcqSpec {
  std::vector<Orientation> orientations;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::optional<RealVolume> mask;  // 0/1, applied multiplicatively

  void validate() const;
};

std::vector<RealVolume> simulate_phase(const RealVolume& x, const AcqSpec& acq);

/// Uniform direction on the spherical cap of half-angle max_tilt_deg about
/// z_hat.
Orientation random_orientation(double max_tilt_deg, Rng& rng);
Orientation random_orientation(double max_tilt_deg, std::uint64_t seed);

/// Randomized phantom family for dataset generation.
struct DatasetSpec {
  int n_pairs = 1;
  GridSpec grid;
  int min_shapes = 1;
  int max_shapes = 4;
  double cylinder_fraction = 0.2;  // probability a shape is a cylinder
  std::array<double, 2> radius_range_mm{3.0, 8.0};
  std::array<double, 2> delta_chi_range_ppm{-0.2, 0.2};
  double smooth_sigma_mm = 0.0;
  double max_tilt_deg = 45.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generates n_pairs (phase, operator, ground truth) training pairs; each pair
/// uses an independent stream derived from (seed, pair index), so different
/// base seeds give disjoint datasets.
std::vector<TrainPair> make_dataset(const DatasetSpec& spec);

/// The phantom drawn for pair `index` of a dataset, without the simulation.
PhantomSpec dataset_phantom(const DatasetSpec& spec, int index);

}  // namespace lpqsm
