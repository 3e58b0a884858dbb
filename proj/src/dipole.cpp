#include "lpqsm/dipole.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpqsm/errors.hpp"
#include "lpqsm/fft.hpp"

namespace lpqsm {

Orientation Orientation::from_axis(const std::array<double, 3>& h) {
  Orientation o;
  o.h = h;
  o.validate();
  return o;
}

Orientation Orientation::from_rotation(const std::array<double, 9>& r) {
  Orientation o;
  o.rotation = r;
  // h = R * z_hat is the last column of R.
  o.h = {r[2], r[5], r[8]};
  o.validate();
  return o;
}

void Orientation::validate() const {
  const double n2 = h[0] * h[0] + h[1] * h[1] + h[2] * h[2];
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) {
    throw InvalidArgument("orientation h must be a unit vector");
  }
  if (rotation) {
    const auto& r = *rotation;
    // R^T R = I within 1e-10.
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
        const double target = (i == j) ? 1.0 : 0.0;
        if (std::abs(dot - target) > 1e-10) {
          throw InvalidArgument("orientation rotation is not orthonormal");
        }
      }
    }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) -
                       r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (std::abs(det - 1.0) > 1e-8) {
      throw InvalidArgument("orientation rotation must be proper (det = +1)");
    }
  }
}

double Orientation::tilt_deg() const {
  const double c = std::clamp(h[2], -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

DipoleOperator dipole_kernel(const GridSpec& grid, const Orientation& orientation) {
  grid.validate();
  orientation.validate();
  DipoleOperator op{grid, orientation,
                    std::vector<double>(static_cast<std::size_t>(grid.voxel_count()))};
  const auto [nx, ny, nz] = grid.dims;
  const double hx = orientation.h[0], hy = orientation.h[1], hz = orientation.h[2];
  std::size_t idx = 0;
  for (int iz = 0; iz < nz; ++iz) {
    const double kz = dft_frequency(iz, nz) / grid.voxel_mm[2];
    for (int iy = 0; iy < ny; ++iy) {
      const double ky = dft_frequency(iy, ny) / grid.voxel_mm[1];
      for (int ix = 0; ix < nx; ++ix, ++idx) {
        const double kx = dft_frequency(ix, nx) / grid.voxel_mm[0];
        const double k2 = kx * kx + ky * ky + kz * kz;
        if (k2 == 0.0) {
          op.kernel[idx] = 0.0;  // mean-free convention
        } else {
          const double kh = kx * hx + ky * hy + kz * hz;
          op.kernel[idx] = 1.0 / 3.0 - (kh * kh) / k2;
        }
      }
    }
  }
  return op;
}

RealVolume forward(const DipoleOperator& op, const RealVolume& x) {
  require_same_grid(op.grid, x.grid, "dipole forward");
  ComplexVolume kx = fft3(x);
  for (std::size_t i = 0; i < kx.data.size(); ++i) kx.data[i] *= op.kernel[i];
  ComplexVolume y = ifft3(kx);
  double im2 = 0.0, total2 = 0.0;
  for (const auto& c : y.data) {
    im2 += c.imag() * c.imag();
    total2 += std::norm(c);
  }
  if (total2 > 0.0 && !(im2 <= 1e-20 * total2)) {
    throw NumericalError("dipole forward: imaginary residue " +
                         std::to_string(std::sqrt(im2 / total2)) + " exceeds 1e-10");
  }
  return real_part(y);
}

RealVolume adjoint(const DipoleOperator& op, const RealVolume& y) {
  // D is real with D(-k) = D(k), so Phi^H = Phi.
  return forward(op, y);
}

void StackedOperator::validate() const {
  if (ops.empty()) throw InvalidArgument("stacked operator needs at least one orientation");
  for (const auto& op : ops) {
    require_same_grid(op.grid, ops.front().grid, "stacked operator");
  }
}

namespace {

void require_measurements(const StackedOperator& ops, const std::vector<RealVolume>& ys) {
  ops.validate();
  if (ys.size() != ops.ops.size()) {
    throw InvalidArgument("measurement count " + std::to_string(ys.size()) +
                          " does not match orientation count " +
                          std::to_string(ops.ops.size()));
  }
  for (const auto& y : ys) require_same_grid(y.grid, ops.grid(), "measurement grid");
}

}  // namespace

RealVolume grad_datafit(const StackedOperator& ops, const RealVolume& x,
                        const std::vector<RealVolume>& ys) {
  require_measurements(ops, ys);
  require_same_grid(x.grid, ops.grid(), "grad_datafit");
  RealVolume g(x.grid);
  for (std::size_t l = 0; l < ops.ops.size(); ++l) {
    RealVolume r = forward(ops.ops[l], x);
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] -= ys[l].data[i];
    add_scaled(g, adjoint(ops.ops[l], r), 1.0);
  }
  scale(g, 1.0 / static_cast<double>(ops.count()));
  return g;
}

double datafit(const StackedOperator& ops, const RealVolume& x,
               const std::vector<RealVolume>& ys) {
  require_measurements(ops, ys);
  require_same_grid(x.grid, ops.grid(), "datafit");
  double acc = 0.0;
  for (std::size_t l = 0; l < ops.ops.size(); ++l) {
    RealVolume r = forward(ops.ops[l], x);
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      const double d = r.data[i] - ys[l].data[i];
      acc += d * d;
    }
  }
  return acc / (2.0 * static_cast<double>(ops.count()));
}

void PadSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (patch_dims[a] <= 0 || full_dims[a] <= 0 || offset[a] < 0) {
      throw InvalidArgument("pad spec entries must be positive (offset >= 0)");
    }
    if (offset[a] + patch_dims[a] > full_dims[a]) {
      throw InvalidArgument("patch exceeds full grid along axis " + std::to_string(a));
    }
  }
}

RealVolume zero_pad(const RealVolume& patch, const PadSpec& pad) {
  pad.validate();
  if (patch.grid.dims != pad.patch_dims) {
    throw InvalidArgument("zero_pad: patch dims do not match pad spec");
  }
  GridSpec full_grid{pad.full_dims, patch.grid.voxel_mm};
  RealVolume full(full_grid, 0.0);
  for (int iz = 0; iz < pad.patch_dims[2]; ++iz) {
    for (int iy = 0; iy < pad.patch_dims[1]; ++iy) {
      const auto src = patch.grid.index(0, iy, iz);
      const auto dst = full_grid.index(pad.offset[0], iy + pad.offset[1], iz + pad.offset[2]);
      for (int ix = 0; ix < pad.patch_dims[0]; ++ix) {
        full.data[dst + ix] = patch.data[src + ix];
      }
    }
  }
  return full;
}

RealVolume crop(const RealVolume& full, const PadSpec& pad) {
  pad.validate();
  if (full.grid.dims != pad.full_dims) {
    throw InvalidArgument("crop: volume dims do not match pad spec");
  }
  GridSpec patch_grid{pad.patch_dims, full.grid.voxel_mm};
  RealVolume patch(patch_grid, 0.0);
  for (int iz = 0; iz < pad.patch_dims[2]; ++iz) {
    for (int iy = 0; iy < pad.patch_dims[1]; ++iy) {
      const auto dst = patch_grid.index(0, iy, iz);
      const auto src = full.grid.index(pad.offset[0], iy + pad.offset[1], iz + pad.offset[2]);
      for (int ix = 0; ix < pad.patch_dims[0]; ++ix) {
        patch.data[dst + ix] = full.data[src + ix];
      }
    }
  }
  return patch;
}

RealVolume padded_forward(const DipoleOperator& op, const RealVolume& patch,
                          const PadSpec& pad) {
  if (op.grid.dims != pad.full_dims) {
    throw InvalidArgument("padded_forward: operator grid does not match pad spec");
  }
  return crop(forward(op, zero_pad(patch, pad)), pad);
}

}  // namespace lpqsm
