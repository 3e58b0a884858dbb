#include "lpqsm/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <vector>

#include "lpqsm/errors.hpp"
#include "lpqsm/fft.hpp"

namespace lpqsm {

namespace {

constexpr int kHfenKernel = 15;
constexpr double kHfenSigma = 1.5;  // voxels
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;  // voxels
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

bool inside(const RealVolume* mask, std::size_t i) {
  return mask == nullptr || mask->data[i] > 0.5;
}

void check_grids(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask,
                 const char* what) {
  require_same_grid(pred.grid, gt.grid, what);
  if (mask != nullptr) require_same_grid(mask->grid, gt.grid, what);
}

std::int64_t count_mask(const RealVolume& gt, const RealVolume* mask) {
  if (mask == nullptr) return gt.grid.voxel_count();
  std::int64_t n = 0;
  for (double v : mask->data) n += v > 0.5 ? 1 : 0;
  return n;
}

/// gt dynamic range within the mask; 1.0 for constant gt so the SSIM / PSNR
/// stabilizers stay positive.
double masked_range(const RealVolume& gt, const RealVolume* mask) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (!inside(mask, i)) continue;
    lo = std::min(lo, gt.data[i]);
    hi = std::max(hi, gt.data[i]);
  }
  if (!(hi > lo)) return 1.0;
  return hi - lo;
}

/// Periodic convolution with the zero-sum 3D Laplacian-of-Gaussian filter.
RealVolume log_filter(const RealVolume& v) {
  const auto [nx, ny, nz] = v.grid.dims;
  if (std::min({nx, ny, nz}) < kHfenKernel) {
    throw DataError("volume smaller than the 15^3 HFEN filter");
  }
  const int r = kHfenKernel / 2;
  const double s2 = kHfenSigma * kHfenSigma;
  std::vector<double> taps;
  taps.reserve(kHfenKernel * kHfenKernel * kHfenKernel);
  double sum = 0.0;
  for (int dz = -r; dz <= r; ++dz) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const double r2 = dx * dx + dy * dy + dz * dz;
        const double t = (r2 - 3.0 * s2) / (s2 * s2) * std::exp(-r2 / (2.0 * s2));
        taps.push_back(t);
        sum += t;
      }
    }
  }
  const double shift = sum / static_cast<double>(taps.size());
  for (double& t : taps) t -= shift;  // exact zero sum kills constants

  RealVolume kernel(v.grid, 0.0);
  std::size_t ti = 0;
  for (int dz = -r; dz <= r; ++dz) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, ++ti) {
        kernel((dx + nx) % nx, (dy + ny) % ny, (dz + nz) % nz) = taps[ti];
      }
    }
  }
  ComplexVolume spec = fft3(v);
  const ComplexVolume kspec = fft3(kernel);
  for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] *= kspec.data[i];
  return real_part(ifft3(spec));
}

/// Separable zero-padded filtering with an odd symmetric window.
RealVolume separable_filter(const RealVolume& v, const std::vector<double>& w) {
  const int r = static_cast<int>(w.size()) / 2;
  const auto [nx, ny, nz] = v.grid.dims;
  RealVolume a = v, b(v.grid, 0.0);
  // x pass
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          const int j = ix + d;
          if (j >= 0 && j < nx) acc += w[static_cast<std::size_t>(d + r)] * a(j, iy, iz);
        }
        b(ix, iy, iz) = acc;
      }
  // y pass
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          const int j = iy + d;
          if (j >= 0 && j < ny) acc += w[static_cast<std::size_t>(d + r)] * b(ix, j, iz);
        }
        a(ix, iy, iz) = acc;
      }
  // z pass
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          const int j = iz + d;
          if (j >= 0 && j < nz) acc += w[static_cast<std::size_t>(d + r)] * a(ix, iy, j);
        }
        b(ix, iy, iz) = acc;
      }
  return b;
}

std::vector<double> ssim_window() {
  std::vector<double> w(kSsimWindow);
  const int r = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    w[static_cast<std::size_t>(i)] =
        std::exp(-0.5 * (i - r) * (i - r) / (kSsimSigma * kSsimSigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

double nrmse(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask) {
  check_grids(pred, gt, mask, "nrmse");
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (!inside(mask, i)) continue;
    const double d = pred.data[i] - gt.data[i];
    err2 += d * d;
    ref2 += gt.data[i] * gt.data[i];
  }
  if (ref2 == 0.0) throw DataError("nrmse: ground truth is zero within the mask");
  return 100.0 * std::sqrt(err2 / ref2);
}

double psnr(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask) {
  check_grids(pred, gt, mask, "psnr");
  double err2 = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (!inside(mask, i)) continue;
    const double d = pred.data[i] - gt.data[i];
    err2 += d * d;
    ++n;
  }
  if (n == 0) throw DataError("psnr: empty mask");
  const double mse = err2 / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = masked_range(gt, mask);
  return 10.0 * std::log10(peak * peak / mse);
}

double hfen(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask) {
  check_grids(pred, gt, mask, "hfen");
  RealVolume diff = pred;
  add_scaled(diff, gt, -1.0);
  const RealVolume num = log_filter(diff);
  const RealVolume den = log_filter(gt);
  double num2 = 0.0, den2 = 0.0;
  for (std::size_t i = 0; i < den.data.size(); ++i) {
    if (!inside(mask, i)) continue;
    num2 += num.data[i] * num.data[i];
    den2 += den.data[i] * den.data[i];
  }
  if (den2 == 0.0) throw DataError("hfen: filtered ground truth is zero within the mask");
  return 100.0 * std::sqrt(num2 / den2);
}

double ssim3d(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask) {
  check_grids(pred, gt, mask, "ssim");
  const auto [nx, ny, nz] = gt.grid.dims;
  if (std::min({nx, ny, nz}) < kSsimWindow) {
    throw DataError("volume smaller than the 11^3 SSIM window");
  }
  const double range = masked_range(gt, mask);
  const double c1 = (kSsimK1 * range) * (kSsimK1 * range);
  const double c2 = (kSsimK2 * range) * (kSsimK2 * range);

  const auto w = ssim_window();
  RealVolume pp = pred, gg = gt, pg = pred;
  for (std::size_t i = 0; i < pp.data.size(); ++i) {
    pp.data[i] = pred.data[i] * pred.data[i];
    gg.data[i] = gt.data[i] * gt.data[i];
    pg.data[i] = pred.data[i] * gt.data[i];
  }
  const RealVolume mu_p = separable_filter(pred, w);
  const RealVolume mu_g = separable_filter(gt, w);
  const RealVolume m_pp = separable_filter(pp, w);
  const RealVolume m_gg = separable_filter(gg, w);
  const RealVolume m_pg = separable_filter(pg, w);

  const int r = kSsimWindow / 2;
  double acc = 0.0;
  std::int64_t count = 0;
  for (int iz = r; iz < nz - r; ++iz) {
    for (int iy = r; iy < ny - r; ++iy) {
      for (int ix = r; ix < nx - r; ++ix) {
        const std::size_t i = static_cast<std::size_t>(gt.grid.index(ix, iy, iz));
        if (!inside(mask, i)) continue;
        const double mp = mu_p.data[i], mg = mu_g.data[i];
        const double vp = m_pp.data[i] - mp * mp;
        const double vg = m_gg.data[i] - mg * mg;
        const double cov = m_pg.data[i] - mp * mg;
        acc += ((2.0 * mp * mg + c1) * (2.0 * cov + c2)) /
               ((mp * mp + mg * mg + c1) * (vp + vg + c2));
        ++count;
      }
    }
  }
  if (count == 0) throw DataError("ssim: no masked centers with a full window");
  return acc / static_cast<double>(count);
}

MetricsReport evaluate_all(const RealVolume& pred, const RealVolume& gt,
                           const RealVolume* mask) {
  MetricsReport r;
  r.nrmse_percent = nrmse(pred, gt, mask);
  r.psnr_db = psnr(pred, gt, mask);
  r.hfen_percent = hfen(pred, gt, mask);
  r.ssim = ssim3d(pred, gt, mask);
  r.mask_voxels = count_mask(gt, mask);
  return r;
}

std::string metric_conventions() {
  return "nrmse=100*l2(pred-gt)/l2(gt); psnr peak=range(gt) in mask; "
         "hfen=LoG 15^3 sigma=1.5vox zero-sum periodic-fft conv, mask after filter; "
         "ssim=11^3 gaussian sigma=1.5 K1=0.01 K2=0.03 valid-window, L=range(gt) in mask";
}

namespace {

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_csv(const MetricsReport& report) {
  std::string out = "nrmse_percent,psnr_db,hfen_percent,ssim,mask_voxels,conventions\n";
  out += fmt_double(report.nrmse_percent) + "," + fmt_double(report.psnr_db) + "," +
         fmt_double(report.hfen_percent) + "," + fmt_double(report.ssim) + "," +
         std::to_string(report.mask_voxels) + ",\"" + metric_conventions() + "\"\n";
  return out;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::json j;
  j["nrmse_percent"] = report.nrmse_percent;
  if (std::isinf(report.psnr_db)) {
    j["psnr_db"] = report.psnr_db > 0 ? "inf" : "-inf";
  } else {
    j["psnr_db"] = report.psnr_db;
  }
  j["hfen_percent"] = report.hfen_percent;
  j["ssim"] = report.ssim;
  j["mask_voxels"] = report.mask_voxels;
  j["conventions"] = metric_conventions();
  return j.dump(2) + "\n";
}

}  // namespace lpqsm
