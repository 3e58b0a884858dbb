#pragma once

#include <cstdint>
#include <string>

#include "lpqsm/grid.hpp"

namespace lpqsm {

/// The four evaluation metrics over an optional 0/1 mask (null = all ones).
/// Conventions:
///  - nrmse: 100 * |pred - gt|_2 / |gt|_2 over masked voxels
///  - psnr: 10 log10(peak^2 / MSE), peak = max(gt) - min(gt) within the mask
///    (peak falls back to 1 for constant gt); +inf when MSE = 0
///  - hfen: 100 * |LoG(pred - gt)|_2 / |LoG(gt)|_2 with a 15^3 zero-sum
///    Laplacian-of-Gaussian filter, sigma = 1.5 voxels, periodic FFT
///    convolution, mask applied after filtering
///  - ssim: mean local SSIM over masked centers whose 11^3 window fits the
///    volume; Gaussian window sigma = 1.5, K1 = 0.01, K2 = 0.03, dynamic
///    range = gt range within the mask (fallback 1 for constant gt)
struct MetricsReport {
  double nrmse_percent = 0.0;
  double psnr_db = 0.0;
  double hfen_percent = 0.0;
  double ssim = 0.0;
  std::int64_t mask_voxels = 0;
};

double nrmse(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask = nullptr);
double psnr(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask = nullptr);
double hfen(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask = nullptr);
double ssim3d(const RealVolume& pred, const RealVolume& gt, const RealVolume* mask = nullptr);

MetricsReport evaluate_all(const RealVolume& pred, const RealVolume& gt,
                           const RealVolume* mask = nullptr);

/// One-line human/machine readable statement of the conventions above; it is
/// embedded in every serialized report.
std::string metric_conventions();

/// Header + one data row; doubles at full precision, infinity as "inf".
std::string report_csv(const MetricsReport& report);
std::string report_json(const MetricsReport& report);

}  // namespace lpqsm
