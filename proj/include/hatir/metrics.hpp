#pragma once

// Full-reference quality metrics and temporal-stability diagnostics.

#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "hatir/vidcore.hpp"

namespace hatir {

// 10 log10(peak^2 / MSE); identical frames give +infinity.
double psnr(const Frame& ref, const Frame& test, double peak);

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5) over valid
// window positions, C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Multi-channel
// frames average the per-channel scores.
double ssim(const Frame& ref, const Frame& test, double peak);

// Population variance over time of each line sample.
std::vector<double> temporal_profile_variance(const VideoTensor& video, const SamplingLine& line);

// Maximum of the reference sequence; used when the peak is "auto".
double auto_peak(const VideoTensor& ref);

struct MetricReport {
  double peak = 0.0;
  std::vector<double> psnr;   // +inf where frames are identical
  std::vector<double> ssim;
  std::vector<bool> identical;
  double mean_psnr = 0.0;     // +inf only when every frame is identical
  double mean_ssim = 0.0;
  std::optional<std::vector<double>> profile_variance;
};

MetricReport evaluate(const VideoTensor& ref, const VideoTensor& test, std::optional<double> peak = std::nullopt);

// frame,psnr,ssim,identical rows followed by a `mean` row. Infinite PSNR is
// written as `inf`.
void save_metrics_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace hatir
