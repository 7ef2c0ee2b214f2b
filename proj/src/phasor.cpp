#include "hatir/phasor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hatir/error.hpp"

namespace hatir {

PhasorMask::PhasorMask(Frame values) : values_(std::move(values)) {
  require(values_.channels() == 1, ErrorKind::Shape, "phasor mask must be single-channel");
}

PhasorMask PhasorMask::constant(int height, int width, float value) {
  return PhasorMask(Frame(height, width, 1, value));
}

PhasorMask PhasorMask::scaled(float factor) const {
  Frame f = values_;
  for (float& v : f.data()) v *= factor;
  return PhasorMask(std::move(f));
}

ComplexFrame temporal_dft(const VideoTensor& video, int k) {
  require(video.channels() == 1, ErrorKind::Shape, "temporal_dft: expected single-channel video");
  const int T = video.frames();
  require(T >= 2, ErrorKind::Precondition, "temporal_dft: need at least 2 frames");
  require(k >= 0 && k < T, ErrorKind::Range,
          "temporal_dft: harmonic " + std::to_string(k) + " outside [0, " + std::to_string(T) + ")");

  std::vector<std::complex<double>> twiddle(T);
  for (int t = 0; t < T; ++t) {
    // Reduce k*t mod T first so the angle stays small and exact for k = 0.
    const double angle = -2.0 * std::numbers::pi * static_cast<double>((static_cast<long long>(k) * t) % T) / T;
    twiddle[t] = {std::cos(angle), std::sin(angle)};
  }

  ComplexFrame out{video.height(), video.width(),
                   std::vector<std::complex<double>>(static_cast<std::size_t>(video.height()) * video.width())};
  const auto data = video.data();
  const std::size_t plane = out.values.size();
  for (std::size_t p = 0; p < plane; ++p) {
    std::complex<double> acc = 0;
    for (int t = 0; t < T; ++t) acc += static_cast<double>(data[t * plane + p]) * twiddle[t];
    out.values[p] = acc;
  }
  return out;
}

Frame harmonic_magnitude(const VideoTensor& video, int k) {
  const ComplexFrame dft = temporal_dft(video, k);
  Frame mag(dft.height, dft.width, 1);
  for (std::size_t p = 0; p < dft.values.size(); ++p) mag.data()[p] = static_cast<float>(std::abs(dft.values[p]));
  return mag;
}

PhasorMask phasor_mask(const VideoTensor& video, const PhasorConfig& cfg) {
  require(video.frames() >= 2, ErrorKind::Precondition, "phasor_mask: need at least 2 frames");
  require(cfg.alpha > 0, ErrorKind::Precondition, "phasor_mask: alpha must be positive");
  require(cfg.harmonic >= 1 && cfg.harmonic < video.frames(), ErrorKind::Range,
          "phasor_mask: harmonic must satisfy 1 <= k < T");

  const ComplexFrame dft = temporal_dft(video, cfg.harmonic);
  std::vector<double> mag(dft.values.size());
  double mean = 0;
  for (std::size_t p = 0; p < mag.size(); ++p) {
    mag[p] = std::abs(dft.values[p]);
    mean += mag[p];
  }
  mean /= static_cast<double>(mag.size());

  Frame out(dft.height, dft.width, 1);
  for (std::size_t p = 0; p < mag.size(); ++p) {
    const double z = cfg.alpha * (mag[p] - mean);
    // Keep the result strictly inside (0, 1) in float precision.
    const double s = 1.0 / (1.0 + std::exp(-z));
    out.data()[p] = std::clamp(static_cast<float>(s), std::numeric_limits<float>::min(),
                               std::nextafter(1.0f, 0.0f));
  }
  return PhasorMask(std::move(out));
}

}  // namespace hatir
