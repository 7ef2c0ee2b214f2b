#pragma once

// Temporal Fourier analysis of a single-channel sequence and the soft
// "phasor" mask derived from one harmonic's magnitude.

#include <complex>
#include <vector>

#include "hatir/vidcore.hpp"

namespace hatir {

struct PhasorConfig {
  int harmonic = 1;
  double alpha = 10.0;
};

struct ComplexFrame {
  int height = 0;
  int width = 0;
  std::vector<std::complex<double>> values;

  std::complex<double> at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Soft per-pixel weight, every value strictly inside (0, 1).
class PhasorMask {
 public:
  PhasorMask() = default;
  explicit PhasorMask(Frame values);

  // Uniform mask; used by tests and by callers that want gating disabled.
  static PhasorMask constant(int height, int width, float value);

  int height() const noexcept { return values_.height(); }
  int width() const noexcept { return values_.width(); }
  float at(int y, int x) const noexcept { return values_.at(y, x); }
  const Frame& frame() const noexcept { return values_; }

  PhasorMask scaled(float factor) const;

 private:
  Frame values_;
};

// Unnormalised forward DFT over time: sum_t I(x,t) exp(-2 pi i k t / T).
ComplexFrame temporal_dft(const VideoTensor& video, int k);

// |DFT_k(x)| per pixel.
Frame harmonic_magnitude(const VideoTensor& video, int k);

// logistic(alpha * (|DFT_k(x)| - mean_x |DFT_k|)).
PhasorMask phasor_mask(const VideoTensor& video, const PhasorConfig& cfg = {});

}  // namespace hatir
