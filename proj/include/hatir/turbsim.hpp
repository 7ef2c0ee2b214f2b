#pragma once

// Synthetic turbulence degradation: per-frame random tilt warp, Gaussian
// blur, low-frequency grayscale drift, then block-average downsampling.
// Every random field is keyed by (seed, frame index, role), so any frame can
// be regenerated on its own.

#include <cstdint>
#include <filesystem>
#include <string>

#include "hatir/vidcore.hpp"

namespace hatir {

struct TurbulenceParams {
  double tilt_strength = 0.0;     // RMS displacement, pixels
  double tilt_correlation = 4.0;  // Gaussian smoothing radius of the tilt noise, pixels
  double blur_sigma = 0.0;        // PSF standard deviation, pixels
  double drift_amplitude = 0.0;   // grayscale drift, intensity units
  int scale = 1;                  // integer downscale factor
  std::uint64_t seed = 0;

  void validate() const;
};

enum class NoiseRole : std::uint32_t { TiltX = 1, TiltY = 2, DriftOffset = 3, DriftField = 4 };

// Seed for the generator behind one (seed, frame, role) stream.
std::uint64_t stream_key(std::uint64_t seed, std::uint32_t frame, NoiseRole role) noexcept;

// Smoothed white-noise displacement field rescaled to the requested RMS
// (sqrt of mean dx^2 + dy^2).
FlowField random_tilt_field(int height, int width, const TurbulenceParams& params, int frame_index);

// Additive grayscale drift for one frame (single channel, broadcast over C).
Frame drift_field(int height, int width, const TurbulenceParams& params, int frame_index);

VideoTensor degrade(const VideoTensor& hr, const TurbulenceParams& params);

// key=value lines recording every parameter and the seed.
std::string turbulence_manifest(const TurbulenceParams& params);

// Reads `hr_path`, writes the degraded sequence to `lr_path`, a verbatim copy
// of the HR input to `hr_copy_path`, and a manifest next to the LR output
// (or at `manifest_path` when given).
void make_pair(const std::filesystem::path& hr_path, const TurbulenceParams& params,
               const std::filesystem::path& lr_path, const std::filesystem::path& hr_copy_path,
               const std::filesystem::path& manifest_path = {});

}  // namespace hatir
