#pragma once

// Heat-aware guidance for the reverse sampling loop.
//
// The warping energy of a latent sequence z (N frames) under pair flows is
//   E(z) = sum_j |warp(z_j, backward[j]) - z_{j+1}|_1
//        + sum_j |warp(z_{j+1}, forward[j]) - z_j|_1,
// evaluated per pixel so a joint (occlusion x phasor) mask can weight the
// error field before summation. The guidance term is the exact subgradient
// of the masked energy, scaled by eta * sigma_t^2, and each denoising step is
//   z^t = z^{t+1} - sigma_t^2 * eps(z^{t+1}, t) - g^t.

#include <functional>
#include <memory>
#include <vector>

#include "hatir/flow.hpp"
#include "hatir/phasor.hpp"
#include "hatir/vidcore.hpp"

namespace hatir {

// sigma_t^2 for t = 0 .. steps-1, increasing with t.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> variances);
  // Linear from `max_variance` at t = steps-1 down to `min_variance` at t = 0.
  static NoiseSchedule linear(int steps, double max_variance = 1.0, double min_variance = 1e-4);

  int steps() const noexcept { return static_cast<int>(variances_.size()); }
  double variance(int t) const;

 private:
  std::vector<double> variances_;
};

// Noise-prediction contract eps(z, t). Implementations must be shape
// preserving and callable repeatedly from the sampling loop.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual VideoTensor predict_noise(const VideoTensor& z, int step) const = 0;
};

// eps(z, t) = (z - clean) / sigma_t^2: one step lands exactly on `clean`.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(VideoTensor clean, NoiseSchedule schedule);
  VideoTensor predict_noise(const VideoTensor& z, int step) const override;

 private:
  VideoTensor clean_;
  NoiseSchedule schedule_;
};

class ZeroDenoiser final : public Denoiser {
 public:
  VideoTensor predict_noise(const VideoTensor& z, int step) const override;
};

// Adapts any callable with the eps(z, t) signature.
class FunctionDenoiser final : public Denoiser {
 public:
  using Fn = std::function<VideoTensor(const VideoTensor&, int)>;
  explicit FunctionDenoiser(Fn fn) : fn_(std::move(fn)) {}
  VideoTensor predict_noise(const VideoTensor& z, int step) const override;

 private:
  Fn fn_;
};

struct GuidanceConfig {
  double eta = 1.0;
  double tau_occ = 1.0;   // pixels
  double fd_step = 1e-4;  // finite-difference step used by verification code

  void validate() const;
};

// Masks aligned with the two residual families of the energy. Each holds
// N-1 single-channel frames:
//   next_term[j] weights warp(z_j, backward[j]) - z_{j+1} (grid of frame j+1)
//   prev_term[j] weights warp(z_{j+1}, forward[j]) - z_j  (grid of frame j)
struct JointMasks {
  std::vector<Frame> next_term;
  std::vector<Frame> prev_term;

  JointMasks scaled(float factor) const;
  static JointMasks ones(int pairs, int height, int width);
};

struct GuidanceInputs {
  FlowSet flows;
  JointMasks masks;
};

struct WarpingEnergy {
  double total = 0.0;                 // unmasked L1 energy
  std::vector<Frame> next_residual;   // signed residuals, same layout as JointMasks
  std::vector<Frame> prev_residual;

  // |residual| summed over both families, per pixel of each frame (N frames).
  std::vector<Frame> error_map(int frames) const;
};

WarpingEnergy warping_energy(const VideoTensor& z, const FlowSet& flows);

double masked_energy(const VideoTensor& z, const GuidanceInputs& inputs);

// 1 where |first(x) + second(x + first(x))| < tau, else 0.
Frame occlusion_mask(const FlowField& first, const FlowField& second, double tau);

Frame joint_mask(const Frame& occlusion, const Frame& phasor);

// Occlusion masks from forward-backward consistency multiplied by the
// phasor mask, for both residual families.
JointMasks build_joint_masks(const FlowSet& flows, const PhasorMask& phasor, double tau);

// Subgradient of masked_energy w.r.t. z (sign(0) = 0), unscaled.
VideoTensor masked_energy_gradient(const VideoTensor& z, const GuidanceInputs& inputs);

// eta * sigma_t^2 * gradient.
VideoTensor guidance_term(const VideoTensor& z, const GuidanceInputs& inputs, const NoiseSchedule& schedule,
                          int t, double eta);

VideoTensor guided_step(const VideoTensor& z_next, int t, const Denoiser& denoiser, const NoiseSchedule& schedule,
                        const GuidanceInputs& inputs, double eta);

struct SampleResult {
  VideoTensor final;
  std::vector<VideoTensor> trajectory;  // z^{T_s-1} .. z^0 when requested
};

// Runs guided_step from t = steps-1 down to 0 starting at z_init.
SampleResult sample(const VideoTensor& z_init, const Denoiser& denoiser, const NoiseSchedule& schedule,
                    const GuidanceInputs& inputs, double eta, bool keep_trajectory = false);

}  // namespace hatir
