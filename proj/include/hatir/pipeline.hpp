#pragma once

// Restoration chain and its flat key=value configuration.
//
// restore(): phasor mask -> phasorflow -> guided sampling from the LR latent
// -> decoder feature pass -> bilinear upsample by `scale`.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hatir/flow.hpp"
#include "hatir/guidance.hpp"
#include "hatir/metrics.hpp"
#include "hatir/phasor.hpp"
#include "hatir/tad.hpp"
#include "hatir/turbsim.hpp"

namespace hatir {

enum class DenoiserKind { Oracle, Zero };

struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  int verbosity = 1;

  PhasorConfig phasor;
  TurbulenceParams turb;
  FlowConfig flow;

  int guide_steps = 20;
  GuidanceConfig guide;
  double sigma_max = 1.0;   // sigma^2 at the noisiest step
  double sigma_min = 1e-4;  // sigma^2 at t = 0
  DenoiserKind denoiser = DenoiserKind::Oracle;

  bool tad_enabled = true;
  std::uint64_t tad_seed = 0;
  double tad_res_scale = 0.0;  // 0 keeps the ResBlock at identity
  double tad_lambda = 0.1;
  double tad_gate_weight = -1.0, tad_gate_bias = 0.0;
  double tad_attn_weight = 1.0, tad_attn_bias = 0.0;

  int scale = 1;                    // output upsample factor
  std::optional<double> peak;       // metrics peak; empty means reference max

  // Sets one key from its text form. Unknown keys and unparsable values
  // raise a Config error naming the key.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  std::string to_text() const;
  static PipelineConfig from_text(std::string_view text);
  static PipelineConfig load(const std::filesystem::path& path);

  // Module configs with the global seed folded in.
  FlowConfig flow_config() const;
  TadWeights tad_weights(int channels) const;
  NoiseSchedule schedule() const;

  void validate() const;
};

struct RestoreResult {
  VideoTensor output;       // HR, dims x scale
  VideoTensor sampled;      // guided sampler output at latent resolution
  VideoTensor decoded;      // after the decoder feature pass
  PhasorMask mask;
  FlowSet flows;
  std::vector<VideoTensor> trajectory;
};

// `clean`, when given, is the oracle target; HR-sized targets are
// box-averaged to latent resolution. Without it the oracle targets the
// observation itself.
RestoreResult restore(const VideoTensor& lr, const PipelineConfig& cfg,
                      const std::optional<VideoTensor>& clean = std::nullopt, bool keep_trajectory = false);

// Same chain with a caller-supplied denoiser; `cfg.denoiser` is ignored.
RestoreResult restore(const VideoTensor& lr, const PipelineConfig& cfg, const Denoiser& denoiser,
                      bool keep_trajectory = false);

// File-level wrapper: writes the output, `<output>.manifest.txt`, optional
// trajectory frames (`step_XX.irv` in `trajectory_dir`), and returns metrics
// against `clean` when it matches the output size.
std::optional<MetricReport> run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& input,
                                         const std::filesystem::path& output,
                                         const std::optional<std::filesystem::path>& clean = std::nullopt,
                                         const std::optional<std::filesystem::path>& trajectory_dir = std::nullopt);

}  // namespace hatir
