#pragma once

// Turbulence-aware flow estimation.
//
// A classical pyramidal block matcher supplies the coarse flow. The refiner
// then runs L layers per clip: the source features are warped with the
// phasor-gated flow, a convolutional head predicts M residual offsets that
// are averaged into the flow, and a per-pixel N-way attention (query from the
// target frame, keys/values sampled from the N source frames at the updated
// displacement) produces refined features whose attention weights are scaled
// by the phasor mask. After the last layer a second head recomputes the
// offset from the refined features. Clips are processed in order and the
// last refined feature of each clip becomes the source of the next clip's
// first target.
//
// Flow convention: flow(ref, tgt) satisfies ref(x) ~= tgt(x + flow(x)), so
// warp(tgt, flow) ~= ref.

#include <cstdint>
#include <vector>

#include "hatir/layers.hpp"
#include "hatir/phasor.hpp"
#include "hatir/vidcore.hpp"

namespace hatir {

struct CoarseFlowConfig {
  int levels = 3;        // pyramid levels including full resolution
  int search_radius = 4; // +/- pixels searched per level
  int patch_radius = 2;  // SSD window is (2r+1)^2
};

enum class HeadInit { Zero, Seeded };

struct FlowConfig {
  int clip_length = 4;   // N
  int layers = 2;        // L
  int offsets = 3;       // M
  int channels = 16;     // C
  int head_hidden = 8;
  bool refine = true;
  HeadInit head_init = HeadInit::Zero;
  float head_scale = 0.05f;  // U(-s, s) for seeded heads
  std::uint64_t seed = 0;
  CoarseFlowConfig coarse;
  PhasorConfig phasor;

  void validate() const;
};

struct RefinerWeights {
  int channels = 0;
  int offsets = 0;
  int layers = 0;

  Conv2d features;                   // 1 -> C, 3x3
  std::vector<ConvHead> residual;    // one per layer: (2C + 2) -> 2M
  Dense proj_q, proj_k, proj_v;      // C x C
  Dense mlp_in, mlp_out;             // C -> C -> C
  ConvHead final_head;               // (2C + 2) -> 2M

  // Projections and MLP ~ U(-1/sqrt(C), 1/sqrt(C)), feature kernel
  // U(-1/3, 1/3); heads zero unless cfg.head_init == Seeded.
  static RefinerWeights make(const FlowConfig& cfg);
};

struct ClipFeatures {
  int clip_index = 0;
  int layer = 0;
  std::vector<Frame> frames;  // N frames, H x W x C
};

// Pair flows of a T-frame sequence, both directions, T - 1 entries each.
// forward[j]:  frame j -> frame j+1, i.e. frame_j(x) ~= frame_{j+1}(x + f)
// backward[j]: frame j+1 -> frame j
struct FlowSet {
  std::vector<FlowField> forward;
  std::vector<FlowField> backward;
};

struct RefineStep {
  std::vector<FlowField> flows;           // f + mean_m delta_m
  std::vector<Frame> features;            // attention term + MLP branch
  std::vector<Frame> attention;           // mask-scaled attention term alone
  std::vector<std::vector<FlowField>> deltas;  // [n][m] residual offsets
  double max_rowsum_error = 0.0;          // max |sum softmax - 1| over pixels
};

// Coarse-to-fine SSD block matching with zero-bias tie-breaking and parabolic
// sub-pixel refinement at full resolution. Inputs must be single-channel.
FlowField coarse_flow(const Frame& ref, const Frame& tgt, const CoarseFlowConfig& cfg = {});

// One 3x3 convolution to C channels, then segmentation into clips of N
// (the final clip padded by repeating the last frame).
std::vector<ClipFeatures> shallow_features(const VideoTensor& video, const RefinerWeights& weights,
                                           int clip_length);

// Residual offsets: head(concat(aligned, current, flow)), split into M
// two-channel fields.
std::vector<FlowField> predict_residual(const ConvHead& head, const Frame& aligned, const Frame& current,
                                        const FlowField& flow, int offsets);

// Numerically stable softmax of q.k_j / sqrt(C) over j.
std::vector<double> attention_weights(std::span<const float> query,
                                      const std::vector<std::vector<float>>& keys);

// source[n] is the predecessor frame of current[n]; flows[n] aligns them
// (warp(source[n], flows[n]) ~= current[n]).
RefineStep refine_flow_step(const ClipFeatures& source, const ClipFeatures& current,
                            const std::vector<FlowField>& flows, const PhasorMask& mask,
                            const RefinerWeights& weights, int layer);

// Coarse pair flows for every adjacent pair, both directions.
FlowSet coarse_flows(const VideoTensor& video, const CoarseFlowConfig& cfg = {});

// Full estimator. With cfg.refine == false this is coarse_flows.
FlowSet phasorflow(const VideoTensor& video, const FlowConfig& cfg);
FlowSet phasorflow(const VideoTensor& video, const FlowConfig& cfg, const PhasorMask& mask,
                   const RefinerWeights& weights);

// Stacks T-1 flow fields into a (T-1) x H x W x 2 tensor and back.
VideoTensor flows_to_tensor(const std::vector<FlowField>& flows);
std::vector<FlowField> tensor_to_flows(const VideoTensor& tensor);

// Per-pixel Euclidean magnitude.
Frame flow_magnitude(const FlowField& flow);

}  // namespace hatir
