#pragma once

// Turbulence-aware decoding mechanisms: the bidirectional warping-error
// heatmap, the logistic gate it drives, gated residual features, the
// gradient-driven structure attention, and the three reconstruction losses.

#include <cstdint>

#include "hatir/flow.hpp"
#include "hatir/layers.hpp"
#include "hatir/vidcore.hpp"

namespace hatir {

struct TadWeights {
  int channels = 1;
  Conv2d res_first;   // ResBlock: x + res_second(relu(res_first(x)))
  Conv2d res_second;
  Dense out_proj;     // 1x1 conv after the ResBlock
  float gate_weight = 1.0f, gate_bias = 0.0f;  // G = logistic(w * T_map + b)
  float attn_weight = 1.0f, attn_bias = 0.0f;  // A = logistic(w * |grad f| + b)
  float temporal_prev = 0.5f, temporal_cur = -1.0f, temporal_next = 0.5f;
  float lambda = 0.1f;

  // Unit gate/attention weights, zero biases, identity ResBlock and 1x1 conv.
  static TadWeights test_init(int channels = 1);
  // Decoder defaults used by the restoration pipeline: identity ResBlock,
  // negative gate weight so strongly disturbed pixels get a small gate.
  static TadWeights decoder_default(int channels = 1);
  // test_init with U(-scale, scale) ResBlock kernels.
  static TadWeights seeded(int channels, std::uint64_t seed, float scale = 0.05f);
};

struct LossWeights {
  double thermal = 1.0;
  double edge = 0.5;
  double diff = 0.5;
};

struct LossReport {
  double thermal = 0.0;
  double edge = 0.0;
  double diff = 0.0;
  double total = 0.0;
  LossWeights weights;
};

// One available temporal neighbour and the flow aligning it to the centre
// frame (warp(frame, flow) ~= centre).
struct Neighbor {
  const Frame* frame = nullptr;
  const FlowField* flow = nullptr;
};

// Sum over available neighbours of |warp(neighbour, flow) - centre|, L1 over
// channels. Missing neighbours (nullptr) drop out of the sum.
Frame turbulence_map(const Frame& center, Neighbor prev, Neighbor next);
Frame turbulence_map(const Frame& x_prev, const Frame& x_cur, const Frame& x_next, const FlowField& f_to_prev,
                     const FlowField& f_to_next);

Frame gate_mask(const Frame& t_map, const TadWeights& weights);

// G o out_proj(ResBlock(z)); G is single-channel and broadcast.
Frame tmg(const Frame& z, const Frame& gate, const TadWeights& weights);

// f + lambda * (f o A), A = logistic(w_a * mean_c |Sobel f_c| + b_a).
Frame ir_saa(const Frame& f, const TadWeights& weights, double lambda);

// Losses over sequences; `mask` is H x W x 1 and applies to every frame and
// channel.
double thermal_loss(const VideoTensor& pred, const VideoTensor& gt, const Frame& mask);
double edge_loss(const VideoTensor& pred, const VideoTensor& gt, const Frame& mask);
double frame_diff_loss(const VideoTensor& pred, const VideoTensor& gt);
LossReport total_loss(const VideoTensor& pred, const VideoTensor& gt, const Frame& mask,
                      const LossWeights& weights = {});

// Decoder feature pass over a latent sequence: aligned temporal convolution,
// turbulence gating, structure attention, added back to the latent.
VideoTensor tad_decode(const VideoTensor& latents, const FlowSet& flows, const TadWeights& weights);

}  // namespace hatir
