#include "hatir/tad.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hatir/error.hpp"

namespace hatir {

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_pair(const VideoTensor& a, const VideoTensor& b, const char* op) {
  require(a.shape() == b.shape(), ErrorKind::Shape, std::string(op) + ": pred and gt shapes differ");
}

void check_mask(const VideoTensor& v, const Frame& mask, const char* op) {
  require(mask.channels() == 1 && mask.height() == v.height() && mask.width() == v.width(), ErrorKind::Shape,
          std::string(op) + ": mask must be H x W x 1 matching the sequence");
}

Frame res_block(const Frame& z, const TadWeights& w) {
  if (w.res_second.is_zero() && std::all_of(w.res_second.bias.begin(), w.res_second.bias.end(),
                                            [](float b) { return b == 0.0f; }))
    return z;
  Frame r = w.res_second(relu(w.res_first(z)));
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] += z.data()[i];
  return r;
}

}  // namespace

TadWeights TadWeights::test_init(int channels) {
  TadWeights w;
  w.channels = channels;
  w.res_first = Conv2d::zeros(channels, channels, 3);
  w.res_second = Conv2d::zeros(channels, channels, 3);
  w.out_proj = Dense::identity(channels);
  return w;
}

TadWeights TadWeights::decoder_default(int channels) {
  TadWeights w = test_init(channels);
  w.gate_weight = -1.0f;
  w.gate_bias = 0.0f;
  w.lambda = 0.1f;
  return w;
}

TadWeights TadWeights::seeded(int channels, std::uint64_t seed, float scale) {
  TadWeights w = test_init(channels);
  std::mt19937_64 rng(seed ^ 0x7AD0DECull);
  w.res_first = Conv2d::uniform(channels, channels, 3, scale, rng);
  w.res_second = Conv2d::uniform(channels, channels, 3, scale, rng);
  return w;
}

Frame turbulence_map(const Frame& center, Neighbor prev, Neighbor next) {
  Frame out(center.height(), center.width(), 1);
  const int nc = center.channels();
  for (const Neighbor& nb : {prev, next}) {
    if (nb.frame == nullptr) continue;
    require(nb.flow != nullptr, ErrorKind::Precondition, "turbulence_map: neighbour without a flow");
    require(nb.frame->same_dims(center), ErrorKind::Shape, "turbulence_map: neighbour dims differ");
    const Frame w = warp(*nb.frame, *nb.flow);
    for (std::size_t p = 0; p < out.size(); ++p) {
      double s = 0;
      for (int c = 0; c < nc; ++c) s += std::abs(static_cast<double>(w.data()[p * nc + c]) - center.data()[p * nc + c]);
      out.data()[p] += static_cast<float>(s);
    }
  }
  return out;
}

Frame turbulence_map(const Frame& x_prev, const Frame& x_cur, const Frame& x_next, const FlowField& f_to_prev,
                     const FlowField& f_to_next) {
  return turbulence_map(x_cur, {&x_prev, &f_to_prev}, {&x_next, &f_to_next});
}

Frame gate_mask(const Frame& t_map, const TadWeights& weights) {
  require(t_map.channels() == 1, ErrorKind::Shape, "gate_mask: T_map must be single-channel");
  Frame g(t_map.height(), t_map.width(), 1);
  for (std::size_t i = 0; i < g.size(); ++i)
    g.data()[i] = static_cast<float>(logistic(static_cast<double>(weights.gate_weight) * t_map.data()[i] + weights.gate_bias));
  return g;
}

Frame tmg(const Frame& z, const Frame& gate, const TadWeights& weights) {
  require(gate.channels() == 1 && gate.same_grid(z), ErrorKind::Shape, "tmg: gate must be H x W x 1 matching z");
  require(z.channels() == weights.channels, ErrorKind::Shape, "tmg: feature width differs from weights");
  Frame f = weights.out_proj(res_block(z, weights));
  const int nc = f.channels();
  for (std::size_t p = 0; p < gate.size(); ++p)
    for (int c = 0; c < nc; ++c) f.data()[p * nc + c] *= gate.data()[p];
  return f;
}

Frame ir_saa(const Frame& f, const TadWeights& weights, double lambda) {
  const int nc = f.channels();
  Frame grad(f.height(), f.width(), 1);
  for (int c = 0; c < nc; ++c) {
    const Frame g = sobel_gradient_magnitude(f.channel(c));
    for (std::size_t p = 0; p < grad.size(); ++p) grad.data()[p] += g.data()[p] / static_cast<float>(nc);
  }
  Frame out = f;
  for (std::size_t p = 0; p < grad.size(); ++p) {
    const double a = logistic(static_cast<double>(weights.attn_weight) * grad.data()[p] + weights.attn_bias);
    for (int c = 0; c < nc; ++c) {
      const double v = f.data()[p * nc + c];
      out.data()[p * nc + c] = static_cast<float>(v + lambda * v * a);
    }
  }
  return out;
}

double thermal_loss(const VideoTensor& pred, const VideoTensor& gt, const Frame& mask) {
  check_pair(pred, gt, "thermal_loss");
  check_mask(pred, mask, "thermal_loss");
  const int nc = pred.channels();
  const std::size_t plane = mask.size();
  double s = 0;
  for (int t = 0; t < pred.frames(); ++t)
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < nc; ++c) {
        const std::size_t i = (t * plane + p) * nc + c;
        s += std::abs((static_cast<double>(pred.data()[i]) - gt.data()[i]) * mask.data()[p]);
      }
  return s;
}

double edge_loss(const VideoTensor& pred, const VideoTensor& gt, const Frame& mask) {
  check_pair(pred, gt, "edge_loss");
  check_mask(pred, mask, "edge_loss");
  double s = 0;
  for (int t = 0; t < pred.frames(); ++t) {
    const Frame pf = pred.frame(t), gf = gt.frame(t);
    for (int c = 0; c < pred.channels(); ++c) {
      const Frame lp = laplacian(pf.channel(c)), lg = laplacian(gf.channel(c));
      for (std::size_t p = 0; p < mask.size(); ++p)
        s += std::abs((static_cast<double>(lp.data()[p]) - lg.data()[p]) * mask.data()[p]);
    }
  }
  return s;
}

double frame_diff_loss(const VideoTensor& pred, const VideoTensor& gt) {
  check_pair(pred, gt, "frame_diff_loss");
  require(pred.frames() >= 2, ErrorKind::Precondition, "frame_diff_loss: need at least 2 frames");
  const std::size_t n = static_cast<std::size_t>(pred.height()) * pred.width() * pred.channels();
  double s = 0;
  for (int t = 0; t + 1 < pred.frames(); ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = t * n + i, b = (t + 1) * n + i;
      const double dp = static_cast<double>(pred.data()[b]) - pred.data()[a];
      const double dg = static_cast<double>(gt.data()[b]) - gt.data()[a];
      s += std::abs(dp - dg);
    }
  return s;
}

LossReport total_loss(const VideoTensor& pred, const VideoTensor& gt, const Frame& mask, const LossWeights& weights) {
  LossReport r;
  r.weights = weights;
  r.thermal = thermal_loss(pred, gt, mask);
  r.edge = edge_loss(pred, gt, mask);
  r.diff = pred.frames() >= 2 ? frame_diff_loss(pred, gt) : 0.0;
  r.total = weights.thermal * r.thermal + weights.edge * r.edge + weights.diff * r.diff;
  return r;
}

VideoTensor tad_decode(const VideoTensor& latents, const FlowSet& flows, const TadWeights& weights) {
  const int T = latents.frames();
  require(latents.channels() == weights.channels, ErrorKind::Shape, "tad_decode: latent width differs from weights");
  require(T == 1 || (flows.forward.size() == static_cast<std::size_t>(T - 1) &&
                     flows.backward.size() == static_cast<std::size_t>(T - 1)),
          ErrorKind::Shape, "tad_decode: expected T-1 flows per direction");
  const std::vector<Frame> z = latents.to_frames();
  std::vector<Frame> out;
  out.reserve(T);
  for (int t = 0; t < T; ++t) {
    const Frame& cur = z[t];
    Neighbor prev, next;
    if (t > 0) prev = {&z[t - 1], &flows.backward[t - 1]};
    if (t + 1 < T) next = {&z[t + 1], &flows.forward[t]};

    // Aligned temporal convolution; a missing neighbour's tap moves to the
    // other side so the kernel keeps its sum.
    double kp = weights.temporal_prev, kn = weights.temporal_next;
    if (!prev.frame) { kn += kp; kp = 0; }
    if (!next.frame) { kp += kn; kn = 0; }
    Frame temporal = cur;
    for (float& v : temporal.data()) v *= weights.temporal_cur;
    for (auto [nb, k] : {std::pair{prev, kp}, std::pair{next, kn}}) {
      if (!nb.frame || k == 0) continue;
      const Frame w = warp(*nb.frame, *nb.flow);
      for (std::size_t i = 0; i < temporal.size(); ++i) temporal.data()[i] += static_cast<float>(k * w.data()[i]);
    }
    if (T == 1) std::fill(temporal.data().begin(), temporal.data().end(), 0.0f);

    const Frame gate = gate_mask(turbulence_map(cur, prev, next), weights);
    const Frame enhanced = ir_saa(tmg(temporal, gate, weights), weights, weights.lambda);
    Frame x = cur;
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += enhanced.data()[i];
    out.push_back(std::move(x));
  }
  return VideoTensor::from_frames(out);
}

}  // namespace hatir
