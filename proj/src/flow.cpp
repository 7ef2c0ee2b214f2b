#include "hatir/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "hatir/error.hpp"
#include "hatir/parallel.hpp"

namespace hatir {

namespace {

// Bilinear sample of every channel at (x, y) into `out` (clamp-to-edge).
void sample_all(const Frame& f, double x, double y, float* out) {
  const int w = f.width(), h = f.height(), nc = f.channels();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy), w10 = (1 - fx) * fy, w11 = fx * fy;
  for (int c = 0; c < nc; ++c)
    out[c] = static_cast<float>(w00 * f.at(y0, x0, c) + w01 * f.at(y0, x1, c) + w10 * f.at(y1, x0, c) +
                                w11 * f.at(y1, x1, c));
}

Frame half_resolution(const Frame& f) {
  const int h = std::max(1, f.height() / 2), w = std::max(1, f.width() / 2);
  Frame out(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int n = 0;
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          const int sy = 2 * y + j, sx = 2 * x + i;
          if (sy < f.height() && sx < f.width()) {
            s += f.at(sy, sx);
            ++n;
          }
        }
      out.at(y, x) = static_cast<float>(s / n);
    }
  return out;
}

// Resamples a coarse flow onto a finer grid and rescales the vectors.
FlowField upsample_flow(const FlowField& coarse, int height, int width) {
  FlowField out(height, width);
  const double rx = static_cast<double>(coarse.width()) / width;
  const double ry = static_cast<double>(coarse.height()) / height;
  float v[2];
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      sample_all(coarse.components(), (x + 0.5) * rx - 0.5, (y + 0.5) * ry - 0.5, v);
      out.dx(y, x) = static_cast<float>(v[0] / rx);
      out.dy(y, x) = static_cast<float>(v[1] / ry);
    }
  return out;
}

FlowField median3x3(const FlowField& in) {
  const int h = in.height(), w = in.width();
  FlowField out(h, w);
  std::array<float, 9> bx{}, by{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int n = 0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          const int sy = std::clamp(y + j, 0, h - 1), sx = std::clamp(x + i, 0, w - 1);
          bx[n] = in.dx(sy, sx);
          by[n] = in.dy(sy, sx);
          ++n;
        }
      std::nth_element(bx.begin(), bx.begin() + 4, bx.end());
      std::nth_element(by.begin(), by.begin() + 4, by.end());
      out.dx(y, x) = bx[4];
      out.dy(y, x) = by[4];
    }
  return out;
}

// Window sums of `v` over (2r+1)^2 boxes truncated at the border.
void box_sum(std::vector<double>& v, std::vector<double>& tmp, int h, int w, int r) {
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) s += v[static_cast<std::size_t>(y) * w + i];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r); ++j) s += tmp[static_cast<std::size_t>(j) * w + x];
      v[static_cast<std::size_t>(y) * w + x] = s;
    }
}

// One level of block matching around `flow`; returns the updated field.
FlowField match_level(const Frame& ref, const Frame& tgt, const FlowField& flow, const CoarseFlowConfig& cfg,
                      bool subpixel) {
  const int h = ref.height(), w = ref.width(), r = cfg.search_radius;
  const int side = 2 * r + 1;
  const std::size_t npx = static_cast<std::size_t>(h) * w;

  std::vector<double> best(npx, std::numeric_limits<double>::infinity());
  std::vector<int> best_i(npx, 0), best_j(npx, 0);
  std::vector<double> costs(subpixel ? npx * side * side : 0);
  std::vector<double> diff(npx), tmp(npx);

  for (int j = -r; j <= r; ++j)
    for (int i = -r; i <= r; ++i) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double d = static_cast<double>(ref.at(y, x)) -
                           sample_bilinear(tgt, x + static_cast<double>(flow.dx(y, x)) + i,
                                           y + static_cast<double>(flow.dy(y, x)) + j);
          diff[p] = d * d;
        }
      box_sum(diff, tmp, h, w, cfg.patch_radius);
      const std::size_t slot = static_cast<std::size_t>(j + r) * side + (i + r);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double c = diff[p];
          if (subpixel) costs[p * side * side + slot] = c;
          bool take = c < best[p];
          if (!take && c == best[p]) {
            // Zero-bias tie-break: prefer the smaller total displacement.
            auto norm2 = [&](int a, int b) {
              const double u = flow.dx(y, x) + a, v = flow.dy(y, x) + b;
              return u * u + v * v;
            };
            take = norm2(i, j) < norm2(best_i[p], best_j[p]);
          }
          if (take) {
            best[p] = c;
            best_i[p] = i;
            best_j[p] = j;
          }
        }
    }

  FlowField out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      double ox = 0, oy = 0;
      if (subpixel) {
        auto cost_at = [&](int i, int j) { return costs[p * side * side + static_cast<std::size_t>(j + r) * side + (i + r)]; };
        const int bi = best_i[p], bj = best_j[p];
        const double c0 = cost_at(bi, bj);
        if (bi > -r && bi < r) {
          const double cm = cost_at(bi - 1, bj), cp = cost_at(bi + 1, bj);
          const double den = cm - 2 * c0 + cp;
          if (den > 0) ox = std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
        }
        if (bj > -r && bj < r) {
          const double cm = cost_at(bi, bj - 1), cp = cost_at(bi, bj + 1);
          const double den = cm - 2 * c0 + cp;
          if (den > 0) oy = std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
        }
      }
      out.dx(y, x) = static_cast<float>(flow.dx(y, x) + best_i[p] + ox);
      out.dy(y, x) = static_cast<float>(flow.dy(y, x) + best_j[p] + oy);
    }
  return median3x3(out);
}

FlowField scale_by_mask(const FlowField& flow, const PhasorMask& mask) {
  FlowField out = flow;
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x) {
      out.dx(y, x) *= mask.at(y, x);
      out.dy(y, x) *= mask.at(y, x);
    }
  return out;
}

FlowField add_mean_offset(const FlowField& flow, const std::vector<FlowField>& deltas) {
  FlowField out = flow;
  if (deltas.empty()) return out;
  const double inv = 1.0 / static_cast<double>(deltas.size());
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x) {
      double sx = 0, sy = 0;
      for (const FlowField& d : deltas) {
        sx += d.dx(y, x);
        sy += d.dy(y, x);
      }
      out.dx(y, x) = static_cast<float>(flow.dx(y, x) + sx * inv);
      out.dy(y, x) = static_cast<float>(flow.dy(y, x) + sy * inv);
    }
  return out;
}

std::vector<Frame> per_frame_features(const VideoTensor& video, const RefinerWeights& weights) {
  require(video.channels() == 1, ErrorKind::Shape, "flow: expected single-channel video");
  std::vector<Frame> out;
  out.reserve(video.frames());
  for (int t = 0; t < video.frames(); ++t) out.push_back(weights.features(video.frame(t)));
  return out;
}

// Refines the predecessor-alignment flows of an ordered frame sequence.
// to_prev[t] (t >= 1) satisfies warp(frame t-1, to_prev[t]) ~= frame t.
std::vector<FlowField> refine_chain(const std::vector<Frame>& feats, const std::vector<FlowField>& to_prev,
                                    const PhasorMask& mask, const RefinerWeights& weights, int clip_length) {
  const int T = static_cast<int>(feats.size());
  const int N = clip_length;
  const int clips = (T + N - 1) / N;
  const int h = feats.front().height(), w = feats.front().width();
  std::vector<FlowField> refined = to_prev;

  Frame carry;
  for (int k = 0; k < clips; ++k) {
    ClipFeatures source{k, 0, {}}, current{k, 0, {}};
    std::vector<FlowField> flows;
    for (int n = 0; n < N; ++n) {
      const int t = std::min(k * N + n, T - 1);
      const bool valid = k * N + n < T && t >= 1;
      current.frames.push_back(feats[t]);
      if (!valid)
        source.frames.push_back(feats[t]);
      else if (n == 0 && !carry.empty())
        source.frames.push_back(carry);
      else
        source.frames.push_back(feats[t - 1]);
      flows.push_back(valid ? to_prev[t] : FlowField(h, w));
    }

    std::vector<Frame> before_last = current.frames;
    std::vector<Frame> refined_feats;
    for (int layer = 0; layer < weights.layers; ++layer) {
      RefineStep step = refine_flow_step(source, current, flows, mask, weights, layer);
      flows = std::move(step.flows);
      before_last = current.frames;
      for (int n = 0; n < N; ++n) {
        auto dst = current.frames[n].data();
        auto add = step.features[n].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += add[i];
      }
      current.layer = layer + 1;
      refined_feats = std::move(step.features);
    }

    for (int n = 0; n < N; ++n) {
      const int t = k * N + n;
      if (t >= T || t < 1) continue;
      FlowField f = flows[n];
      if (!weights.final_head.is_zero())
        f = add_mean_offset(f, predict_residual(weights.final_head, refined_feats[n], before_last[n], flows[n],
                                                weights.offsets));
      refined[t] = std::move(f);
    }
    carry = current.frames[N - 1];
  }
  return refined;
}

}  // namespace

void FlowConfig::validate() const {
  require(clip_length >= 2, ErrorKind::Config, "flow: clip length N must be >= 2");
  require(layers >= 1, ErrorKind::Config, "flow: layer count L must be >= 1");
  require(offsets >= 1, ErrorKind::Config, "flow: offset count M must be >= 1");
  require(channels >= 1, ErrorKind::Config, "flow: channel count C must be >= 1");
  require(head_hidden >= 1, ErrorKind::Config, "flow: head width must be >= 1");
  require(coarse.levels >= 1, ErrorKind::Config, "flow: pyramid needs at least one level");
  require(coarse.search_radius >= 1 && coarse.patch_radius >= 0, ErrorKind::Config,
          "flow: search radius must be >= 1 and patch radius >= 0");
}

RefinerWeights RefinerWeights::make(const FlowConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed ^ 0x5EEDF10Bull);
  const int C = cfg.channels, in = 2 * C + 2, out = 2 * cfg.offsets;
  const float s = 1.0f / std::sqrt(static_cast<float>(C));

  RefinerWeights wts;
  wts.channels = C;
  wts.offsets = cfg.offsets;
  wts.layers = cfg.layers;
  wts.features = Conv2d::uniform(1, C, 3, 1.0f / 3.0f, rng);
  wts.proj_q = Dense::uniform(C, C, s, rng);
  wts.proj_k = Dense::uniform(C, C, s, rng);
  wts.proj_v = Dense::uniform(C, C, s, rng);
  wts.mlp_in = Dense::uniform(C, C, s, rng);
  wts.mlp_out = Dense::uniform(C, C, s, rng);

  auto head = [&] {
    if (cfg.head_init == HeadInit::Zero)
      return ConvHead{Conv2d::zeros(in, cfg.head_hidden, 3), Conv2d::zeros(cfg.head_hidden, out, 3)};
    return ConvHead{Conv2d::uniform(in, cfg.head_hidden, 3, cfg.head_scale, rng),
                    Conv2d::uniform(cfg.head_hidden, out, 3, cfg.head_scale, rng)};
  };
  for (int i = 0; i < cfg.layers; ++i) wts.residual.push_back(head());
  wts.final_head = head();
  return wts;
}

FlowField coarse_flow(const Frame& ref, const Frame& tgt, const CoarseFlowConfig& cfg) {
  require(ref.channels() == 1 && tgt.channels() == 1, ErrorKind::Shape, "coarse_flow: expected single-channel frames");
  require(ref.same_dims(tgt), ErrorKind::Shape, "coarse_flow: frame dims differ");
  require(cfg.levels >= 1 && cfg.search_radius >= 1 && cfg.patch_radius >= 0, ErrorKind::Precondition,
          "coarse_flow: invalid configuration");
  require((std::min(ref.height(), ref.width()) >> cfg.levels) >= 8, ErrorKind::Precondition,
          "coarse_flow: pyramid of " + std::to_string(cfg.levels) + " levels is too deep for " +
              std::to_string(ref.height()) + "x" + std::to_string(ref.width()));

  std::vector<Frame> rp{ref}, tp{tgt};
  for (int l = 1; l < cfg.levels; ++l) {
    rp.push_back(half_resolution(rp.back()));
    tp.push_back(half_resolution(tp.back()));
  }

  FlowField flow(rp.back().height(), rp.back().width());
  for (int l = cfg.levels - 1; l >= 0; --l) {
    if (flow.height() != rp[l].height() || flow.width() != rp[l].width())
      flow = upsample_flow(flow, rp[l].height(), rp[l].width());
    flow = match_level(rp[l], tp[l], flow, cfg, l == 0);
  }
  return flow;
}

std::vector<ClipFeatures> shallow_features(const VideoTensor& video, const RefinerWeights& weights,
                                           int clip_length) {
  require(clip_length >= 1, ErrorKind::Precondition, "shallow_features: clip length must be >= 1");
  const std::vector<Frame> feats = per_frame_features(video, weights);
  const int T = static_cast<int>(feats.size());
  std::vector<ClipFeatures> clips;
  for (int k = 0; k * clip_length < T; ++k) {
    ClipFeatures clip{k, 0, {}};
    for (int n = 0; n < clip_length; ++n) clip.frames.push_back(feats[std::min(k * clip_length + n, T - 1)]);
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::vector<FlowField> predict_residual(const ConvHead& head, const Frame& aligned, const Frame& current,
                                        const FlowField& flow, int offsets) {
  require(aligned.same_dims(current), ErrorKind::Shape, "predict_residual: aligned/current dims differ");
  require(flow.height() == current.height() && flow.width() == current.width(), ErrorKind::Shape,
          "predict_residual: flow dims differ from features");
  require(head.second.out_channels == 2 * offsets, ErrorKind::Shape,
          "predict_residual: head produces " + std::to_string(head.second.out_channels) + " channels, expected 2M = " +
              std::to_string(2 * offsets));
  std::vector<FlowField> out;
  if (head.is_zero()) {
    for (int m = 0; m < offsets; ++m) out.emplace_back(current.height(), current.width());
    return out;
  }
  const Frame raw = head(concat_channels({&aligned, &current, &flow.components()}));
  for (int m = 0; m < offsets; ++m) {
    Frame v(raw.height(), raw.width(), 2);
    v.set_channel(0, raw.channel(2 * m));
    v.set_channel(1, raw.channel(2 * m + 1));
    out.emplace_back(std::move(v));
  }
  return out;
}

std::vector<double> attention_weights(std::span<const float> query, const std::vector<std::vector<float>>& keys) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  std::vector<double> logits(keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    double s = 0;
    for (std::size_t c = 0; c < query.size(); ++c) s += static_cast<double>(query[c]) * keys[j][c];
    logits[j] = s * scale;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

RefineStep refine_flow_step(const ClipFeatures& source, const ClipFeatures& current,
                            const std::vector<FlowField>& flows, const PhasorMask& mask,
                            const RefinerWeights& weights, int layer) {
  const std::size_t N = current.frames.size();
  require(layer >= 0 && layer < weights.layers, ErrorKind::Precondition, "refine_flow_step: layer index out of range");
  require(source.frames.size() == N && flows.size() == N && N >= 1, ErrorKind::Shape,
          "refine_flow_step: source, current and flow counts differ");
  const Frame& f0 = current.frames.front();
  require(f0.channels() == weights.channels, ErrorKind::Shape, "refine_flow_step: feature width differs from weights");
  for (std::size_t n = 0; n < N; ++n) {
    require(current.frames[n].same_dims(f0) && source.frames[n].same_dims(f0), ErrorKind::Shape,
            "refine_flow_step: feature dims differ");
    require(flows[n].height() == f0.height() && flows[n].width() == f0.width(), ErrorKind::Shape,
            "refine_flow_step: flow dims differ from features");
  }
  require(mask.height() == f0.height() && mask.width() == f0.width(), ErrorKind::Shape,
          "refine_flow_step: mask dims differ from features");

  const int C = weights.channels, h = f0.height(), w = f0.width();
  std::vector<Frame> keys_src, vals_src;
  for (const Frame& s : source.frames) {
    keys_src.push_back(weights.proj_k(s));
    vals_src.push_back(weights.proj_v(s));
  }

  RefineStep out;
  std::vector<std::vector<float>> keys(N, std::vector<float>(C)), vals(N, std::vector<float>(C));
  std::vector<float> hidden(C);
  for (std::size_t n = 0; n < N; ++n) {
    const Frame aligned = warp(source.frames[n], scale_by_mask(flows[n], mask));
    std::vector<FlowField> deltas =
        predict_residual(weights.residual[layer], aligned, current.frames[n], flows[n], weights.offsets);
    FlowField updated = add_mean_offset(flows[n], deltas);

    const Frame query = weights.proj_q(current.frames[n]);
    Frame attn(h, w, C), feat(h, w, C);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double sx = x + static_cast<double>(updated.dx(y, x));
        const double sy = y + static_cast<double>(updated.dy(y, x));
        for (std::size_t j = 0; j < N; ++j) {
          sample_all(keys_src[j], sx, sy, keys[j].data());
          sample_all(vals_src[j], sx, sy, vals[j].data());
        }
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const auto a = attention_weights(query.data().subspan(p * C, C), keys);
        double rowsum = 0;
        for (double v : a) rowsum += v;
        out.max_rowsum_error = std::max(out.max_rowsum_error, std::abs(rowsum - 1.0));

        const double m = mask.at(y, x);
        float* at = attn.data().data() + p * C;
        for (int c = 0; c < C; ++c) {
          double s = 0;
          for (std::size_t j = 0; j < N; ++j) s += (m * a[j]) * vals[j][c];
          at[c] = static_cast<float>(s);
        }
        weights.mlp_in.apply(aligned.data().data() + p * C, hidden.data());
        for (float& v : hidden) v = std::max(v, 0.0f);
        float* ft = feat.data().data() + p * C;
        weights.mlp_out.apply(hidden.data(), ft);
        for (int c = 0; c < C; ++c) ft[c] += at[c];
      }
    out.flows.push_back(std::move(updated));
    out.deltas.push_back(std::move(deltas));
    out.attention.push_back(std::move(attn));
    out.features.push_back(std::move(feat));
  }
  return out;
}

FlowSet coarse_flows(const VideoTensor& video, const CoarseFlowConfig& cfg) {
  require(video.channels() == 1, ErrorKind::Shape, "coarse_flows: expected single-channel video");
  require(video.frames() >= 2, ErrorKind::Precondition, "coarse_flows: need at least 2 frames");
  FlowSet set;
  const int pairs = video.frames() - 1;
  set.forward.resize(pairs);
  set.backward.resize(pairs);
  parallel_for(pairs, [&](int j) {
    const Frame a = video.frame(j), b = video.frame(j + 1);
    set.forward[j] = coarse_flow(a, b, cfg);
    set.backward[j] = coarse_flow(b, a, cfg);
  });
  return set;
}

FlowSet phasorflow(const VideoTensor& video, const FlowConfig& cfg) {
  cfg.validate();
  require(video.frames() >= 2, ErrorKind::Precondition, "phasorflow: need at least 2 frames");
  if (!cfg.refine) return coarse_flows(video, cfg.coarse);
  return phasorflow(video, cfg, phasor_mask(video, cfg.phasor), RefinerWeights::make(cfg));
}

FlowSet phasorflow(const VideoTensor& video, const FlowConfig& cfg, const PhasorMask& mask,
                   const RefinerWeights& weights) {
  cfg.validate();
  require(video.frames() >= 2, ErrorKind::Precondition, "phasorflow: need at least 2 frames");
  FlowSet coarse = coarse_flows(video, cfg.coarse);
  const int T = video.frames();

  std::vector<Frame> feats = per_frame_features(video, weights);

  // Original order: the predecessor alignment of frame t is backward[t-1].
  std::vector<FlowField> to_prev(T);
  for (int t = 1; t < T; ++t) to_prev[t] = coarse.backward[t - 1];
  to_prev[0] = FlowField(video.height(), video.width());
  to_prev = refine_chain(feats, to_prev, mask, weights, cfg.clip_length);

  // Reversed order: the predecessor of reversed frame k is original frame
  // T-k, so its alignment is forward[T-1-k].
  std::vector<Frame> rfeats(feats.rbegin(), feats.rend());
  std::vector<FlowField> rprev(T);
  for (int k = 1; k < T; ++k) rprev[k] = coarse.forward[T - 1 - k];
  rprev[0] = FlowField(video.height(), video.width());
  rprev = refine_chain(rfeats, rprev, mask, weights, cfg.clip_length);

  FlowSet out;
  for (int j = 0; j + 1 < T; ++j) {
    out.forward.push_back(std::move(rprev[T - 1 - j]));
    out.backward.push_back(std::move(to_prev[j + 1]));
  }
  return out;
}

VideoTensor flows_to_tensor(const std::vector<FlowField>& flows) {
  require(!flows.empty(), ErrorKind::Shape, "flows_to_tensor: no flows");
  std::vector<Frame> frames;
  for (const FlowField& f : flows) frames.push_back(f.components());
  return VideoTensor::from_frames(frames);
}

std::vector<FlowField> tensor_to_flows(const VideoTensor& tensor) {
  require(tensor.channels() == 2, ErrorKind::Shape, "tensor_to_flows: flow tensors have two channels");
  std::vector<FlowField> out;
  for (int t = 0; t < tensor.frames(); ++t) out.emplace_back(tensor.frame(t));
  return out;
}

Frame flow_magnitude(const FlowField& flow) {
  Frame out(flow.height(), flow.width(), 1);
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x)
      out.at(y, x) = static_cast<float>(std::hypot(flow.dx(y, x), flow.dy(y, x)));
  return out;
}

}  // namespace hatir
