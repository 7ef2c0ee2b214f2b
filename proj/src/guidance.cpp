#include "hatir/guidance.hpp"

#include <cmath>

#include "hatir/error.hpp"

namespace hatir {

namespace {

int sign(double v) { return (v > 0) - (v < 0); }

void check_inputs(const VideoTensor& z, const GuidanceInputs& in) {
  const std::size_t pairs = static_cast<std::size_t>(z.frames() - 1);
  require(z.frames() >= 2, ErrorKind::Precondition, "guidance: need at least 2 latent frames");
  require(in.flows.forward.size() == pairs && in.flows.backward.size() == pairs, ErrorKind::Shape,
          "guidance: expected " + std::to_string(pairs) + " flows per direction");
  require(in.masks.next_term.size() == pairs && in.masks.prev_term.size() == pairs, ErrorKind::Shape,
          "guidance: expected " + std::to_string(pairs) + " masks per residual family");
  for (std::size_t j = 0; j < pairs; ++j) {
    for (const Frame* m : {&in.masks.next_term[j], &in.masks.prev_term[j]})
      require(m->height() == z.height() && m->width() == z.width() && m->channels() == 1, ErrorKind::Shape,
              "guidance: mask dims differ from latent dims");
  }
}

void check_flows(const VideoTensor& z, const FlowSet& flows) {
  const std::size_t pairs = static_cast<std::size_t>(z.frames() - 1);
  require(z.frames() >= 2, ErrorKind::Precondition, "warping_energy: need at least 2 latent frames");
  require(flows.forward.size() == pairs && flows.backward.size() == pairs, ErrorKind::Shape,
          "warping_energy: expected " + std::to_string(pairs) + " flows per direction, got " +
              std::to_string(flows.forward.size()) + "/" + std::to_string(flows.backward.size()));
  for (std::size_t j = 0; j < pairs; ++j)
    for (const FlowField* f : {&flows.forward[j], &flows.backward[j]})
      require(f->height() == z.height() && f->width() == z.width(), ErrorKind::Shape,
              "warping_energy: flow dims differ from latent dims");
}

Frame residual(const Frame& moving, const FlowField& flow, const Frame& fixed) {
  Frame r = warp(moving, flow);
  auto rd = r.data();
  auto fd = fixed.data();
  for (std::size_t i = 0; i < rd.size(); ++i) rd[i] -= fd[i];
  return r;
}

}  // namespace

// ---- Schedule and denoisers -------------------------------------------------

NoiseSchedule::NoiseSchedule(std::vector<double> variances) : variances_(std::move(variances)) {
  require(!variances_.empty(), ErrorKind::Precondition, "noise schedule needs at least one step");
  for (std::size_t t = 0; t < variances_.size(); ++t) {
    require(variances_[t] > 0 && std::isfinite(variances_[t]), ErrorKind::Precondition,
            "noise variances must be positive and finite");
    if (t > 0)
      require(variances_[t] > variances_[t - 1], ErrorKind::Precondition,
              "noise variances must decrease strictly toward t = 0");
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double max_variance, double min_variance) {
  require(steps >= 1, ErrorKind::Precondition, "noise schedule needs at least one step");
  require(max_variance > min_variance && min_variance > 0, ErrorKind::Precondition,
          "noise schedule needs max > min > 0");
  std::vector<double> v(steps);
  if (steps == 1) {
    v[0] = min_variance;
  } else {
    for (int t = 0; t < steps; ++t) v[t] = min_variance + (max_variance - min_variance) * t / (steps - 1);
  }
  return NoiseSchedule(std::move(v));
}

double NoiseSchedule::variance(int t) const {
  require(t >= 0 && t < steps(), ErrorKind::Range,
          "schedule step " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + ")");
  return variances_[t];
}

OracleDenoiser::OracleDenoiser(VideoTensor clean, NoiseSchedule schedule)
    : clean_(std::move(clean)), schedule_(std::move(schedule)) {}

VideoTensor OracleDenoiser::predict_noise(const VideoTensor& z, int step) const {
  require(z.shape() == clean_.shape(), ErrorKind::Shape, "oracle denoiser: latent shape differs from target");
  const double inv = 1.0 / schedule_.variance(step);
  VideoTensor eps(z.shape());
  for (std::size_t i = 0; i < eps.data().size(); ++i)
    eps.data()[i] = static_cast<float>((static_cast<double>(z.data()[i]) - clean_.data()[i]) * inv);
  return eps;
}

VideoTensor ZeroDenoiser::predict_noise(const VideoTensor& z, int) const { return VideoTensor(z.shape()); }

VideoTensor FunctionDenoiser::predict_noise(const VideoTensor& z, int step) const {
  VideoTensor eps = fn_(z, step);
  require(eps.shape() == z.shape(), ErrorKind::Shape, "denoiser returned a tensor of a different shape");
  return eps;
}

void GuidanceConfig::validate() const {
  require(eta >= 0 && std::isfinite(eta), ErrorKind::Config, "guidance: eta must be >= 0");
  require(tau_occ > 0, ErrorKind::Config, "guidance: tau_occ must be > 0");
  require(fd_step > 0, ErrorKind::Config, "guidance: finite-difference step must be > 0");
}

// ---- Masks --------------------------------------------------------------------

JointMasks JointMasks::scaled(float factor) const {
  JointMasks out = *this;
  for (auto* fam : {&out.next_term, &out.prev_term})
    for (Frame& f : *fam)
      for (float& v : f.data()) v *= factor;
  return out;
}

JointMasks JointMasks::ones(int pairs, int height, int width) {
  JointMasks m;
  for (int j = 0; j < pairs; ++j) {
    m.next_term.emplace_back(height, width, 1, 1.0f);
    m.prev_term.emplace_back(height, width, 1, 1.0f);
  }
  return m;
}

Frame occlusion_mask(const FlowField& first, const FlowField& second, double tau) {
  require(first.height() == second.height() && first.width() == second.width(), ErrorKind::Shape,
          "occlusion_mask: flow dims differ");
  require(tau > 0, ErrorKind::Precondition, "occlusion_mask: tau must be > 0");
  const Frame composed = warp(second.components(), first);
  Frame mask(first.height(), first.width(), 1);
  for (int y = 0; y < first.height(); ++y)
    for (int x = 0; x < first.width(); ++x) {
      const double rx = static_cast<double>(first.dx(y, x)) + composed.at(y, x, 0);
      const double ry = static_cast<double>(first.dy(y, x)) + composed.at(y, x, 1);
      mask.at(y, x) = std::hypot(rx, ry) < tau ? 1.0f : 0.0f;
    }
  return mask;
}

Frame joint_mask(const Frame& occlusion, const Frame& phasor) {
  require(occlusion.same_dims(phasor) && occlusion.channels() == 1, ErrorKind::Shape,
          "joint_mask: mask dims differ");
  Frame out = occlusion;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= phasor.data()[i];
  return out;
}

JointMasks build_joint_masks(const FlowSet& flows, const PhasorMask& phasor, double tau) {
  require(flows.forward.size() == flows.backward.size(), ErrorKind::Shape,
          "build_joint_masks: forward/backward counts differ");
  JointMasks m;
  for (std::size_t j = 0; j < flows.forward.size(); ++j) {
    m.next_term.push_back(joint_mask(occlusion_mask(flows.backward[j], flows.forward[j], tau), phasor.frame()));
    m.prev_term.push_back(joint_mask(occlusion_mask(flows.forward[j], flows.backward[j], tau), phasor.frame()));
  }
  return m;
}

// ---- Energy and gradient ----------------------------------------------------

std::vector<Frame> WarpingEnergy::error_map(int frames) const {
  std::vector<Frame> out;
  if (next_residual.empty()) return out;
  const Frame& r0 = next_residual.front();
  for (int t = 0; t < frames; ++t) out.emplace_back(r0.height(), r0.width(), r0.channels());
  for (std::size_t j = 0; j < next_residual.size(); ++j) {
    for (std::size_t i = 0; i < r0.size(); ++i) {
      out[j + 1].data()[i] += std::abs(next_residual[j].data()[i]);
      out[j].data()[i] += std::abs(prev_residual[j].data()[i]);
    }
  }
  return out;
}

WarpingEnergy warping_energy(const VideoTensor& z, const FlowSet& flows) {
  check_flows(z, flows);
  WarpingEnergy e;
  for (int j = 0; j + 1 < z.frames(); ++j) {
    const Frame a = z.frame(j), b = z.frame(j + 1);
    e.next_residual.push_back(residual(a, flows.backward[j], b));
    e.prev_residual.push_back(residual(b, flows.forward[j], a));
  }
  for (const auto* fam : {&e.next_residual, &e.prev_residual})
    for (const Frame& r : *fam)
      for (float v : r.data()) e.total += std::abs(static_cast<double>(v));
  return e;
}

double masked_energy(const VideoTensor& z, const GuidanceInputs& inputs) {
  check_inputs(z, inputs);
  const WarpingEnergy e = warping_energy(z, inputs.flows);
  const int nc = z.channels();
  double total = 0;
  for (std::size_t j = 0; j < e.next_residual.size(); ++j)
    for (std::size_t p = 0; p < inputs.masks.next_term[j].size(); ++p)
      for (int c = 0; c < nc; ++c) {
        total += inputs.masks.next_term[j].data()[p] * std::abs(static_cast<double>(e.next_residual[j].data()[p * nc + c]));
        total += inputs.masks.prev_term[j].data()[p] * std::abs(static_cast<double>(e.prev_residual[j].data()[p * nc + c]));
      }
  return total;
}

VideoTensor masked_energy_gradient(const VideoTensor& z, const GuidanceInputs& inputs) {
  check_inputs(z, inputs);
  const WarpingEnergy e = warping_energy(z, inputs.flows);
  const int nc = z.channels();
  std::vector<Frame> grad;
  for (int t = 0; t < z.frames(); ++t) grad.emplace_back(z.height(), z.width(), nc);

  auto signed_mask = [&](const Frame& r, const Frame& m) {
    Frame s(r.height(), r.width(), nc);
    for (std::size_t p = 0; p < m.size(); ++p)
      for (int c = 0; c < nc; ++c) s.data()[p * nc + c] = m.data()[p] * static_cast<float>(sign(r.data()[p * nc + c]));
    return s;
  };
  auto accumulate = [](Frame& dst, const Frame& src, float k) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += k * src.data()[i];
  };

  for (std::size_t j = 0; j < e.next_residual.size(); ++j) {
    // r = warp(z_j, backward[j]) - z_{j+1}
    const Frame s1 = signed_mask(e.next_residual[j], inputs.masks.next_term[j]);
    accumulate(grad[j], warp_adjoint(s1, inputs.flows.backward[j]), 1.0f);
    accumulate(grad[j + 1], s1, -1.0f);
    // r = warp(z_{j+1}, forward[j]) - z_j
    const Frame s2 = signed_mask(e.prev_residual[j], inputs.masks.prev_term[j]);
    accumulate(grad[j + 1], warp_adjoint(s2, inputs.flows.forward[j]), 1.0f);
    accumulate(grad[j], s2, -1.0f);
  }
  return VideoTensor::from_frames(grad);
}

VideoTensor guidance_term(const VideoTensor& z, const GuidanceInputs& inputs, const NoiseSchedule& schedule, int t,
                          double eta) {
  require(eta >= 0, ErrorKind::Precondition, "guidance_term: eta must be >= 0");
  const double k = eta * schedule.variance(t);
  if (k == 0) {
    check_inputs(z, inputs);
    return VideoTensor(z.shape());
  }
  VideoTensor g = masked_energy_gradient(z, inputs);
  for (float& v : g.data()) v = static_cast<float>(k * v);
  return g;
}

VideoTensor guided_step(const VideoTensor& z_next, int t, const Denoiser& denoiser, const NoiseSchedule& schedule,
                        const GuidanceInputs& inputs, double eta) {
  const double var = schedule.variance(t);
  const VideoTensor eps = denoiser.predict_noise(z_next, t);
  require(eps.shape() == z_next.shape(), ErrorKind::Shape, "denoiser changed the latent shape");
  const VideoTensor g = guidance_term(z_next, inputs, schedule, t, eta);
  VideoTensor out(z_next.shape());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = static_cast<float>(static_cast<double>(z_next.data()[i]) - var * eps.data()[i] - g.data()[i]);
  return out;
}

SampleResult sample(const VideoTensor& z_init, const Denoiser& denoiser, const NoiseSchedule& schedule,
                    const GuidanceInputs& inputs, double eta, bool keep_trajectory) {
  SampleResult r{z_init, {}};
  for (int t = schedule.steps() - 1; t >= 0; --t) {
    r.final = guided_step(r.final, t, denoiser, schedule, inputs, eta);
    if (keep_trajectory) r.trajectory.push_back(r.final);
  }
  return r;
}

}  // namespace hatir
