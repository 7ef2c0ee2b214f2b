#include "hatir/turbsim.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "hatir/error.hpp"
#include "hatir/parallel.hpp"
#include "numfmt.hpp"

namespace hatir {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Frame white_noise(int height, int width, std::uint64_t key) {
  std::mt19937_64 rng(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  Frame f(height, width, 1);
  for (float& v : f.data()) v = static_cast<float>(normal(rng));
  return f;
}

// Removes the mean and rescales to unit RMS. Returns false for a flat input.
bool standardize(Frame& f) {
  double mean = 0;
  for (float v : f.data()) mean += v;
  mean /= static_cast<double>(f.size());
  double ss = 0;
  for (float& v : f.data()) {
    v = static_cast<float>(v - mean);
    ss += static_cast<double>(v) * v;
  }
  const double rms = std::sqrt(ss / static_cast<double>(f.size()));
  if (rms <= 0) return false;
  for (float& v : f.data()) v = static_cast<float>(v / rms);
  return true;
}


}  // namespace

void TurbulenceParams::validate() const {
  require(tilt_strength >= 0 && tilt_correlation >= 0 && blur_sigma >= 0 && drift_amplitude >= 0,
          ErrorKind::Config, "turbulence magnitudes must be >= 0");
  require(std::isfinite(tilt_strength) && std::isfinite(tilt_correlation) && std::isfinite(blur_sigma) &&
              std::isfinite(drift_amplitude),
          ErrorKind::Config, "turbulence magnitudes must be finite");
  require(scale >= 1, ErrorKind::Config, "scale must be >= 1");
}

std::uint64_t stream_key(std::uint64_t seed, std::uint32_t frame, NoiseRole role) noexcept {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ frame);
  return splitmix64(k ^ (static_cast<std::uint64_t>(role) << 32));
}

FlowField random_tilt_field(int height, int width, const TurbulenceParams& params, int frame_index) {
  params.validate();
  FlowField field(height, width);
  if (params.tilt_strength == 0) return field;

  const auto fi = static_cast<std::uint32_t>(frame_index);
  Frame nx = gaussian_blur(white_noise(height, width, stream_key(params.seed, fi, NoiseRole::TiltX)),
                           params.tilt_correlation);
  Frame ny = gaussian_blur(white_noise(height, width, stream_key(params.seed, fi, NoiseRole::TiltY)),
                           params.tilt_correlation);
  double mx = 0, my = 0;
  for (std::size_t p = 0; p < nx.size(); ++p) {
    mx += nx.data()[p];
    my += ny.data()[p];
  }
  mx /= static_cast<double>(nx.size());
  my /= static_cast<double>(ny.size());
  double ss = 0;
  for (std::size_t p = 0; p < nx.size(); ++p) {
    const double a = nx.data()[p] - mx, b = ny.data()[p] - my;
    ss += a * a + b * b;
  }
  const double rms = std::sqrt(ss / static_cast<double>(nx.size()));
  if (rms <= 0) return field;
  const double gain = params.tilt_strength / rms;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      field.dx(y, x) = static_cast<float>((nx.at(y, x) - mx) * gain);
      field.dy(y, x) = static_cast<float>((ny.at(y, x) - my) * gain);
    }
  return field;
}

Frame drift_field(int height, int width, const TurbulenceParams& params, int frame_index) {
  params.validate();
  Frame drift(height, width, 1);
  if (params.drift_amplitude == 0) return drift;

  const auto fi = static_cast<std::uint32_t>(frame_index);
  std::mt19937_64 rng(stream_key(params.seed, fi, NoiseRole::DriftOffset));
  const double offset = std::normal_distribution<double>(0.0, 1.0)(rng);

  const double radius = std::max(height, width) / 8.0;
  Frame field = gaussian_blur(white_noise(height, width, stream_key(params.seed, fi, NoiseRole::DriftField)), radius);
  if (!standardize(field)) std::fill(field.data().begin(), field.data().end(), 0.0f);

  const double gain = params.drift_amplitude / std::sqrt(2.0);
  for (std::size_t p = 0; p < drift.size(); ++p)
    drift.data()[p] = static_cast<float>(gain * (offset + field.data()[p]));
  return drift;
}

VideoTensor degrade(const VideoTensor& hr, const TurbulenceParams& params) {
  params.validate();
  require(hr.height() % params.scale == 0 && hr.width() % params.scale == 0, ErrorKind::Shape,
          "degrade: " + std::to_string(hr.height()) + "x" + std::to_string(hr.width()) +
              " is not divisible by scale " + std::to_string(params.scale));
  std::vector<Frame> out(hr.frames());
  parallel_for(hr.frames(), [&](int t) {
    Frame f = hr.frame(t);
    if (params.tilt_strength > 0) f = warp(f, random_tilt_field(f.height(), f.width(), params, t));
    f = gaussian_blur(f, params.blur_sigma);
    if (params.drift_amplitude > 0) {
      const Frame d = drift_field(f.height(), f.width(), params, t);
      for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
          for (int c = 0; c < f.channels(); ++c) f.at(y, x, c) += d.at(y, x);
    }
    out[t] = box_downsample(f, params.scale);
  });
  return VideoTensor::from_frames(out);
}

std::string turbulence_manifest(const TurbulenceParams& p) {
  std::ostringstream os;
  os << "seed=" << p.seed << '\n'
     << "turb.tilt=" << format_double(p.tilt_strength) << '\n'
     << "turb.corr=" << format_double(p.tilt_correlation) << '\n'
     << "turb.blur=" << format_double(p.blur_sigma) << '\n'
     << "turb.drift=" << format_double(p.drift_amplitude) << '\n'
     << "turb.scale=" << p.scale << '\n';
  return os.str();
}

void make_pair(const std::filesystem::path& hr_path, const TurbulenceParams& params,
               const std::filesystem::path& lr_path, const std::filesystem::path& hr_copy_path,
               const std::filesystem::path& manifest_path) {
  const VideoTensor hr = load_irv(hr_path);
  save_irv(degrade(hr, params), lr_path);
  save_irv(hr, hr_copy_path);

  std::filesystem::path mpath = manifest_path;
  if (mpath.empty()) mpath = std::filesystem::path(lr_path).concat(".manifest.txt");
  std::ofstream out(mpath, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + mpath.string() + " for writing");
  out << "# input=" << hr_path.string() << '\n'
      << "# lr=" << lr_path.string() << '\n'
      << "# hr=" << hr_copy_path.string() << '\n'
      << turbulence_manifest(params);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + mpath.string());
}

}  // namespace hatir
