#include "hatir/vidcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "hatir/error.hpp"

namespace hatir {

namespace {

constexpr char kMagic[4] = {'I', 'R', 'V', '1'};
constexpr std::size_t kHeaderBytes = 20;

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

void require_single_channel(const Frame& f, const char* op) {
  require(f.channels() == 1, ErrorKind::Shape,
          std::string(op) + ": expected a single-channel frame, got " +
              std::to_string(f.channels()) + " channels");
}

// Half-sample symmetric index folding: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

template <typename Kernel>
Frame stencil3x3(const Frame& in, Kernel&& kernel) {
  Frame out(in.height(), in.width(), 1);
  const int h = in.height(), w = in.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto px = [&](int dy, int dx) {
        return static_cast<double>(
            in.at(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1)));
      };
      out.at(y, x) = static_cast<float>(kernel(px));
    }
  }
  return out;
}

}  // namespace

// ---- Frame ---------------------------------------------------------------

Frame::Frame(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  require(height >= 1 && width >= 1 && channels >= 1, ErrorKind::Shape,
          "frame dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Frame::Frame(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require(height >= 1 && width >= 1 && channels >= 1, ErrorKind::Shape,
          "frame dimensions must be positive");
  require(data_.size() == static_cast<std::size_t>(height) * width * channels,
          ErrorKind::Shape, "frame payload does not match H*W*C");
}

Frame Frame::channel(int c) const {
  require(c >= 0 && c < channels_, ErrorKind::Range, "channel index out of range");
  Frame out(height_, width_, 1);
  for (std::size_t p = 0; p < pixel_count(); ++p) out.data_[p] = data_[p * channels_ + c];
  return out;
}

void Frame::set_channel(int c, const Frame& plane) {
  require(c >= 0 && c < channels_, ErrorKind::Range, "channel index out of range");
  require(plane.same_grid(*this) && plane.channels() == 1, ErrorKind::Shape,
          "set_channel: plane dims mismatch");
  for (std::size_t p = 0; p < pixel_count(); ++p) data_[p * channels_ + c] = plane.data_[p];
}

// ---- VideoTensor ---------------------------------------------------------

VideoTensor::VideoTensor(Shape shape, float fill) : shape_(shape) {
  require(shape.frames >= 1 && shape.height >= 1 && shape.width >= 1 && shape.channels >= 1,
          ErrorKind::Shape, "video dimensions must be positive");
  data_.assign(shape.element_count(), fill);
}

VideoTensor::VideoTensor(Shape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  require(shape.frames >= 1 && shape.height >= 1 && shape.width >= 1 && shape.channels >= 1,
          ErrorKind::Shape, "video dimensions must be positive");
  require(data_.size() == shape.element_count(), ErrorKind::Shape,
          "video payload does not match T*H*W*C");
}

VideoTensor VideoTensor::from_frames(const std::vector<Frame>& frames) {
  require(!frames.empty(), ErrorKind::Shape, "from_frames: no frames");
  const Frame& f0 = frames.front();
  Shape s{static_cast<std::uint32_t>(frames.size()), static_cast<std::uint32_t>(f0.height()),
          static_cast<std::uint32_t>(f0.width()), static_cast<std::uint32_t>(f0.channels())};
  VideoTensor v(s);
  for (std::size_t t = 0; t < frames.size(); ++t) v.set_frame(static_cast<int>(t), frames[t]);
  return v;
}

Frame VideoTensor::frame(int t) const {
  require(t >= 0 && t < frames(), ErrorKind::Range, "frame index out of range");
  const std::size_t n = static_cast<std::size_t>(shape_.height) * shape_.width * shape_.channels;
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(n * t);
  return Frame(height(), width(), channels(), std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n)));
}

void VideoTensor::set_frame(int t, const Frame& frame) {
  require(t >= 0 && t < frames(), ErrorKind::Range, "frame index out of range");
  require(frame.height() == height() && frame.width() == width() &&
              frame.channels() == channels(),
          ErrorKind::Shape, "set_frame: frame dims do not match video");
  std::copy(frame.data().begin(), frame.data().end(),
            data_.begin() + static_cast<std::ptrdiff_t>(frame.size() * t));
}

std::vector<Frame> VideoTensor::to_frames() const {
  std::vector<Frame> out;
  out.reserve(shape_.frames);
  for (int t = 0; t < frames(); ++t) out.push_back(frame(t));
  return out;
}

// ---- FlowField -------------------------------------------------------------

FlowField::FlowField(int height, int width, float dx, float dy) : v_(height, width, 2) {
  for (std::size_t p = 0; p < v_.pixel_count(); ++p) {
    v_.data()[2 * p] = dx;
    v_.data()[2 * p + 1] = dy;
  }
}

FlowField::FlowField(Frame vectors) : v_(std::move(vectors)) {
  require(v_.channels() == 2, ErrorKind::Shape, "flow field needs exactly two channels");
}

// ---- IRV1 ------------------------------------------------------------------

std::vector<std::uint8_t> encode_irv(const VideoTensor& tensor) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * tensor.data().size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  const Shape& s = tensor.shape();
  put_u32(out, s.frames);
  put_u32(out, s.height);
  put_u32(out, s.width);
  put_u32(out, s.channels);
  for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

VideoTensor decode_irv(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::Format,
          "not an IRV1 file (bad magic)");
  require(bytes.size() >= kHeaderBytes, ErrorKind::Length, "IRV1 header truncated");
  Shape s{get_u32(bytes, 4), get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
  require(s.frames >= 1 && s.height >= 1 && s.width >= 1 && s.channels >= 1, ErrorKind::Format,
          "IRV1 header has a zero dimension");
  // Guard the element count against overflow before comparing lengths.
  const long double count = static_cast<long double>(s.frames) * s.height * s.width * s.channels;
  const std::size_t payload = bytes.size() - kHeaderBytes;
  require(count * 4 == static_cast<long double>(payload), ErrorKind::Length,
          "IRV1 payload length " + std::to_string(payload) + " bytes does not match header (" +
              std::to_string(static_cast<unsigned long long>(count)) + " floats)");
  std::vector<float> data(s.element_count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
    require(std::isfinite(data[i]), ErrorKind::Data,
            "IRV1 payload holds a non-finite value at element " + std::to_string(i));
  }
  return VideoTensor(s, std::move(data));
}

VideoTensor load_irv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_irv(bytes);
}

void save_irv(const VideoTensor& tensor, const std::filesystem::path& path) {
  for (float v : tensor.data())
    require(std::isfinite(v), ErrorKind::Data, "refusing to save a non-finite tensor");
  const auto bytes = encode_irv(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

void save_pgm(const Frame& frame, const std::filesystem::path& path) {
  require_single_channel(frame, "save_pgm");
  const auto [lo, hi] = std::minmax_element(frame.data().begin(), frame.data().end());
  const double range = static_cast<double>(*hi) - *lo;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  std::vector<unsigned char> px(frame.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = range > 0 ? (frame.data()[i] - *lo) / range * 255.0 : 0.0;
    px[i] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

void save_profile_csv(const ProfileMatrix& profile, const SamplingLine& line,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.precision(9);
  out << "sample,x,y";
  for (int t = 0; t < profile.frames; ++t) out << ",t" << t;
  out << '\n';
  for (int s = 0; s < profile.samples; ++s) {
    const double a = profile.samples > 1 ? static_cast<double>(s) / (profile.samples - 1) : 0.0;
    out << s << ',' << line.x0 + a * (line.x1 - line.x0) << ',' << line.y0 + a * (line.y1 - line.y0);
    for (int t = 0; t < profile.frames; ++t) out << ',' << profile.at(s, t);
    out << '\n';
  }
}

// ---- Sampling and warping --------------------------------------------------

namespace {

struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
};

BilinearTap bilinear_tap(int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  BilinearTap t;
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = x - t.x0;
  t.fy = y - t.y0;
  return t;
}

}  // namespace

float sample_bilinear(const Frame& image, double x, double y, int c) {
  const BilinearTap t = bilinear_tap(image.width(), image.height(), x, y);
  const double top = (1 - t.fx) * image.at(t.y0, t.x0, c) + t.fx * image.at(t.y0, t.x1, c);
  const double bot = (1 - t.fx) * image.at(t.y1, t.x0, c) + t.fx * image.at(t.y1, t.x1, c);
  return static_cast<float>((1 - t.fy) * top + t.fy * bot);
}

Frame warp(const Frame& image, const FlowField& flow) {
  require(image.height() == flow.height() && image.width() == flow.width(), ErrorKind::Shape,
          "warp: flow dims do not match image dims");
  Frame out(image.height(), image.width(), image.channels());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double sx = x + static_cast<double>(flow.dx(y, x));
      const double sy = y + static_cast<double>(flow.dy(y, x));
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = sample_bilinear(image, sx, sy, c);
    }
  return out;
}

Frame warp_adjoint(const Frame& grad, const FlowField& flow) {
  require(grad.height() == flow.height() && grad.width() == flow.width(), ErrorKind::Shape,
          "warp_adjoint: flow dims do not match gradient dims");
  const int h = grad.height(), w = grad.width(), nc = grad.channels();
  std::vector<double> acc(grad.size(), 0.0);
  auto idx = [&](int y, int x, int c) { return (static_cast<std::size_t>(y) * w + x) * nc + c; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const BilinearTap t = bilinear_tap(w, h, x + static_cast<double>(flow.dx(y, x)),
                                         y + static_cast<double>(flow.dy(y, x)));
      for (int c = 0; c < nc; ++c) {
        const double g = grad.at(y, x, c);
        if (g == 0.0) continue;
        acc[idx(t.y0, t.x0, c)] += (1 - t.fy) * (1 - t.fx) * g;
        acc[idx(t.y0, t.x1, c)] += (1 - t.fy) * t.fx * g;
        acc[idx(t.y1, t.x0, c)] += t.fy * (1 - t.fx) * g;
        acc[idx(t.y1, t.x1, c)] += t.fy * t.fx * g;
      }
    }
  Frame out(h, w, nc);
  std::transform(acc.begin(), acc.end(), out.data().begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

// ---- Differential operators --------------------------------------------------

Frame sobel_gradient_magnitude(const Frame& frame) {
  require_single_channel(frame, "sobel_gradient_magnitude");
  return stencil3x3(frame, [](auto px) {
    const double gx = (px(-1, 1) + 2 * px(0, 1) + px(1, 1)) - (px(-1, -1) + 2 * px(0, -1) + px(1, -1));
    const double gy = (px(1, -1) + 2 * px(1, 0) + px(1, 1)) - (px(-1, -1) + 2 * px(-1, 0) + px(-1, 1));
    return std::abs(gx) + std::abs(gy);
  });
}

Frame laplacian(const Frame& frame) {
  require_single_channel(frame, "laplacian");
  return stencil3x3(frame, [](auto px) {
    return px(-1, 0) + px(1, 0) + px(0, -1) + px(0, 1) - 4 * px(0, 0);
  });
}

Frame gaussian_blur(const Frame& frame, double sigma) {
  if (sigma <= 0) return frame;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int h = frame.height(), w = frame.width(), nc = frame.channels();
  std::vector<double> tmp(frame.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double s = 0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * frame.at(y, mirror_index(x + i, w), c);
        tmp[(static_cast<std::size_t>(y) * w + x) * nc + c] = s;
      }
  Frame out(h, w, nc);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double s = 0;
        for (int i = -radius; i <= radius; ++i)
          s += k[i + radius] * tmp[(static_cast<std::size_t>(mirror_index(y + i, h)) * w + x) * nc + c];
        out.at(y, x, c) = static_cast<float>(s);
      }
  return out;
}

Frame box_downsample(const Frame& frame, int factor) {
  require(factor >= 1, ErrorKind::Precondition, "downsample factor must be >= 1");
  require(frame.height() % factor == 0 && frame.width() % factor == 0, ErrorKind::Shape,
          "box_downsample: " + std::to_string(frame.height()) + "x" + std::to_string(frame.width()) +
              " is not divisible by " + std::to_string(factor));
  if (factor == 1) return frame;
  const int h = frame.height() / factor, w = frame.width() / factor;
  Frame out(h, w, frame.channels());
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < frame.channels(); ++c) {
        double s = 0;
        for (int j = 0; j < factor; ++j)
          for (int i = 0; i < factor; ++i) s += frame.at(y * factor + j, x * factor + i, c);
        out.at(y, x, c) = static_cast<float>(s * inv);
      }
  return out;
}

VideoTensor box_downsample(const VideoTensor& video, int factor) {
  std::vector<Frame> frames;
  for (int t = 0; t < video.frames(); ++t) frames.push_back(box_downsample(video.frame(t), factor));
  return VideoTensor::from_frames(frames);
}

Frame bilinear_upsample(const Frame& frame, int factor) {
  require(factor >= 1, ErrorKind::Precondition, "upsample factor must be >= 1");
  if (factor == 1) return frame;
  Frame out(frame.height() * factor, frame.width() * factor, frame.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const double sx = (x + 0.5) / factor - 0.5;
      const double sy = (y + 0.5) / factor - 0.5;
      for (int c = 0; c < frame.channels(); ++c) out.at(y, x, c) = sample_bilinear(frame, sx, sy, c);
    }
  return out;
}

VideoTensor bilinear_upsample(const VideoTensor& video, int factor) {
  std::vector<Frame> frames;
  for (int t = 0; t < video.frames(); ++t) frames.push_back(bilinear_upsample(video.frame(t), factor));
  return VideoTensor::from_frames(frames);
}

// ---- Profiles ----------------------------------------------------------------

ProfileMatrix sample_line(const VideoTensor& video, const SamplingLine& line) {
  require(video.channels() == 1, ErrorKind::Shape, "sample_line: expected single-channel video");
  require(line.samples >= 2, ErrorKind::Precondition, "sample_line: need at least 2 samples");
  const double wmax = video.width() - 1, hmax = video.height() - 1;
  auto inside = [&](double x, double y) { return x >= 0 && x <= wmax && y >= 0 && y <= hmax; };
  require(inside(line.x0, line.y0) && inside(line.x1, line.y1), ErrorKind::Range,
          "sample_line: endpoints outside the image");
  ProfileMatrix p{line.samples, video.frames(),
                  std::vector<double>(static_cast<std::size_t>(line.samples) * video.frames())};
  for (int t = 0; t < video.frames(); ++t) {
    const Frame f = video.frame(t);
    for (int s = 0; s < line.samples; ++s) {
      const double a = static_cast<double>(s) / (line.samples - 1);
      p.at(s, t) = sample_bilinear(f, line.x0 + a * (line.x1 - line.x0), line.y0 + a * (line.y1 - line.y0));
    }
  }
  return p;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::Length: return "length error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

}  // namespace hatir
