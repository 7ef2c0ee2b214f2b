#pragma once

// Core containers and image operators shared by every other module.
//
// Layout is frame-major, row-major, channel-last: element (t, y, x, c) lives
// at ((t * H + y) * W + x) * C + c. All payloads are 32-bit floats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hatir {

// A single H x W x C image.
class Frame {
 public:
  Frame() = default;
  Frame(int height, int width, int channels = 1, float fill = 0.0f);
  Frame(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_dims(const Frame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool same_grid(const Frame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Extract / assemble single channels.
  Frame channel(int c) const;
  void set_channel(int c, const Frame& plane);

  bool operator==(const Frame&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

struct Shape {
  std::uint32_t frames = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;

  std::size_t element_count() const noexcept {
    return static_cast<std::size_t>(frames) * height * width * channels;
  }
  bool operator==(const Shape&) const = default;
};

// T x H x W x C sequence. Holds infrared clips, latents, features and masks.
class VideoTensor {
 public:
  VideoTensor() = default;
  explicit VideoTensor(Shape shape, float fill = 0.0f);
  VideoTensor(Shape shape, std::vector<float> data);

  static VideoTensor from_frames(const std::vector<Frame>& frames);

  const Shape& shape() const noexcept { return shape_; }
  int frames() const noexcept { return static_cast<int>(shape_.frames); }
  int height() const noexcept { return static_cast<int>(shape_.height); }
  int width() const noexcept { return static_cast<int>(shape_.width); }
  int channels() const noexcept { return static_cast<int>(shape_.channels); }

  float& at(int t, int y, int x, int c = 0) noexcept {
    return data_[index(t, y, x, c)];
  }
  float at(int t, int y, int x, int c = 0) const noexcept {
    return data_[index(t, y, x, c)];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  Frame frame(int t) const;
  void set_frame(int t, const Frame& frame);
  std::vector<Frame> to_frames() const;

  bool operator==(const VideoTensor&) const = default;

 private:
  std::size_t index(int t, int y, int x, int c) const noexcept {
    return ((static_cast<std::size_t>(t) * shape_.height + y) * shape_.width +
            x) * shape_.channels + c;
  }

  Shape shape_;
  std::vector<float> data_;
};

// Per-pixel displacement (dx, dy) in pixels; +dx right, +dy down.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int height, int width, float dx = 0.0f, float dy = 0.0f);
  explicit FlowField(Frame vectors);

  int height() const noexcept { return v_.height(); }
  int width() const noexcept { return v_.width(); }

  float& dx(int y, int x) noexcept { return v_.at(y, x, 0); }
  float& dy(int y, int x) noexcept { return v_.at(y, x, 1); }
  float dx(int y, int x) const noexcept { return v_.at(y, x, 0); }
  float dy(int y, int x) const noexcept { return v_.at(y, x, 1); }

  // Two-channel view of the field, usable with the frame operators.
  const Frame& components() const noexcept { return v_; }
  Frame& components() noexcept { return v_; }

  bool operator==(const FlowField&) const = default;

 private:
  Frame v_;
};

struct SamplingLine {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int samples = 2;
};

// S x T matrix: row s is one sample point, column t one frame.
struct ProfileMatrix {
  int samples = 0;
  int frames = 0;
  std::vector<double> values;

  double at(int s, int t) const { return values[static_cast<std::size_t>(s) * frames + t]; }
  double& at(int s, int t) { return values[static_cast<std::size_t>(s) * frames + t]; }
};

// ---- IRV1 container -------------------------------------------------------

VideoTensor load_irv(const std::filesystem::path& path);
void save_irv(const VideoTensor& tensor, const std::filesystem::path& path);

// Serialized bytes of the IRV1 container; save_irv writes exactly these.
std::vector<std::uint8_t> encode_irv(const VideoTensor& tensor);
VideoTensor decode_irv(std::span<const std::uint8_t> bytes);

// P5 PGM with linear min-max scaling to [0, 255]. Single-channel frames only.
void save_pgm(const Frame& frame, const std::filesystem::path& path);

void save_profile_csv(const ProfileMatrix& profile, const SamplingLine& line,
                      const std::filesystem::path& path);

// ---- Sampling and warping -------------------------------------------------

// Bilinear sample of channel c at (x, y); coordinates clamp to the image.
float sample_bilinear(const Frame& image, double x, double y, int c = 0);

// Backward warp: out(x) = image(x + flow(x)), bilinear, clamp-to-edge.
Frame warp(const Frame& image, const FlowField& flow);

// Adjoint of warp with respect to the image: scatters `grad` back through the
// bilinear weights that warp(., flow) used.
Frame warp_adjoint(const Frame& grad, const FlowField& flow);

// ---- Differential operators ----------------------------------------------

// |Gx| + |Gy| with 3x3 Sobel kernels, replicate border.
Frame sobel_gradient_magnitude(const Frame& frame);

// 4-neighbour Laplacian (centre -4, cross +1), replicate border.
Frame laplacian(const Frame& frame);

// Separable sampled Gaussian (radius ceil(4 sigma), normalised), mirror
// border. sigma <= 0 returns the input unchanged.
Frame gaussian_blur(const Frame& frame, double sigma);

// Exact factor x factor block average. Dimensions must divide evenly.
Frame box_downsample(const Frame& frame, int factor);
VideoTensor box_downsample(const VideoTensor& video, int factor);

// Bilinear resize to (height * factor, width * factor), pixel-centre aligned.
Frame bilinear_upsample(const Frame& frame, int factor);
VideoTensor bilinear_upsample(const VideoTensor& video, int factor);

// ---- Profiles -------------------------------------------------------------

ProfileMatrix sample_line(const VideoTensor& video, const SamplingLine& line);

}  // namespace hatir
