#include "hatir/layers.hpp"

#include <algorithm>

#include "hatir/error.hpp"

namespace hatir {

Conv2d Conv2d::zeros(int in, int out, int kernel) {
  require(in >= 1 && out >= 1 && kernel >= 1 && kernel % 2 == 1, ErrorKind::Precondition,
          "conv: channels must be positive and kernel odd");
  Conv2d c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.weight.assign(static_cast<std::size_t>(out) * in * kernel * kernel, 0.0f);
  c.bias.assign(out, 0.0f);
  return c;
}

Conv2d Conv2d::identity(int channels, int kernel) {
  Conv2d c = zeros(channels, channels, kernel);
  for (int o = 0; o < channels; ++o) c.w(o, o, kernel / 2, kernel / 2) = 1.0f;
  return c;
}

Conv2d Conv2d::uniform(int in, int out, int kernel, float scale, std::mt19937_64& rng) {
  Conv2d c = zeros(in, out, kernel);
  std::uniform_real_distribution<float> u(-scale, scale);
  for (float& v : c.weight) v = u(rng);
  return c;
}

bool Conv2d::is_zero() const {
  return std::all_of(weight.begin(), weight.end(), [](float v) { return v == 0.0f; });
}

Frame Conv2d::operator()(const Frame& in) const {
  require(in.channels() == in_channels, ErrorKind::Shape,
          "conv: expected " + std::to_string(in_channels) + " input channels, got " +
              std::to_string(in.channels()));
  const int h = in.height(), wd = in.width(), r = kernel / 2;
  Frame out(h, wd, out_channels);
  std::vector<double> acc(out_channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wd; ++x) {
      for (int o = 0; o < out_channels; ++o) acc[o] = bias[o];
      for (int ky = 0; ky < kernel; ++ky) {
        const int sy = std::clamp(y + ky - r, 0, h - 1);
        for (int kx = 0; kx < kernel; ++kx) {
          const int sx = std::clamp(x + kx - r, 0, wd - 1);
          for (int i = 0; i < in_channels; ++i) {
            const double v = in.at(sy, sx, i);
            if (v == 0.0) continue;
            for (int o = 0; o < out_channels; ++o) acc[o] += w(o, i, ky, kx) * v;
          }
        }
      }
      for (int o = 0; o < out_channels; ++o) out.at(y, x, o) = static_cast<float>(acc[o]);
    }
  return out;
}

Dense Dense::zeros(int in, int out) {
  require(in >= 1 && out >= 1, ErrorKind::Precondition, "dense: sizes must be positive");
  Dense d;
  d.in_features = in;
  d.out_features = out;
  d.weight.assign(static_cast<std::size_t>(in) * out, 0.0f);
  d.bias.assign(out, 0.0f);
  return d;
}

Dense Dense::identity(int n) {
  Dense d = zeros(n, n);
  for (int i = 0; i < n; ++i) d.weight[static_cast<std::size_t>(i) * n + i] = 1.0f;
  return d;
}

Dense Dense::uniform(int in, int out, float scale, std::mt19937_64& rng) {
  Dense d = zeros(in, out);
  std::uniform_real_distribution<float> u(-scale, scale);
  for (float& v : d.weight) v = u(rng);
  return d;
}

void Dense::apply(const float* x, float* y) const {
  for (int o = 0; o < out_features; ++o) {
    double s = bias[o];
    const float* row = &weight[static_cast<std::size_t>(o) * in_features];
    for (int i = 0; i < in_features; ++i) s += static_cast<double>(row[i]) * x[i];
    y[o] = static_cast<float>(s);
  }
}

Frame Dense::operator()(const Frame& in) const {
  require(in.channels() == in_features, ErrorKind::Shape, "dense: input channel mismatch");
  Frame out(in.height(), in.width(), out_features);
  for (std::size_t p = 0; p < in.pixel_count(); ++p)
    apply(in.data().data() + p * in_features, out.data().data() + p * out_features);
  return out;
}

Frame relu(Frame f) {
  for (float& v : f.data()) v = std::max(v, 0.0f);
  return f;
}

Frame ConvHead::operator()(const Frame& in) const { return second(relu(first(in))); }

Frame concat_channels(const std::vector<const Frame*>& parts) {
  require(!parts.empty(), ErrorKind::Shape, "concat: no inputs");
  int total = 0;
  for (const Frame* p : parts) {
    require(p->same_grid(*parts.front()), ErrorKind::Shape, "concat: grid mismatch");
    total += p->channels();
  }
  const Frame& f0 = *parts.front();
  Frame out(f0.height(), f0.width(), total);
  for (std::size_t px = 0; px < f0.pixel_count(); ++px) {
    int o = 0;
    for (const Frame* p : parts) {
      const int c = p->channels();
      std::copy_n(p->data().data() + px * c, c, out.data().data() + px * total + o);
      o += c;
    }
  }
  return out;
}

}  // namespace hatir
