#pragma once

// Minimal seeded layers for the refiner and decoder heads. No training; the
// weights are either fixed test initialisations or draws from a seeded
// uniform distribution.

#include <cstdint>
#include <random>
#include <vector>

#include "hatir/vidcore.hpp"

namespace hatir {

// Square-kernel 2-D convolution, replicate border. Weight layout
// [out][in][ky][kx].
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  std::vector<float> weight;
  std::vector<float> bias;

  static Conv2d zeros(int in, int out, int kernel);
  // Centre tap 1 on matching channels, everything else 0. Requires in == out.
  static Conv2d identity(int channels, int kernel);
  // U(-scale, scale) weights, zero bias.
  static Conv2d uniform(int in, int out, int kernel, float scale, std::mt19937_64& rng);

  float& w(int o, int i, int ky, int kx) {
    return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }
  float w(int o, int i, int ky, int kx) const {
    return weight[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
  }

  bool is_zero() const;
  Frame operator()(const Frame& in) const;
};

// Per-pixel affine map y = W x + b over channels. Weight layout [out][in].
struct Dense {
  int in_features = 0;
  int out_features = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  static Dense zeros(int in, int out);
  static Dense identity(int n);
  static Dense uniform(int in, int out, float scale, std::mt19937_64& rng);

  // y (out_features) from x (in_features), both contiguous.
  void apply(const float* x, float* y) const;
  Frame operator()(const Frame& in) const;
};

// conv -> ReLU -> conv.
struct ConvHead {
  Conv2d first;
  Conv2d second;

  bool is_zero() const { return second.is_zero() && second.bias == std::vector<float>(second.bias.size(), 0.0f); }
  Frame operator()(const Frame& in) const;
};

Frame relu(Frame f);

// Channel-wise concatenation of frames on the same grid.
Frame concat_channels(const std::vector<const Frame*>& parts);

}  // namespace hatir
