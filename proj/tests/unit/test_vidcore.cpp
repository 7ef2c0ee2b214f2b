#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hatir/error.hpp"
#include "hatir/vidcore.hpp"
#include "testutil.hpp"

using namespace hatir;
using namespace hatir::testing;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "hatir_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::Config;
}

// Replicate-border 3x3 correlation, written independently of the library.
double sobel_ref(const Frame& f, int y, int x) {
  auto at = [&](int yy, int xx) {
    yy = std::clamp(yy, 0, f.height() - 1);
    xx = std::clamp(xx, 0, f.width() - 1);
    return static_cast<double>(f.at(yy, xx));
  };
  const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                    (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
  const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                    (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
  return std::abs(gx) + std::abs(gy);
}

}  // namespace

// Header is 4 magic bytes plus four u32 dims (20 bytes), then the payload.
TEST(Irv, SingleZeroElementLayout) {
  const auto p = temp_path("one.irv");
  save_irv(VideoTensor(Shape{1, 1, 1, 1}), p);
  std::vector<std::uint8_t> expect = {'I', 'R', 'V', '1'};
  for (int i = 0; i < 4; ++i) put_u32(expect, 1);
  put_u32(expect, 0);  // +0.0f
  EXPECT_EQ(read_bytes(p), expect);
}

TEST(Irv, FileSizeIsHeaderPlusPayload) {
  const auto p = temp_path("two.irv");
  save_irv(random_video(2, 2, 2, 1, 3), p);
  EXPECT_EQ(std::filesystem::file_size(p), 20u + 32u);
}

TEST(Irv, RoundTripIsBitExact) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const VideoTensor v = random_video(3, 4, 4, 1 + seed % 3, seed, -1e6f, 1e6f);
    const auto p = temp_path("rt.irv");
    save_irv(v, p);
    const VideoTensor back = load_irv(p);
    ASSERT_EQ(back.shape(), v.shape());
    EXPECT_EQ(std::memcmp(back.data().data(), v.data().data(), v.data().size_bytes()), 0);
    const auto bytes1 = read_bytes(p);
    save_irv(back, p);
    EXPECT_EQ(read_bytes(p), bytes1);
  }
}

TEST(Irv, LittleEndianPayload) {
  const VideoTensor v(Shape{1, 1, 1, 1}, 1.0f);
  const auto bytes = encode_irv(v);
  ASSERT_EQ(bytes.size(), 24u);
  // 1.0f = 0x3F800000
  EXPECT_EQ(bytes[20], 0x00);
  EXPECT_EQ(bytes[21], 0x00);
  EXPECT_EQ(bytes[22], 0x80);
  EXPECT_EQ(bytes[23], 0x3F);
}

TEST(Irv, BadMagicIsFormatError) {
  std::vector<std::uint8_t> b = {'X', 'X', 'X', 'X'};
  for (int i = 0; i < 4; ++i) put_u32(b, 1);
  put_u32(b, 0);
  EXPECT_EQ(kind_of([&] { decode_irv(b); }), ErrorKind::Format);
}

TEST(Irv, TruncatedPayloadIsLengthError) {
  std::vector<std::uint8_t> b = {'I', 'R', 'V', '1'};
  put_u32(b, 2);
  put_u32(b, 2);
  put_u32(b, 2);
  put_u32(b, 1);
  for (int i = 0; i < 7; ++i) put_u32(b, 0);
  EXPECT_EQ(kind_of([&] { decode_irv(b); }), ErrorKind::Length);
  // Truncated header too.
  std::vector<std::uint8_t> h = {'I', 'R', 'V', '1', 1, 0};
  EXPECT_EQ(kind_of([&] { decode_irv(h); }), ErrorKind::Length);
}

TEST(Irv, NonFiniteIsDataError) {
  std::vector<std::uint8_t> b = {'I', 'R', 'V', '1'};
  for (int i = 0; i < 4; ++i) put_u32(b, 1);
  put_u32(b, 0x7FC00000u);  // quiet NaN
  EXPECT_EQ(kind_of([&] { decode_irv(b); }), ErrorKind::Data);
  b.resize(20);
  put_u32(b, 0x7F800000u);  // +inf
  EXPECT_EQ(kind_of([&] { decode_irv(b); }), ErrorKind::Data);
}

TEST(Irv, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { load_irv("/nonexistent/dir/x.irv"); }), ErrorKind::Io);
  EXPECT_EQ(kind_of([] { save_irv(VideoTensor(Shape{1, 1, 1, 1}), "/nonexistent/dir/x.irv"); }), ErrorKind::Io);
}

TEST(Warp, ZeroFlowIsIdentity) {
  const Frame f = random_frame(9, 7, 2, 11);
  EXPECT_LT(max_abs_diff(warp(f, FlowField(9, 7)), f), 1e-6);
}

TEST(Warp, UnitShiftMovesColumnsLeftAndClampsEdge) {
  const Frame f = random_frame(8, 8, 1, 4);
  const Frame w = warp(f, FlowField(8, 8, 1.0f, 0.0f));
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 7; ++x) EXPECT_EQ(w.at(y, x), f.at(y, x + 1));
    EXPECT_EQ(w.at(y, 7), f.at(y, 7));
  }
}

TEST(Warp, HalfPixelOnRampGivesMidpoints) {
  const Frame ramp = affine_frame(6, 10, 0.0, 1.0, 0.0);
  const Frame w = warp(ramp, FlowField(6, 10, 0.5f, 0.0f));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 9; ++x) EXPECT_NEAR(w.at(y, x), x + 0.5, 1e-6);
}

TEST(Warp, IntegerFlowsEqualIndexShiftWhereInBounds) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> d(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Frame f = random_frame(12, 13, 1, 100 + trial);
    FlowField flow(12, 13);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 13; ++x) {
        flow.dx(y, x) = static_cast<float>(d(rng));
        flow.dy(y, x) = static_cast<float>(d(rng));
      }
    const Frame w = warp(f, flow);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 13; ++x) {
        const int sx = x + static_cast<int>(flow.dx(y, x)), sy = y + static_cast<int>(flow.dy(y, x));
        if (sx < 0 || sy < 0 || sx >= 13 || sy >= 12) continue;
        EXPECT_EQ(w.at(y, x), f.at(sy, sx));
      }
  }
}

TEST(Warp, LinearInImage) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Frame a = random_frame(10, 11, 1, seed), b = random_frame(10, 11, 1, seed + 50);
    FlowField flow(Frame(random_frame(10, 11, 2, seed + 99, -3.0f, 3.0f)));
    const double ca = 0.7, cb = -1.3;
    Frame mix(10, 11, 1);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = static_cast<float>(ca * a.data()[i] + cb * b.data()[i]);
    const Frame wm = warp(mix, flow), wa = warp(a, flow), wb = warp(b, flow);
    for (std::size_t i = 0; i < wm.size(); ++i)
      EXPECT_NEAR(wm.data()[i], ca * wa.data()[i] + cb * wb.data()[i], 1e-5);
  }
}

TEST(Warp, AdjointSatisfiesDotProductIdentity) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Frame a = random_frame(9, 12, 1, seed), g = random_frame(9, 12, 1, seed + 7, -1.0f, 1.0f);
    FlowField flow(Frame(random_frame(9, 12, 2, seed + 13, -4.0f, 4.0f)));
    const Frame wa = warp(a, flow), atg = warp_adjoint(g, flow);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      lhs += static_cast<double>(wa.data()[i]) * g.data()[i];
      rhs += static_cast<double>(a.data()[i]) * atg.data()[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-5 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Warp, DimensionMismatchIsShapeError) {
  EXPECT_EQ(kind_of([] { warp(Frame(4, 4), FlowField(4, 5)); }), ErrorKind::Shape);
}

TEST(Sobel, ConstantIsZero) {
  const Frame s = sobel_gradient_magnitude(Frame(6, 6, 1, 3.5f));
  for (float v : s.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Sobel, StepEdgeBand) {
  const int c = 5;
  Frame f(8, 10, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = c; x < 10; ++x) f.at(y, x) = 1.0f;
  const Frame s = sobel_gradient_magnitude(f);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      if (x == c - 1 || x == c)
        EXPECT_EQ(s.at(y, x), 4.0f);  // 1 + 2 + 1 from the x-kernel
      else
        EXPECT_EQ(s.at(y, x), 0.0f);
    }
}

TEST(Sobel, RampMagnitudeIsEightTimesSlope) {
  for (double slope : {0.25, -1.5, 3.0}) {
    const Frame s = sobel_gradient_magnitude(affine_frame(7, 9, 2.0, slope, 0.0));
    for (int y = 1; y < 6; ++y)
      for (int x = 1; x < 8; ++x) EXPECT_NEAR(s.at(y, x), 8 * std::abs(slope), 1e-5);
  }
}

TEST(Sobel, MatchesIndependentConvolution) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Frame f = random_frame(7, 9, 1, seed, -2.0f, 2.0f);
    const Frame s = sobel_gradient_magnitude(f);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) {
        EXPECT_GE(s.at(y, x), 0.0f);
        EXPECT_NEAR(s.at(y, x), sobel_ref(f, y, x), 1e-5);
      }
  }
}

TEST(Sobel, MultiChannelIsShapeError) {
  EXPECT_EQ(kind_of([] { sobel_gradient_magnitude(Frame(4, 4, 2)); }), ErrorKind::Shape);
  EXPECT_EQ(kind_of([] { laplacian(Frame(4, 4, 3)); }), ErrorKind::Shape);
}

TEST(Laplacian, ConstantAndImpulse) {
  const Frame flat = laplacian(Frame(5, 5, 1, -2.0f));
  for (float v : flat.data()) EXPECT_EQ(v, 0.0f);
  Frame imp(7, 7, 1);
  imp.at(3, 3) = 1.0f;
  const Frame l = laplacian(imp);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      const int d = std::abs(y - 3) + std::abs(x - 3);
      EXPECT_EQ(l.at(y, x), d == 0 ? -4.0f : d == 1 ? 1.0f : 0.0f);
    }
}

TEST(Laplacian, AnnihilatesAffineOnInterior) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2, 2);
    const Frame l = laplacian(affine_frame(9, 8, u(rng), u(rng), u(rng)));
    for (int y = 1; y < 8; ++y)
      for (int x = 1; x < 7; ++x) EXPECT_NEAR(l.at(y, x), 0.0, 1e-5);
  }
}

TEST(Gaussian, ImpulseResponseMatchesAnalyticKernel) {
  const double sigma = 2.0;
  Frame imp(41, 41, 1);
  imp.at(20, 20) = 1.0f;
  const Frame g = gaussian_blur(imp, sigma);
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      const double expect = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / (2 * M_PI * sigma * sigma);
      EXPECT_LT(std::abs(g.at(20 + dy, 20 + dx) - expect) / expect, 1e-3) << dx << "," << dy;
    }
}

TEST(Gaussian, PreservesMassAndConstants) {
  const Frame f = random_frame(20, 17, 1, 8);
  const Frame g = gaussian_blur(f, 1.3);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    a += f.data()[i];
    b += g.data()[i];
  }
  EXPECT_NEAR(a, b, 1e-3);
  const Frame flat = gaussian_blur(Frame(10, 10, 1, 0.75f), 3.0);
  for (float v : flat.data()) EXPECT_NEAR(v, 0.75f, 1e-6);
}

TEST(Resample, BoxDownsampleIsBlockMean) {
  const Frame f = random_frame(6, 9, 2, 5);
  const Frame d = box_downsample(f, 3);
  ASSERT_EQ(d.height(), 2);
  ASSERT_EQ(d.width(), 3);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 2; ++c) {
        double s = 0;
        for (int j = 0; j < 3; ++j)
          for (int i = 0; i < 3; ++i) s += f.at(3 * y + j, 3 * x + i, c);
        EXPECT_NEAR(d.at(y, x, c), s / 9, 1e-6);
      }
  EXPECT_EQ(kind_of([&] { box_downsample(f, 4); }), ErrorKind::Shape);
}

TEST(Resample, BilinearUpsampleReproducesAffineInterior) {
  const Frame f = affine_frame(8, 8, 1.0, 0.5, -0.25);
  const Frame u = bilinear_upsample(f, 2);
  ASSERT_EQ(u.height(), 16);
  for (int y = 1; y < 15; ++y)
    for (int x = 1; x < 15; ++x) {
      const double sx = (x + 0.5) / 2 - 0.5, sy = (y + 0.5) / 2 - 0.5;
      EXPECT_NEAR(u.at(y, x), 1.0 + 0.5 * sx - 0.25 * sy, 1e-5);
    }
}

TEST(SampleLine, StaticVideoHasIdenticalColumns) {
  const Frame f = random_frame(10, 10, 1, 21);
  const VideoTensor v = VideoTensor::from_frames({f, f, f, f});
  const ProfileMatrix p = sample_line(v, {1.0, 2.0, 8.5, 7.25, 9});
  for (int s = 0; s < p.samples; ++s)
    for (int t = 1; t < p.frames; ++t) EXPECT_EQ(p.at(s, t), p.at(s, 0));
}

TEST(SampleLine, TwoSamplesAreEndpointPixels) {
  const VideoTensor v = random_video(3, 6, 7, 1, 2);
  const ProfileMatrix p = sample_line(v, {1, 2, 5, 4, 2});
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(p.at(0, t), v.at(t, 2, 1));
    EXPECT_EQ(p.at(1, t), v.at(t, 4, 5));
  }
}

TEST(SampleLine, DiagonalOnRampIncreasesLinearly) {
  const VideoTensor v = VideoTensor::from_frames({affine_frame(12, 12, 0.0, 1.0, 0.0)});
  const ProfileMatrix p = sample_line(v, {0.0, 0.0, 11.0, 11.0, 12});
  for (int s = 0; s < 12; ++s) EXPECT_NEAR(p.at(s, 0), s, 1e-5);
}

TEST(SampleLine, OutOfBoundsIsRangeError) {
  const VideoTensor v = random_video(2, 5, 5, 1, 2);
  EXPECT_EQ(kind_of([&] { sample_line(v, {0, 0, 5, 0, 3}); }), ErrorKind::Range);
  EXPECT_EQ(kind_of([&] { sample_line(v, {-0.5, 0, 4, 0, 3}); }), ErrorKind::Range);
}

TEST(Export, PgmHeaderAndScaling) {
  Frame f(2, 3, 1);
  f.at(0, 0) = -1.0f;
  f.at(1, 2) = 3.0f;
  const auto p = temp_path("f.pgm");
  save_pgm(f, p);
  const auto b = read_bytes(p);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(b.size(), header.size() + 6);
  EXPECT_EQ(std::string(b.begin(), b.begin() + header.size()), header);
  EXPECT_EQ(b[header.size()], 0);
  EXPECT_EQ(b[header.size() + 5], 255);
  EXPECT_EQ(b[header.size() + 1], 64);  // 0 maps to round(255 / 4)
}

TEST(Export, ProfileCsvHasOneRowPerSample) {
  const VideoTensor v = random_video(3, 5, 5, 1, 9);
  const SamplingLine line{0, 0, 4, 4, 5};
  const auto p = temp_path("p.csv");
  save_profile_csv(sample_line(v, line), line, p);
  std::ifstream in(p);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "sample,x,y,t0,t1,t2");
  int rows = 0;
  for (std::string l; std::getline(in, l);) ++rows;
  EXPECT_EQ(rows, 5);
}
