#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "hatir/error.hpp"
#include "hatir/metrics.hpp"
#include "hatir/turbsim.hpp"
#include "testutil.hpp"

namespace hatir {
namespace {

using testing::random_frame;
using testing::random_video;
using testing::textured_frame;

// Reference SSIM for ref vs ref + c: per window the variances and
// covariance are unchanged, so SSIM_w = (2 mu (mu + c) + C1) / (mu^2 + (mu + c)^2 + C1).
double shifted_ssim_reference(const Frame& ref, double c, double peak) {
  const int r = 5;
  std::vector<double> g(2 * r + 1);
  double gs = 0;
  for (int i = -r; i <= r; ++i) gs += g[i + r] = std::exp(-i * i / (2 * 1.5 * 1.5));
  for (double& v : g) v /= gs;
  const double c1 = (0.01 * peak) * (0.01 * peak);
  double total = 0;
  int count = 0;
  for (int y = r; y < ref.height() - r; ++y)
    for (int x = r; x < ref.width() - r; ++x) {
      double mu = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) mu += g[dy + r] * g[dx + r] * ref.at(y + dy, x + dx);
      total += (2 * mu * (mu + c) + c1) / (mu * mu + (mu + c) * (mu + c) + c1);
      ++count;
    }
  return total / count;
}

TEST(Psnr, Examples) {
  const Frame a = random_frame(8, 8, 1, 1, 0, 255);
  EXPECT_EQ(psnr(a, a, 255), std::numeric_limits<double>::infinity());
  Frame b = a;
  for (float& v : b.data()) v += 1.0f;
  EXPECT_NEAR(psnr(a, b, 255), 20 * std::log10(255.0), 1e-4);
  EXPECT_NEAR(psnr(a, b, 255), 48.1308, 1e-4);
  Frame c(8, 8, 1, 0.0f), d(8, 8, 1, 2.0f);
  EXPECT_NEAR(psnr(c, d, 2.0), 0.0, 1e-12);
}

TEST(Psnr, DecreasesWithMse) {
  const Frame a = random_frame(10, 10, 1, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (float e : {0.01f, 0.02f, 0.05f, 0.1f}) {
    Frame b = a;
    for (float& v : b.data()) v += e;
    const double p = psnr(a, b, 1.0);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(Frame(4, 4, 1), Frame(4, 5, 1), 1.0), Error);
  EXPECT_THROW(psnr(Frame(4, 4, 1), Frame(4, 4, 1, 1.0f), 0.0), Error);
}

TEST(Ssim, IdenticalIsExactlyOne) {
  const Frame a = random_frame(16, 16, 1, 3);
  EXPECT_EQ(ssim(a, a, 1.0), 1.0);
  const Frame b = random_frame(16, 16, 3, 4);
  EXPECT_EQ(ssim(b, b, 1.0), 1.0);
}

TEST(Ssim, Symmetric) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Frame a = random_frame(20, 17, 1, seed), b = random_frame(20, 17, 1, seed + 50);
    EXPECT_NEAR(ssim(a, b, 1.0), ssim(b, a, 1.0), 1e-7);
  }
}

TEST(Ssim, ConstantShiftClosedForm) {
  const Frame a = random_frame(20, 24, 1, 5);
  for (double c : {0.05, 0.2}) {
    Frame b = a;
    for (float& v : b.data()) v += static_cast<float>(c);
    const double s = ssim(a, b, 1.0);
    EXPECT_LT(s, 1.0);
    EXPECT_NEAR(s, shifted_ssim_reference(a, c, 1.0), 1e-4);
  }
}

TEST(Ssim, BoundedAndBelowOneForDifferentFrames) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double s = ssim(random_frame(16, 16, 1, seed), random_frame(16, 16, 1, seed + 9), 1.0);
    EXPECT_LT(s, 1.0);
    EXPECT_GE(s, -1.0);
  }
}

TEST(Ssim, TooSmallIsPrecondition) {
  try {
    ssim(Frame(10, 12, 1), Frame(10, 12, 1), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
}

TEST(ProfileVariance, StaticIsZero) {
  const Frame f = random_frame(6, 6, 1, 6);
  const VideoTensor v = VideoTensor::from_frames({f, f, f, f});
  for (double x : temporal_profile_variance(v, SamplingLine{0, 0, 5, 5, 6})) EXPECT_EQ(x, 0.0);
}

TEST(ProfileVariance, AlternatingSampleIsQuarter) {
  std::vector<Frame> frames;
  for (int t = 0; t < 6; ++t) {
    Frame f(3, 3, 1, 0.0f);
    f.at(1, 1) = static_cast<float>(t % 2);
    frames.push_back(f);
  }
  const auto var = temporal_profile_variance(VideoTensor::from_frames(frames), SamplingLine{0, 1, 2, 1, 3});
  ASSERT_EQ(var.size(), 3u);
  EXPECT_EQ(var[0], 0.0);
  EXPECT_NEAR(var[1], 0.25, 1e-12);
  EXPECT_EQ(var[2], 0.0);
}

TEST(ProfileVariance, DegradedStaticSceneExceedsClean) {
  const VideoTensor clean = VideoTensor::from_frames(std::vector<Frame>(12, textured_frame(64, 64, 21)));
  TurbulenceParams p;
  p.tilt_strength = 1.5;
  p.seed = 7;
  const VideoTensor lr = degrade(clean, p);
  const SamplingLine line{8, 16, 56, 48, 40};
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  EXPECT_GT(mean(temporal_profile_variance(lr, line)), mean(temporal_profile_variance(clean, line)));
}

TEST(ProfileVariance, TranslationInvariantOnInterior) {
  const VideoTensor v = random_video(5, 12, 12, 1, 8);
  std::vector<Frame> moved;
  for (const Frame& f : v.to_frames()) moved.push_back(warp(f, FlowField(12, 12, -2.0f, -1.0f)));
  const auto a = temporal_profile_variance(v, SamplingLine{2, 3, 7, 6, 6});
  const auto b = temporal_profile_variance(VideoTensor::from_frames(moved), SamplingLine{4, 4, 9, 7, 6});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Evaluate, AutoPeakAndMeans) {
  const VideoTensor ref = random_video(3, 12, 12, 1, 9, 0, 2);
  VideoTensor test = ref;
  for (float& v : test.data()) v += 0.1f;
  const MetricReport r = evaluate(ref, test);
  EXPECT_EQ(r.peak, auto_peak(ref));
  ASSERT_EQ(r.psnr.size(), 3u);
  double s = 0;
  for (double p : r.psnr) s += p;
  EXPECT_NEAR(r.mean_psnr, s / 3, 1e-9);
  EXPECT_EQ(evaluate(ref, test, 5.0).peak, 5.0);
}

TEST(Evaluate, IdenticalFramesFlagged) {
  const VideoTensor ref = random_video(2, 12, 12, 1, 10);
  VideoTensor test = ref;
  test.at(1, 3, 3) += 0.5f;
  const MetricReport r = evaluate(ref, test);
  EXPECT_TRUE(r.identical[0]);
  EXPECT_FALSE(r.identical[1]);
  EXPECT_TRUE(std::isinf(r.psnr[0]));
  EXPECT_TRUE(std::isfinite(r.psnr[1]));
  EXPECT_EQ(r.ssim[0], 1.0);
  // Finite frames only enter the mean unless every frame is identical.
  EXPECT_NEAR(r.mean_psnr, r.psnr[1], 1e-9);
  EXPECT_TRUE(std::isinf(evaluate(ref, ref).mean_psnr));
}

TEST(Evaluate, FramePermutationInvariance) {
  const VideoTensor ref = random_video(4, 12, 12, 1, 11), test = random_video(4, 12, 12, 1, 12);
  const int perm[4] = {2, 0, 3, 1};
  std::vector<Frame> pr, pt;
  for (int i : perm) {
    pr.push_back(ref.frame(i));
    pt.push_back(test.frame(i));
  }
  const MetricReport a = evaluate(ref, test, 1.0);
  const MetricReport b = evaluate(VideoTensor::from_frames(pr), VideoTensor::from_frames(pt), 1.0);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(b.psnr[k], a.psnr[perm[k]]);
    EXPECT_EQ(b.ssim[k], a.ssim[perm[k]]);
  }
  EXPECT_NEAR(a.mean_psnr, b.mean_psnr, 1e-9);
  EXPECT_NEAR(a.mean_ssim, b.mean_ssim, 1e-12);
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate(VideoTensor(Shape{2, 12, 12, 1}), VideoTensor(Shape{3, 12, 12, 1})), Error);
  EXPECT_THROW(auto_peak(VideoTensor(Shape{1, 12, 12, 1}, -1.0f)), Error);
}

TEST(MetricsCsv, Layout) {
  const auto dir = std::filesystem::temp_directory_path() / "hatir_test_metrics_csv";
  std::filesystem::create_directories(dir);
  const VideoTensor ref = random_video(2, 12, 12, 1, 13);
  VideoTensor test = ref;
  test.at(1, 0, 0) += 0.25f;
  save_metrics_csv(evaluate(ref, test, 1.0), dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "frame,psnr,ssim,identical");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0,inf,1,1", 0), 0u) << line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("1,", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("mean,", 0), 0u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace hatir
