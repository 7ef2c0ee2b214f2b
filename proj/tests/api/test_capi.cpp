#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hatir/hatir.h"

namespace {

struct VideoDeleter {
  void operator()(hatir_video* v) const { hatir_video_free(v); }
};
struct ConfigDeleter {
  void operator()(hatir_config* c) const { hatir_config_free(c); }
};
using Video = std::unique_ptr<hatir_video, VideoDeleter>;
using Config = std::unique_ptr<hatir_config, ConfigDeleter>;

Video make_video(uint32_t t, uint32_t h, uint32_t w, uint32_t c, const std::vector<float>& data) {
  hatir_video* v = nullptr;
  EXPECT_EQ(hatir_video_create(t, h, w, c, data.empty() ? nullptr : data.data(), &v), HATIR_OK);
  return Video(v);
}

Config make_config() {
  hatir_config* c = nullptr;
  EXPECT_EQ(hatir_config_create(&c), HATIR_OK);
  return Config(c);
}

std::string get(const hatir_config* c, const char* key) {
  char buf[64];
  EXPECT_EQ(hatir_config_get(c, key, buf, sizeof buf, nullptr), HATIR_OK);
  return buf;
}

// Textured static scene, T x 64 x 64.
std::vector<float> scene(int T) {
  std::vector<float> v;
  for (int t = 0; t < T; ++t)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        v.push_back(static_cast<float>(0.5 + 0.25 * std::sin(0.37 * x + 0.11 * y * y / 8.0) +
                                       0.2 * (((x / 8) + (y / 8)) % 2)));
  return v;
}

std::filesystem::path temp_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / (std::string("hatir_api_") + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STRNE(hatir_version(), "");
  EXPECT_STREQ(hatir_status_string(HATIR_OK), "ok");
  EXPECT_STRNE(hatir_status_string(HATIR_ERR_FORMAT), hatir_status_string(HATIR_ERR_LENGTH));
}

TEST(CApi, VideoCreateShapeData) {
  const Video v = make_video(2, 3, 4, 1, {});
  uint32_t dims[4];
  ASSERT_EQ(hatir_video_shape(v.get(), dims), HATIR_OK);
  EXPECT_EQ(dims[0], 2u);
  EXPECT_EQ(dims[1], 3u);
  EXPECT_EQ(dims[2], 4u);
  EXPECT_EQ(dims[3], 1u);
  for (int i = 0; i < 24; ++i) EXPECT_EQ(hatir_video_data(v.get())[i], 0.0f);
  hatir_video* bad = nullptr;
  EXPECT_EQ(hatir_video_create(0, 3, 4, 1, nullptr, &bad), HATIR_ERR_SHAPE);
  EXPECT_EQ(bad, nullptr);
}

TEST(CApi, NullArgumentsRejected) {
  EXPECT_EQ(hatir_video_create(1, 1, 1, 1, nullptr, nullptr), HATIR_ERR_ARGUMENT);
  uint32_t dims[4];
  EXPECT_EQ(hatir_video_shape(nullptr, dims), HATIR_ERR_ARGUMENT);
  EXPECT_NE(std::string(hatir_last_error()).find("video is null"), std::string::npos);
  hatir_video_free(nullptr);
  hatir_config_free(nullptr);
}

TEST(CApi, LoadErrorsMapToStatus) {
  const auto dir = temp_dir("load");
  hatir_video* v = nullptr;
  EXPECT_EQ(hatir_video_load((dir / "missing.irv").c_str(), &v), HATIR_ERR_IO);
  {
    FILE* f = std::fopen((dir / "bad.irv").c_str(), "wb");
    std::fwrite("XXXX\1\0\0\0\1\0\0\0\1\0\0\0\1\0\0\0\0\0\0\0", 1, 24, f);
    std::fclose(f);
  }
  EXPECT_EQ(hatir_video_load((dir / "bad.irv").c_str(), &v), HATIR_ERR_FORMAT);
  {
    FILE* f = std::fopen((dir / "short.irv").c_str(), "wb");
    std::fwrite("IRV1\1\0\0\0\1\0\0\0\1\0\0\0\1\0\0\0\0\0", 1, 22, f);
    std::fclose(f);
  }
  EXPECT_EQ(hatir_video_load((dir / "short.irv").c_str(), &v), HATIR_ERR_LENGTH);
  EXPECT_EQ(v, nullptr);
  std::filesystem::remove_all(dir);
}

TEST(CApi, SaveLoadRoundTrip) {
  const auto dir = temp_dir("roundtrip");
  const Video v = make_video(1, 2, 2, 1, {1.5f, -2.0f, 0.25f, 8.0f});
  ASSERT_EQ(hatir_video_save(v.get(), (dir / "a.irv").c_str()), HATIR_OK);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.irv"), 36u);
  hatir_video* back = nullptr;
  ASSERT_EQ(hatir_video_load((dir / "a.irv").c_str(), &back), HATIR_OK);
  const Video owned(back);
  EXPECT_EQ(std::memcmp(hatir_video_data(owned.get()), hatir_video_data(v.get()), 16), 0);
  std::filesystem::remove_all(dir);
}

TEST(CApi, ConfigSetGetAndErrors) {
  const Config c = make_config();
  EXPECT_EQ(get(c.get(), "guide.eta"), "1");
  EXPECT_EQ(hatir_config_set(c.get(), "guide.eta", "0.25"), HATIR_OK);
  EXPECT_EQ(get(c.get(), "guide.eta"), "0.25");
  EXPECT_EQ(hatir_config_set(c.get(), "no.such.key", "1"), HATIR_ERR_CONFIG);
  EXPECT_NE(std::string(hatir_last_error()).find("no.such.key"), std::string::npos);
  EXPECT_EQ(hatir_config_set(c.get(), "scale", "0"), HATIR_OK);
  EXPECT_EQ(hatir_config_validate(c.get()), HATIR_ERR_CONFIG);
}

TEST(CApi, StringOutputsReportNeededSize) {
  const Config c = make_config();
  size_t needed = 0;
  ASSERT_EQ(hatir_config_to_text(c.get(), nullptr, 0, &needed), HATIR_OK);
  EXPECT_GT(needed, 100u);
  std::vector<char> small(8);
  ASSERT_EQ(hatir_config_to_text(c.get(), small.data(), small.size(), &needed), HATIR_OK);
  EXPECT_EQ(std::strlen(small.data()), 7u);
  std::vector<char> full(needed);
  ASSERT_EQ(hatir_config_to_text(c.get(), full.data(), full.size(), nullptr), HATIR_OK);
  EXPECT_EQ(std::strlen(full.data()) + 1, needed);
  EXPECT_NE(std::string(full.data()).find("tad.enabled="), std::string::npos);
}

TEST(CApi, PhasorMaskOfConstantIsHalf) {
  const Video v = make_video(4, 3, 3, 1, std::vector<float>(36, 2.0f));
  hatir_video* m = nullptr;
  ASSERT_EQ(hatir_phasor_mask(v.get(), 1, 10.0, &m), HATIR_OK);
  const Video mask(m);
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(hatir_video_data(mask.get())[i], 0.5, 1e-6);
  EXPECT_EQ(hatir_phasor_mask(v.get(), 4, 10.0, &m), HATIR_ERR_RANGE);
}

TEST(CApi, DegradeDeterministicAndShaped) {
  const Video hr = make_video(3, 64, 64, 1, scene(3));
  const Config c = make_config();
  hatir_config_set(c.get(), "turb.tilt", "1.5");
  hatir_config_set(c.get(), "turb.scale", "2");
  hatir_config_set(c.get(), "seed", "5");
  hatir_video *a = nullptr, *b = nullptr;
  ASSERT_EQ(hatir_degrade(hr.get(), c.get(), &a), HATIR_OK);
  ASSERT_EQ(hatir_degrade(hr.get(), c.get(), &b), HATIR_OK);
  const Video va(a), vb(b);
  uint32_t dims[4];
  hatir_video_shape(va.get(), dims);
  EXPECT_EQ(dims[1], 32u);
  EXPECT_EQ(std::memcmp(hatir_video_data(va.get()), hatir_video_data(vb.get()), 3 * 32 * 32 * 4), 0);
  hatir_config_set(c.get(), "turb.scale", "3");
  hatir_video* bad = nullptr;
  EXPECT_EQ(hatir_degrade(hr.get(), c.get(), &bad), HATIR_ERR_SHAPE);
}

TEST(CApi, FlowsAndMagnitude) {
  const Video v = make_video(3, 64, 64, 1, scene(3));
  const Config c = make_config();
  hatir_config_set(c.get(), "flow.refine", "false");
  hatir_video *f = nullptr, *b = nullptr;
  ASSERT_EQ(hatir_estimate_flows(v.get(), c.get(), &f, &b), HATIR_OK);
  const Video fwd(f), bwd(b);
  uint32_t dims[4];
  hatir_video_shape(fwd.get(), dims);
  EXPECT_EQ(dims[0], 2u);
  EXPECT_EQ(dims[3], 2u);
  hatir_video* m = nullptr;
  ASSERT_EQ(hatir_flow_magnitude(fwd.get(), 1, &m), HATIR_OK);
  const Video mag(m);
  EXPECT_EQ(hatir_flow_magnitude(fwd.get(), 2, &m), HATIR_ERR_RANGE);
}

TEST(CApi, LossesClosedForm) {
  const Video pred = make_video(1, 4, 4, 1, std::vector<float>(16, 1.0f));
  const Video gt = make_video(1, 4, 4, 1, {});
  const Video mask = make_video(1, 4, 4, 1, std::vector<float>(16, 0.5f));
  hatir_loss_report r{};
  ASSERT_EQ(hatir_losses(pred.get(), gt.get(), mask.get(), 1.0, 0.5, 0.5, &r), HATIR_OK);
  EXPECT_EQ(r.thermal, 8.0);
  EXPECT_EQ(r.diff, 0.0);
  EXPECT_EQ(r.w_edge, 0.5);
  EXPECT_EQ(r.total, r.thermal + 0.5 * r.edge);
}

TEST(CApi, EvaluateAndProfile) {
  std::vector<float> a(2 * 16 * 16), b;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>((i * 37) % 255);
  b = a;
  for (float& x : b) x += 1.0f;
  const Video ref = make_video(2, 16, 16, 1, a), test = make_video(2, 16, 16, 1, b);
  double ps = 0, ss = 0;
  ASSERT_EQ(hatir_evaluate(ref.get(), test.get(), 255.0, nullptr, &ps, &ss), HATIR_OK);
  EXPECT_NEAR(ps, 48.1308, 1e-4);
  EXPECT_LT(ss, 1.0);
  std::vector<double> var(4);
  ASSERT_EQ(hatir_profile(ref.get(), 0, 0, 15, 15, 4, nullptr, var.data()), HATIR_OK);
  EXPECT_EQ(hatir_profile(ref.get(), 0, 0, 16, 15, 4, nullptr, var.data()), HATIR_ERR_RANGE);
}

struct CountingDenoiser {
  int calls = 0;
};

int zero_eps(const float*, const uint32_t dims[4], int, float* eps, void* user) {
  static_cast<CountingDenoiser*>(user)->calls++;
  std::fill(eps, eps + static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * dims[3], 0.0f);
  return 0;
}

int failing_eps(const float*, const uint32_t*, int, float*, void*) { return 3; }

TEST(CApi, RestoreWithCallback) {
  const Video lr = make_video(4, 64, 64, 1, scene(4));
  const Config c = make_config();
  hatir_config_set(c.get(), "guide.eta", "0");
  hatir_config_set(c.get(), "tad.enabled", "false");
  hatir_config_set(c.get(), "guide.steps", "6");
  CountingDenoiser d;
  hatir_video* out = nullptr;
  ASSERT_EQ(hatir_restore_with(lr.get(), c.get(), zero_eps, &d, &out), HATIR_OK);
  const Video o(out);
  EXPECT_EQ(d.calls, 6);
  EXPECT_EQ(std::memcmp(hatir_video_data(o.get()), hatir_video_data(lr.get()), 4 * 64 * 64 * 4), 0);
  hatir_video* none = nullptr;
  EXPECT_NE(hatir_restore_with(lr.get(), c.get(), failing_eps, nullptr, &none), HATIR_OK);
  EXPECT_EQ(none, nullptr);
}

TEST(CApi, RestoreOracleMatchesClean) {
  const Video clean = make_video(4, 64, 64, 1, scene(4));
  const Config c = make_config();
  hatir_config_set(c.get(), "turb.tilt", "1.5");
  hatir_config_set(c.get(), "flow.channels", "4");
  hatir_video* lr = nullptr;
  ASSERT_EQ(hatir_degrade(clean.get(), c.get(), &lr), HATIR_OK);
  const Video vlr(lr);
  hatir_video* out = nullptr;
  ASSERT_EQ(hatir_restore(vlr.get(), c.get(), clean.get(), &out), HATIR_OK);
  const Video o(out);
  double ps = 0;
  ASSERT_EQ(hatir_evaluate(clean.get(), o.get(), 0.0, nullptr, &ps, nullptr), HATIR_OK);
  EXPECT_GT(ps, 40.0);
}

}  // namespace
