#include "hatir/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "hatir/error.hpp"
#include "numfmt.hpp"

namespace hatir {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Valid-mode separable filtering of a double plane.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w, const std::array<double, kWindow>& k) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

double ssim_plane(const Frame& a, const Frame& b, int c, double peak) {
  const int h = a.height(), w = a.width(), nc = a.channels();
  const std::size_t n = a.pixel_count();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t p = 0; p < n; ++p) {
    x[p] = a.data()[p * nc + c];
    y[p] = b.data()[p * nc + c];
    xx[p] = x[p] * x[p];
    yy[p] = y[p] * y[p];
    xy[p] = x[p] * y[p];
  }
  static const auto k = gaussian_window();
  const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
  const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k), sxy = filter_valid(xy, h, w, k);
  const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2 * mx[i] * my[i] + c1) * (2 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

double psnr(const Frame& ref, const Frame& test, double peak) {
  require(ref.same_dims(test), ErrorKind::Shape, "psnr: frame dims differ");
  require(peak > 0 && std::isfinite(peak), ErrorKind::Precondition, "psnr: peak must be positive");
  double se = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = static_cast<double>(ref.data()[i]) - test.data()[i];
    se += d * d;
  }
  if (se == 0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(ref.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Frame& ref, const Frame& test, double peak) {
  require(ref.same_dims(test), ErrorKind::Shape, "ssim: frame dims differ");
  require(ref.height() >= kWindow && ref.width() >= kWindow, ErrorKind::Precondition,
          "ssim: frames must be at least 11x11");
  require(peak > 0 && std::isfinite(peak), ErrorKind::Precondition, "ssim: peak must be positive");
  if (ref == test) return 1.0;
  double s = 0;
  for (int c = 0; c < ref.channels(); ++c) s += ssim_plane(ref, test, c, peak);
  return s / ref.channels();
}

std::vector<double> temporal_profile_variance(const VideoTensor& video, const SamplingLine& line) {
  const ProfileMatrix prof = sample_line(video, line);
  std::vector<double> var(prof.samples, 0.0);
  for (int s = 0; s < prof.samples; ++s) {
    double mean = 0;
    for (int t = 0; t < prof.frames; ++t) mean += prof.at(s, t);
    mean /= prof.frames;
    double v = 0;
    for (int t = 0; t < prof.frames; ++t) v += (prof.at(s, t) - mean) * (prof.at(s, t) - mean);
    var[s] = v / prof.frames;
  }
  return var;
}

double auto_peak(const VideoTensor& ref) {
  require(!ref.data().empty(), ErrorKind::Precondition, "auto_peak: empty reference");
  const double m = *std::max_element(ref.data().begin(), ref.data().end());
  require(m > 0, ErrorKind::Precondition, "auto_peak: reference maximum is not positive; pass an explicit peak");
  return m;
}

MetricReport evaluate(const VideoTensor& ref, const VideoTensor& test, std::optional<double> peak) {
  require(ref.shape() == test.shape(), ErrorKind::Shape, "evaluate: ref and test shapes differ");
  MetricReport r;
  r.peak = peak ? *peak : auto_peak(ref);
  const int T = ref.frames();
  double ps = 0, ss = 0;
  int finite = 0;
  for (int t = 0; t < T; ++t) {
    const Frame a = ref.frame(t), b = test.frame(t);
    r.psnr.push_back(psnr(a, b, r.peak));
    r.ssim.push_back(ssim(a, b, r.peak));
    r.identical.push_back(a == b);
    if (std::isfinite(r.psnr.back())) {
      ps += r.psnr.back();
      ++finite;
    }
    ss += r.ssim.back();
  }
  // Identical frames would pin the mean at +inf; average the rest.
  r.mean_psnr = finite ? ps / finite : (T ? std::numeric_limits<double>::infinity() : 0.0);
  r.mean_ssim = T ? ss / T : 0.0;
  return r;
}

void save_metrics_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string());
  out << "frame,psnr,ssim,identical\n";
  for (std::size_t t = 0; t < report.psnr.size(); ++t)
    out << t << ',' << format_double(report.psnr[t]) << ',' << format_double(report.ssim[t]) << ','
        << (report.identical[t] ? 1 : 0) << '\n';
  const bool all = std::all_of(report.identical.begin(), report.identical.end(), [](bool b) { return b; });
  out << "mean," << format_double(report.mean_psnr) << ',' << format_double(report.mean_ssim) << ','
      << (all ? 1 : 0) << '\n';
  out << "peak," << format_double(report.peak) << ",,\n";
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace hatir
