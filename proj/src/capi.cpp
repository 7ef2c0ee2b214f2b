#include "hatir/hatir.h"

#include <cstring>
#include <new>
#include <string>

#include "hatir/error.hpp"
#include "hatir/parallel.hpp"
#include "hatir/pipeline.hpp"

struct hatir_video {
  hatir::VideoTensor v;
};

struct hatir_config {
  hatir::PipelineConfig c;
};

namespace {

thread_local std::string g_last_error;

struct ArgError {
  const char* what;
};

hatir_status to_status(hatir::ErrorKind k) {
  using hatir::ErrorKind;
  switch (k) {
    case ErrorKind::Format: return HATIR_ERR_FORMAT;
    case ErrorKind::Length: return HATIR_ERR_LENGTH;
    case ErrorKind::Data: return HATIR_ERR_DATA;
    case ErrorKind::Io: return HATIR_ERR_IO;
    case ErrorKind::Shape: return HATIR_ERR_SHAPE;
    case ErrorKind::Range: return HATIR_ERR_RANGE;
    case ErrorKind::Precondition: return HATIR_ERR_PRECONDITION;
    case ErrorKind::Config: return HATIR_ERR_CONFIG;
  }
  return HATIR_ERR_INTERNAL;
}

template <class F>
hatir_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HATIR_OK;
  } catch (const ArgError& e) {
    g_last_error = e.what;
    return HATIR_ERR_ARGUMENT;
  } catch (const hatir::Error& e) {
    g_last_error = std::string(hatir::to_string(e.kind())) + ": " + e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HATIR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HATIR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return HATIR_ERR_INTERNAL;
  }
}

template <class T>
T& deref(T* p, const char* name) {
  if (!p) throw ArgError{name};
  return *p;
}

void check_out(const void* p, const char* name) {
  if (!p) throw ArgError{name};
}

void copy_string(const std::string& s, char* buffer, std::size_t capacity, std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buffer && capacity > 0) {
    const std::size_t n = std::min(capacity - 1, s.size());
    std::memcpy(buffer, s.data(), n);
    buffer[n] = '\0';
  }
}

hatir_video* wrap(hatir::VideoTensor v) { return new hatir_video{std::move(v)}; }

hatir::Frame mask_frame(const hatir::VideoTensor& m) {
  hatir::require(m.frames() == 1, hatir::ErrorKind::Shape, "mask must hold a single frame");
  return m.frame(0);
}

class CallbackDenoiser final : public hatir::Denoiser {
 public:
  CallbackDenoiser(hatir_denoiser_fn fn, void* user) : fn_(fn), user_(user) {}
  hatir::VideoTensor predict_noise(const hatir::VideoTensor& z, int step) const override {
    hatir::VideoTensor eps(z.shape());
    const uint32_t dims[4] = {z.shape().frames, z.shape().height, z.shape().width, z.shape().channels};
    const int rc = fn_(z.data().data(), dims, step, eps.data().data(), user_);
    hatir::require(rc == 0, hatir::ErrorKind::Precondition,
                   "denoiser callback returned " + std::to_string(rc) + " at step " + std::to_string(step));
    return eps;
  }

 private:
  hatir_denoiser_fn fn_;
  void* user_;
};

}  // namespace

extern "C" {

const char* hatir_version(void) { return "1.0.0"; }

const char* hatir_status_string(hatir_status s) {
  switch (s) {
    case HATIR_OK: return "ok";
    case HATIR_ERR_FORMAT: return "format error";
    case HATIR_ERR_LENGTH: return "length error";
    case HATIR_ERR_DATA: return "data error";
    case HATIR_ERR_IO: return "io error";
    case HATIR_ERR_SHAPE: return "shape error";
    case HATIR_ERR_RANGE: return "range error";
    case HATIR_ERR_PRECONDITION: return "precondition error";
    case HATIR_ERR_CONFIG: return "config error";
    case HATIR_ERR_ARGUMENT: return "invalid argument";
    case HATIR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* hatir_last_error(void) { return g_last_error.c_str(); }

hatir_status hatir_video_create(uint32_t t, uint32_t h, uint32_t w, uint32_t c, const float* data,
                                hatir_video** out) {
  return guarded([&] {
    check_out(out, "out is null");
    const hatir::Shape shape{t, h, w, c};
    if (data)
      *out = wrap(hatir::VideoTensor(shape, std::vector<float>(data, data + shape.element_count())));
    else
      *out = wrap(hatir::VideoTensor(shape));
  });
}

void hatir_video_free(hatir_video* video) { delete video; }

hatir_status hatir_video_shape(const hatir_video* video, uint32_t dims[4]) {
  return guarded([&] {
    const auto& s = deref(video, "video is null").v.shape();
    check_out(dims, "dims is null");
    dims[0] = s.frames;
    dims[1] = s.height;
    dims[2] = s.width;
    dims[3] = s.channels;
  });
}

const float* hatir_video_data(const hatir_video* video) { return video ? video->v.data().data() : nullptr; }

hatir_status hatir_video_load(const char* path, hatir_video** out) {
  return guarded([&] {
    check_out(path, "path is null");
    check_out(out, "out is null");
    *out = wrap(hatir::load_irv(path));
  });
}

hatir_status hatir_video_save(const hatir_video* video, const char* path) {
  return guarded([&] {
    check_out(path, "path is null");
    hatir::save_irv(deref(video, "video is null").v, path);
  });
}

hatir_status hatir_video_save_pgm(const hatir_video* video, uint32_t frame, const char* path) {
  return guarded([&] {
    const auto& v = deref(video, "video is null").v;
    check_out(path, "path is null");
    hatir::require(frame < v.shape().frames, hatir::ErrorKind::Range, "frame index out of range");
    hatir::save_pgm(v.frame(static_cast<int>(frame)), path);
  });
}

hatir_status hatir_config_create(hatir_config** out) {
  return guarded([&] {
    check_out(out, "out is null");
    *out = new hatir_config{};
  });
}

hatir_status hatir_config_load(const char* path, hatir_config** out) {
  return guarded([&] {
    check_out(path, "path is null");
    check_out(out, "out is null");
    *out = new hatir_config{hatir::PipelineConfig::load(path)};
  });
}

void hatir_config_free(hatir_config* config) { delete config; }

hatir_status hatir_config_set(hatir_config* config, const char* key, const char* value) {
  return guarded([&] {
    auto& c = deref(config, "config is null").c;
    check_out(key, "key is null");
    check_out(value, "value is null");
    c.set(key, value);
  });
}

hatir_status hatir_config_get(const hatir_config* config, const char* key, char* buffer, size_t capacity,
                              size_t* needed) {
  return guarded([&] {
    const auto& c = deref(config, "config is null").c;
    check_out(key, "key is null");
    copy_string(c.get(key), buffer, capacity, needed);
  });
}

hatir_status hatir_config_to_text(const hatir_config* config, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] { copy_string(deref(config, "config is null").c.to_text(), buffer, capacity, needed); });
}

hatir_status hatir_config_validate(const hatir_config* config) {
  return guarded([&] { deref(config, "config is null").c.validate(); });
}

hatir_status hatir_set_threads(int threads) {
  return guarded([&] { hatir::set_thread_count(threads); });
}

hatir_status hatir_phasor_mask(const hatir_video* video, int harmonic, double alpha, hatir_video** out) {
  return guarded([&] {
    const auto& v = deref(video, "video is null").v;
    check_out(out, "out is null");
    const hatir::PhasorMask m = hatir::phasor_mask(v, hatir::PhasorConfig{harmonic, alpha});
    *out = wrap(hatir::VideoTensor::from_frames({m.frame()}));
  });
}

hatir_status hatir_degrade(const hatir_video* hr, const hatir_config* config, hatir_video** out) {
  return guarded([&] {
    const auto& v = deref(hr, "video is null").v;
    auto p = deref(config, "config is null").c.turb;
    p.seed = config->c.seed;
    check_out(out, "out is null");
    *out = wrap(hatir::degrade(v, p));
  });
}

hatir_status hatir_turbulence_manifest(const hatir_config* config, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    auto p = deref(config, "config is null").c.turb;
    p.seed = config->c.seed;
    copy_string(hatir::turbulence_manifest(p), buffer, capacity, needed);
  });
}

hatir_status hatir_make_pair(const char* hr_path, const hatir_config* config, const char* lr_path,
                             const char* hr_copy_path, const char* manifest_path) {
  return guarded([&] {
    auto p = deref(config, "config is null").c.turb;
    p.seed = config->c.seed;
    check_out(hr_path, "hr_path is null");
    check_out(lr_path, "lr_path is null");
    check_out(hr_copy_path, "hr_copy_path is null");
    hatir::make_pair(hr_path, p, lr_path, hr_copy_path,
                     manifest_path ? std::filesystem::path(manifest_path) : std::filesystem::path());
  });
}

hatir_status hatir_estimate_flows(const hatir_video* video, const hatir_config* config, hatir_video** forward,
                                  hatir_video** backward) {
  return guarded([&] {
    const auto& v = deref(video, "video is null").v;
    const auto& c = deref(config, "config is null").c;
    check_out(forward, "forward is null");
    check_out(backward, "backward is null");
    c.validate();
    hatir::set_thread_count(c.threads);
    const hatir::FlowSet set = hatir::phasorflow(v, c.flow_config());
    auto f = hatir::flows_to_tensor(set.forward);
    auto b = hatir::flows_to_tensor(set.backward);
    *forward = wrap(std::move(f));
    *backward = wrap(std::move(b));
  });
}

hatir_status hatir_flow_magnitude(const hatir_video* flows, uint32_t index, hatir_video** out) {
  return guarded([&] {
    const auto& v = deref(flows, "flows is null").v;
    check_out(out, "out is null");
    const auto list = hatir::tensor_to_flows(v);
    hatir::require(index < list.size(), hatir::ErrorKind::Range, "flow index out of range");
    *out = wrap(hatir::VideoTensor::from_frames({hatir::flow_magnitude(list[index])}));
  });
}

hatir_status hatir_losses(const hatir_video* pred, const hatir_video* gt, const hatir_video* mask, double w_thermal,
                          double w_edge, double w_diff, hatir_loss_report* out) {
  return guarded([&] {
    const auto& p = deref(pred, "pred is null").v;
    const auto& g = deref(gt, "gt is null").v;
    const auto& m = deref(mask, "mask is null").v;
    check_out(out, "out is null");
    const hatir::LossReport r = hatir::total_loss(p, g, mask_frame(m), {w_thermal, w_edge, w_diff});
    *out = {r.thermal, r.edge, r.diff, r.total, r.weights.thermal, r.weights.edge, r.weights.diff};
  });
}

hatir_status hatir_evaluate(const hatir_video* ref, const hatir_video* test, double peak, const char* csv_path,
                            double* mean_psnr, double* mean_ssim) {
  return guarded([&] {
    const auto& r = deref(ref, "ref is null").v;
    const auto& t = deref(test, "test is null").v;
    const hatir::MetricReport rep = hatir::evaluate(r, t, peak > 0 ? std::optional<double>(peak) : std::nullopt);
    if (csv_path) hatir::save_metrics_csv(rep, csv_path);
    if (mean_psnr) *mean_psnr = rep.mean_psnr;
    if (mean_ssim) *mean_ssim = rep.mean_ssim;
  });
}

hatir_status hatir_profile(const hatir_video* video, double x0, double y0, double x1, double y1, uint32_t samples,
                           const char* csv_path, double* variance) {
  return guarded([&] {
    const auto& v = deref(video, "video is null").v;
    const hatir::SamplingLine line{x0, y0, x1, y1, static_cast<int>(samples)};
    if (csv_path) hatir::save_profile_csv(hatir::sample_line(v, line), line, csv_path);
    if (variance) {
      const auto var = hatir::temporal_profile_variance(v, line);
      std::copy(var.begin(), var.end(), variance);
    }
  });
}

hatir_status hatir_restore(const hatir_video* lr, const hatir_config* config, const hatir_video* clean,
                           hatir_video** out) {
  return guarded([&] {
    const auto& v = deref(lr, "lr is null").v;
    const auto& c = deref(config, "config is null").c;
    check_out(out, "out is null");
    std::optional<hatir::VideoTensor> target;
    if (clean) target = clean->v;
    *out = wrap(hatir::restore(v, c, target).output);
  });
}

hatir_status hatir_restore_with(const hatir_video* lr, const hatir_config* config, hatir_denoiser_fn fn, void* user,
                                hatir_video** out) {
  return guarded([&] {
    const auto& v = deref(lr, "lr is null").v;
    const auto& c = deref(config, "config is null").c;
    check_out(reinterpret_cast<const void*>(fn), "denoiser callback is null");
    check_out(out, "out is null");
    *out = wrap(hatir::restore(v, c, CallbackDenoiser(fn, user)).output);
  });
}

hatir_status hatir_run_pipeline(const hatir_config* config, const char* input, const char* output,
                                const char* clean_path, const char* trajectory_dir, const char* metrics_csv,
                                double* mean_psnr, double* mean_ssim) {
  return guarded([&] {
    const auto& c = deref(config, "config is null").c;
    check_out(input, "input is null");
    check_out(output, "output is null");
    std::optional<std::filesystem::path> clean, traj;
    if (clean_path) clean = clean_path;
    if (trajectory_dir) traj = trajectory_dir;
    const auto rep = hatir::run_pipeline(c, input, output, clean, traj);
    if (rep) {
      if (metrics_csv) hatir::save_metrics_csv(*rep, metrics_csv);
      if (mean_psnr) *mean_psnr = rep->mean_psnr;
      if (mean_ssim) *mean_ssim = rep->mean_ssim;
    }
  });
}

}  // extern "C"
