#include "hatir/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "hatir/error.hpp"
#include "hatir/parallel.hpp"
#include "numfmt.hpp"

namespace hatir {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  fail(ErrorKind::Config, "config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                              expected);
}

template <class T>
T parse_number(std::string_view key, std::string_view v, const char* expected) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, v, expected);
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) bad_value(key, v, expected);
  return out;
}

double parse_f(std::string_view k, std::string_view v) { return parse_number<double>(k, v, "a finite number"); }
int parse_i(std::string_view k, std::string_view v) { return parse_number<int>(k, v, "an integer"); }
std::uint64_t parse_u64(std::string_view k, std::string_view v) {
  return parse_number<std::uint64_t>(k, v, "an unsigned 64-bit integer");
}
bool parse_b(std::string_view k, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(k, v, "true/false");
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  const char* key;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define HATIR_F(name, field)                                                                   \
  Entry {                                                                                      \
    name, [](PipelineConfig& c, std::string_view v) { c.field = parse_f(name, v); },           \
        [](const PipelineConfig& c) { return format_double(c.field); }                         \
  }
#define HATIR_I(name, field)                                                                   \
  Entry {                                                                                      \
    name, [](PipelineConfig& c, std::string_view v) { c.field = parse_i(name, v); },           \
        [](const PipelineConfig& c) { return std::to_string(c.field); }                        \
  }
#define HATIR_U(name, field)                                                                   \
  Entry {                                                                                      \
    name, [](PipelineConfig& c, std::string_view v) { c.field = parse_u64(name, v); },         \
        [](const PipelineConfig& c) { return std::to_string(c.field); }                        \
  }
#define HATIR_B(name, field)                                                                   \
  Entry {                                                                                      \
    name, [](PipelineConfig& c, std::string_view v) { c.field = parse_b(name, v); },           \
        [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }        \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      HATIR_U("seed", seed),
      HATIR_I("threads", threads),
      HATIR_I("verbosity", verbosity),
      HATIR_I("phasor.harmonic", phasor.harmonic),
      HATIR_F("phasor.alpha", phasor.alpha),
      HATIR_F("turb.tilt", turb.tilt_strength),
      HATIR_F("turb.corr", turb.tilt_correlation),
      HATIR_F("turb.blur", turb.blur_sigma),
      HATIR_F("turb.drift", turb.drift_amplitude),
      HATIR_I("turb.scale", turb.scale),
      HATIR_B("flow.refine", flow.refine),
      HATIR_I("flow.clip", flow.clip_length),
      HATIR_I("flow.layers", flow.layers),
      HATIR_I("flow.offsets", flow.offsets),
      HATIR_I("flow.channels", flow.channels),
      HATIR_I("flow.head_hidden", flow.head_hidden),
      Entry{"flow.head_init",
            [](PipelineConfig& c, std::string_view v) {
              if (v == "zero") c.flow.head_init = HeadInit::Zero;
              else if (v == "seeded") c.flow.head_init = HeadInit::Seeded;
              else bad_value("flow.head_init", v, "zero|seeded");
            },
            [](const PipelineConfig& c) {
              return std::string(c.flow.head_init == HeadInit::Zero ? "zero" : "seeded");
            }},
      Entry{"flow.head_scale",
            [](PipelineConfig& c, std::string_view v) {
              c.flow.head_scale = static_cast<float>(parse_f("flow.head_scale", v));
            },
            [](const PipelineConfig& c) { return format_double(c.flow.head_scale); }},
      HATIR_I("flow.levels", flow.coarse.levels),
      HATIR_I("flow.search_radius", flow.coarse.search_radius),
      HATIR_I("flow.patch_radius", flow.coarse.patch_radius),
      HATIR_I("guide.steps", guide_steps),
      HATIR_F("guide.eta", guide.eta),
      HATIR_F("guide.tau_occ", guide.tau_occ),
      HATIR_F("guide.sigma_max", sigma_max),
      HATIR_F("guide.sigma_min", sigma_min),
      Entry{"denoiser",
            [](PipelineConfig& c, std::string_view v) {
              if (v == "oracle") c.denoiser = DenoiserKind::Oracle;
              else if (v == "zero") c.denoiser = DenoiserKind::Zero;
              else bad_value("denoiser", v, "oracle|zero");
            },
            [](const PipelineConfig& c) {
              return std::string(c.denoiser == DenoiserKind::Oracle ? "oracle" : "zero");
            }},
      HATIR_B("tad.enabled", tad_enabled),
      HATIR_U("tad.seed", tad_seed),
      HATIR_F("tad.res_scale", tad_res_scale),
      HATIR_F("tad.lambda", tad_lambda),
      HATIR_F("tad.gate_weight", tad_gate_weight),
      HATIR_F("tad.gate_bias", tad_gate_bias),
      HATIR_F("tad.attn_weight", tad_attn_weight),
      HATIR_F("tad.attn_bias", tad_attn_bias),
      HATIR_I("scale", scale),
      Entry{"metrics.peak",
            [](PipelineConfig& c, std::string_view v) {
              if (v == "auto") c.peak.reset();
              else c.peak = parse_f("metrics.peak", v);
            },
            [](const PipelineConfig& c) { return c.peak ? format_double(*c.peak) : std::string("auto"); }},
  };
  return entries;
}

#undef HATIR_F
#undef HATIR_I
#undef HATIR_U
#undef HATIR_B

const Entry& find(std::string_view key) {
  for (const Entry& e : table())
    if (key == e.key) return e;
  fail(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
}

VideoTensor oracle_target(const VideoTensor& lr, const VideoTensor& clean) {
  if (clean.shape() == lr.shape()) return clean;
  require(clean.frames() == lr.frames() && clean.channels() == lr.channels() && clean.height() % lr.height() == 0 &&
              clean.width() % lr.width() == 0 && clean.height() / lr.height() == clean.width() / lr.width(),
          ErrorKind::Shape, "restore: clean target is neither latent-sized nor an integer multiple of it");
  return box_downsample(clean, clean.height() / lr.height());
}

FlowSet estimate_flows(const VideoTensor& video, const FlowConfig& fcfg, const PhasorMask& mask) {
  if (!fcfg.refine) return coarse_flows(video, fcfg.coarse);
  return phasorflow(video, fcfg, mask, RefinerWeights::make(fcfg));
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) { find(key).set(*this, trim(value)); }

std::string PipelineConfig::get(std::string_view key) const { return find(key).get(*this); }

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const Entry& e : table()) n.emplace_back(e.key);
    return n;
  }();
  return names;
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const Entry& e : table()) out += std::string(e.key) + "=" + e.get(*this) + "\n";
  return out;
}

PipelineConfig PipelineConfig::from_text(std::string_view text) {
  PipelineConfig cfg;
  int lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorKind::Config,
            "config line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

FlowConfig PipelineConfig::flow_config() const {
  FlowConfig f = flow;
  f.seed = seed;
  f.phasor = phasor;
  return f;
}

TadWeights PipelineConfig::tad_weights(int channels) const {
  TadWeights w = tad_res_scale > 0 ? TadWeights::seeded(channels, tad_seed ^ seed, static_cast<float>(tad_res_scale))
                                   : TadWeights::test_init(channels);
  w.gate_weight = static_cast<float>(tad_gate_weight);
  w.gate_bias = static_cast<float>(tad_gate_bias);
  w.attn_weight = static_cast<float>(tad_attn_weight);
  w.attn_bias = static_cast<float>(tad_attn_bias);
  w.lambda = static_cast<float>(tad_lambda);
  return w;
}

NoiseSchedule PipelineConfig::schedule() const { return NoiseSchedule::linear(guide_steps, sigma_max, sigma_min); }

void PipelineConfig::validate() const {
  require(threads >= 1, ErrorKind::Config, "threads must be >= 1");
  require(scale >= 1, ErrorKind::Config, "scale must be >= 1");
  require(guide_steps >= 1, ErrorKind::Config, "guide.steps must be >= 1");
  require(phasor.alpha > 0, ErrorKind::Config, "phasor.alpha must be > 0");
  require(phasor.harmonic >= 1, ErrorKind::Config, "phasor.harmonic must be >= 1");
  require(sigma_min > 0 && sigma_max >= sigma_min, ErrorKind::Config, "need 0 < guide.sigma_min <= guide.sigma_max");
  require(tad_res_scale >= 0, ErrorKind::Config, "tad.res_scale must be >= 0");
  require(!peak || *peak > 0, ErrorKind::Config, "metrics.peak must be > 0");
  turb.validate();
  flow_config().validate();
  guide.validate();
}

RestoreResult restore(const VideoTensor& lr, const PipelineConfig& cfg, const std::optional<VideoTensor>& clean,
                      bool keep_trajectory) {
  cfg.validate();
  if (cfg.denoiser == DenoiserKind::Zero) return restore(lr, cfg, ZeroDenoiser{}, keep_trajectory);
  require(lr.channels() == 1, ErrorKind::Shape, "restore: expected single-channel input");
  return restore(lr, cfg, OracleDenoiser(clean ? oracle_target(lr, *clean) : lr, cfg.schedule()), keep_trajectory);
}

RestoreResult restore(const VideoTensor& lr, const PipelineConfig& cfg, const Denoiser& denoiser,
                      bool keep_trajectory) {
  cfg.validate();
  require(lr.channels() == 1, ErrorKind::Shape, "restore: expected single-channel input");
  require(lr.frames() > cfg.phasor.harmonic, ErrorKind::Precondition,
          "restore: need more frames than the phasor harmonic index");
  set_thread_count(cfg.threads);

  RestoreResult r;
  const FlowConfig fcfg = cfg.flow_config();
  r.mask = phasor_mask(lr, cfg.phasor);
  r.flows = estimate_flows(lr, fcfg, r.mask);

  GuidanceInputs inputs{r.flows, build_joint_masks(r.flows, r.mask, cfg.guide.tau_occ)};
  SampleResult s = sample(lr, denoiser, cfg.schedule(), inputs, cfg.guide.eta, keep_trajectory);
  r.sampled = std::move(s.final);
  r.trajectory = std::move(s.trajectory);

  if (cfg.tad_enabled) {
    const FlowSet latent_flows = estimate_flows(r.sampled, fcfg, phasor_mask(r.sampled, cfg.phasor));
    r.decoded = tad_decode(r.sampled, latent_flows, cfg.tad_weights(r.sampled.channels()));
  } else {
    r.decoded = r.sampled;
  }
  r.output = cfg.scale > 1 ? bilinear_upsample(r.decoded, cfg.scale) : r.decoded;
  return r;
}

std::optional<MetricReport> run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& input,
                                         const std::filesystem::path& output,
                                         const std::optional<std::filesystem::path>& clean_path,
                                         const std::optional<std::filesystem::path>& trajectory_dir) {
  const VideoTensor lr = load_irv(input);
  std::optional<VideoTensor> clean;
  if (clean_path) clean = load_irv(*clean_path);
  RestoreResult r = restore(lr, cfg, clean, trajectory_dir.has_value());
  save_irv(r.output, output);

  std::filesystem::path manifest = output;
  manifest += ".manifest.txt";
  std::ofstream m(manifest, std::ios::binary);
  require(static_cast<bool>(m), ErrorKind::Io, "cannot open " + manifest.string());
  m << "# input=" << input.string() << "\n# output=" << output.string() << '\n';
  if (clean_path) m << "# clean=" << clean_path->string() << '\n';
  m << cfg.to_text();
  require(static_cast<bool>(m), ErrorKind::Io, "write failed: " + manifest.string());

  if (trajectory_dir) {
    std::filesystem::create_directories(*trajectory_dir);
    const int steps = static_cast<int>(r.trajectory.size());
    for (int i = 0; i < steps; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%02d.irv", steps - 1 - i);
      save_irv(r.trajectory[i], *trajectory_dir / name);
    }
  }

  if (clean && clean->shape() == r.output.shape()) return evaluate(*clean, r.output, cfg.peak);
  return std::nullopt;
}

}  // namespace hatir
