#include "cli_args.hpp"

#include <CLI11.hpp>

#include <climits>
#include <memory>

namespace hatir_cli {

namespace {

using ConfigPtr = std::unique_ptr<hatir_config, decltype(&hatir_config_free)>;

std::string config_default(const char* key) {
  static ConfigPtr defaults = [] {
    hatir_config* c = nullptr;
    hatir_config_create(&c);
    return ConfigPtr(c, &hatir_config_free);
  }();
  char buf[128];
  if (hatir_config_get(defaults.get(), key, buf, sizeof buf, nullptr) != HATIR_OK) return {};
  return buf;
}

// An option whose value, when given, becomes a config setting.
struct Setting {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

class Builder {
 public:
  CLI::Option* add(CLI::App* app, const std::string& flag, const char* key, const std::string& help) {
    auto s = std::make_unique<Setting>();
    s->key = key;
    s->value = config_default(key);
    s->opt = app->add_option(flag, s->value, help)->default_str(s->value);
    settings_.push_back(std::move(s));
    return settings_.back()->opt;
  }

  void collect(Invocation& inv) const {
    for (const auto& s : settings_)
      if (s->opt->count() > 0) inv.settings.emplace_back(s->key, s->value);
  }

 private:
  std::vector<std::unique_ptr<Setting>> settings_;
};

const CLI::Range kPositiveInt(1, INT_MAX);
const CLI::Range kNonNegative(0.0, 1e300);

void add_turbulence(Builder& b, CLI::App* sub) {
  b.add(sub, "--tilt", "turb.tilt", "RMS tilt displacement (pixels)")->check(kNonNegative);
  b.add(sub, "--corr", "turb.corr", "tilt correlation length (pixels)")->check(kNonNegative);
  b.add(sub, "--blur", "turb.blur", "PSF sigma (pixels)")->check(kNonNegative);
  b.add(sub, "--drift", "turb.drift", "grayscale drift amplitude (intensity)")->check(kNonNegative);
  b.add(sub, "--scale", "turb.scale", "integer downscale factor")->check(kPositiveInt);
}

void add_flow(Builder& b, CLI::App* sub) {
  b.add(sub, "--clip", "flow.clip", "refinement clip length N")->check(kPositiveInt);
  b.add(sub, "--layers", "flow.layers", "refinement layers L")->check(kPositiveInt);
  b.add(sub, "--offsets", "flow.offsets", "residual offsets M")->check(kPositiveInt);
  b.add(sub, "--channels", "flow.channels", "feature channels C")->check(kPositiveInt);
  b.add(sub, "--head-init", "flow.head_init", "residual head weights")->check(CLI::IsMember({"zero", "seeded"}));
  b.add(sub, "--levels", "flow.levels", "coarse pyramid levels")->check(kPositiveInt);
  b.add(sub, "--search-radius", "flow.search_radius", "coarse search radius (pixels)")->check(kPositiveInt);
  b.add(sub, "--patch-radius", "flow.patch_radius", "coarse SSD patch radius (pixels)")->check(CLI::Range(0, INT_MAX));
}

}  // namespace

ParseResult parse_args(int argc, const char* const* argv) {
  ParseResult result;
  Invocation& inv = result.inv;
  Builder b;

  CLI::App app{"Turbulent infrared video restoration toolkit", "hatir"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  auto* config_opt = app.add_option("--config", config_file, "key=value config file applied before flags")
                         ->check(CLI::ExistingFile);
  b.add(&app, "--seed", "seed", "global random seed");
  b.add(&app, "--threads", "threads", "worker threads for per-frame loops")->check(kPositiveInt);
  app.add_flag("--quiet,-q", inv.quiet, "suppress progress output");

  auto* sim = app.add_subcommand("simulate", "degrade an HR sequence into a turbulent LR sequence");
  sim->add_option("--input", inv.input, "HR input (IRV)")->required();
  sim->add_option("--output", inv.output, "LR output (IRV)")->required();
  sim->add_option("--manifest", inv.manifest, "manifest path (default <output>.manifest.txt)");
  sim->add_option("--hr-copy", inv.hr_copy, "also write a verbatim copy of the HR input here");
  add_turbulence(b, sim);

  auto* rst = app.add_subcommand("restore", "restore an LR sequence");
  rst->add_option("--input", inv.input, "LR input (IRV)")->required();
  rst->add_option("--output", inv.output, "restored output (IRV)")->required();
  b.add(rst, "--steps", "guide.steps", "sampling steps")->check(kPositiveInt);
  b.add(rst, "--eta", "guide.eta", "guidance strength")->check(kNonNegative);
  b.add(rst, "--tau-occ", "guide.tau_occ", "occlusion threshold (pixels)")->check(CLI::PositiveNumber);
  b.add(rst, "--alpha", "phasor.alpha", "phasor mask sharpness")->check(CLI::PositiveNumber);
  b.add(rst, "--harmonic", "phasor.harmonic", "temporal harmonic index")->check(kPositiveInt);
  b.add(rst, "--denoiser", "denoiser", "noise predictor")->check(CLI::IsMember({"oracle", "zero"}));
  b.add(rst, "--scale", "scale", "output upsample factor")->check(kPositiveInt);
  b.add(rst, "--refine", "flow.refine", "run the flow refiner (true/false)")
      ->check(CLI::IsMember({"true", "false", "1", "0"}));
  b.add(rst, "--tad", "tad.enabled", "run the decoder feature pass (true/false)")
      ->check(CLI::IsMember({"true", "false", "1", "0"}));
  b.add(rst, "--tad-lambda", "tad.lambda", "structure attention scale");
  b.add(rst, "--peak", "metrics.peak", "metrics peak or 'auto'");
  add_flow(b, rst);
  rst->add_option("--clean", inv.clean, "oracle target / metrics reference (IRV)")->check(CLI::ExistingFile);
  rst->add_option("--dump-trajectory", inv.dump_trajectory, "directory for per-step latents");
  rst->add_option("--metrics-csv", inv.metrics_csv, "metrics against --clean when sizes match");

  auto* msk = app.add_subcommand("mask", "phasor mask of a sequence");
  msk->add_option("--input", inv.input, "input (IRV)")->required();
  msk->add_option("--output", inv.output, "mask output (.irv or .pgm)")->required();
  msk->add_option("--alpha", inv.alpha, "sharpness")->capture_default_str()->check(CLI::PositiveNumber);
  msk->add_option("--harmonic", inv.harmonic, "temporal harmonic index")->capture_default_str()->check(kPositiveInt);

  auto* flw = app.add_subcommand("flow", "estimate pair flows");
  flw->add_option("--input", inv.input, "input (IRV)")->required();
  flw->add_option("--output", inv.output, "forward flows, (T-1) x H x W x 2 (IRV)")->required();
  flw->add_option("--backward", inv.backward_output, "backward flows (IRV)");
  flw->add_option("--viz", inv.viz, "magnitude of the first forward flow (PGM)");
  bool refine = false;
  auto* refine_opt = flw->add_flag("--refine", refine, "apply the phasor-gated refiner");
  add_flow(b, flw);

  auto* los = app.add_subcommand("losses", "reconstruction losses");
  los->add_option("--pred", inv.pred, "prediction (IRV)")->required();
  los->add_option("--gt", inv.gt, "ground truth (IRV)")->required();
  los->add_option("--mask", inv.mask, "H x W mask (IRV, e.g. from `mask`)")->required();
  los->add_option("--w-thermal", inv.w_thermal, "thermal weight")->capture_default_str()->check(kNonNegative);
  los->add_option("--w-edge", inv.w_edge, "edge weight")->capture_default_str()->check(kNonNegative);
  los->add_option("--w-diff", inv.w_diff, "frame-difference weight")->capture_default_str()->check(kNonNegative);
  los->add_option("--csv", inv.csv, "CSV report path");

  auto* evl = app.add_subcommand("evaluate", "PSNR / SSIM per frame");
  evl->add_option("--ref", inv.ref, "reference (IRV)")->required();
  evl->add_option("--test", inv.test, "test (IRV)")->required();
  std::string peak = "auto";
  evl->add_option("--peak", peak, "peak value or 'auto' (reference max)")->capture_default_str();
  evl->add_option("--csv", inv.csv, "CSV report path");

  auto* prf = app.add_subcommand("profile", "temporal profile along a line");
  prf->add_option("--input", inv.input, "input (IRV)")->required();
  std::vector<double> line;
  prf->add_option("--line", line, "x0,y0,x1,y1")->required()->delimiter(',')->expected(4);
  prf->add_option("--samples", inv.samples, "samples along the line")->capture_default_str()->check(CLI::Range(2, INT_MAX));
  prf->add_option("--csv", inv.csv, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    result.exit_code = kExitOk;
    result.message = app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::CallForAllHelp&) {
    result.exit_code = kExitOk;
    result.message = app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::ParseError& e) {
    result.exit_code = kExitUsage;
    result.message = e.what();
    return result;
  }

  inv.command = app.get_subcommands().front()->get_name();
  if (config_opt->count()) inv.config_file = config_file;
  b.collect(inv);
  if (inv.command == "flow") inv.settings.emplace_back("flow.refine", refine_opt->count() ? "true" : "false");
  if (inv.command == "evaluate" && peak != "auto") {
    try {
      std::size_t used = 0;
      inv.peak = std::stod(peak, &used);
      if (used != peak.size() || !(inv.peak > 0)) throw std::invalid_argument(peak);
    } catch (const std::exception&) {
      result.exit_code = kExitUsage;
      result.message = "--peak: expected a positive number or 'auto', got '" + peak + "'";
      return result;
    }
  }
  if (inv.command == "profile") std::copy(line.begin(), line.end(), inv.line);
  return result;
}

int build_config(const Invocation& inv, hatir_config** out, std::string& error) {
  hatir_config* cfg = nullptr;
  hatir_status st = inv.config_file ? hatir_config_load(inv.config_file->c_str(), &cfg) : hatir_config_create(&cfg);
  if (st != HATIR_OK) {
    error = hatir_last_error();
    return st == HATIR_ERR_CONFIG ? kExitUsage : kExitRuntime;
  }
  ConfigPtr guard(cfg, &hatir_config_free);
  for (const auto& [key, value] : inv.settings) {
    if (hatir_config_set(cfg, key.c_str(), value.c_str()) != HATIR_OK) {
      error = hatir_last_error();
      return kExitUsage;
    }
  }
  if (hatir_config_validate(cfg) != HATIR_OK) {
    error = hatir_last_error();
    return kExitUsage;
  }
  *out = guard.release();
  return kExitOk;
}

}  // namespace hatir_cli
