// hatir: command-line front end over the C interface.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cli_args.hpp"
#include "hatir/hatir.h"

namespace {

using hatir_cli::Invocation;
using hatir_cli::kExitOk;
using hatir_cli::kExitRuntime;
using hatir_cli::kExitUsage;

struct VideoDeleter {
  void operator()(hatir_video* v) const { hatir_video_free(v); }
};
struct ConfigDeleter {
  void operator()(hatir_config* c) const { hatir_config_free(c); }
};
using Video = std::unique_ptr<hatir_video, VideoDeleter>;
using Config = std::unique_ptr<hatir_config, ConfigDeleter>;

// Thrown on any library failure; main prints it and exits 1.
struct Failure {
  std::string what;
};

void check(hatir_status st, const std::string& context) {
  if (st != HATIR_OK) throw Failure{context + ": " + hatir_last_error()};
}

Video load(const std::string& path) {
  hatir_video* v = nullptr;
  check(hatir_video_load(path.c_str(), &v), "load " + path);
  return Video(v);
}

bool has_ext(const std::string& path, const char* ext) { return std::filesystem::path(path).extension() == ext; }

std::string shape_str(const hatir_video* v) {
  uint32_t d[4];
  hatir_video_shape(v, d);
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]) + "x" + std::to_string(d[3]);
}

void save(const hatir_video* v, const std::string& path) {
  if (has_ext(path, ".pgm"))
    check(hatir_video_save_pgm(v, 0, path.c_str()), "save " + path);
  else
    check(hatir_video_save(v, path.c_str()), "save " + path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Runner {
 public:
  Runner(const Invocation& inv, hatir_config* cfg) : inv_(inv), cfg_(cfg) {}

  void run() {
    const std::string& c = inv_.command;
    if (c == "simulate") simulate();
    else if (c == "restore") restore();
    else if (c == "mask") mask();
    else if (c == "flow") flow();
    else if (c == "losses") losses();
    else if (c == "evaluate") evaluate();
    else if (c == "profile") profile();
  }

 private:
  void note(const std::string& msg) const {
    if (!inv_.quiet) std::cerr << msg << '\n';
  }

  void simulate() {
    const std::string manifest = inv_.manifest ? *inv_.manifest : inv_.output + ".manifest.txt";
    const std::string hr_copy = inv_.hr_copy ? *inv_.hr_copy : std::string();
    if (inv_.hr_copy) {
      check(hatir_make_pair(inv_.input.c_str(), cfg_, inv_.output.c_str(), hr_copy.c_str(), manifest.c_str()),
            "simulate");
    } else {
      Video hr = load(inv_.input);
      hatir_video* lr = nullptr;
      check(hatir_degrade(hr.get(), cfg_, &lr), "simulate");
      Video out(lr);
      save(out.get(), inv_.output);
      std::size_t need = 0;
      check(hatir_turbulence_manifest(cfg_, nullptr, 0, &need), "manifest");
      std::string text(need, '\0');
      check(hatir_turbulence_manifest(cfg_, text.data(), need, nullptr), "manifest");
      text.resize(need - 1);
      std::ofstream m(manifest, std::ios::binary);
      m << "# input=" << inv_.input << "\n# lr=" << inv_.output << '\n' << text;
      if (!m) throw Failure{"cannot write " + manifest};
    }
    note("wrote " + inv_.output + " and " + manifest);
  }

  void restore() {
    double psnr = 0, ssim = 0;
    psnr = std::numeric_limits<double>::quiet_NaN();
    check(hatir_run_pipeline(cfg_, inv_.input.c_str(), inv_.output.c_str(),
                             inv_.clean ? inv_.clean->c_str() : nullptr,
                             inv_.dump_trajectory ? inv_.dump_trajectory->c_str() : nullptr,
                             inv_.metrics_csv ? inv_.metrics_csv->c_str() : nullptr, &psnr, &ssim),
          "restore");
    note("wrote " + inv_.output);
    if (psnr == psnr) note("mean PSNR " + fmt(psnr) + " dB, mean SSIM " + fmt(ssim));
  }

  void mask() {
    Video in = load(inv_.input);
    hatir_video* m = nullptr;
    check(hatir_phasor_mask(in.get(), inv_.harmonic, inv_.alpha, &m), "mask");
    Video out(m);
    save(out.get(), inv_.output);
    note("wrote " + inv_.output + " (" + shape_str(out.get()) + ")");
  }

  void flow() {
    Video in = load(inv_.input);
    hatir_video *f = nullptr, *b = nullptr;
    check(hatir_estimate_flows(in.get(), cfg_, &f, &b), "flow");
    Video fwd(f), bwd(b);
    check(hatir_video_save(fwd.get(), inv_.output.c_str()), "save " + inv_.output);
    if (inv_.backward_output)
      check(hatir_video_save(bwd.get(), inv_.backward_output->c_str()), "save " + *inv_.backward_output);
    if (inv_.viz) {
      hatir_video* mag = nullptr;
      check(hatir_flow_magnitude(fwd.get(), 0, &mag), "flow magnitude");
      Video m(mag);
      check(hatir_video_save_pgm(m.get(), 0, inv_.viz->c_str()), "save " + *inv_.viz);
    }
    note("wrote " + inv_.output + " (" + shape_str(fwd.get()) + ")");
  }

  void losses() {
    Video pred = load(inv_.pred), gt = load(inv_.gt), m = load(inv_.mask);
    hatir_loss_report r{};
    check(hatir_losses(pred.get(), gt.get(), m.get(), inv_.w_thermal, inv_.w_edge, inv_.w_diff, &r), "losses");
    const std::string body = "component,value,weight\nthermal," + fmt(r.thermal) + "," + fmt(r.w_thermal) +
                             "\nedge," + fmt(r.edge) + "," + fmt(r.w_edge) + "\ndiff," + fmt(r.diff) + "," +
                             fmt(r.w_diff) + "\ntotal," + fmt(r.total) + ",\n";
    emit(body);
  }

  void evaluate() {
    Video ref = load(inv_.ref), test = load(inv_.test);
    double psnr = 0, ssim = 0;
    check(hatir_evaluate(ref.get(), test.get(), inv_.peak, inv_.csv ? inv_.csv->c_str() : nullptr, &psnr, &ssim),
          "evaluate");
    if (!inv_.csv || !inv_.quiet) std::cout << "mean_psnr=" << fmt(psnr) << "\nmean_ssim=" << fmt(ssim) << '\n';
  }

  void profile() {
    Video in = load(inv_.input);
    std::vector<double> var(static_cast<std::size_t>(inv_.samples));
    check(hatir_profile(in.get(), inv_.line[0], inv_.line[1], inv_.line[2], inv_.line[3],
                        static_cast<uint32_t>(inv_.samples), inv_.csv->c_str(), var.data()),
          "profile");
    double mean = 0;
    for (double v : var) mean += v;
    note("wrote " + *inv_.csv + ", mean temporal variance " + fmt(mean / var.size()));
  }

  void emit(const std::string& body) const {
    if (inv_.csv) {
      std::ofstream out(*inv_.csv, std::ios::binary);
      out << body;
      if (!out) throw Failure{"cannot write " + *inv_.csv};
    }
    if (!inv_.csv || !inv_.quiet) std::cout << body;
  }

  const Invocation& inv_;
  hatir_config* cfg_;
};

}  // namespace

int main(int argc, char** argv) {
  const hatir_cli::ParseResult parsed = hatir_cli::parse_args(argc, argv);
  if (parsed.exit_code >= 0) {
    (parsed.exit_code == kExitOk ? std::cout : std::cerr) << parsed.message << (parsed.exit_code ? "\n" : "");
    if (parsed.exit_code == kExitUsage) std::cerr << "Run with --help for usage.\n";
    return parsed.exit_code;
  }

  hatir_config* raw = nullptr;
  std::string error;
  const int rc = hatir_cli::build_config(parsed.inv, &raw, error);
  if (rc != kExitOk) {
    std::cerr << "hatir: " << error << '\n';
    return rc;
  }
  Config cfg(raw);
  int threads = 1;
  {
    char buf[32];
    if (hatir_config_get(cfg.get(), "threads", buf, sizeof buf, nullptr) == HATIR_OK) threads = std::atoi(buf);
  }
  hatir_set_threads(threads);

  try {
    Runner(parsed.inv, cfg.get()).run();
  } catch (const Failure& f) {
    std::cerr << "hatir " << parsed.inv.command << ": " << f.what << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
