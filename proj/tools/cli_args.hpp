#pragma once

// Command-line parsing for the hatir tool. Flags that map onto pipeline
// config keys are collected as key=value settings and applied through the C
// interface, so the parser shares defaults with the library.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hatir/hatir.h"

namespace hatir_cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct Invocation {
  std::string command;
  std::vector<std::pair<std::string, std::string>> settings;  // applied in order
  std::optional<std::string> config_file;
  bool quiet = false;

  std::string input, output;
  std::optional<std::string> manifest, hr_copy;           // simulate
  std::optional<std::string> clean, dump_trajectory;      // restore
  std::optional<std::string> metrics_csv;                 // restore
  std::optional<std::string> viz, backward_output;        // flow
  int harmonic = 1;                                       // mask
  double alpha = 10.0;                                    // mask
  std::string pred, gt, mask;                             // losses
  double w_thermal = 1.0, w_edge = 0.5, w_diff = 0.5;     // losses
  std::string ref, test;                                  // evaluate
  double peak = 0.0;                                      // <= 0 means auto
  double line[4] = {0, 0, 0, 0};                          // profile
  int samples = 2;
  std::optional<std::string> csv;
};

struct ParseResult {
  int exit_code = -1;   // -1: run the invocation; otherwise exit with it
  std::string message;  // help text or usage error
  Invocation inv;
};

ParseResult parse_args(int argc, const char* const* argv);

// Builds the config: defaults, then --config file, then explicit flags.
// Returns a usage exit code for bad keys/values, runtime for unreadable
// files, or kExitOk with `*out` set.
int build_config(const Invocation& inv, hatir_config** out, std::string& error);

}  // namespace hatir_cli
