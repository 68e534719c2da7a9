#pragma once

// Command implementations behind the endotrack CLI. Each returns the process
// exit code and writes human-readable output to `out` / diagnostics to `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "endotrack/gradcheck.hpp"
#include "endotrack/io.hpp"
#include "endotrack/tracker.hpp"

namespace endotrack::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitInvalidPose = 3,
  kExitMismatch = 4,
};

int exit_code_for(const Error& e);

enum class TrackMode { Chained, Rebased };

struct TrackArgs {
  std::filesystem::path rels;
  std::optional<std::filesystem::path> gt;  // required for rebased; supplies P0 for chained
  std::optional<std::string> p0;            // "tx ty tz qx qy qz qw"
  TrackMode mode = TrackMode::Chained;
  std::filesystem::path output;
};

int cmd_track(const TrackArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::filesystem::path gt;
  std::filesystem::path est;
  std::optional<std::filesystem::path> output;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct SynthArgs {
  std::size_t n = 500;
  SynthOptions synth;
  NoiseSpec noise;
  std::filesystem::path gt_out;
  std::filesystem::path rels_out;
};

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

struct GradcheckArgs {
  std::uint64_t seed = 0;
  bool inject_nan = false;  // corrupts the parameters to prove failures surface
};

/// Attention-block, decoder and loss-weight gradient checks.
std::vector<GradCheckReport> run_gradchecks(const GradcheckArgs& args);
void write_gradcheck_report(std::ostream& os, const std::vector<GradCheckReport>& reports);
int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err);

inline constexpr double kLambdaGradTolerance = 1e-6;

struct BenchArgs {
  Index height = 64;
  Index width = 64;
  int repeat = 50;
  int warmup = 5;
  bool f32 = false;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> params;
  std::optional<std::filesystem::path> save_params;
};

struct BenchResult {
  std::string precision;
  Index height = 0;
  Index width = 0;
  int repeat = 0;
  std::vector<std::pair<std::string, double>> stage_ms;  // mean per frame pair
  double total_ms = 0.0;
  double fps = 0.0;
};

BenchResult run_bench(const BenchArgs& args);
void write_bench_report(std::ostream& os, const BenchResult& result);
int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);

}  // namespace endotrack::cli
