// endotrack: trajectory chaining, evaluation, synthesis, gradient checks and
// throughput benchmarking.

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "endotrack/commands.hpp"

namespace cli = endotrack::cli;

namespace {

endotrack::Vector3<double> parse_vec3(const std::string& text) {
  std::istringstream is(text);
  endotrack::Vector3<double> v;
  if (!(is >> v.x() >> v.y() >> v.z())) throw CLI::ValidationError("--bias-t", "expected three numbers");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Endoscope ego-motion tracking tools"};
  app.require_subcommand(1);

  cli::TrackArgs track;
  std::string mode = "chained";
  auto* track_cmd = app.add_subcommand("track", "Chain relative poses into a trajectory");
  track_cmd->add_option("--rels", track.rels, "Relative pose file")->required();
  track_cmd->add_option("--gt", track.gt, "Ground-truth trajectory (P0 source; required for rebased)");
  track_cmd->add_option("--p0", track.p0, "Initial pose \"tx ty tz qx qy qz qw\"");
  track_cmd->add_option("--mode", mode, "chained or rebased")->check(CLI::IsMember({"chained", "rebased"}));
  track_cmd->add_option("-o,--output", track.output, "Output trajectory")->required();

  cli::EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compare an estimate against ground truth");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth trajectory")->required();
  eval_cmd->add_option("--est", eval.est, "Estimated trajectory")->required();
  eval_cmd->add_option("-o,--output", eval.output, "Also write the report here");

  cli::SynthArgs synth;
  std::string unit = "mm", bias = "0 0 0";
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic trajectory and noisy relatives");
  synth_cmd->add_option("--n", synth.n, "Number of poses")->default_val(500)->check(CLI::Range(2, 100000000));
  synth_cmd->add_option("--seed", synth.synth.seed, "Random seed")->default_val(0);
  synth_cmd->add_option("--step", synth.synth.step_length, "Mean step length")->default_val(1.0);
  synth_cmd->add_option("--max-rotation", synth.synth.max_rotation, "Max rotation per step [rad]")->default_val(0.02);
  synth_cmd->add_option("--unit", unit, "mm or cm")->check(CLI::IsMember({"mm", "cm"}));
  synth_cmd->add_option("--stride", synth.synth.stride, "Frame stride")->default_val(endotrack::kDefaultStride);
  synth_cmd->add_option("--sigma-t", synth.noise.sigma_t, "Translation noise std")->default_val(0.0);
  synth_cmd->add_option("--sigma-r", synth.noise.sigma_r, "Rotation noise std [rad]")->default_val(0.0);
  synth_cmd->add_option("--bias-t", bias, "Translation bias \"bx by bz\"");
  synth_cmd->add_option("--gt-out", synth.gt_out, "Ground-truth output")->required();
  synth_cmd->add_option("--rels-out", synth.rels_out, "Noisy relatives output")->required();

  cli::GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--seed", grad.seed, "Random seed")->default_val(0);
  grad_cmd->add_flag("--inject-nan", grad.inject_nan, "Corrupt parameters with NaN (self-test)");

  cli::BenchArgs bench;
  std::string size = "64x64";
  auto* bench_cmd = app.add_subcommand("bench", "Time the feature pipeline and decoder");
  bench_cmd->add_option("--size", size, "Input HxW")->default_val("64x64");
  bench_cmd->add_option("--repeat", bench.repeat, "Timed iterations")->default_val(50);
  bench_cmd->add_option("--warmup", bench.warmup, "Untimed iterations")->default_val(5);
  bench_cmd->add_flag("--f32", bench.f32, "Single precision");
  bench_cmd->add_option("--config", bench.config, "Run config file")->check(CLI::ExistingFile);
  bench_cmd->add_option("--params", bench.params, "Parameter JSON to load")->check(CLI::ExistingFile);
  bench_cmd->add_option("--save-params", bench.save_params, "Write the parameters used");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) {
      synth.synth.unit = endotrack::parse_length_unit(unit);
      synth.noise.bias_t = parse_vec3(bias);
      synth.noise.seed = synth.synth.seed + 1;
    }
    if (bench_cmd->parsed()) {
      const auto x = size.find('x');
      if (x == std::string::npos) throw CLI::ValidationError("--size", "expected HxW");
      bench.height = std::stol(size.substr(0, x));
      bench.width = std::stol(size.substr(x + 1));
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  }

  if (track_cmd->parsed()) {
    track.mode = mode == "rebased" ? cli::TrackMode::Rebased : cli::TrackMode::Chained;
    return cli::cmd_track(track, std::cout, std::cerr);
  }
  if (eval_cmd->parsed()) return cli::cmd_eval(eval, std::cout, std::cerr);
  if (synth_cmd->parsed()) return cli::cmd_synth(synth, std::cout, std::cerr);
  if (grad_cmd->parsed()) return cli::cmd_gradcheck(grad, std::cout, std::cerr);
  return cli::cmd_bench(bench, std::cout, std::cerr);
}
