#include "endotrack/commands.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "endotrack/attention.hpp"
#include "endotrack/feature_pipeline.hpp"
#include "endotrack/format.hpp"
#include "endotrack/losses.hpp"
#include "endotrack/metrics.hpp"
#include "endotrack/pose_decoder.hpp"
#include "endotrack/random.hpp"

namespace endotrack::cli {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ParseError:
    case ErrorCode::ConfigError:
    case ErrorCode::BadPenalty:
    case ErrorCode::BadChannelCount:
      return kExitParse;
    case ErrorCode::InvalidPose:
    case ErrorCode::ZeroQuaternion:
    case ErrorCode::NotARotation:
    case ErrorCode::InvalidQuaternion:
      return kExitInvalidPose;
    case ErrorCode::UnitMismatch:
    case ErrorCode::AlignmentError:
    case ErrorCode::LengthMismatch:
      return kExitMismatch;
    default:
      return kExitFailure;
  }
}

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

void require_compatible(const Trajectory& a, const Trajectory& b) {
  require_same_unit(a.unit, b.unit);
  if (a.stride != b.stride) {
    throw Error(ErrorCode::AlignmentError,
                "stride " + std::to_string(a.stride) + " vs " + std::to_string(b.stride));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_track(const TrackArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Trajectory header;
    const std::vector<Posed> rels = read_relatives(args.rels, &header);
    std::optional<Trajectory> gt;
    if (args.gt) {
      gt = read_trajectory(*args.gt);
      require_compatible(*gt, header);
    }

    Trajectory result;
    if (args.mode == TrackMode::Rebased) {
      if (!gt) throw Error(ErrorCode::ParseError, "rebased mode needs --gt");
      result = chain_rebased(*gt, rels);
    } else {
      Posed p0 = Posed::Identity();
      long first_index = header.empty() ? 0 : header.frames.front().index - header.stride;
      if (args.p0) {
        p0 = parse_pose(*args.p0);
      } else if (gt && !gt->empty()) {
        p0 = gt->pose(0);
        first_index = gt->frames.front().index;
      }
      result = chain_absolute(p0, rels, header.stride, header.unit, first_index);
    }
    write_trajectory(args.output, result);
    out << "wrote " << result.size() << " poses (" << (args.mode == TrackMode::Rebased ? "rebased" : "chained")
        << ") to " << args.output.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Trajectory gt = read_trajectory(args.gt);
    const Trajectory est = read_trajectory(args.est);
    const MetricReport report = evaluate(gt, est);
    std::ostringstream text;
    write_report(text, report);
    if (args.output) write_file_atomic(*args.output, text.str());
    out << text.str();
    return static_cast<int>(kExitOk);
  });
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Trajectory gt = synth_trajectory(args.n, args.synth);
    const std::vector<Posed> rels = perturb_relatives(gt, args.noise);
    write_trajectory(args.gt_out, gt);
    write_relatives(args.rels_out, rels, gt);
    out << "wrote " << gt.size() << " ground-truth poses to " << args.gt_out.string() << " and " << rels.size()
        << " relatives to " << args.rels_out.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

namespace {

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, lo, hi);
  return t;
}

PoseVecd random_pose_vec(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  PoseVecd p;
  p.t = Vector3<double>(n(rng), n(rng), n(rng));
  p.q = quat_normalize(Quaternion<double>(n(rng), n(rng), n(rng), n(rng)));
  return p;
}

GradCheckReport lambda_grad_check(Rng& rng, bool corrupt) {
  GradCheckReport report{"lambda", {}};
  constexpr int kCases = 20;
  constexpr double kStep = 1e-5;
  for (int c = 0; c < kCases; ++c) {
    const PoseVecd pred = random_pose_vec(rng), truth = random_pose_vec(rng);
    LossWeights<double> w{uniform(rng, -2.0, 2.0), uniform(rng, -4.0, 0.0)};
    if (corrupt) w.translation = std::numeric_limits<double>::quiet_NaN();
    const LambdaGradient<double> g = geometric_loss_lambda_grad(pred, truth, w);
    const auto loss_at = [&](double l1, double l2) { return geometric_loss(pred, truth, LossWeights<double>{l1, l2}); };
    const double fd1 = (loss_at(w.translation + kStep, w.rotation) - loss_at(w.translation - kStep, w.rotation)) / (2 * kStep);
    const double fd2 = (loss_at(w.translation, w.rotation + kStep) - loss_at(w.translation, w.rotation - kStep)) / (2 * kStep);
    for (auto [name, analytic, numeric] : {std::tuple{"d_lambda_translation", g.translation, fd1},
                                           std::tuple{"d_lambda_rotation", g.rotation, fd2}}) {
      GradCheckEntry e;
      e.name = "case" + std::to_string(c) + "." + name;
      e.coarse = analytic;
      e.fine = numeric;
      e.finite = std::isfinite(analytic) && std::isfinite(numeric);
      e.rel_error = relative_difference(analytic, numeric, 1e-9);
      e.ok = e.finite && e.rel_error <= kLambdaGradTolerance;
      report.entries.push_back(e);
    }
  }
  return report;
}

}  // namespace

std::vector<GradCheckReport> run_gradchecks(const GradcheckArgs& args) {
  Rng rng(args.seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const Tensor<double> f0 = random_tensor({4, 4, 3}, rng);
  MudParams<double> mud = mud_init(rng());
  if (args.inject_nan) mud.conv_bias[1] = nan;

  const DecoderShape shape{6, 6, 6};
  DecoderParams<double> dec = decoder_init(shape, rng());
  // Larger residual scale so the block contributions are visible to the check.
  for (auto& b : dec.blocks) b.gamma = 0.5;
  if (args.inject_nan) dec.blocks[0].gamma = nan;
  const Tensor<double> f = random_tensor({6, 4, 4}, rng);
  const PoseVecd target = random_pose_vec(rng);

  std::vector<GradCheckReport> reports;
  reports.push_back(mud_grad_check(f0, mud));
  reports.push_back(decoder_grad_check(f, dec, target));
  reports.push_back(lambda_grad_check(rng, args.inject_nan));
  return reports;
}

void write_gradcheck_report(std::ostream& os, const std::vector<GradCheckReport>& reports) {
  bool all = true;
  for (const auto& r : reports) {
    std::size_t failed = 0;
    for (const auto& e : r.entries) failed += e.ok ? 0 : 1;
    all = all && r.passed();
    os << "check " << r.label << " entries=" << r.entries.size() << " failed=" << failed
       << " max_rel_err=" << format_double(r.max_rel_error()) << " " << (r.passed() ? "PASS" : "FAIL") << "\n";
    for (const auto& e : r.entries) {
      if (e.ok) continue;
      os << "  " << e.name << (e.finite ? "" : " non-finite") << " a=" << format_double(e.coarse)
         << " b=" << format_double(e.fine) << " rel_err=" << format_double(e.rel_error) << "\n";
    }
  }
  os << "gradcheck " << (all ? "PASS" : "FAIL") << "\n";
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto reports = run_gradchecks(args);
    write_gradcheck_report(out, reports);
    for (const auto& r : reports) {
      if (!r.passed()) {
        err << "error: gradient check '" << r.label << "' failed\n";
        return static_cast<int>(kExitFailure);
      }
    }
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename Scalar>
BenchResult bench_with(const PipelineParams<Scalar>& pipeline, const DecoderParams<Scalar>& decoder,
                       const Tensor<Scalar>& prev, const Tensor<Scalar>& cur, const Tensor<Scalar>& flow,
                       const BenchArgs& args) {
  static const char* kStages[] = {"scene_cur", "scene_prev", "motion", "joint", "fuse", "decoder"};
  std::vector<double> acc(std::size(kStages), 0.0);
  double checksum = 0.0;
  for (int it = 0; it < args.warmup + args.repeat; ++it) {
    const bool timed = it >= args.warmup;
    std::vector<double> ms(std::size(kStages));
    auto t = Clock::now();
    const Tensor<Scalar> f_cur = extract_scene(cur, pipeline.scene);
    ms[0] = ms_since(t);
    t = Clock::now();
    const Tensor<Scalar> f_prev = extract_scene(prev, pipeline.scene);
    ms[1] = ms_since(t);
    t = Clock::now();
    const Tensor<Scalar> f_motion = extract_motion(flow, pipeline.scene);
    ms[2] = ms_since(t);
    t = Clock::now();
    const Tensor<Scalar> f_joint = extract_joint(stack_frames(prev, cur), pipeline.joint);
    ms[3] = ms_since(t);
    t = Clock::now();
    const Tensor<Scalar> fused = fuse(f_cur, f_prev, f_motion, f_joint, pipeline.config.norm);
    ms[4] = ms_since(t);
    t = Clock::now();
    const PoseVec<Scalar> pose = decoder_forward(fused, decoder);
    ms[5] = ms_since(t);
    checksum += static_cast<double>(pose.t.sum());
    if (timed) {
      for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += ms[s];
    }
  }
  BenchResult r;
  r.height = args.height;
  r.width = args.width;
  r.repeat = args.repeat;
  for (std::size_t s = 0; s < acc.size(); ++s) {
    const double mean = acc[s] / args.repeat;
    r.stage_ms.emplace_back(kStages[s], mean);
    r.total_ms += mean;
  }
  r.fps = r.total_ms > 0.0 ? 1000.0 / r.total_ms : 0.0;
  if (!std::isfinite(checksum)) throw Error(ErrorCode::NonFiniteFunction, "benchmark produced non-finite poses");
  return r;
}

}  // namespace

BenchResult run_bench(const BenchArgs& args) {
  if (args.height < 4 || args.width < 4) throw Error(ErrorCode::ConfigError, "bench size must be at least 4x4");
  if (args.repeat < 1 || args.warmup < 0) throw Error(ErrorCode::ConfigError, "bench repeat must be >= 1");
  RunConfig config = args.config ? read_config(*args.config) : RunConfig{};
  config.pipeline.height = args.height;
  config.pipeline.width = args.width;

  PipelineParams<double> pipeline;
  DecoderParams<double> decoder;
  if (args.params) {
    std::ifstream in(*args.params);
    if (!in) throw Error(ErrorCode::ParseError, args.params->string() + ": cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    deserialize_params(buf.str(), pipeline, decoder);
    pipeline.config.height = args.height;
    pipeline.config.width = args.width;
  } else {
    pipeline = pipeline_init(config.pipeline);
    decoder = decoder_init(config.decoder_shape(), config.seed + 1);
  }
  if (args.save_params) write_file_atomic(*args.save_params, serialize_params(pipeline, decoder));

  Rng rng(config.seed + 2);
  const Tensor<double> prev = random_tensor({3, args.height, args.width}, rng, 0.0, 1.0);
  const Tensor<double> cur = random_tensor({3, args.height, args.width}, rng, 0.0, 1.0);
  const Tensor<double> flow = random_tensor({2, args.height, args.width}, rng, -2.0, 2.0);

  BenchResult r;
  if (args.f32) {
    r = bench_with(pipeline.cast<float>(), decoder.cast<float>(), prev.cast<float>(), cur.cast<float>(),
                   flow.cast<float>(), args);
    r.precision = "f32";
  } else {
    r = bench_with(pipeline, decoder, prev, cur, flow, args);
    r.precision = "f64";
  }
  return r;
}

void write_bench_report(std::ostream& os, const BenchResult& r) {
  os << "pipeline: stand-in extractors and decoder with random weights; not the pretrained networks, "
        "fps is indicative only\n";
  os << "precision: " << r.precision << "\n";
  os << "input: " << r.height << "x" << r.width << " repeats: " << r.repeat << "\n";
  for (const auto& [name, ms] : r.stage_ms) os << "stage " << name << " ms=" << format_fixed(ms, 4) << "\n";
  os << "total ms=" << format_fixed(r.total_ms, 4) << "\n";
  os << "mean fps=" << format_fixed(r.fps, 2) << "\n";
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    write_bench_report(out, run_bench(args));
    return static_cast<int>(kExitOk);
  });
}

}  // namespace endotrack::cli
