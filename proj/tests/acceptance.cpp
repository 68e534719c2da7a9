// Acceptance runner: one [PASS]/[FAIL] line per criterion.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "drift.hpp"
#include "endotrack/attention.hpp"
#include "endotrack/commands.hpp"
#include "endotrack/losses.hpp"
#include "endotrack/metrics.hpp"
#include "endotrack/pose_decoder.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"

using namespace endotrack;
namespace fs = std::filesystem;
using T = Tensor<double>;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// --- 1 -----------------------------------------------------------------------

void se3_suite(Outcome& o) {
  const auto t0 = Clock::now();
  oracle::Rng rng(101);
  double assoc = 0.0, inv = 0.0, rel = 0.0, vs_oracle = 0.0;
  const auto diff = [](const Posed& a, const Posed& b) {
    return std::max((a.R - b.R).cwiseAbs().maxCoeff(), (a.t - b.t).cwiseAbs().maxCoeff() / 10.0);
  };
  for (int i = 0; i < 10000; ++i) {
    const Posed a = oracle::random_pose(rng), b = oracle::random_pose(rng), c = oracle::random_pose(rng);
    assoc = std::max(assoc, diff((a * b) * c, a * (b * c)));
    const Posed id = a * pose_inverse(a);
    inv = std::max(inv, diff(id, Posed{}));
    inv = std::max(inv, diff(pose_inverse(a) * a, Posed{}));
    rel = std::max(rel, diff(a * relative_pose(a, b), b));
    const auto ab = oracle::matmul(oracle::to_array(a), oracle::to_array(b));
    vs_oracle = std::max(vs_oracle, oracle::max_abs_diff(ab, oracle::to_array(a * b)) / 10.0);
    vs_oracle = std::max(vs_oracle, oracle::max_abs_diff(oracle::inverse(oracle::to_array(a)),
                                                         oracle::to_array(pose_inverse(a))) /
                                        10.0);
  }
  const double secs = seconds_since(t0);
  o.require(assoc <= 1e-9, "associativity");
  o.require(inv <= 1e-9, "inverse");
  o.require(rel <= 1e-9, "relative round trip");
  o.require(vs_oracle <= 1e-9, "matrix oracle");
  o.require(secs < 5.0, "runtime");
  o.detail << "1e4 poses, max err assoc=" << fmt(assoc) << " inv=" << fmt(inv) << " rel=" << fmt(rel)
           << " oracle=" << fmt(vs_oracle) << " (translations scaled by 1/10), " << fmt(secs) << " s";
}

// --- 2 -----------------------------------------------------------------------

void quat_log_suite(Outcome& o) {
  oracle::Rng rng(102);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Quaternion<double> q = oracle::random_quat(rng);
    const auto R = oracle::quat_matrix(q.w(), q.x(), q.y(), q.z());
    const double tr = R[0][0] + R[1][1] + R[2][2];
    const double angle = std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
    worst = std::max(worst, std::abs(2.0 * quat_log(q).norm() - angle));
  }
  const Vector3<double> id = quat_log(Quaternion<double>::Identity());
  o.require(worst <= 1e-6, "angle agreement");
  o.require(id.x() == 0.0 && id.y() == 0.0 && id.z() == 0.0, "identity log");
  o.detail << "1e4 canonical quaternions, max |2|log q| - acos angle|=" << fmt(worst) << ", log(identity)=0 exactly";
}

// --- 3 -----------------------------------------------------------------------

PoseVecd random_pose_vec(oracle::Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {Vector3<double>(n(rng), n(rng), n(rng)), oracle::random_quat(rng)};
}

void loss_anchor_suite(Outcome& o) {
  oracle::Rng rng(103);
  std::uniform_real_distribution<double> u(-5, 5);
  bool exact = true;
  for (int i = 0; i < 1000; ++i) {
    const PoseVecd p = random_pose_vec(rng);
    const LossWeights<double> w{u(rng), u(rng)};
    exact = exact && geometric_loss(p, p, w) == w.translation + w.rotation;
  }
  const PoseVecd p = random_pose_vec(rng);
  const double at_init = geometric_loss(p, p, LossWeights<double>{});
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PoseVecd a = random_pose_vec(rng), b = random_pose_vec(rng);
    const LossWeights<double> w{u(rng) * 0.6, u(rng) * 0.6};
    const auto g = geometric_loss_lambda_grad(a, b, w);
    const T x({2}, (VectorX<double>(2) << w.translation, w.rotation).finished());
    const T fd = finite_diff_grad(
        [&](const T& v) { return geometric_loss(a, b, LossWeights<double>{v(0), v(1)}); }, x, 1e-5);
    worst = std::max({worst, relative_difference(g.translation, fd(0), 1e-9),
                      relative_difference(g.rotation, fd(1), 1e-9)});
  }
  o.require(exact, "loss(p,p) == l1 + l2");
  o.require(at_init == -3.0, "init loss");
  o.require(worst <= 1e-6, "lambda gradients");
  o.detail << "loss(p,p)=l1+l2 exact on 1e3 cases, loss at (0,-3)=" << at_init
           << ", 100 lambda-gradient cases max rel err=" << fmt(worst);
}

// --- 4 -----------------------------------------------------------------------

void mud_suite(Outcome& o) {
  oracle::Rng rng(104);
  int shapes = 0;
  double min_gate = 1.0, max_gate = 0.0, worst_grad = 0.0;
  bool shape_ok = true, contraction = true, half = true, grad_ok = true;
  MudParams<double> zero;
  zero.alpha = 0.7;
  zero.beta = 0.4;
  for (Index h = 1; h <= 8; ++h)
    for (Index w = 1; w <= 8; ++w)
      for (Index c = 1; c <= 6; ++c) {
        ++shapes;
        const T f = oracle::random_tensor({h, w, c}, rng, -2, 2);
        MudParams<double> p = mud_init(rng());
        if (shapes % 5 == 0) p.conv_bias = {40.0, -40.0, 60.0};
        const T out = mud_forward(f, p);
        shape_ok = shape_ok && out.shape() == f.shape();
        contraction = contraction && out.data().cwiseAbs().maxCoeff() <= f.data().cwiseAbs().maxCoeff();
        for (int b = 0; b < kMudBranches; ++b) {
          const T gate = mud_branch_attention(f, p, b);
          min_gate = std::min(min_gate, gate.data().minCoeff());
          max_gate = std::max(max_gate, gate.data().maxCoeff());
        }
        const T z = mud_forward(f, zero);
        half = half && (z.data() - 0.5 * f.data()).cwiseAbs().maxCoeff() <= 1e-15;
        p = mud_init(rng());
        if ((h * w * c) % 7 == 0 || (h == 8 && w == 8 && c == 6)) {
          const GradCheckReport r = mud_grad_check(f, p);
          grad_ok = grad_ok && r.passed();
          worst_grad = std::max(worst_grad, r.max_rel_error());
        }
      }
  o.require(shape_ok, "shape preservation");
  o.require(min_gate > 0.0 && max_gate < 1.0, "gate range");
  o.require(contraction, "contraction");
  o.require(half, "zero conv weight");
  o.require(grad_ok && worst_grad <= 0.05, "gradient step consistency");
  o.detail << shapes << " shapes up to 8x8x6 (every 5th with saturated biases), gate in [" << fmt(min_gate) << ", 1-" << fmt(1.0 - max_gate)
           << "], worst step-consistency rel err=" << fmt(worst_grad);
}

// --- 5 -----------------------------------------------------------------------

void decoder_suite(Outcome& o) {
  oracle::Rng rng(105);
  bool identity = true, unit = true;
  double worst_rel = 0.0, worst_norm = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index c = 3 * (1 + Index(rng() % 4));
    DscBlockParams<double> b = dsc_block_init(c, 1 + Index(rng() % 12), rng);
    const T x = oracle::random_tensor({c, 2 + Index(rng() % 9), 2 + Index(rng() % 9)}, rng);
    const T y = dsc_block_forward(x, b);
    worst_rel = std::max(worst_rel, (y.data() - x.data()).cwiseAbs().maxCoeff() / x.data().cwiseAbs().maxCoeff());
    b.gamma = 0.0;
    identity = identity && dsc_block_forward(x, b) == x;

    const DecoderShape shape{1 + Index(rng() % 8), c, 1 + Index(rng() % 8)};
    DecoderParams<double> d = decoder_init(shape, rng());
    if (trial % 2) {
      d.head_weight = MatrixX<double>::Random(d.head_weight.rows(), d.head_weight.cols()) * 10.0;
      d.head_bias = VectorX<double>::Random(kPoseVecSize) * 10.0;
    }
    const PoseVecd pv = decoder_forward(oracle::random_tensor({shape.in_channels, 4, 6}, rng, -3, 3), d);
    worst_norm = std::max(worst_norm, std::abs(pv.q.norm() - 1.0));
    unit = unit && is_unit(pv.q, 1e-12);
  }
  o.require(identity, "gamma=0 identity");
  o.require(worst_rel <= 1e-4, "near identity");
  o.require(unit, "unit quaternion");
  o.detail << "200 cases: gamma=0 output==input exactly, gamma=1e-6 max rel perturbation=" << fmt(worst_rel)
           << ", max ||q|-1|=" << fmt(worst_norm);
}

// --- 6 -----------------------------------------------------------------------

void flow_suite(Outcome& o) {
  oracle::Rng rng(106);
  const auto pyr = flow_pyramid(oracle::random_tensor({64, 64, 2}, rng));
  bool shapes = true;
  for (int l = 2; l <= 6; ++l) {
    const Index e = 64 >> (l - 1);
    shapes = shapes && pyr.levels[l - 2].shape() == Shape{e, e, 2};
  }
  const FlowLossOptions opt;
  const auto levels = flow_robust_loss_levels(pyr, pyr, opt);
  double worst = 0.0;
  for (int i = 0; i < kFlowLevels; ++i) {
    const double n = static_cast<double>(pyr.levels[i].dim(0) * pyr.levels[i].dim(1));
    worst = std::max(worst, std::abs(levels[i] - n * std::pow(opt.epsilon, opt.penalty)) / n);
  }
  bool monotone = true;
  std::uniform_real_distribution<double> step(0, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    T pred = oracle::random_tensor({4, 4, 2}, rng, -3, 3);
    const T truth = oracle::random_tensor({4, 4, 2}, rng, -3, 3);
    const Index k = Index(rng() % pred.size());
    const double before = flow_level_penalty(pred, truth, 0.01, 0.4);
    const double d = pred.data()[k] - truth.data()[k];
    pred.data()[k] += (d >= 0 ? 1.0 : -1.0) * step(rng);
    monotone = monotone && flow_level_penalty(pred, truth, 0.01, 0.4) >= before;
  }
  o.require(shapes, "pyramid shapes");
  o.require(worst <= 1e-12, "zero-error loss");
  o.require(monotone, "monotonicity");
  o.detail << "64x64 levels 32,16,8,4,2; zero-error max |L_l - N eps^q|/N=" << fmt(worst)
           << "; 1e3 monotonicity probes";
}

// --- 7 -----------------------------------------------------------------------

void drift_suite(Outcome& o) {
  const auto t0 = Clock::now();
  const drift::Ratios r = drift::run();
  const double secs = seconds_since(t0);
  o.require(r.chained > 3.0, "chained ratio");
  o.require(r.rebased <= 1.5, "rebased ratio");
  o.require(secs < 30.0, "runtime");
  o.detail << "500 steps, sigma_t=1% step, 20 seeds: last/first decile ATE chained=" << fmt(r.chained)
           << " rebased=" << fmt(r.rebased) << ", " << fmt(secs) << " s";
}

// --- 8 -----------------------------------------------------------------------

Posed rotation_about(const oracle::Vec3& axis, double angle) {
  Posed p;
  p.R = oracle::to_eigen(oracle::axis_angle(axis, angle));
  return p;
}

void metrics_suite(Outcome& o) {
  oracle::Rng rng(108);
  double worst = 0.0;
  bool symmetric = true, invariant = true, ranges = true;
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const Posed a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const auto A = oracle::to_array(a), B = oracle::to_array(b);
    worst = std::max({worst, std::abs(ate(a, b) - metric_oracle::ate(A, B)),
                      std::abs(ce(a, b) - metric_oracle::ce(A, B)), std::abs(de(a, b) - metric_oracle::de(A, B)),
                      std::abs(rte(a, b) - metric_oracle::rte(A, B)),
                      std::abs(rot(a, b) - metric_oracle::rot(A, B))});
    for (const auto& m : {ate, ce, de, rte, rot}) {
      const double x = m(a, b), y = m(b, a);
      symmetric = symmetric && std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x));
    }
    ranges = ranges && ce(a, b) >= 0.0 && ce(a, b) <= 2.0;
    for (double v : {de(a, b), rot(a, b)}) ranges = ranges && v >= 0.0 && v <= 180.0;
    const Posed w = oracle::random_pose(rng);
    const Posed rx = rotation_about({1, 0, 0}, u(rng));
    const double ref = de(a, b);
    invariant = invariant && std::abs(de(w * a, w * b) - ref) <= 1e-9;
    invariant = invariant && std::abs(de(a * rx, b * rx) - ref) <= 1e-9;
    const double angle = std::abs(u(rng));
    const double expect = angle * 180.0 / oracle::kPi;
    invariant = invariant && std::abs(rot(a, a * rotation_about(oracle::random_axis(rng), angle)) - expect) <= 1e-9;
  }
  o.require(worst <= 1e-9, "oracle equivalence");
  o.require(symmetric, "symmetry");
  o.require(ranges, "ranges");
  o.require(invariant, "axis invariance");
  o.detail << "1e3 pose pairs, max |metric - oracle|=" << fmt(worst)
           << "; symmetry, ranges, DE shared-rotation and x-axis invariance, ROT axis independence";
}

// --- 9 -----------------------------------------------------------------------

void bench_suite(Outcome& o) {
  cli::BenchArgs a;
  a.height = a.width = 64;
  a.f32 = true;
  std::ostringstream out, err;
  const int code = cli::cmd_bench(a, out, err);
  const std::string report = out.str();
  const auto at = report.find("mean fps=");
  const double fps = at == std::string::npos ? 0.0 : std::stod(report.substr(at + 9));
  o.require(code == 0, "exit code");
  o.require(report.find("stand-in") != std::string::npos, "stand-in label");
  o.require(fps > 30.0, "fps");
  o.detail << "64x64 f32, " << a.repeat << " repeats: mean fps=" << fmt(fps) << ", report labelled stand-in";
}

// --- 10 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(ENDOTRACK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct RoundTrip {
  bool ok = true;
  std::string files;  // all outputs concatenated
  std::string reports[2];
  double max_value = 0.0;
};

RoundTrip round_trip(const fs::path& dir, int seed) {
  RoundTrip r;
  fs::create_directories(dir);
  const std::string gt = (dir / "gt.txt").string(), rels = (dir / "rels.txt").string();
  r.ok = run("synth --n 500 --seed " + std::to_string(seed) + " --gt-out " + gt + " --rels-out " + rels) == 0;
  const char* modes[] = {"chained", "rebased"};
  for (int m = 0; m < 2; ++m) {
    const std::string est = (dir / (std::string(modes[m]) + ".txt")).string();
    const std::string rep = (dir / (std::string(modes[m]) + "_report.txt")).string();
    r.ok = r.ok && run("track --rels " + rels + " --gt " + gt + " --mode " + modes[m] + " -o " + est) == 0;
    r.ok = r.ok && run("eval --gt " + gt + " --est " + est + " -o " + rep) == 0;
    r.reports[m] = slurp(rep);
    if (r.ok) {
      const MetricReport mr = evaluate(read_trajectory(gt), read_trajectory(est));
      for (const auto* v : {&mr.ate, &mr.ce, &mr.de, &mr.rte, &mr.rot})
        for (double x : *v) r.max_value = std::max(r.max_value, x);
    }
    r.files += slurp(est) + r.reports[m];
  }
  r.files = slurp(gt) + slurp(rels) + r.files;
  return r;
}

void cli_suite(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / ("endotrack_accept_" + std::to_string(::getpid()));
  const RoundTrip a = round_trip(root / "a", 21), b = round_trip(root / "b", 21), c = round_trip(root / "c", 22);
  fs::remove_all(root);
  o.require(a.ok && b.ok && c.ok, "commands succeed");
  bool zero = true;
  for (const RoundTrip* r : {&a, &c})
    for (const auto& rep : r->reports) {
      const auto s = rep.find("# summary");
      std::istringstream lines(s == std::string::npos ? "" : rep.substr(s));
      std::string line;
      std::getline(lines, line);
      int n = 0;
      while (std::getline(lines, line)) {
        ++n;
        zero = zero && line.ends_with(" 0.000000±0.000000");
      }
      zero = zero && n == 5;
    }
  o.require(zero, "all-zero summary");
  o.require(std::max(a.max_value, c.max_value) <= 1e-9, "per-frame residue");
  o.require(a.files == b.files, "byte determinism");
  o.require(a.files != c.files, "seed sensitivity");
  o.detail << "synth n=500 -> track chained+rebased -> eval: summaries all 0.000000, max per-frame value="
           << fmt(std::max(a.max_value, c.max_value)) << ", repeat run byte-identical";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"SE(3) algebra", se3_suite},
      {"quaternion log", quat_log_suite},
      {"geometric loss anchors", loss_anchor_suite},
      {"MUD block", mud_suite},
      {"pose decoder", decoder_suite},
      {"flow loss", flow_suite},
      {"drift experiment", drift_suite},
      {"metrics oracle equivalence", metrics_suite},
      {"throughput benchmark", bench_suite},
      {"CLI round trip", cli_suite},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "threw: " << e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << o.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
