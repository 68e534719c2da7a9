#pragma once

// Training losses: the homoscedastic-weighted geometric pose loss and the
// multi-scale robust optical-flow loss.

#include <array>
#include <cmath>
#include <string>

#include "endotrack/se3.hpp"
#include "endotrack/tensor.hpp"

namespace endotrack {

// ---------------------------------------------------------------------------
// Geometric pose loss
// ---------------------------------------------------------------------------

/// Learnable log-variance surrogates for the translation and rotation terms.
template <typename Scalar>
struct LossWeights {
  Scalar translation = Scalar(0);
  Scalar rotation = Scalar(-3);
};

template <typename Scalar>
struct LambdaGradient {
  Scalar translation = Scalar(0);
  Scalar rotation = Scalar(0);
};

/// L1 translation error and L1 quaternion-log error, the two loss operands.
template <typename Scalar>
struct PoseErrors {
  Scalar translation = Scalar(0);
  Scalar rotation = Scalar(0);
};

inline constexpr double kUnitQuaternionTolerance = 1e-6;

/// Throws InvalidQuaternion unless both quaternions are unit within 1e-6.
/// The logs are taken of the canonical (w >= 0) representatives.
template <typename Scalar>
PoseErrors<Scalar> pose_errors(const PoseVec<Scalar>& pred, const PoseVec<Scalar>& truth) {
  const Scalar tol = Scalar(kUnitQuaternionTolerance);
  if (!is_unit(pred.q, tol) || !is_unit(truth.q, tol)) {
    throw Error(ErrorCode::InvalidQuaternion, "geometric loss needs unit quaternions");
  }
  const Vector3<Scalar> dlog = quat_log(quat_canonical(truth.q)) - quat_log(quat_canonical(pred.q));
  return {(truth.t - pred.t).template lpNorm<1>(), dlog.template lpNorm<1>()};
}

/// |t - t^|_1 e^-l1 + l1 + |log q - log q^|_1 e^-l2 + l2
template <typename Scalar>
Scalar geometric_loss(const PoseErrors<Scalar>& e, const LossWeights<Scalar>& w) {
  return e.translation * std::exp(-w.translation) + w.translation + e.rotation * std::exp(-w.rotation) + w.rotation;
}

template <typename Scalar>
Scalar geometric_loss(const PoseVec<Scalar>& pred, const PoseVec<Scalar>& truth, const LossWeights<Scalar>& w) {
  return geometric_loss(pose_errors(pred, truth), w);
}

/// dL/dl = 1 - error * e^-l for each term.
template <typename Scalar>
LambdaGradient<Scalar> geometric_loss_lambda_grad(const PoseErrors<Scalar>& e, const LossWeights<Scalar>& w) {
  return {Scalar(1) - e.translation * std::exp(-w.translation), Scalar(1) - e.rotation * std::exp(-w.rotation)};
}

template <typename Scalar>
LambdaGradient<Scalar> geometric_loss_lambda_grad(const PoseVec<Scalar>& pred, const PoseVec<Scalar>& truth,
                                                  const LossWeights<Scalar>& w) {
  return geometric_loss_lambda_grad(pose_errors(pred, truth), w);
}

// ---------------------------------------------------------------------------
// Flow pyramid and robust flow loss
// ---------------------------------------------------------------------------
//
// Flow fields are channel-last: H x W x 2 holding (u, v) per pixel.

inline constexpr int kFlowFirstLevel = 2;
inline constexpr int kFlowLastLevel = 6;
inline constexpr int kFlowLevels = kFlowLastLevel - kFlowFirstLevel + 1;
inline constexpr Index kFlowAlignment = 32;

template <typename Scalar>
struct FlowPyramid {
  std::array<Tensor<Scalar>, kFlowLevels> levels;

  const Tensor<Scalar>& level(int l) const { return levels.at(static_cast<std::size_t>(l - kFlowFirstLevel)); }
};

template <typename Scalar>
void check_flow(const Tensor<Scalar>& flow) {
  if (flow.rank() != 3 || flow.dim(2) != 2) {
    throw Error(ErrorCode::ShapeMismatch, "flow must be H x W x 2, got " + shape_string(flow.shape()));
  }
}

/// Zero-pads height and width up to the next multiple of 32.
template <typename Scalar>
Tensor<Scalar> pad_flow(const Tensor<Scalar>& flow) {
  check_flow(flow);
  const auto up = [](Index v) { return (v + kFlowAlignment - 1) / kFlowAlignment * kFlowAlignment; };
  const Index h = flow.dim(0), w = flow.dim(1);
  Tensor<Scalar> out({up(h), up(w), 2});
  for (Index y = 0; y < h; ++y) {
    out.data().segment(y * out.dim(1) * 2, w * 2) = flow.data().segment(y * w * 2, w * 2);
  }
  return out;
}

/// 2x2 mean pooling with the flow vectors halved to match the new pixel size.
template <typename Scalar>
Tensor<Scalar> halve_flow(const Tensor<Scalar>& flow) {
  const Index h = flow.dim(0) / 2, w = flow.dim(1) / 2;
  Tensor<Scalar> out({h, w, 2});
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (Index c = 0; c < 2; ++c) {
        const Scalar s = flow(2 * y, 2 * x, c) + flow(2 * y, 2 * x + 1, c) + flow(2 * y + 1, 2 * x, c) +
                         flow(2 * y + 1, 2 * x + 1, c);
        out(y, x, c) = s * Scalar(0.125);  // mean (1/4) times magnitude scale (1/2)
      }
    }
  }
  return out;
}

/// Levels 2..6; level l has extents H / 2^(l-1) x W / 2^(l-1).
/// Throws BadExtent unless H and W are multiples of 32.
template <typename Scalar>
FlowPyramid<Scalar> flow_pyramid(const Tensor<Scalar>& flow) {
  check_flow(flow);
  if (flow.dim(0) % kFlowAlignment != 0 || flow.dim(1) % kFlowAlignment != 0) {
    throw Error(ErrorCode::BadExtent, "flow extents " + shape_string(flow.shape()) + " are not multiples of 32");
  }
  FlowPyramid<Scalar> pyr;
  Tensor<Scalar> cur = halve_flow(flow);
  for (int i = 0; i < kFlowLevels; ++i) {
    pyr.levels[i] = cur;
    if (i + 1 < kFlowLevels) cur = halve_flow(cur);
  }
  return pyr;
}

struct FlowLossOptions {
  std::array<double, kFlowLevels> level_weights{1.0, 1.0, 1.0, 1.0, 1.0};  // theta_2 .. theta_6
  double epsilon = 0.01;
  double penalty = 0.4;  // q, must lie in (0, 1)

  void validate() const {
    if (!(penalty > 0.0 && penalty < 1.0)) throw Error(ErrorCode::BadPenalty, "penalty q must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::BadPenalty, "epsilon must be positive");
  }
};

/// Per-pixel (|du| + |dv| + eps)^q summed over one level, unweighted.
template <typename Scalar>
Scalar flow_level_penalty(const Tensor<Scalar>& pred, const Tensor<Scalar>& truth, Scalar eps, Scalar q) {
  if (pred.shape() != truth.shape()) throw Error(ErrorCode::ShapeMismatch, "flow levels differ in shape");
  const Index n = pred.size() / 2;
  const Eigen::Map<const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>> a(pred.ptr(), 2, n);
  const Eigen::Map<const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>> b(truth.ptr(), 2, n);
  return ((a - b).cwiseAbs().colwise().sum().array() + eps).pow(q).sum();
}

/// theta_l times the level penalty, for each level.
template <typename Scalar>
std::array<Scalar, kFlowLevels> flow_robust_loss_levels(const FlowPyramid<Scalar>& pred,
                                                        const FlowPyramid<Scalar>& truth,
                                                        const FlowLossOptions& opt = {}) {
  opt.validate();
  std::array<Scalar, kFlowLevels> out{};
  for (int i = 0; i < kFlowLevels; ++i) {
    out[i] = Scalar(opt.level_weights[i]) *
             flow_level_penalty(pred.levels[i], truth.levels[i], Scalar(opt.epsilon), Scalar(opt.penalty));
  }
  return out;
}

template <typename Scalar>
Scalar flow_robust_loss(const FlowPyramid<Scalar>& pred, const FlowPyramid<Scalar>& truth,
                        const FlowLossOptions& opt = {}) {
  Scalar total = Scalar(0);
  for (Scalar v : flow_robust_loss_levels(pred, truth, opt)) total += v;
  return total;
}

}  // namespace endotrack
