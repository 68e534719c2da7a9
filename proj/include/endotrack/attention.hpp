#pragma once

// Multi-dimensional attention block.
//
// The H x W x C input is viewed under three axis orders (H x W x C, C x H x W,
// W x C x H). Each view is pooled over its last axis with a learned blend of
// max and mean pooling, passed through a single-channel 1x3 convolution along
// its second axis and a sigmoid. The resulting 2-D map gates the view, the
// gated views are rotated back to H x W x C and averaged.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "endotrack/gradcheck.hpp"
#include "endotrack/random.hpp"
#include "endotrack/tensor.hpp"

namespace endotrack {

inline constexpr int kMudBranches = 3;

/// Axis order of each branch view relative to H x W x C.
inline const std::array<Permutation, kMudBranches>& mud_branch_orders() {
  static const std::array<Permutation, kMudBranches> orders = {
      Permutation{0, 1, 2}, Permutation{2, 0, 1}, Permutation{1, 2, 0}};
  return orders;
}

template <typename Scalar>
struct MudParams {
  Scalar alpha = Scalar(0);  // max-pool weight, shared by all branches
  Scalar beta = Scalar(0);   // avg-pool weight, shared by all branches
  std::array<Eigen::Matrix<Scalar, 3, 1>, kMudBranches> conv_weight{};
  std::array<Scalar, kMudBranches> conv_bias{};

  static constexpr Index kPackedSize = 2 + 3 * kMudBranches + kMudBranches;

  /// [alpha, beta, w0(3), w1(3), w2(3), b0, b1, b2]
  VectorX<Scalar> pack() const {
    VectorX<Scalar> v(kPackedSize);
    v[0] = alpha;
    v[1] = beta;
    for (int b = 0; b < kMudBranches; ++b) {
      v.segment(2 + 3 * b, 3) = conv_weight[b];
      v[2 + 3 * kMudBranches + b] = conv_bias[b];
    }
    return v;
  }

  static MudParams unpack(const VectorX<Scalar>& v) {
    if (v.size() != kPackedSize) throw Error(ErrorCode::ShapeMismatch, "packed MUD parameter length");
    MudParams p;
    p.alpha = v[0];
    p.beta = v[1];
    for (int b = 0; b < kMudBranches; ++b) {
      p.conv_weight[b] = v.segment(2 + 3 * b, 3);
      p.conv_bias[b] = v[2 + 3 * kMudBranches + b];
    }
    return p;
  }

  static std::string packed_name(Index i) {
    if (i == 0) return "alpha";
    if (i == 1) return "beta";
    if (i < 2 + 3 * kMudBranches) {
      const Index b = (i - 2) / 3, k = (i - 2) % 3;
      return "conv" + std::to_string(b) + ".w" + std::to_string(k);
    }
    return "conv" + std::to_string(i - 2 - 3 * kMudBranches) + ".b";
  }

  template <typename Other>
  MudParams<Other> cast() const {
    return MudParams<Other>::unpack(pack().template cast<Other>());
  }
};

/// alpha, beta ~ U[0, 1); conv weights and biases ~ U[-1/sqrt(3), 1/sqrt(3)).
inline MudParams<double> mud_init(std::uint64_t seed) {
  Rng rng(seed);
  MudParams<double> p;
  p.alpha = uniform01(rng);
  p.beta = uniform01(rng);
  const double k = 1.0 / std::sqrt(3.0);
  for (int b = 0; b < kMudBranches; ++b) {
    for (int i = 0; i < 3; ++i) p.conv_weight[b][i] = uniform(rng, -k, k);
    p.conv_bias[b] = uniform(rng, -k, k);
  }
  return p;
}

namespace detail {

// view: d0 x d1 x d2 (already permuted). Returns the d0 x d1 x 1 gate.
template <typename Scalar>
Tensor<Scalar> mud_view_attention(const Tensor<Scalar>& view, const MudParams<Scalar>& p, int branch) {
  const Index d0 = view.dim(0), d1 = view.dim(1);
  const Tensor<Scalar> mx = pool_last_axis(view, PoolKind::Max);
  const Tensor<Scalar> av = pool_last_axis(view, PoolKind::Avg);
  Tensor<Scalar> mixed({1, d0, d1}, (p.alpha * mx.data() + p.beta * av.data()).eval());

  Tensor<Scalar> kernel({1, 1, 1, 3});
  kernel.data() = p.conv_weight[branch];
  VectorX<Scalar> bias(1);
  bias[0] = p.conv_bias[branch];
  const Tensor<Scalar> conv = conv2d(mixed, kernel, bias, Conv2dOptions{1, 0, 1, 1});
  return Tensor<Scalar>({d0, d1, 1}, activation(conv, Activation::Sigmoid).data());
}

}  // namespace detail

template <typename Scalar>
void check_mud_input(const Tensor<Scalar>& f0) {
  if (f0.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "MUD expects an H x W x C map, got " + shape_string(f0.shape()));
}

/// Attention gate of one branch, shape (d0, d1, 1) in that branch's axis order.
template <typename Scalar>
Tensor<Scalar> mud_branch_attention(const Tensor<Scalar>& f0, const MudParams<Scalar>& p, int branch) {
  check_mud_input(f0);
  return detail::mud_view_attention(permute(f0, mud_branch_orders().at(branch)), p, branch);
}

template <typename Scalar>
Tensor<Scalar> mud_forward(const Tensor<Scalar>& f0, const MudParams<Scalar>& p) {
  check_mud_input(f0);
  Tensor<Scalar> sum(f0.shape());
  for (int b = 0; b < kMudBranches; ++b) {
    const Permutation& order = mud_branch_orders()[b];
    Tensor<Scalar> view = permute(f0, order);
    const Tensor<Scalar> gate = detail::mud_view_attention(view, p, b);
    const Index inner = view.dim(2);
    Eigen::Map<MatrixX<Scalar>> cols(view.ptr(), inner, view.size() / inner);
    cols = cols * gate.data().asDiagonal();
    sum.data() += permute(view, inverse_permutation(order)).data();
  }
  sum.data() /= Scalar(kMudBranches);
  return sum;
}

/// Step-size consistency of d sum(mud_forward) / d params.
inline GradCheckReport mud_grad_check(const Tensor<double>& f0, const MudParams<double>& p,
                                      const StepConsistency& opt = {}) {
  const auto objective = [&f0](const Tensor<double>& packed) {
    return mud_forward(f0, MudParams<double>::unpack(packed.data())).data().sum();
  };
  const Tensor<double> x({MudParams<double>::kPackedSize}, p.pack());
  return step_consistency_report("mud", objective, x, &MudParams<double>::packed_name, opt);
}

}  // namespace endotrack
