#pragma once

// Pose decoder: 1x1 squeeze + ReLU, channel layernorm, 2x2 stride-2
// downsample, two depthwise-separable residual blocks, global average pool and
// an affine head to [t(3), q(4)].

#include <array>
#include <cstdint>
#include <string>

#include "endotrack/gradcheck.hpp"
#include "endotrack/layers.hpp"
#include "endotrack/losses.hpp"
#include "endotrack/se3.hpp"
#include "endotrack/tensor.hpp"

namespace endotrack {

inline constexpr Index kDepthwiseGroups = 3;
inline constexpr Index kDepthwiseKernel = 7;
inline constexpr double kResidualScaleInit = 1e-6;
inline constexpr int kDscBlocks = 2;
inline constexpr Index kPoseVecSize = 7;

struct DecoderShape {
  Index in_channels = 48;
  Index channels = 24;         // after the squeeze; must be divisible by 3
  Index hidden_channels = 24;  // between the two pointwise convs

  void validate() const {
    if (in_channels < 1 || channels < 1 || hidden_channels < 1) {
      throw Error(ErrorCode::ConfigError, "decoder channel counts must be >= 1");
    }
    if (channels % kDepthwiseGroups != 0) {
      throw Error(ErrorCode::BadChannelCount,
                  "decoder channels " + std::to_string(channels) + " not divisible by 3");
    }
  }
};

template <typename Scalar>
struct DscBlockParams {
  ConvLayer<Scalar> depthwise;  // 7x7, groups = 3, pad 3
  ConvLayer<Scalar> pointwise1;
  ConvLayer<Scalar> pointwise2;
  Scalar gamma = Scalar(kResidualScaleInit);

  template <typename Other>
  DscBlockParams<Other> cast() const {
    return {depthwise.template cast<Other>(), pointwise1.template cast<Other>(), pointwise2.template cast<Other>(),
            static_cast<Other>(gamma)};
  }
};

template <typename Scalar>
struct DecoderParams {
  DecoderShape shape;
  ConvLayer<Scalar> squeeze;
  VectorX<Scalar> norm_gamma;
  VectorX<Scalar> norm_beta;
  ConvLayer<Scalar> downsample;
  std::array<DscBlockParams<Scalar>, kDscBlocks> blocks;
  MatrixX<Scalar> head_weight;  // 7 x channels
  VectorX<Scalar> head_bias;    // 7

  template <typename Other>
  DecoderParams<Other> cast() const {
    DecoderParams<Other> p;
    p.shape = shape;
    p.squeeze = squeeze.template cast<Other>();
    p.norm_gamma = norm_gamma.template cast<Other>();
    p.norm_beta = norm_beta.template cast<Other>();
    p.downsample = downsample.template cast<Other>();
    for (int b = 0; b < kDscBlocks; ++b) p.blocks[b] = blocks[b].template cast<Other>();
    p.head_weight = head_weight.template cast<Other>();
    p.head_bias = head_bias.template cast<Other>();
    return p;
  }
};

inline DscBlockParams<double> dsc_block_init(Index channels, Index hidden, Rng& rng) {
  DscBlockParams<double> b;
  b.depthwise = conv_layer_init(channels, channels, kDepthwiseKernel, kDepthwiseKernel,
                                Conv2dOptions{1, 3, 3, kDepthwiseGroups}, rng);
  b.pointwise1 = conv_layer_init(hidden, channels, 1, 1, Conv2dOptions{}, rng);
  b.pointwise2 = conv_layer_init(channels, hidden, 1, 1, Conv2dOptions{}, rng);
  b.gamma = kResidualScaleInit;
  return b;
}

/// gamma = 1e-6 in each block; conv weights fan-in uniform. The head's
/// quaternion bias starts at the identity rotation.
inline DecoderParams<double> decoder_init(const DecoderShape& shape, std::uint64_t seed) {
  shape.validate();
  Rng rng(seed);
  DecoderParams<double> p;
  p.shape = shape;
  p.squeeze = conv_layer_init(shape.channels, shape.in_channels, 1, 1, Conv2dOptions{}, rng);
  p.norm_gamma = VectorX<double>::Ones(shape.channels);
  p.norm_beta = VectorX<double>::Zero(shape.channels);
  p.downsample = conv_layer_init(shape.channels, shape.channels, 2, 2, Conv2dOptions{2, 0, 0, 1}, rng);
  for (auto& b : p.blocks) b = dsc_block_init(shape.channels, shape.hidden_channels, rng);
  const double k = 1.0 / std::sqrt(static_cast<double>(shape.channels));
  p.head_weight = MatrixX<double>(kPoseVecSize, shape.channels);
  for (Index i = 0; i < p.head_weight.size(); ++i) p.head_weight.data()[i] = uniform(rng, -k, k);
  p.head_bias = VectorX<double>::Zero(kPoseVecSize);
  p.head_bias[3] = 1.0;
  return p;
}

/// y = x + gamma * pw2(relu(pw1(dw(x)))).
template <typename Scalar>
Tensor<Scalar> dsc_block_forward(const Tensor<Scalar>& x, const DscBlockParams<Scalar>& b) {
  if (x.rank() != 3 || x.dim(0) % kDepthwiseGroups != 0 || x.dim(0) != b.depthwise.in_channels()) {
    throw Error(ErrorCode::ShapeMismatch, "dsc block input " + shape_string(x.shape()));
  }
  Tensor<Scalar> y = conv_forward(x, b.depthwise);
  y = activation(conv_forward(y, b.pointwise1), Activation::Relu);
  y = conv_forward(y, b.pointwise2);
  y.data() = x.data() + b.gamma * y.data();
  return y;
}

/// Squeeze, normalize and downsample: the map the residual blocks consume.
template <typename Scalar>
Tensor<Scalar> decoder_downsample(const Tensor<Scalar>& f, const DecoderParams<Scalar>& p) {
  if (f.rank() != 3 || f.dim(0) != p.shape.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "decoder expects " + std::to_string(p.shape.in_channels) +
                                              " input channels, got " + shape_string(f.shape()));
  }
  if (f.dim(1) < 2 || f.dim(2) < 2) throw Error(ErrorCode::ShapeMismatch, "decoder input smaller than 2x2");
  Tensor<Scalar> x = activation(conv_forward(f, p.squeeze), Activation::Relu);
  x = layernorm(x, p.norm_gamma, p.norm_beta);
  return conv_forward(x, p.downsample);
}

/// The 7 raw head outputs before the quaternion is normalized.
template <typename Scalar>
VectorX<Scalar> decoder_head(const Tensor<Scalar>& f, const DecoderParams<Scalar>& p) {
  Tensor<Scalar> x = decoder_downsample(f, p);
  for (const auto& b : p.blocks) x = dsc_block_forward(x, b);
  return affine(global_average_pool(x), p.head_weight, p.head_bias).data();
}

/// Throws ZeroQuaternion if the raw quaternion output vanishes.
template <typename Scalar>
PoseVec<Scalar> decoder_forward(const Tensor<Scalar>& f, const DecoderParams<Scalar>& p) {
  const VectorX<Scalar> raw = decoder_head(f, p);
  PoseVec<Scalar> out;
  out.t = raw.template head<3>();
  out.q = quat_normalize(Quaternion<Scalar>(raw[3], raw[4], raw[5], raw[6]));
  return out;
}

/// Step-size consistency of geometric_loss(decoder_forward(f), target) with
/// respect to each block's gamma and every head weight and bias.
inline GradCheckReport decoder_grad_check(const Tensor<double>& f, const DecoderParams<double>& p,
                                          const PoseVecd& target, const LossWeights<double>& weights = {},
                                          const StepConsistency& opt = {}) {
  const Index n_head = p.head_weight.size() + p.head_bias.size();
  VectorX<double> packed(kDscBlocks + n_head);
  for (int b = 0; b < kDscBlocks; ++b) packed[b] = p.blocks[b].gamma;
  packed.segment(kDscBlocks, p.head_weight.size()) = p.head_weight.reshaped();
  packed.tail(p.head_bias.size()) = p.head_bias;

  const auto unpack = [&p](const Tensor<double>& v) {
    DecoderParams<double> q = p;
    for (int b = 0; b < kDscBlocks; ++b) q.blocks[b].gamma = v.data()[b];
    q.head_weight.reshaped() = v.data().segment(kDscBlocks, q.head_weight.size());
    q.head_bias = v.data().tail(q.head_bias.size());
    return q;
  };
  const auto objective = [&](const Tensor<double>& v) {
    return geometric_loss(decoder_forward(f, unpack(v)), target, weights);
  };
  const Index rows = p.head_weight.rows();
  const Index n_weight = p.head_weight.size();
  const auto name_of = [rows, n_weight](Index i) -> std::string {
    if (i < kDscBlocks) return "block" + std::to_string(i) + ".gamma";
    i -= kDscBlocks;
    if (i < n_weight) return "head.W(" + std::to_string(i % rows) + "," + std::to_string(i / rows) + ")";
    return "head.b(" + std::to_string(i - n_weight) + ")";
  };
  return step_consistency_report("decoder", objective, Tensor<double>({packed.size()}, packed), name_of, opt);
}

}  // namespace endotrack
