#pragma once

// Four-stream feature front end: scene features of the two frames, motion
// features of the optical flow (same extractor as the scenes), and joint
// features of the stacked frame pair. Each stream is normalized and the
// results are concatenated as (scene_cur, scene_prev, motion, joint).
//
// The scene/motion extractor and the joint stem are small randomly initialized
// conv stacks standing in for pretrained backbones.

#include <cstdint>
#include <string>

#include "endotrack/attention.hpp"
#include "endotrack/layers.hpp"
#include "endotrack/tensor.hpp"

namespace endotrack {

enum class FeatureNorm { Standardize, None };

struct PipelineConfig {
  Index height = 64;
  Index width = 64;
  Index scene_stem_channels = 8;
  Index scene_channels = 12;
  Index joint_stem_channels = 8;
  Index joint_channels = 12;
  FeatureNorm norm = FeatureNorm::Standardize;
  std::uint64_t seed = 0;

  void validate() const {
    for (Index v : {height, width, scene_stem_channels, scene_channels, joint_stem_channels, joint_channels}) {
      if (v < 1) throw Error(ErrorCode::ConfigError, "pipeline extents and channel counts must be >= 1");
    }
  }

  /// Spatial extent after the two stride-2 stages.
  Index feature_height() const { return stage_extent(stage_extent(height)); }
  Index feature_width() const { return stage_extent(stage_extent(width)); }
  Index fused_channels() const { return 3 * scene_channels + joint_channels; }

  static Index stage_extent(Index in) { return conv_output_extent(in, 3, 1, 2); }
};

inline constexpr Conv2dOptions kStemConv{2, 1, 1, 1};

template <typename Scalar>
struct SceneExtractorParams {
  ConvLayer<Scalar> stage1;  // 3 -> scene_stem
  ConvLayer<Scalar> stage2;  // scene_stem -> scene

  template <typename Other>
  SceneExtractorParams<Other> cast() const {
    return {stage1.template cast<Other>(), stage2.template cast<Other>()};
  }
};

template <typename Scalar>
struct JointExtractorParams {
  ConvLayer<Scalar> conv1;  // 6 -> joint_stem
  MudParams<Scalar> mud1;
  ConvLayer<Scalar> conv2;  // joint_stem -> joint
  MudParams<Scalar> mud2;

  template <typename Other>
  JointExtractorParams<Other> cast() const {
    return {conv1.template cast<Other>(), mud1.template cast<Other>(), conv2.template cast<Other>(),
            mud2.template cast<Other>()};
  }
};

template <typename Scalar>
struct PipelineParams {
  PipelineConfig config;
  SceneExtractorParams<Scalar> scene;
  JointExtractorParams<Scalar> joint;

  template <typename Other>
  PipelineParams<Other> cast() const {
    return {config, scene.template cast<Other>(), joint.template cast<Other>()};
  }
};

inline PipelineParams<double> pipeline_init(const PipelineConfig& config) {
  config.validate();
  Rng rng(config.seed);
  PipelineParams<double> p;
  p.config = config;
  p.scene.stage1 = conv_layer_init(config.scene_stem_channels, 3, 3, 3, kStemConv, rng);
  p.scene.stage2 = conv_layer_init(config.scene_channels, config.scene_stem_channels, 3, 3, kStemConv, rng);
  p.joint.conv1 = conv_layer_init(config.joint_stem_channels, 6, 3, 3, kStemConv, rng);
  p.joint.conv2 = conv_layer_init(config.joint_channels, config.joint_stem_channels, 3, 3, kStemConv, rng);
  p.joint.mud1 = mud_init(rng());
  p.joint.mud2 = mud_init(rng());
  return p;
}

template <typename Scalar>
void check_image(const Tensor<Scalar>& img, Index channels, const char* what) {
  if (img.rank() != 3 || img.dim(0) != channels) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " must be " + std::to_string(channels) +
                                              " x H x W, got " + shape_string(img.shape()));
  }
}

/// 3 x H x W image -> scene_channels x H/4 x W/4.
template <typename Scalar>
Tensor<Scalar> extract_scene(const Tensor<Scalar>& img, const SceneExtractorParams<Scalar>& p) {
  check_image(img, 3, "scene input");
  Tensor<Scalar> x = activation(conv_forward(img, p.stage1), Activation::Relu);
  return activation(conv_forward(x, p.stage2), Activation::Relu);
}

/// 2 x H x W flow, zero-padded to three channels and fed to the scene extractor.
template <typename Scalar>
Tensor<Scalar> extract_motion(const Tensor<Scalar>& flow, const SceneExtractorParams<Scalar>& p) {
  check_image(flow, 2, "flow input");
  return extract_scene(pad_channels(flow, 3), p);
}

/// Runs the attention block on a channel-first map.
template <typename Scalar>
Tensor<Scalar> mud_forward_chw(const Tensor<Scalar>& x, const MudParams<Scalar>& p) {
  return permute(mud_forward(permute(x, {1, 2, 0}), p), {2, 0, 1});
}

/// 6 x H x W stacked pair: conv1 -> MUD -> conv2 -> MUD.
template <typename Scalar>
Tensor<Scalar> extract_joint(const Tensor<Scalar>& pair, const JointExtractorParams<Scalar>& p) {
  check_image(pair, 6, "joint input");
  Tensor<Scalar> x = activation(conv_forward(pair, p.conv1), Activation::Relu);
  x = mud_forward_chw(x, p.mud1);
  x = activation(conv_forward(x, p.conv2), Activation::Relu);
  return mud_forward_chw(x, p.mud2);
}

template <typename Scalar>
Tensor<Scalar> stack_frames(const Tensor<Scalar>& prev, const Tensor<Scalar>& cur) {
  check_image(prev, 3, "previous frame");
  check_image(cur, 3, "current frame");
  return concat_channels<Scalar>({prev, cur});
}

/// Zero mean, unit variance per channel over the spatial extent.
template <typename Scalar>
Tensor<Scalar> standardize_channels(const Tensor<Scalar>& x, Scalar eps = Scalar(kLayerNormEpsilon)) {
  if (x.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "standardize expects C x H x W");
  const Index hw = x.dim(1) * x.dim(2);
  Tensor<Scalar> out = x;
  Eigen::Map<MatrixX<Scalar>> m(out.ptr(), hw, x.dim(0));
  const auto mean = m.colwise().mean().eval();
  m.rowwise() -= mean;
  const auto inv = (m.array().square().colwise().mean() + eps).rsqrt().eval();
  m.array().rowwise() *= inv;
  return out;
}

/// Normalizes each stream and concatenates in the order (f_i, f_{i-k}, f_m, f_j).
template <typename Scalar>
Tensor<Scalar> fuse(const Tensor<Scalar>& f_cur, const Tensor<Scalar>& f_prev, const Tensor<Scalar>& f_motion,
                    const Tensor<Scalar>& f_joint, FeatureNorm norm = FeatureNorm::Standardize) {
  std::vector<Tensor<Scalar>> parts{f_cur, f_prev, f_motion, f_joint};
  for (auto& t : parts) {
    if (t.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "fuse expects C x H x W streams");
    if (norm == FeatureNorm::Standardize) t = standardize_channels(t);
  }
  return concat_channels(parts);
}

/// Full front end for one frame pair.
template <typename Scalar>
Tensor<Scalar> pipeline_forward(const PipelineParams<Scalar>& p, const Tensor<Scalar>& prev, const Tensor<Scalar>& cur,
                                const Tensor<Scalar>& flow) {
  const Tensor<Scalar> f_cur = extract_scene(cur, p.scene);
  const Tensor<Scalar> f_prev = extract_scene(prev, p.scene);
  const Tensor<Scalar> f_motion = extract_motion(flow, p.scene);
  const Tensor<Scalar> f_joint = extract_joint(stack_frames(prev, cur), p.joint);
  return fuse(f_cur, f_prev, f_motion, f_joint, p.config.norm);
}

}  // namespace endotrack
