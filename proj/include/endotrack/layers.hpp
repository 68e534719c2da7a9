#pragma once

#include <cmath>

#include "endotrack/random.hpp"
#include "endotrack/tensor.hpp"

namespace endotrack {

/// Convolution weights plus the geometry they are applied with.
template <typename Scalar>
struct ConvLayer {
  Tensor<Scalar> weight;  // C_out x C_in/groups x kh x kw
  VectorX<Scalar> bias;   // C_out
  Conv2dOptions options;

  Index out_channels() const { return weight.dim(0); }
  Index in_channels() const { return weight.dim(1) * options.groups; }

  template <typename Other>
  ConvLayer<Other> cast() const {
    return ConvLayer<Other>{weight.template cast<Other>(), bias.template cast<Other>(), options};
  }
};

/// Uniform(-k, k) weights and bias with k = 1 / sqrt(fan_in).
inline ConvLayer<double> conv_layer_init(Index out_channels, Index in_channels, Index kh, Index kw,
                                         const Conv2dOptions& options, Rng& rng) {
  const Index per_group = in_channels / options.groups;
  const double k = 1.0 / std::sqrt(static_cast<double>(per_group * kh * kw));
  ConvLayer<double> layer{Tensor<double>({out_channels, per_group, kh, kw}), VectorX<double>(out_channels), options};
  for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = uniform(rng, -k, k);
  for (Index i = 0; i < out_channels; ++i) layer.bias[i] = uniform(rng, -k, k);
  return layer;
}

template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& x, const ConvLayer<Scalar>& layer) {
  return conv2d(x, layer.weight, layer.bias, layer.options);
}

}  // namespace endotrack
