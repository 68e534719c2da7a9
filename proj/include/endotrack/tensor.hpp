#pragma once

// Dense row-major N-d array and the handful of kernels the network blocks use.
// Image-like tensors are channel-first (C x H x W) unless noted.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "endotrack/errors.hpp"

namespace endotrack {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Shape = std::vector<Index>;

inline std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline Index shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

template <typename Scalar>
class Tensor {
 public:
  using Data = VectorX<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    check_shape();
    data_ = Data::Constant(shape_size(shape_), fill);
  }

  Tensor(Shape shape, Data data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_)) {
      throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  Data& data() { return data_; }
  const Data& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  template <typename... I>
  Scalar& operator()(I... idx) {
    return data_[offset(idx...)];
  }
  template <typename... I>
  Scalar operator()(I... idx) const {
    return data_[offset(idx...)];
  }

  Shape strides() const {
    Shape s(shape_.size(), 1);
    for (Index i = rank() - 2; i >= 0; --i) s[i] = s[i + 1] * shape_[i + 1];
    return s;
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  void check_shape() const {
    for (Index e : shape_) {
      if (e < 1) throw Error(ErrorCode::ShapeMismatch, "non-positive extent in " + shape_string(shape_));
    }
  }

  template <typename... I>
  Index offset(I... idx) const {
    const Index ids[] = {static_cast<Index>(idx)...};
    Index off = 0;
    for (std::size_t i = 0; i < sizeof...(I); ++i) off = off * shape_[i] + ids[i];
    return off;
  }

  Shape shape_;
  Data data_;
};

// ---------------------------------------------------------------------------
// Axis permutation
// ---------------------------------------------------------------------------

using Permutation = std::vector<int>;

inline void check_permutation(const Permutation& order, Index rank) {
  if (static_cast<Index>(order.size()) != rank) {
    throw Error(ErrorCode::BadPermutation, "order length does not match tensor rank");
  }
  std::vector<bool> seen(order.size(), false);
  for (int a : order) {
    if (a < 0 || a >= rank || seen[a]) throw Error(ErrorCode::BadPermutation, "order is not a permutation");
    seen[a] = true;
  }
}

inline Permutation inverse_permutation(const Permutation& order) {
  check_permutation(order, static_cast<Index>(order.size()));
  Permutation inv(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inv[order[i]] = static_cast<int>(i);
  return inv;
}

/// out.shape[i] = x.shape[order[i]].
template <typename Scalar>
Tensor<Scalar> permute(const Tensor<Scalar>& x, const Permutation& order) {
  const Index rank = x.rank();
  check_permutation(order, rank);
  Shape out_shape(rank);
  for (Index i = 0; i < rank; ++i) out_shape[i] = x.dim(order[i]);
  Tensor<Scalar> out(out_shape);

  // Stride in the output for each input axis.
  const Shape out_strides = out.strides();
  Shape in_axis_stride(rank);
  for (Index i = 0; i < rank; ++i) in_axis_stride[order[i]] = out_strides[i];

  Shape idx(rank, 0);
  Index out_off = 0;
  const Scalar* src = x.ptr();
  Scalar* dst = out.ptr();
  for (Index lin = 0; lin < x.size(); ++lin) {
    dst[out_off] = src[lin];
    for (Index a = rank - 1; a >= 0; --a) {
      if (++idx[a] < x.dim(a)) {
        out_off += in_axis_stride[a];
        break;
      }
      out_off -= (x.dim(a) - 1) * in_axis_stride[a];
      idx[a] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling, activations
// ---------------------------------------------------------------------------

enum class PoolKind { Max, Avg };

/// Reduces the final axis to extent 1.
template <typename Scalar>
Tensor<Scalar> pool_last_axis(const Tensor<Scalar>& x, PoolKind kind) {
  if (x.rank() < 1) throw Error(ErrorCode::ShapeMismatch, "pooling needs rank >= 1");
  Shape out_shape = x.shape();
  const Index inner = out_shape.back();
  out_shape.back() = 1;
  Tensor<Scalar> out(out_shape);
  const Index outer = x.size() / inner;
  const Eigen::Map<const MatrixX<Scalar>> rows(x.ptr(), inner, outer);  // column j = one reduction
  if (kind == PoolKind::Max) {
    out.data() = rows.colwise().maxCoeff().transpose();
  } else {
    out.data() = rows.colwise().mean().transpose();
  }
  return out;
}

enum class Activation { Relu, Sigmoid };

/// Logistic function kept strictly inside (0, 1): saturated results are
/// clamped to the adjacent representable values instead of rounding to 0 or 1.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using limits = std::numeric_limits<Scalar>;
  if (x >= Scalar(0)) {
    return std::min(Scalar(1) / (Scalar(1) + std::exp(-x)), Scalar(1) - limits::epsilon() / 2);
  }
  const Scalar e = std::exp(x);
  return std::max(e / (Scalar(1) + e), limits::min());
}

template <typename Scalar>
Tensor<Scalar> activation(Tensor<Scalar> x, Activation kind) {
  if (kind == Activation::Relu) {
    x.data() = x.data().cwiseMax(Scalar(0));
  } else {
    x.data() = x.data().unaryExpr([](Scalar v) { return sigmoid(v); });
  }
  return x;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

struct Conv2dOptions {
  Index stride = 1;
  Index pad_h = 0;
  Index pad_w = 0;
  Index groups = 1;
};

inline Index conv_output_extent(Index in, Index kernel, Index pad, Index stride) {
  const Index span = in + 2 * pad - kernel;
  return span < 0 ? 0 : span / stride + 1;
}

/// Grouped 2-D cross-correlation with zero padding.
/// x: C_in x H x W, weight: C_out x (C_in / groups) x kh x kw, bias empty or C_out.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const VectorX<Scalar>& bias,
                      const Conv2dOptions& opt) {
  if (x.rank() != 3 || weight.rank() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d expects a rank-3 input and rank-4 weight");
  }
  const Index c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const Index g = opt.groups;
  if (g < 1 || opt.stride < 1 || opt.pad_h < 0 || opt.pad_w < 0 || c_in % g != 0 || c_out % g != 0 ||
      weight.dim(1) != c_in / g) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d: input " + shape_string(x.shape()) + " weight " +
                                              shape_string(weight.shape()) + " groups " + std::to_string(g));
  }
  if (bias.size() != 0 && bias.size() != c_out) throw Error(ErrorCode::ShapeMismatch, "conv2d bias length");
  const Index s = opt.stride, ph = opt.pad_h, pw = opt.pad_w;
  const Index oh = conv_output_extent(h, kh, ph, s);
  const Index ow = conv_output_extent(w, kw, pw, s);
  if (oh < 1 || ow < 1) throw Error(ErrorCode::ShapeMismatch, "conv2d output would be empty");

  Tensor<Scalar> out({c_out, oh, ow});
  const Index cin_g = c_in / g, cout_g = c_out / g;
  const Scalar* in = x.ptr();
  const Scalar* wt = weight.ptr();
  Scalar* o = out.ptr();

  for (Index co = 0; co < c_out; ++co) {
    Scalar* plane = o + co * oh * ow;
    std::fill(plane, plane + oh * ow, bias.size() ? bias[co] : Scalar(0));
    const Index group = co / cout_g;
    for (Index cl = 0; cl < cin_g; ++cl) {
      const Scalar* src = in + (group * cin_g + cl) * h * w;
      const Scalar* k = wt + ((co * cin_g + cl) * kh) * kw;
      for (Index ky = 0; ky < kh; ++ky) {
        for (Index kx = 0; kx < kw; ++kx) {
          const Scalar wv = k[ky * kw + kx];
          // Output columns whose source column lies inside the image.
          const Index ox_lo = std::max<Index>(0, (pw - kx + s - 1) / s);
          const Index span = w - 1 + pw - kx;
          if (span < 0) continue;
          const Index ox_hi = std::min<Index>(ow, span / s + 1);
          if (ox_lo >= ox_hi) continue;
          const Index shift = kx - pw;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * s + ky - ph;
            if (iy < 0 || iy >= h) continue;
            const Scalar* row = src + iy * w;
            Scalar* dst = plane + oy * ow;
            for (Index ox = ox_lo; ox < ox_hi; ++ox) dst[ox] += wv * row[ox * s + shift];
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEpsilon = 1e-6;

/// Normalizes across channels at each spatial position of a C x H x W map:
/// (x - mean) / sqrt(var + eps) * gamma[c] + beta[c].
template <typename Scalar>
Tensor<Scalar> layernorm(const Tensor<Scalar>& x, const VectorX<Scalar>& gamma, const VectorX<Scalar>& beta,
                         Scalar eps = Scalar(kLayerNormEpsilon)) {
  if (x.rank() != 3 || gamma.size() != x.dim(0) || beta.size() != x.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "layernorm expects C x H x W and per-channel gamma/beta");
  }
  const Index c = x.dim(0), hw = x.dim(1) * x.dim(2);
  const Eigen::Map<const MatrixX<Scalar>> m(x.ptr(), hw, c);  // column = channel plane
  const VectorX<Scalar> mean = m.rowwise().mean();
  const VectorX<Scalar> var = (m.colwise() - mean).array().square().rowwise().mean();
  const VectorX<Scalar> inv = (var.array() + eps).rsqrt();
  Tensor<Scalar> out(x.shape());
  Eigen::Map<MatrixX<Scalar>> y(out.ptr(), hw, c);
  y = ((m.colwise() - mean).array().colwise() * inv.array()).matrix();
  y = (y.array().rowwise() * gamma.transpose().array()).rowwise() + beta.transpose().array();
  return out;
}

// ---------------------------------------------------------------------------
// Channel concatenation and slicing (axis 0)
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& xs) {
  if (xs.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of zero tensors");
  Shape shape = xs.front().shape();
  Index channels = 0;
  for (const auto& t : xs) {
    if (t.rank() != static_cast<Index>(shape.size()) || !std::equal(shape.begin() + 1, shape.end(), t.shape().begin() + 1)) {
      throw Error(ErrorCode::ShapeMismatch, "concat: " + shape_string(t.shape()) + " vs " + shape_string(shape));
    }
    channels += t.dim(0);
  }
  shape[0] = channels;
  Tensor<Scalar> out(shape);
  Index off = 0;
  for (const auto& t : xs) {
    out.data().segment(off, t.size()) = t.data();
    off += t.size();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index begin, Index count) {
  if (count < 1 || begin < 0 || begin + count > x.dim(0)) throw Error(ErrorCode::ShapeMismatch, "channel slice out of range");
  Shape shape = x.shape();
  shape[0] = count;
  const Index plane = x.size() / x.dim(0);
  return Tensor<Scalar>(shape, x.data().segment(begin * plane, count * plane));
}

/// Appends zero channels up to `channels`.
template <typename Scalar>
Tensor<Scalar> pad_channels(const Tensor<Scalar>& x, Index channels) {
  if (channels < x.dim(0)) throw Error(ErrorCode::ShapeMismatch, "pad_channels cannot shrink");
  Shape shape = x.shape();
  shape[0] = channels;
  Tensor<Scalar> out(shape);
  out.data().head(x.size()) = x.data();
  return out;
}

// ---------------------------------------------------------------------------
// Dense layers
// ---------------------------------------------------------------------------

/// y = W x + b on the flattened input.
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, const MatrixX<Scalar>& W, const VectorX<Scalar>& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "affine: weight " + std::to_string(W.rows()) + "x" +
                                              std::to_string(W.cols()) + " input length " + std::to_string(x.size()));
  }
  return Tensor<Scalar>({W.rows()}, W * x.data() + b);
}

/// C x H x W -> C.
template <typename Scalar>
Tensor<Scalar> global_average_pool(const Tensor<Scalar>& x) {
  if (x.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "global_average_pool expects C x H x W");
  const Index hw = x.dim(1) * x.dim(2);
  const Eigen::Map<const MatrixX<Scalar>> m(x.ptr(), hw, x.dim(0));
  return Tensor<Scalar>({x.dim(0)}, m.colwise().mean().transpose());
}

}  // namespace endotrack
