#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drugqml/common.hpp"

namespace drugqml::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kLeakySlope = 0.01;

enum class Activation { None, LeakyRelu, Tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

template <typename Derived>
typename Derived::PlainObject activate(Activation act, const Eigen::MatrixBase<Derived>& x) {
  switch (act) {
    case Activation::LeakyRelu:
      return x.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
    case Activation::Tanh:
      return x.array().tanh().matrix();
    case Activation::None:
      break;
  }
  return x;
}

// First and second derivatives of the activation at pre-activation x.
Matrix activation_grad(Activation act, const Matrix& pre);
Matrix activation_grad2(Activation act, const Matrix& pre);

/// Dense row-major tensor. Only used at module boundaries (voxel grids,
/// feature maps); layers work on Eigen matrices.
struct Tensor {
  std::vector<Eigen::Index> shape;
  Vector data;

  Tensor() = default;
  explicit Tensor(std::vector<Eigen::Index> s);
  Tensor(std::vector<Eigen::Index> s, Vector d);

  static Eigen::Index count(const std::vector<Eigen::Index>& s);
  Eigen::Index size() const { return data.size(); }
  // Throws NumericalError naming `where` on NaN/Inf.
  void check_finite(const std::string& where) const;
};

/// Power-iteration spectral normalization with persistent singular vectors.
/// Returns W / sigma, sigma = u^T W v clamped below at 1e-12.
template <typename Derived>
typename Derived::PlainObject spectral_normalize(const Eigen::MatrixBase<Derived>& w, int iterations,
                                                 Vector& u, Vector& v, double* sigma_out = nullptr) {
  require(iterations >= 1, "spectral_normalize: iterations must be >= 1");
  if (u.size() != w.rows()) u = Vector::Ones(w.rows()) / std::sqrt(double(w.rows()));
  if (v.size() != w.cols()) v = Vector::Ones(w.cols()) / std::sqrt(double(w.cols()));
  for (int it = 0; it < iterations; ++it) {
    Vector nv = w.transpose() * u;
    const double nvn = nv.norm();
    if (nvn > 1e-300) v = nv / nvn;
    Vector nu = w * v;
    const double nun = nu.norm();
    if (nun > 1e-300) u = nu / nun;
  }
  const double sigma = std::max(double(u.dot(w * v)), 1e-12);
  if (sigma_out) *sigma_out = sigma;
  return w / sigma;
}

template <typename Derived>
typename Derived::PlainObject spectral_normalize(const Eigen::MatrixBase<Derived>& w, int iterations) {
  Vector u, v;
  return spectral_normalize(w, iterations, u, v);
}

/// Reference to a flat parameter block and its gradient accumulator.
struct ParamRef {
  std::string name;
  double* value;
  double* grad;
  Eigen::Index size;
};

/// y = act(W x + b), batched over columns of x.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(int in, int out, Activation act, bool spectral_norm = false);

  // He-style uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero bias.
  void init(Rng& rng);

  Matrix forward(const Matrix& x);
  // Accumulates into grad_weight/grad_bias; returns dL/dx (empty when
  // input_grad is false).
  Matrix backward(const Matrix& grad_out, bool input_grad = true);
  Matrix effective_weight() const;

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
  bool has_cache() const { return cached_; }

  Matrix weight;
  Vector bias;
  Activation activation = Activation::None;
  bool spectral_norm = false;
  int sn_iterations = 5;
  // When set, the power iteration is skipped and the stored vectors reused.
  bool freeze_sn_vectors = false;
  Vector sn_u, sn_v;
  Matrix grad_weight;
  Vector grad_bias;

 private:
  friend class Mlp;
  Matrix x_, pre_, w_eff_;
  double sigma_ = 1.0;
  bool cached_ = false;
};

/// Sequential stack of dense layers.
class Mlp {
 public:
  Mlp() = default;
  // dims = {in, h1, ..., out}; `hidden` applies to all but the last layer.
  Mlp(const std::vector<int>& dims, Activation hidden, Activation output, bool spectral_norm = false);

  void init(Rng& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& grad_out, bool input_grad = true);
  void zero_grad();

  /// Gradient of sum(outputs) w.r.t. the inputs, for a scalar-output net.
  /// Runs a forward pass.
  Matrix input_gradient(const Matrix& x);

  /// Mean over columns of (||dD/dx|| - 1)^2 for a scalar-output network.
  /// Accumulates scale * d(penalty)/d(params) into the layer gradients by
  /// differentiating through the input-gradient computation. Requires no
  /// spectral normalization.
  double gradient_penalty(const Matrix& x, double scale);

  std::vector<ParamRef> parameters(const std::string& prefix);
  long parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }

 private:
  std::vector<DenseLayer> layers_;
};

/// 3D convolution, valid padding, no bias. Input [C, D, H, W].
class Conv3DLayer {
 public:
  Conv3DLayer() = default;
  Conv3DLayer(int in_channels, int out_channels, int kernel, int stride, bool trainable);

  void init(Rng& rng);
  Tensor forward(const Tensor& input);
  // Returns dL/dinput; accumulates grad_kernels when trainable.
  Tensor backward(const Tensor& grad_out);

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  bool trainable() const { return trainable_; }

  // (out_ch) x (in_ch * k^3), kernel element order (c, z, y, x).
  Matrix kernels;
  Matrix grad_kernels;

 private:
  Matrix im2col(const Tensor& input, Eigen::Index& od, Eigen::Index& oh, Eigen::Index& ow) const;

  int in_ch_ = 0, out_ch_ = 0, k_ = 1, stride_ = 1;
  bool trainable_ = false;
  std::vector<Eigen::Index> in_shape_;
  Matrix cols_;
  Eigen::Index od_ = 0, oh_ = 0, ow_ = 0;
  bool cached_ = false;
};

Tensor conv3d_forward(Conv3DLayer& layer, const Tensor& input);

struct AdamState {
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Vector> m, v;
};

/// Bias-corrected Adam. Lazily sizes the moment vectors on first use.
/// Throws NumericalError naming the block on a non-finite gradient.
void adam_step(AdamState& state, const std::vector<ParamRef>& params, double lr);

}  // namespace drugqml::nn
