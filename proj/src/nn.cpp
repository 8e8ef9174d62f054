#include "drugqml/nn.hpp"

#include <cmath>

namespace drugqml::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  for (Activation a : {Activation::None, Activation::LeakyRelu, Activation::Tanh})
    if (name == activation_name(a)) return a;
  throw ContractError("unknown activation '" + name + "'");
}

Matrix activation_grad(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::LeakyRelu:
      return pre.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; });
    case Activation::Tanh:
      return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::None:
      break;
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

Matrix activation_grad2(Activation act, const Matrix& pre) {
  if (act == Activation::Tanh) {
    const Eigen::ArrayXXd t = pre.array().tanh();
    return (-2.0 * t * (1.0 - t.square())).matrix();
  }
  return Matrix::Zero(pre.rows(), pre.cols());
}

// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<Eigen::Index> s) : shape(std::move(s)), data(Vector::Zero(count(shape))) {}

Tensor::Tensor(std::vector<Eigen::Index> s, Vector d) : shape(std::move(s)), data(std::move(d)) {
  require(count(shape) == data.size(), "Tensor: shape does not match data length");
}

Eigen::Index Tensor::count(const std::vector<Eigen::Index>& s) {
  Eigen::Index n = 1;
  for (auto d : s) {
    require(d >= 0, "Tensor: negative dimension");
    n *= d;
  }
  return n;
}

void Tensor::check_finite(const std::string& where) const {
  if (!data.allFinite()) throw NumericalError("non-finite value in " + where);
}

// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(int in, int out, Activation act, bool sn)
    : weight(Matrix::Zero(out, in)),
      bias(Vector::Zero(out)),
      activation(act),
      spectral_norm(sn),
      grad_weight(Matrix::Zero(out, in)),
      grad_bias(Vector::Zero(out)) {
  require(in >= 1 && out >= 1, "DenseLayer: dimensions must be positive");
}

void DenseLayer::init(Rng& rng) {
  const double bound = std::sqrt(6.0 / in());
  for (Eigen::Index j = 0; j < weight.cols(); ++j)
    for (Eigen::Index i = 0; i < weight.rows(); ++i) weight(i, j) = rng.uniform(-bound, bound);
  bias.setZero();
  sn_u.resize(0);
  sn_v.resize(0);
}

Matrix DenseLayer::effective_weight() const {
  if (!spectral_norm) return weight;
  Vector u = sn_u, v = sn_v;
  return spectral_normalize(weight, sn_iterations, u, v);
}

Matrix DenseLayer::forward(const Matrix& x) {
  if (x.rows() != in())
    throw ContractError("DenseLayer: input has " + std::to_string(x.rows()) + " features, expected " +
                        std::to_string(in()));
  if (!x.allFinite()) throw NumericalError("non-finite input to dense layer");
  if (spectral_norm) {
    if (freeze_sn_vectors && sn_u.size() == weight.rows() && sn_v.size() == weight.cols()) {
      sigma_ = std::max(double(sn_u.dot(weight * sn_v)), 1e-12);
      w_eff_ = weight / sigma_;
    } else {
      w_eff_ = spectral_normalize(weight, sn_iterations, sn_u, sn_v, &sigma_);
    }
  } else {
    w_eff_ = weight;
  }
  x_ = x;
  pre_ = (w_eff_ * x).colwise() + bias;
  cached_ = true;
  return activate(activation, pre_);
}

Matrix DenseLayer::backward(const Matrix& grad_out, bool input_grad) {
  if (!cached_) throw ContractError("DenseLayer: backward without forward");
  require(grad_out.rows() == out() && grad_out.cols() == x_.cols(), "DenseLayer: gradient shape mismatch");
  const Matrix delta = (grad_out.array() * activation_grad(activation, pre_).array()).matrix();
  const Matrix g_eff = delta * x_.transpose();
  if (spectral_norm) {
    // W_sn = W / sigma, sigma = u^T W v with u, v held fixed.
    const double inner = (g_eff.array() * weight.array()).sum();
    grad_weight += g_eff / sigma_ - (inner / (sigma_ * sigma_)) * (sn_u * sn_v.transpose());
  } else {
    grad_weight += g_eff;
  }
  grad_bias += delta.rowwise().sum();
  if (!input_grad) return {};
  return w_eff_.transpose() * delta;
}

// ---------------------------------------------------------------------------

Mlp::Mlp(const std::vector<int>& dims, Activation hidden, Activation output, bool sn) {
  require(dims.size() >= 2, "Mlp: need at least input and output dims");
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    layers_.emplace_back(dims[i], dims[i + 1], i + 2 == dims.size() ? output : hidden, sn);
}

void Mlp::init(Rng& rng) {
  for (auto& l : layers_) l.init(rng);
}

Matrix Mlp::forward(const Matrix& x) {
  Matrix h = x;
  for (auto& l : layers_) h = l.forward(h);
  return h;
}

Matrix Mlp::backward(const Matrix& grad_out, bool input_grad) {
  Matrix g = grad_out;
  for (size_t l = layers_.size(); l-- > 0;) g = layers_[l].backward(g, input_grad || l > 0);
  return g;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) {
    l.grad_weight.setZero(l.weight.rows(), l.weight.cols());
    l.grad_bias.setZero(l.bias.size());
  }
}

Matrix Mlp::input_gradient(const Matrix& x) {
  require(out() == 1, "input_gradient: network must have a scalar output");
  forward(x);
  Matrix r = Matrix::Ones(1, x.cols());
  for (size_t l = layers_.size(); l-- > 0;) {
    const auto& L = layers_[l];
    r = (r.array() * activation_grad(L.activation, L.pre_).array()).matrix();
    r = L.w_eff_.transpose() * r;
  }
  return r;
}

double Mlp::gradient_penalty(const Matrix& x, double scale) {
  require(out() == 1, "gradient_penalty: network must have a scalar output");
  for (const auto& l : layers_)
    require(!l.spectral_norm, "gradient_penalty: spectral normalization not supported");
  const size_t n_layers = layers_.size();
  const Eigen::Index batch = x.cols();
  forward(x);

  // Backward sweep for dD/dx, keeping the intermediates:
  //   r[l] = dD/d(pre_l), s[l] = dD/d(h_{l-1}) = W_l^T r[l].
  std::vector<Matrix> r(n_layers), s(n_layers), dact(n_layers);
  Matrix upstream = Matrix::Ones(1, batch);
  for (size_t l = n_layers; l-- > 0;) {
    const auto& L = layers_[l];
    dact[l] = activation_grad(L.activation, L.pre_);
    r[l] = (upstream.array() * dact[l].array()).matrix();
    s[l] = L.weight.transpose() * r[l];
    upstream = s[l];
  }
  const Matrix& gx = s[0];
  const Eigen::RowVectorXd norms = (gx.colwise().squaredNorm().array() + 1e-12).sqrt().matrix();
  const double penalty = (norms.array() - 1.0).square().mean();

  // Adjoint of the penalty w.r.t. gx.
  Matrix s_bar = gx;
  for (Eigen::Index b = 0; b < batch; ++b)
    s_bar.col(b) *= 2.0 * (norms(b) - 1.0) / norms(b) * scale / double(batch);

  // Reverse through the backward sweep (l = 0 .. n-1), collecting adjoints of
  // the pre-activations that flow into the forward graph.
  std::vector<Matrix> pre_bar(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    auto& L = layers_[l];
    // s[l] = W_l^T r[l]
    L.grad_weight += r[l] * s_bar.transpose();
    const Matrix r_bar = L.weight * s_bar;
    // r[l] = upstream_l .* act'(pre_l), upstream_l = s[l+1] (or 1 for the last layer)
    const Matrix d2 = activation_grad2(L.activation, L.pre_);
    const Matrix upstream_l = (l + 1 < n_layers) ? s[l + 1] : Matrix::Ones(1, batch);
    pre_bar[l] = (r_bar.array() * upstream_l.array() * d2.array()).matrix();
    if (l + 1 < n_layers) s_bar = (r_bar.array() * dact[l].array()).matrix();
  }

  // Reverse through the forward pass.
  Matrix h_bar;
  for (size_t l = n_layers; l-- > 0;) {
    auto& L = layers_[l];
    Matrix a_bar = pre_bar[l];
    if (h_bar.size() > 0) a_bar += (h_bar.array() * dact[l].array()).matrix();
    L.grad_weight += a_bar * L.x_.transpose();
    L.grad_bias += a_bar.rowwise().sum();
    h_bar = L.weight.transpose() * a_bar;
  }
  return penalty;
}

std::vector<ParamRef> Mlp::parameters(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    out.push_back({prefix + ".layer" + std::to_string(i) + ".weight", l.weight.data(), l.grad_weight.data(),
                   l.weight.size()});
    out.push_back({prefix + ".layer" + std::to_string(i) + ".bias", l.bias.data(), l.grad_bias.data(),
                   l.bias.size()});
  }
  return out;
}

long Mlp::parameter_count() const {
  long n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

// ---------------------------------------------------------------------------

Conv3DLayer::Conv3DLayer(int in_channels, int out_channels, int kernel, int stride, bool trainable)
    : kernels(Matrix::Zero(out_channels, in_channels * kernel * kernel * kernel)),
      grad_kernels(Matrix::Zero(out_channels, in_channels * kernel * kernel * kernel)),
      in_ch_(in_channels),
      out_ch_(out_channels),
      k_(kernel),
      stride_(stride),
      trainable_(trainable) {
  require(in_channels >= 1 && out_channels >= 1, "Conv3DLayer: channel counts must be positive");
  require(kernel >= 1 && stride >= 1, "Conv3DLayer: kernel and stride must be >= 1");
}

void Conv3DLayer::init(Rng& rng) {
  const double bound = std::sqrt(6.0 / double(kernels.cols()));
  for (Eigen::Index j = 0; j < kernels.cols(); ++j)
    for (Eigen::Index i = 0; i < kernels.rows(); ++i) kernels(i, j) = rng.uniform(-bound, bound);
}

Matrix Conv3DLayer::im2col(const Tensor& in, Eigen::Index& od, Eigen::Index& oh, Eigen::Index& ow) const {
  require(in.shape.size() == 4, "conv3d: input must be [C, D, H, W]");
  require(in.shape[0] == in_ch_, "conv3d: input channel count mismatch");
  const Eigen::Index D = in.shape[1], H = in.shape[2], W = in.shape[3];
  if (D < k_ || H < k_ || W < k_) throw ContractError("conv3d: kernel larger than input");
  od = (D - k_) / stride_ + 1;
  oh = (H - k_) / stride_ + 1;
  ow = (W - k_) / stride_ + 1;
  const Eigen::Index k3 = Eigen::Index{k_} * k_ * k_;
  Matrix cols(in_ch_ * k3, od * oh * ow);
  for (Eigen::Index z = 0; z < od; ++z)
    for (Eigen::Index y = 0; y < oh; ++y)
      for (Eigen::Index x = 0; x < ow; ++x) {
        const Eigen::Index col = (z * oh + y) * ow + x;
        Eigen::Index row = 0;
        for (Eigen::Index c = 0; c < in_ch_; ++c)
          for (int dz = 0; dz < k_; ++dz)
            for (int dy = 0; dy < k_; ++dy) {
              const Eigen::Index base = ((c * D + z * stride_ + dz) * H + y * stride_ + dy) * W + x * stride_;
              for (int dx = 0; dx < k_; ++dx) cols(row++, col) = in.data(base + dx);
            }
      }
  return cols;
}

Tensor Conv3DLayer::forward(const Tensor& input) {
  input.check_finite("conv3d input");
  cols_ = im2col(input, od_, oh_, ow_);
  in_shape_ = input.shape;
  cached_ = true;
  // Output [O, od, oh, ow] row-major == (O x positions) row-major.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> y = kernels * cols_;
  return Tensor({out_ch_, od_, oh_, ow_}, Eigen::Map<const Vector>(y.data(), y.size()));
}

Tensor Conv3DLayer::backward(const Tensor& grad_out) {
  if (!cached_) throw ContractError("Conv3DLayer: backward without forward");
  require(grad_out.size() == Eigen::Index{out_ch_} * od_ * oh_ * ow_, "conv3d: gradient shape mismatch");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(
      grad_out.data.data(), out_ch_, od_ * oh_ * ow_);
  if (trainable_) grad_kernels += g * cols_.transpose();
  const Matrix dcols = kernels.transpose() * g;
  Tensor din(in_shape_);
  const Eigen::Index D = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
  for (Eigen::Index z = 0; z < od_; ++z)
    for (Eigen::Index y = 0; y < oh_; ++y)
      for (Eigen::Index x = 0; x < ow_; ++x) {
        const Eigen::Index col = (z * oh_ + y) * ow_ + x;
        Eigen::Index row = 0;
        for (Eigen::Index c = 0; c < in_ch_; ++c)
          for (int dz = 0; dz < k_; ++dz)
            for (int dy = 0; dy < k_; ++dy) {
              const Eigen::Index base = ((c * D + z * stride_ + dz) * H + y * stride_ + dy) * W + x * stride_;
              for (int dx = 0; dx < k_; ++dx) din.data(base + dx) += dcols(row++, col);
            }
      }
  return din;
}

Tensor conv3d_forward(Conv3DLayer& layer, const Tensor& input) { return layer.forward(input); }

// ---------------------------------------------------------------------------

void adam_step(AdamState& st, const std::vector<ParamRef>& params, double lr) {
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.push_back(Vector::Zero(p.size));
      st.v.push_back(Vector::Zero(p.size));
    }
  }
  require(st.m.size() == params.size(), "adam_step: parameter block count changed");
  for (size_t i = 0; i < params.size(); ++i) {
    require(st.m[i].size() == params[i].size, "adam_step: moment size mismatch for " + params[i].name);
    if (!Eigen::Map<const Vector>(params[i].grad, params[i].size).allFinite())
      throw NumericalError("non-finite gradient in parameter block '" + params[i].name + "'");
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, double(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, double(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Vector> w(params[i].value, params[i].size);
    Eigen::Map<const Vector> g(params[i].grad, params[i].size);
    st.m[i] = st.beta1 * st.m[i] + (1 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1 - st.beta2) * g.cwiseAbs2();
    w.array() -= lr * (st.m[i].array() / bc1) / ((st.v[i].array() / bc2).sqrt() + st.eps);
  }
}

}  // namespace drugqml::nn
