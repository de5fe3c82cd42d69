#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "flatsomatic/linalg.hpp"
#include "flatsomatic/random.hpp"

namespace flatsomatic {

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// Affine (dense) layer

struct AffineLayer {
  Matrix w;               // in_dim x out_dim
  std::vector<double> b;  // out_dim
  double l1_coeff = 0.0;  // weight-only L1 penalty

  AffineLayer() = default;
  AffineLayer(std::size_t in_dim, std::size_t out_dim, double l1 = 0.0)
      : w(in_dim, out_dim), b(out_dim, 0.0), l1_coeff(l1) {}

  std::size_t in_dim() const { return w.rows(); }
  std::size_t out_dim() const { return w.cols(); }

  double l1_penalty() const {
    double s = 0.0;
    for (double v : w.values()) s += std::abs(v);
    return l1_coeff * s;
  }
};

/// y = x W + b, bias broadcast over rows.
inline Matrix affine_forward(const Matrix& x, const AffineLayer& layer) {
  if (x.cols() != layer.in_dim()) throw shape_error("affine_forward: input width mismatch");
  Matrix y = matmul(x, layer.w);
  add_row_vector(y, layer.b);
  return y;
}

struct AffineGrads {
  Matrix dw;
  std::vector<double> db;
  Matrix dx;
};

/// dW = x^T dY + l1 * sign(W) with sign(0) = 0; dB = column sums of dY;
/// dX = dY W^T.
inline AffineGrads affine_backward(const Matrix& x, const AffineLayer& layer, const Matrix& dy,
                                   bool need_dx = true) {
  if (x.cols() != layer.in_dim() || dy.cols() != layer.out_dim() || x.rows() != dy.rows())
    throw shape_error("affine_backward: shape mismatch");
  AffineGrads g;
  g.dw = matmul_tn(x, dy);
  if (layer.l1_coeff != 0.0) {
    auto wv = layer.w.values();
    auto gv = g.dw.values();
    for (std::size_t i = 0; i < wv.size(); ++i) {
      if (wv[i] > 0.0)
        gv[i] += layer.l1_coeff;
      else if (wv[i] < 0.0)
        gv[i] -= layer.l1_coeff;
    }
  }
  g.db = column_sums(dy);
  if (need_dx) g.dx = matmul_nt(dy, layer.w);
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization

struct BatchNormLayer {
  std::vector<double> gamma, shift;
  std::vector<double> running_mean, running_var;
  double momentum = 0.99;
  double eps = 1e-5;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t dim, double momentum_ = 0.99, double eps_ = 1e-5)
      : gamma(dim, 1.0),
        shift(dim, 0.0),
        running_mean(dim, 0.0),
        running_var(dim, 1.0),
        momentum(momentum_),
        eps(eps_) {}

  std::size_t dim() const { return gamma.size(); }
};

struct BatchNormCache {
  Matrix x_hat;                 // normalized input
  std::vector<double> inv_std;  // 1 / sqrt(var_B + eps)
  std::vector<double> gamma;    // snapshot used in the forward pass
  std::vector<double> mean, var;
};

/// Normalizes with the running statistics; never mutates the layer.
inline Matrix batchnorm_infer(const Matrix& x, const BatchNormLayer& layer) {
  const std::size_t n = x.rows(), d = x.cols();
  if (d != layer.dim()) throw shape_error("batchnorm_infer: feature width mismatch");
  Matrix y(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double istd = 1.0 / std::sqrt(layer.running_var[j] + layer.eps);
    for (std::size_t i = 0; i < n; ++i)
      y(i, j) = layer.gamma[j] * (x(i, j) - layer.running_mean[j]) * istd + layer.shift[j];
  }
  return y;
}

/// Train mode normalizes with biased batch statistics and folds them into the
/// running estimates (running <- momentum*running + (1-momentum)*batch).
/// Infer mode uses the running statistics and leaves the layer untouched.
/// Train-mode outputs do not depend on the running statistics, so repeated
/// forwards at fixed parameters are value-pure.
inline Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& layer, Mode mode,
                                BatchNormCache* cache = nullptr) {
  const std::size_t n = x.rows(), d = x.cols();
  if (d != layer.dim()) throw shape_error("batchnorm_forward: feature width mismatch");
  if (mode == Mode::infer) return batchnorm_infer(x, layer);
  if (n < 2) throw argument_error("batch too small for batch norm");
  Matrix y(n, d);
  std::vector<double> mean(d, 0.0), var(d, 0.0), inv_std(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    var[j] /= static_cast<double>(n);  // biased estimator
    inv_std[j] = 1.0 / std::sqrt(var[j] + layer.eps);
  }
  Matrix x_hat(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.row(i);
    double* h = x_hat.row(i);
    double* o = y.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      h[j] = (r[j] - mean[j]) * inv_std[j];
      o[j] = layer.gamma[j] * h[j] + layer.shift[j];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    layer.running_mean[j] = layer.momentum * layer.running_mean[j] + (1.0 - layer.momentum) * mean[j];
    layer.running_var[j] = layer.momentum * layer.running_var[j] + (1.0 - layer.momentum) * var[j];
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->gamma = layer.gamma;
    cache->mean = std::move(mean);
    cache->var = std::move(var);
  }
  return y;
}

struct BatchNormGrads {
  Matrix dx;
  std::vector<double> dgamma, dshift;
};

/// Exact gradients of the train-mode expression (batch statistics are
/// functions of x, so dX carries the mean/variance terms).
inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Matrix& dy) {
  const std::size_t n = dy.rows(), d = dy.cols();
  if (cache.x_hat.rows() != n || cache.x_hat.cols() != d)
    throw shape_error("batchnorm_backward: cache/dY shape mismatch");
  BatchNormGrads g;
  g.dgamma.assign(d, 0.0);
  g.dshift.assign(d, 0.0);
  std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* dyr = dy.row(i);
    const double* xh = cache.x_hat.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      g.dshift[j] += dyr[j];
      g.dgamma[j] += dyr[j] * xh[j];
      const double dxhat = dyr[j] * cache.gamma[j];
      sum_dxhat[j] += dxhat;
      sum_dxhat_xhat[j] += dxhat * xh[j];
    }
  }
  g.dx = Matrix(n, d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* dyr = dy.row(i);
    const double* xh = cache.x_hat.row(i);
    double* dxr = g.dx.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dxhat = dyr[j] * cache.gamma[j];
      dxr[j] = cache.inv_std[j] * (dxhat - inv_n * (sum_dxhat[j] + xh[j] * sum_dxhat_xhat[j]));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation { leaky_relu, relu, sigmoid };

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Elementwise forward. alpha is the leaky-ReLU slope (ignored otherwise).
inline Matrix activation_forward(Activation kind, const Matrix& x, double alpha = 0.3) {
  Matrix y(x.rows(), x.cols());
  auto xv = x.values();
  auto yv = y.values();
  switch (kind) {
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : alpha * xv[i];
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = sigmoid(xv[i]);
      break;
  }
  return y;
}

/// dX = dY * f'(x). Subgradient conventions: relu'(0) = 0, leaky_relu'(0) = alpha.
inline Matrix activation_backward(Activation kind, const Matrix& x, const Matrix& dy,
                                  double alpha = 0.3) {
  if (x.rows() != dy.rows() || x.cols() != dy.cols())
    throw shape_error("activation_backward: shape mismatch");
  Matrix dx(x.rows(), x.cols());
  auto xv = x.values();
  auto dyv = dy.values();
  auto dxv = dx.values();
  switch (kind) {
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < xv.size(); ++i) dxv[i] = dyv[i] * (xv[i] > 0.0 ? 1.0 : alpha);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < xv.size(); ++i) dxv[i] = xv[i] > 0.0 ? dyv[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double s = sigmoid(xv[i]);
        dxv[i] = dyv[i] * s * (1.0 - s);
      }
      break;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout (inverted)

struct DropoutResult {
  Matrix y;
  Matrix mask;  // 1 = kept; empty in infer mode
};

/// Train: keep each unit with probability 1-p and scale kept units by 1/(1-p).
/// Infer: identity.
inline DropoutResult dropout_forward(const Matrix& x, double rate, Mode mode, RandomStream& rng) {
  if (rate < 0.0 || rate >= 1.0) throw argument_error("dropout rate must be in [0, 1)");
  DropoutResult r;
  if (mode == Mode::infer || rate == 0.0) {
    r.y = x;
    r.mask = Matrix(x.rows(), x.cols(), 1.0);
    return r;
  }
  const double scale = 1.0 / (1.0 - rate);
  r.mask = Matrix(x.rows(), x.cols());
  r.y = Matrix(x.rows(), x.cols());
  auto xv = x.values();
  auto mv = r.mask.values();
  auto yv = r.y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const bool keep = rng.uniform() >= rate;
    mv[i] = keep ? 1.0 : 0.0;
    yv[i] = keep ? xv[i] * scale : 0.0;
  }
  return r;
}

/// Replays a recorded mask: y = x .* mask / (1-rate).
inline Matrix dropout_apply(const Matrix& x, const Matrix& mask, double rate) {
  if (x.rows() != mask.rows() || x.cols() != mask.cols())
    throw shape_error("dropout_apply: mask shape mismatch");
  Matrix y(x.rows(), x.cols());
  const double scale = rate > 0.0 ? 1.0 / (1.0 - rate) : 1.0;
  auto xv = x.values();
  auto mv = mask.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] * mv[i] * scale;
  return y;
}

/// dX = dY .* mask / (1-rate).
inline Matrix dropout_backward(const Matrix& mask, double rate, const Matrix& dy) {
  return dropout_apply(dy, mask, rate);
}

// ---------------------------------------------------------------------------
// RMSprop

struct RmsPropState {
  std::vector<double> cache;  // accumulated squared gradients, one per parameter
  double rho = 0.9;
  double lr = 1e-3;
  double eps = 1e-8;

  RmsPropState() = default;
  RmsPropState(std::size_t n, double lr_, double rho_, double eps_)
      : cache(n, 0.0), rho(rho_), lr(lr_), eps(eps_) {}
};

/// cache <- rho*cache + (1-rho)*g^2; param <- param - lr*g/(sqrt(cache)+eps).
inline void rmsprop_step(std::span<double> params, std::span<const double> grads,
                         RmsPropState& state) {
  if (params.size() != grads.size() || params.size() != state.cache.size())
    throw shape_error("rmsprop_step: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.cache[i] = state.rho * state.cache[i] + (1.0 - state.rho) * g * g;
    params[i] -= state.lr * g / (std::sqrt(state.cache[i]) + state.eps);
  }
}

}  // namespace flatsomatic
