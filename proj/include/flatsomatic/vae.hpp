#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "flatsomatic/data.hpp"
#include "flatsomatic/gradcheck.hpp"
#include "flatsomatic/linalg.hpp"
#include "flatsomatic/metrics.hpp"
#include "flatsomatic/nn.hpp"
#include "flatsomatic/random.hpp"

namespace flatsomatic {

// ---------------------------------------------------------------------------
// Configuration

enum class LossKind { bce, soft_f1 };

inline std::string to_string(LossKind k) { return k == LossKind::bce ? "bce" : "soft_f1"; }

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "soft_f1") return LossKind::soft_f1;
  throw config_error("unknown loss kind: " + s + " (expected bce or soft_f1)");
}

struct RmsPropConfig {
  double lr = 1e-3;
  double rho = 0.9;
  double eps = 1e-8;
};

struct VaeConfig {
  std::size_t input_dim = 0;                      // m, set from the data
  std::array<std::size_t, 2> encoder_units{1024, 512};
  std::size_t latent_dim = 32;
  std::array<std::size_t, 2> decoder_units{512, 1024};  // mirrors the encoder by default
  double dropout_rate = 0.2;
  double l1_coeff = 1e-5;
  double leaky_alpha = 0.3;
  LossKind loss_kind = LossKind::soft_f1;
  double beta_max = 1.0;
  std::size_t warmup_epochs = 20;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  RmsPropConfig optimizer;
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
  std::uint64_t seed = 42;

  /// Returns every violated constraint (empty means valid).
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (input_dim < 1) v.push_back("input_dim must be >= 1");
    if (encoder_units[0] < 1 || encoder_units[1] < 1) v.push_back("encoder_units must be >= 1");
    if (decoder_units[0] < 1 || decoder_units[1] < 1) v.push_back("decoder_units must be >= 1");
    if (latent_dim < 1) v.push_back("latent_dim must be >= 1");
    if (batch_size < 2) v.push_back("batch_size must be >= 2 (batch norm needs 2+ rows)");
    if (epochs < 1) v.push_back("epochs must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) v.push_back("dropout_rate must be in [0, 1)");
    if (l1_coeff < 0.0) v.push_back("l1_coeff must be >= 0");
    if (!(leaky_alpha > 0.0 && leaky_alpha < 1.0)) v.push_back("leaky_alpha must be in (0, 1)");
    if (beta_max < 0.0) v.push_back("beta_max must be >= 0");
    if (optimizer.lr <= 0.0) v.push_back("optimizer.lr must be > 0");
    if (!(optimizer.rho > 0.0 && optimizer.rho < 1.0)) v.push_back("optimizer.rho must be in (0, 1)");
    if (optimizer.eps <= 0.0) v.push_back("optimizer.eps must be > 0");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) v.push_back("bn_momentum must be in (0, 1)");
    if (bn_eps <= 0.0) v.push_back("bn_eps must be > 0");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& s : v) msg += "\n  - " + s;
      throw config_error(msg);
    }
  }
};

// ---------------------------------------------------------------------------
// Model

/// Encoder: [affine+bn+leaky_relu, dropout, affine+bn+leaky_relu], parallel
/// mu/logvar heads; decoder: [affine+bn+relu, dropout, affine+bn+relu,
/// affine+sigmoid].
struct VaeModel {
  VaeConfig config;
  AffineLayer enc1, enc2;
  AffineLayer mu_head, logvar_head;
  AffineLayer dec1, dec2, dec_out;
  BatchNormLayer bn_enc1, bn_enc2, bn_dec1, bn_dec2;

  static VaeModel build(const VaeConfig& cfg) {
    cfg.validate();
    VaeModel m;
    m.config = cfg;
    const auto [e1, e2] = cfg.encoder_units;
    const auto [d1, d2] = cfg.decoder_units;
    m.enc1 = AffineLayer(cfg.input_dim, e1, cfg.l1_coeff);
    m.enc2 = AffineLayer(e1, e2, cfg.l1_coeff);
    m.mu_head = AffineLayer(e2, cfg.latent_dim, cfg.l1_coeff);
    m.logvar_head = AffineLayer(e2, cfg.latent_dim, cfg.l1_coeff);
    m.dec1 = AffineLayer(cfg.latent_dim, d1, cfg.l1_coeff);
    m.dec2 = AffineLayer(d1, d2, cfg.l1_coeff);
    m.dec_out = AffineLayer(d2, cfg.input_dim, cfg.l1_coeff);
    m.bn_enc1 = BatchNormLayer(e1, cfg.bn_momentum, cfg.bn_eps);
    m.bn_enc2 = BatchNormLayer(e2, cfg.bn_momentum, cfg.bn_eps);
    m.bn_dec1 = BatchNormLayer(d1, cfg.bn_momentum, cfg.bn_eps);
    m.bn_dec2 = BatchNormLayer(d2, cfg.bn_momentum, cfg.bn_eps);
    return m;
  }
};

namespace stream_id {
constexpr std::uint64_t kVaeInit = 0x56494E49;     // "VINI"
constexpr std::uint64_t kVaeShuffle = 0x56534846;  // "VSHF"
constexpr std::uint64_t kVaeNoise = 0x564E4F49;    // "VNOI"
}

namespace detail {

inline void init_affine(AffineLayer& layer, RandomStream& rng) {
  // scaled uniform fan-in/fan-out initialization, biases zero
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
  for (double& v : layer.w.values()) v = rng.uniform(-limit, limit);
  std::fill(layer.b.begin(), layer.b.end(), 0.0);
}

}  // namespace detail

/// Fresh model with uniform +-sqrt(6/(fan_in+fan_out)) weights drawn from the
/// config seed, zero biases, unit batch-norm scale.
inline VaeModel init_model(const VaeConfig& cfg) {
  VaeModel m = VaeModel::build(cfg);
  RandomStream rng(cfg.seed, stream_id::kVaeInit);
  detail::init_affine(m.enc1, rng);
  detail::init_affine(m.enc2, rng);
  detail::init_affine(m.mu_head, rng);
  detail::init_affine(m.logvar_head, rng);
  detail::init_affine(m.dec1, rng);
  detail::init_affine(m.dec2, rng);
  detail::init_affine(m.dec_out, rng);
  return m;
}

// ---------------------------------------------------------------------------
// Parameter traversal
//
// Canonical array order (also the FSOM serialization order):
//   enc1 W,b; bn_enc1 gamma,shift[,running_mean,running_var];
//   enc2 W,b; bn_enc2 ...; mu_head W,b; logvar_head W,b;
//   dec1 W,b; bn_dec1 ...; dec2 W,b; bn_dec2 ...; dec_out W,b.

template <typename ModelT, typename Fn>
  requires std::same_as<std::remove_const_t<ModelT>, VaeModel>
void visit_arrays(ModelT& m, bool include_running_stats, Fn&& fn) {
  auto affine = [&](const char* name, auto& l, const char* bname) {
    fn(name, l.w.values());
    fn(bname, std::span(l.b));
  };
  auto bn = [&](const char* base, auto& l) {
    fn(base, std::span(l.gamma));
    fn(base, std::span(l.shift));
    if (include_running_stats) {
      fn(base, std::span(l.running_mean));
      fn(base, std::span(l.running_var));
    }
  };
  affine("enc1.w", m.enc1, "enc1.b");
  bn("bn_enc1", m.bn_enc1);
  affine("enc2.w", m.enc2, "enc2.b");
  bn("bn_enc2", m.bn_enc2);
  affine("mu.w", m.mu_head, "mu.b");
  affine("logvar.w", m.logvar_head, "logvar.b");
  affine("dec1.w", m.dec1, "dec1.b");
  bn("bn_dec1", m.bn_dec1);
  affine("dec2.w", m.dec2, "dec2.b");
  bn("bn_dec2", m.bn_dec2);
  affine("dec_out.w", m.dec_out, "dec_out.b");
}

// ---------------------------------------------------------------------------
// Gradients

struct AffineGrad {
  Matrix w;
  std::vector<double> b;
};

struct BatchNormGrad {
  std::vector<double> gamma, shift;
};

struct VaeGradients {
  AffineGrad enc1, enc2, mu_head, logvar_head, dec1, dec2, dec_out;
  BatchNormGrad bn_enc1, bn_enc2, bn_dec1, bn_dec2;
};

inline VaeGradients make_zero_gradients(const VaeModel& m) {
  VaeGradients g;
  auto affine = [](const AffineLayer& l, AffineGrad& gr) {
    gr.w = Matrix(l.in_dim(), l.out_dim());
    gr.b.assign(l.out_dim(), 0.0);
  };
  auto bn = [](const BatchNormLayer& l, BatchNormGrad& gr) {
    gr.gamma.assign(l.dim(), 0.0);
    gr.shift.assign(l.dim(), 0.0);
  };
  affine(m.enc1, g.enc1);
  affine(m.enc2, g.enc2);
  affine(m.mu_head, g.mu_head);
  affine(m.logvar_head, g.logvar_head);
  affine(m.dec1, g.dec1);
  affine(m.dec2, g.dec2);
  affine(m.dec_out, g.dec_out);
  bn(m.bn_enc1, g.bn_enc1);
  bn(m.bn_enc2, g.bn_enc2);
  bn(m.bn_dec1, g.bn_dec1);
  bn(m.bn_dec2, g.bn_dec2);
  return g;
}

/// Zips trainable parameters with their gradients in canonical order.
template <typename Fn>
void visit_trainable(VaeModel& m, VaeGradients& g, Fn&& fn) {
  auto affine = [&](AffineLayer& l, AffineGrad& gr) {
    fn(l.w.values(), gr.w.values());
    fn(std::span<double>(l.b), std::span<double>(gr.b));
  };
  auto bn = [&](BatchNormLayer& l, BatchNormGrad& gr) {
    fn(std::span<double>(l.gamma), std::span<double>(gr.gamma));
    fn(std::span<double>(l.shift), std::span<double>(gr.shift));
  };
  affine(m.enc1, g.enc1);
  bn(m.bn_enc1, g.bn_enc1);
  affine(m.enc2, g.enc2);
  bn(m.bn_enc2, g.bn_enc2);
  affine(m.mu_head, g.mu_head);
  affine(m.logvar_head, g.logvar_head);
  affine(m.dec1, g.dec1);
  bn(m.bn_dec1, g.bn_dec1);
  affine(m.dec2, g.dec2);
  bn(m.bn_dec2, g.bn_dec2);
  affine(m.dec_out, g.dec_out);
}

// ---------------------------------------------------------------------------
// Posterior, reparameterization, decoding

struct EncoderOutput {
  Matrix mu;      // batch x d
  Matrix logvar;  // batch x d
};

/// Infer-mode encode: dropout off, batch norm on running statistics.
inline EncoderOutput encode(const VaeModel& m, const Matrix& x) {
  if (x.cols() != m.config.input_dim) throw shape_error("encode: input width mismatch");
  Matrix h = affine_forward(x, m.enc1);
  h = batchnorm_infer(h, m.bn_enc1);
  h = activation_forward(Activation::leaky_relu, h, m.config.leaky_alpha);
  h = affine_forward(h, m.enc2);
  h = batchnorm_infer(h, m.bn_enc2);
  h = activation_forward(Activation::leaky_relu, h, m.config.leaky_alpha);
  EncoderOutput out;
  out.mu = affine_forward(h, m.mu_head);
  out.logvar = affine_forward(h, m.logvar_head);
  return out;
}

/// z = mu + exp(logvar/2) .* eps, eps ~ N(0, I).
inline Matrix reparameterize(const EncoderOutput& enc, RandomStream& rng) {
  if (enc.mu.rows() != enc.logvar.rows() || enc.mu.cols() != enc.logvar.cols())
    throw shape_error("reparameterize: mu/logvar shape mismatch");
  Matrix z(enc.mu.rows(), enc.mu.cols());
  auto mv = enc.mu.values();
  auto lv = enc.logvar.values();
  auto zv = z.values();
  for (std::size_t i = 0; i < zv.size(); ++i)
    zv[i] = mv[i] + std::exp(0.5 * lv[i]) * rng.normal();
  return z;
}

/// Infer-mode decode; outputs lie strictly in (0,1).
inline Matrix decode(const VaeModel& m, const Matrix& z) {
  if (z.cols() != m.config.latent_dim) throw shape_error("decode: latent width mismatch");
  Matrix h = affine_forward(z, m.dec1);
  h = batchnorm_infer(h, m.bn_dec1);
  h = activation_forward(Activation::relu, h);
  h = affine_forward(h, m.dec2);
  h = batchnorm_infer(h, m.bn_dec2);
  h = activation_forward(Activation::relu, h);
  h = affine_forward(h, m.dec_out);
  return activation_forward(Activation::sigmoid, h);
}

/// Infer-mode reconstruction through the posterior mean (no sampling).
inline Matrix reconstruct_mean(const VaeModel& model, const Matrix& x) {
  return decode(model, encode(model, x).mu);
}

// ---------------------------------------------------------------------------
// Losses

/// Mean over batch of 0.5 * sum_j (exp(lv) + mu^2 - 1 - lv); >= 0, and 0 iff
/// the posterior equals the prior.
inline double kl_divergence(const EncoderOutput& enc) {
  if (enc.mu.rows() != enc.logvar.rows() || enc.mu.cols() != enc.logvar.cols())
    throw shape_error("kl_divergence: shape mismatch");
  if (enc.mu.rows() == 0) return 0.0;
  double acc = 0.0;
  auto mv = enc.mu.values();
  auto lv = enc.logvar.values();
  for (std::size_t i = 0; i < mv.size(); ++i)
    acc += 0.5 * (std::exp(lv[i]) + mv[i] * mv[i] - 1.0 - lv[i]);
  return acc / static_cast<double>(enc.mu.rows());
}

struct LossValueGrad {
  double value = 0.0;
  Matrix grad;  // d value / d xhat
};

constexpr double kBceClamp = 1e-7;

/// Binary cross-entropy summed over features, averaged over batch rows;
/// xhat clamped to [1e-7, 1-1e-7] before the logs, gradient consistent with
/// the clamped expression.
inline LossValueGrad bce_loss(const Matrix& x, const Matrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
    throw shape_error("bce_loss: shape mismatch");
  LossValueGrad out;
  out.grad = Matrix(x.rows(), x.cols());
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  auto xv = x.values();
  auto pv = xhat.values();
  auto gv = out.grad.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const bool clamped_lo = pv[i] < kBceClamp;
    const bool clamped_hi = pv[i] > 1.0 - kBceClamp;
    const double p = clamped_lo ? kBceClamp : (clamped_hi ? 1.0 - kBceClamp : pv[i]);
    acc += -(xv[i] * std::log(p) + (1.0 - xv[i]) * std::log(1.0 - p));
    gv[i] = (clamped_lo || clamped_hi) ? 0.0 : inv_b * (-xv[i] / p + (1.0 - xv[i]) / (1.0 - p));
  }
  out.value = acc * inv_b;
  return out;
}

/// Differentiable micro-F1 relaxation over the whole minibatch:
/// TP = sum x.*xhat, FP = sum (1-x).*xhat, FN = sum x.*(1-xhat),
/// softF1 = 2TP/(2TP+FP+FN) (1 when the denominator is 0), loss = 1-softF1.
inline LossValueGrad soft_f1_loss(const Matrix& x, const Matrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
    throw shape_error("soft_f1_loss: shape mismatch");
  auto xv = x.values();
  auto pv = xhat.values();
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    tp += xv[i] * pv[i];
    fp += (1.0 - xv[i]) * pv[i];
    fn += xv[i] * (1.0 - pv[i]);
  }
  const double denom = 2.0 * tp + fp + fn;
  LossValueGrad out;
  out.grad = Matrix(x.rows(), x.cols());
  if (denom == 0.0) {
    out.value = 0.0;  // softF1 defined as 1
    return out;
  }
  const double soft_f1 = 2.0 * tp / denom;
  out.value = 1.0 - soft_f1;
  // denom = 2TP+FP+FN has d/dp_i = 2x_i + (1-x_i) - x_i = 1, so by the
  // quotient rule d softF1/dp_i = 2(x_i*denom - tp)/denom^2.
  auto gv = out.grad.values();
  const double inv_d2 = 1.0 / (denom * denom);
  for (std::size_t i = 0; i < xv.size(); ++i)
    gv[i] = -2.0 * (xv[i] * denom - tp) * inv_d2;
  return out;
}

inline LossValueGrad reconstruction_loss(LossKind kind, const Matrix& x, const Matrix& xhat) {
  return kind == LossKind::bce ? bce_loss(x, xhat) : soft_f1_loss(x, xhat);
}

/// Linear KL warm-up: beta_max * min(1, epoch / warmup_epochs); constant
/// beta_max when warmup_epochs is 0.
inline double beta_schedule(std::size_t epoch, const VaeConfig& cfg) {
  if (cfg.warmup_epochs == 0) return cfg.beta_max;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
  return cfg.beta_max * std::min(1.0, frac);
}

// ---------------------------------------------------------------------------
// Train-mode forward/backward

/// Frozen stochasticity for one training step: reparameterization noise and
/// dropout masks. Passing the same plan twice makes the step a deterministic
/// function of (model, x, beta).
struct StochasticPlan {
  Matrix eps;                    // batch x d
  Matrix enc_mask, dec_mask;     // dropout masks (1 = keep)
};

inline StochasticPlan draw_plan(const VaeConfig& cfg, std::size_t batch, RandomStream& rng) {
  StochasticPlan plan;
  plan.eps = Matrix(batch, cfg.latent_dim);
  for (double& v : plan.eps.values()) v = rng.normal();
  auto draw_mask = [&](std::size_t cols) {
    Matrix m(batch, cols, 1.0);
    if (cfg.dropout_rate > 0.0)
      for (double& v : m.values()) v = rng.uniform() >= cfg.dropout_rate ? 1.0 : 0.0;
    return m;
  };
  plan.enc_mask = draw_mask(cfg.encoder_units[0]);
  plan.dec_mask = draw_mask(cfg.decoder_units[0]);
  return plan;
}

struct StepStats {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double l1 = 0.0;
};

/// One train-mode forward/backward pass with hand-written reverse-mode
/// gradients through the reparameterization (pathwise estimator).
/// L = recon + beta*KL + sum_layers l1*|W|_1. Updates batch-norm running
/// statistics as a side effect; outputs do not depend on them.
inline StepStats vae_backprop(VaeModel& model, const Matrix& x, double beta,
                              const StochasticPlan& plan, VaeGradients& grads) {
  const VaeConfig& cfg = model.config;
  if (x.cols() != cfg.input_dim) throw shape_error("vae_backprop: input width mismatch");
  const std::size_t batch = x.rows();
  const double alpha = cfg.leaky_alpha;

  // forward
  Matrix e1_lin = affine_forward(x, model.enc1);
  BatchNormCache bn1c;
  Matrix e1_bn = batchnorm_forward(e1_lin, model.bn_enc1, Mode::train, &bn1c);
  Matrix e1_act = activation_forward(Activation::leaky_relu, e1_bn, alpha);
  Matrix e1_drop = dropout_apply(e1_act, plan.enc_mask, cfg.dropout_rate);

  Matrix e2_lin = affine_forward(e1_drop, model.enc2);
  BatchNormCache bn2c;
  Matrix e2_bn = batchnorm_forward(e2_lin, model.bn_enc2, Mode::train, &bn2c);
  Matrix e2_act = activation_forward(Activation::leaky_relu, e2_bn, alpha);

  EncoderOutput enc;
  enc.mu = affine_forward(e2_act, model.mu_head);
  enc.logvar = affine_forward(e2_act, model.logvar_head);

  Matrix z(batch, cfg.latent_dim);
  {
    auto mv = enc.mu.values();
    auto lv = enc.logvar.values();
    auto ev = plan.eps.values();
    auto zv = z.values();
    for (std::size_t i = 0; i < zv.size(); ++i) zv[i] = mv[i] + std::exp(0.5 * lv[i]) * ev[i];
  }

  Matrix d1_lin = affine_forward(z, model.dec1);
  BatchNormCache bn3c;
  Matrix d1_bn = batchnorm_forward(d1_lin, model.bn_dec1, Mode::train, &bn3c);
  Matrix d1_act = activation_forward(Activation::relu, d1_bn);
  Matrix d1_drop = dropout_apply(d1_act, plan.dec_mask, cfg.dropout_rate);

  Matrix d2_lin = affine_forward(d1_drop, model.dec2);
  BatchNormCache bn4c;
  Matrix d2_bn = batchnorm_forward(d2_lin, model.bn_dec2, Mode::train, &bn4c);
  Matrix d2_act = activation_forward(Activation::relu, d2_bn);

  Matrix out_lin = affine_forward(d2_act, model.dec_out);
  Matrix xhat = activation_forward(Activation::sigmoid, out_lin);

  LossValueGrad recon = reconstruction_loss(cfg.loss_kind, x, xhat);
  const double kl = kl_divergence(enc);

  StepStats stats;
  stats.recon = recon.value;
  stats.kl = kl;
  stats.l1 = model.enc1.l1_penalty() + model.enc2.l1_penalty() + model.mu_head.l1_penalty() +
             model.logvar_head.l1_penalty() + model.dec1.l1_penalty() + model.dec2.l1_penalty() +
             model.dec_out.l1_penalty();
  stats.total = recon.value + beta * kl + stats.l1;

  // backward
  Matrix d_outlin = activation_backward(Activation::sigmoid, out_lin, recon.grad);
  AffineGrads g_out = affine_backward(d2_act, model.dec_out, d_outlin);
  grads.dec_out.w = std::move(g_out.dw);
  grads.dec_out.b = std::move(g_out.db);

  Matrix d_d2bn = activation_backward(Activation::relu, d2_bn, g_out.dx);
  BatchNormGrads g_bn4 = batchnorm_backward(bn4c, d_d2bn);
  grads.bn_dec2.gamma = std::move(g_bn4.dgamma);
  grads.bn_dec2.shift = std::move(g_bn4.dshift);

  AffineGrads g_dec2 = affine_backward(d1_drop, model.dec2, g_bn4.dx);
  grads.dec2.w = std::move(g_dec2.dw);
  grads.dec2.b = std::move(g_dec2.db);

  Matrix d_d1act = dropout_backward(plan.dec_mask, cfg.dropout_rate, g_dec2.dx);
  Matrix d_d1bn = activation_backward(Activation::relu, d1_bn, d_d1act);
  BatchNormGrads g_bn3 = batchnorm_backward(bn3c, d_d1bn);
  grads.bn_dec1.gamma = std::move(g_bn3.dgamma);
  grads.bn_dec1.shift = std::move(g_bn3.dshift);

  AffineGrads g_dec1 = affine_backward(z, model.dec1, g_bn3.dx);
  grads.dec1.w = std::move(g_dec1.dw);
  grads.dec1.b = std::move(g_dec1.db);

  // through the sampler: dz/dmu = 1, dz/dlogvar = eps * exp(logvar/2) / 2;
  // plus the KL terms  d(beta*KL)/dmu = beta*mu/B,
  // d(beta*KL)/dlogvar = beta*(exp(logvar)-1)/(2B)
  Matrix d_mu(batch, cfg.latent_dim);
  Matrix d_logvar(batch, cfg.latent_dim);
  {
    const double inv_b = 1.0 / static_cast<double>(batch);
    auto dz = g_dec1.dx.values();
    auto mv = enc.mu.values();
    auto lv = enc.logvar.values();
    auto ev = plan.eps.values();
    auto dmv = d_mu.values();
    auto dlv = d_logvar.values();
    for (std::size_t i = 0; i < dz.size(); ++i) {
      dmv[i] = dz[i] + beta * mv[i] * inv_b;
      dlv[i] = dz[i] * 0.5 * std::exp(0.5 * lv[i]) * ev[i] +
               beta * 0.5 * (std::exp(lv[i]) - 1.0) * inv_b;
    }
  }

  AffineGrads g_mu = affine_backward(e2_act, model.mu_head, d_mu);
  grads.mu_head.w = std::move(g_mu.dw);
  grads.mu_head.b = std::move(g_mu.db);
  AffineGrads g_logvar = affine_backward(e2_act, model.logvar_head, d_logvar);
  grads.logvar_head.w = std::move(g_logvar.dw);
  grads.logvar_head.b = std::move(g_logvar.db);

  Matrix d_e2act = std::move(g_mu.dx);
  add_inplace(d_e2act, g_logvar.dx);

  Matrix d_e2bn = activation_backward(Activation::leaky_relu, e2_bn, d_e2act, alpha);
  BatchNormGrads g_bn2 = batchnorm_backward(bn2c, d_e2bn);
  grads.bn_enc2.gamma = std::move(g_bn2.dgamma);
  grads.bn_enc2.shift = std::move(g_bn2.dshift);

  AffineGrads g_enc2 = affine_backward(e1_drop, model.enc2, g_bn2.dx);
  grads.enc2.w = std::move(g_enc2.dw);
  grads.enc2.b = std::move(g_enc2.db);

  Matrix d_e1act = dropout_backward(plan.enc_mask, cfg.dropout_rate, g_enc2.dx);
  Matrix d_e1bn = activation_backward(Activation::leaky_relu, e1_bn, d_e1act, alpha);
  BatchNormGrads g_bn1 = batchnorm_backward(bn1c, d_e1bn);
  grads.bn_enc1.gamma = std::move(g_bn1.dgamma);
  grads.bn_enc1.shift = std::move(g_bn1.dshift);

  AffineGrads g_enc1 = affine_backward(x, model.enc1, g_bn1.dx, /*need_dx=*/false);
  grads.enc1.w = std::move(g_enc1.dw);
  grads.enc1.b = std::move(g_enc1.db);

  return stats;
}

/// Train-mode loss value only (same expression vae_backprop differentiates).
inline double vae_loss_value(VaeModel& model, const Matrix& x, double beta,
                             const StochasticPlan& plan) {
  VaeGradients scratch;
  return vae_backprop(model, x, beta, plan, scratch).total;
}

/// Total loss with stochasticity drawn from rng (single-sample pathwise
/// estimator). Returns the loss decomposition and fills grads.
inline StepStats total_loss(VaeModel& model, const Matrix& x, std::size_t epoch, RandomStream& rng,
                            VaeGradients& grads) {
  StochasticPlan plan = draw_plan(model.config, x.rows(), rng);
  return vae_backprop(model, x, beta_schedule(epoch, model.config), plan, grads);
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  std::size_t epoch = 0;
  double beta = 0.0;
  double train_recon = 0.0;
  double train_kl = 0.0;
  std::optional<double> val_f1;
  std::optional<double> val_cosine;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

struct TrainResult {
  VaeModel model;
  TrainHistory history;
};

namespace detail {

inline RmsPropState make_state(std::span<const double> params, const RmsPropConfig& opt) {
  return RmsPropState(params.size(), opt.lr, opt.rho, opt.eps);
}

}  // namespace detail

struct ReconEval {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cosine = 0.0;
};

/// Infer-mode mean reconstruction of the given rows; micro counts pooled
/// across all rows (binarized at `threshold`), cosine averaged per row.
inline ReconEval evaluate_reconstruction(const VaeModel& model, const OccurrenceMatrix& data,
                                         std::span<const std::size_t> rows,
                                         double threshold = 0.5) {
  if (data.n_features() != model.config.input_dim)
    throw shape_error("evaluate_reconstruction: matrix width does not match model");
  double tp = 0.0, fp = 0.0, fn = 0.0, cos_sum = 0.0;
  const std::size_t chunk = std::max<std::size_t>(model.config.batch_size, 1);
  for (std::size_t at = 0; at < rows.size(); at += chunk) {
    const std::size_t len = std::min(chunk, rows.size() - at);
    Matrix x = data.gather_dense(rows.subspan(at, len));
    Matrix xhat = reconstruct_mean(model, x);
    auto xv = x.values();
    auto pv = xhat.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const bool t = xv[i] != 0.0;
      const bool p = pv[i] >= threshold;
      if (t && p)
        tp += 1.0;
      else if (!t && p)
        fp += 1.0;
      else if (t && !p)
        fn += 1.0;
    }
    cos_sum += cosine_similarity(x, xhat) * static_cast<double>(len);
  }
  MicroF1 mf = micro_f1_from_counts(tp, fp, fn);
  ReconEval ev;
  ev.f1 = mf.f1;
  ev.precision = mf.precision;
  ev.recall = mf.recall;
  ev.cosine = rows.empty() ? 0.0 : cos_sum / static_cast<double>(rows.size());
  return ev;
}

/// Trains on all rows of `data` except `val_rows` (when given); validation
/// metrics are computed in infer mode after each epoch. Deterministic given
/// config.seed: shuffles, noise, and initialization all derive from it.
inline TrainResult train(const OccurrenceMatrix& data, const VaeConfig& cfg_in,
                         std::span<const std::size_t> val_rows = {}) {
  VaeConfig cfg = cfg_in;
  if (cfg.input_dim == 0) cfg.input_dim = data.n_features();
  if (cfg.input_dim != data.n_features())
    throw shape_error("train: config input_dim does not match matrix");
  cfg.validate();
  if (data.n_samples() == 0) throw argument_error("train: empty matrix");

  std::vector<bool> held(data.n_samples(), false);
  for (std::size_t i : val_rows) {
    if (i >= data.n_samples()) throw argument_error("train: validation index out of range");
    held[i] = true;
  }
  std::vector<std::size_t> train_rows;
  for (std::size_t i = 0; i < data.n_samples(); ++i)
    if (!held[i]) train_rows.push_back(i);
  if (train_rows.size() < 2) throw argument_error("train: fewer than 2 training rows");
  if (cfg.batch_size > train_rows.size())
    throw argument_error("train: batch_size exceeds training rows");

  TrainResult result;
  result.model = init_model(cfg);
  VaeModel& model = result.model;

  // one optimizer state per trainable array, canonical order
  VaeGradients grads = make_zero_gradients(model);
  std::vector<RmsPropState> opt_states;
  visit_trainable(model, grads, [&](std::span<double> p, std::span<double>) {
    opt_states.push_back(detail::make_state(p, cfg.optimizer));
  });

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double beta = beta_schedule(epoch, cfg);
    RandomStream shuffle_rng(cfg.seed, stream_id::kVaeShuffle, epoch);
    RandomStream noise_rng(cfg.seed, stream_id::kVaeNoise, epoch);
    std::vector<std::size_t> order = train_rows;
    shuffle_rng.shuffle(order);

    double recon_sum = 0.0, kl_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - at);
      if (len < 2) break;  // trailing singleton cannot pass batch norm
      Matrix x = data.gather_dense(std::span<const std::size_t>(order.data() + at, len));
      StochasticPlan plan = draw_plan(cfg, len, noise_rng);
      StepStats stats = vae_backprop(model, x, beta, plan, grads);
      recon_sum += stats.recon;
      kl_sum += stats.kl;
      ++batches;
      std::size_t slot = 0;
      visit_trainable(model, grads, [&](std::span<double> p, std::span<double> g) {
        rmsprop_step(p, std::span<const double>(g.data(), g.size()), opt_states[slot++]);
      });
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.beta = beta;
    rec.train_recon = batches ? recon_sum / static_cast<double>(batches) : 0.0;
    rec.train_kl = batches ? kl_sum / static_cast<double>(batches) : 0.0;
    if (!val_rows.empty()) {
      ReconEval ev = evaluate_reconstruction(model, data, val_rows);
      rec.val_f1 = ev.f1;
      rec.val_cosine = ev.cosine;
    }
    result.history.records.push_back(rec);
  }
  return result;
}

/// Posterior means (infer mode) for every row, in matrix order.
inline Matrix embed(const VaeModel& model, const OccurrenceMatrix& data) {
  if (data.n_features() != model.config.input_dim)
    throw shape_error("embed: matrix width does not match model");
  const std::size_t n = data.n_samples(), d = model.config.latent_dim;
  Matrix out(n, d);
  const std::size_t chunk = std::max<std::size_t>(model.config.batch_size, 1);
  std::vector<std::size_t> rows;
  for (std::size_t at = 0; at < n; at += chunk) {
    const std::size_t len = std::min(chunk, n - at);
    rows.resize(len);
    for (std::size_t i = 0; i < len; ++i) rows[i] = at + i;
    Matrix x = data.gather_dense(rows);
    EncoderOutput enc = encode(model, x);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < d; ++j) out(at + i, j) = enc.mu(i, j);
  }
  return out;
}

}  // namespace flatsomatic
