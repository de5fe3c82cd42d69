#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "flatsomatic/data.hpp"
#include "flatsomatic/linalg.hpp"
#include "flatsomatic/metrics.hpp"
#include "flatsomatic/nn.hpp"

namespace flatsomatic {

struct ClassifyConfig {
  std::size_t iters = 400;
  double lr_scale = 1.0;
  double lambda = 1e-3;       // L2 weight on the linear coefficients, not the bias
  std::size_t power_iters = 30;
};

struct LinearModel {
  std::vector<double> w;
  double bias = 0.0;
};

namespace detail {

/// Largest squared singular value of x, estimated by power iteration on
/// x^T x from an all-ones start.
inline double spectral_norm_sq(const Matrix& x, std::size_t iters) {
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> v(m, 1.0), u(n), w(m);
  double estimate = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += row[j] * v[j];
      u[i] = s;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.row(i);
      for (std::size_t j = 0; j < m; ++j) w[j] += row[j] * u[i];
    }
    double norm = 0.0;
    for (double t : w) norm += t * t;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    estimate = 0.0;
    for (double t : u) estimate += t * t;  // = v^T X^T X v once v is unit
    for (std::size_t j = 0; j < m; ++j) v[j] = w[j] / norm;
  }
  return estimate;
}

}  // namespace detail

/// Full-batch gradient descent on mean log-loss + (lambda/2)|w|^2.
/// Step sizes come from per-block smoothness bounds (sigma_max^2/(4n)+lambda
/// for the weights, 1/4 for the bias), scaled by lr_scale.
inline LinearModel logistic_train(const Matrix& x, std::span<const double> y,
                                  const ClassifyConfig& cfg = {}) {
  const std::size_t n = x.rows(), m = x.cols();
  if (y.size() != n) throw shape_error("logistic_train: label count mismatch");
  if (n == 0) throw argument_error("logistic_train: empty feature matrix");
  for (double t : y)
    if (t != 0.0 && t != 1.0) throw argument_error("logistic_train: labels must be 0 or 1");

  const double smoothness =
      detail::spectral_norm_sq(x, cfg.power_iters) / (4.0 * static_cast<double>(n)) + cfg.lambda;
  const double lr_w = cfg.lr_scale / smoothness;
  const double lr_b = cfg.lr_scale * 4.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  LinearModel model;
  model.w.assign(m, 0.0);
  std::vector<double> resid(n), gw(m);
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.row(i);
      double z = model.bias;
      for (std::size_t j = 0; j < m; ++j) z += row[j] * model.w[j];
      resid[i] = sigmoid(z) - y[i];
    }
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.row(i);
      for (std::size_t j = 0; j < m; ++j) gw[j] += row[j] * resid[i];
      gb += resid[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double g = gw[j] * inv_n + cfg.lambda * model.w[j];
      model.w[j] -= lr_w * g;
    }
    model.bias -= lr_b * (gb * inv_n);
  }
  return model;
}

inline std::vector<double> logistic_predict(const Matrix& x, const LinearModel& model,
                                            double threshold = 0.5) {
  if (x.cols() != model.w.size()) throw shape_error("logistic_predict: feature width mismatch");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* row = x.row(i);
    double z = model.bias;
    for (std::size_t j = 0; j < x.cols(); ++j) z += row[j] * model.w[j];
    out[i] = sigmoid(z) >= threshold ? 1.0 : 0.0;
  }
  return out;
}

namespace detail {

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.row(rows[i]), x.cols(), out.row(i));
  return out;
}

}  // namespace detail

/// k-fold cross-validated binary classification; micro metrics pooled over
/// the held-out folds, with a per-fold breakdown.
inline MetricsReport classify(const Matrix& features, std::span<const double> labels,
                              std::size_t folds, std::uint64_t seed,
                              const ClassifyConfig& cfg = {}) {
  const std::size_t n = features.rows();
  if (labels.size() != n) throw shape_error("classify: label count mismatch");
  std::size_t pos = 0;
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw argument_error("classify: labels must be 0 or 1");
    if (y == 1.0) ++pos;
  }
  if (pos < 2 || n - pos < 2)
    throw argument_error("classify: need at least 2 samples of each class");

  KFoldPlan plan = kfold_split(n, folds, seed);
  MetricsReport report;
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows = fold_complement(plan, f, n);
    Matrix xtr = detail::gather_rows(features, train_rows);
    std::vector<double> ytr;
    ytr.reserve(train_rows.size());
    for (std::size_t i : train_rows) ytr.push_back(labels[i]);
    LinearModel model = logistic_train(xtr, ytr, cfg);

    Matrix xval = detail::gather_rows(features, plan.folds[f]);
    std::vector<double> pred = logistic_predict(xval, model);
    double ftp = 0.0, ffp = 0.0, ffn = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool t = labels[plan.folds[f][i]] == 1.0;
      const bool p = pred[i] == 1.0;
      if (t && p)
        ftp += 1.0;
      else if (!t && p)
        ffp += 1.0;
      else if (t && !p)
        ffn += 1.0;
    }
    MicroF1 fm = micro_f1_from_counts(ftp, ffp, ffn);
    FoldMetrics fold_metrics;
    fold_metrics.fold = f;
    fold_metrics.f1 = fm.f1;
    fold_metrics.precision = fm.precision;
    fold_metrics.recall = fm.recall;
    report.per_fold.push_back(fold_metrics);
    tp += ftp;
    fp += ffp;
    fn += ffn;
  }
  MicroF1 overall = micro_f1_from_counts(tp, fp, fn);
  report.f1 = overall.f1;
  report.precision = overall.precision;
  report.recall = overall.recall;
  report.seed = seed;
  report.dim = features.cols();
  return report;
}

}  // namespace flatsomatic
