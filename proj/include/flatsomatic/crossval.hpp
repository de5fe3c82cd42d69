#pragma once

#include <cstdint>

#include "flatsomatic/data.hpp"
#include "flatsomatic/metrics.hpp"
#include "flatsomatic/vae.hpp"

namespace flatsomatic {

/// k-fold reconstruction protocol: train on k-1 folds, reconstruct the
/// held-out fold in infer mode, binarize at 0.5. Mean row reports the
/// arithmetic average of the folds.
inline MetricsReport cross_validate(const OccurrenceMatrix& data, const VaeConfig& cfg_in,
                                    std::size_t k = 5) {
  VaeConfig cfg = cfg_in;
  if (cfg.input_dim == 0) cfg.input_dim = data.n_features();
  cfg.validate();
  KFoldPlan plan = kfold_split(data.n_samples(), k, cfg.seed);

  MetricsReport report;
  double f1 = 0.0, precision = 0.0, recall = 0.0, cosine = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    TrainResult run = train(data, cfg, plan.folds[f]);
    ReconEval ev = evaluate_reconstruction(run.model, data, plan.folds[f]);
    FoldMetrics fm;
    fm.fold = f;
    fm.f1 = ev.f1;
    fm.precision = ev.precision;
    fm.recall = ev.recall;
    fm.cosine = ev.cosine;
    report.per_fold.push_back(fm);
    f1 += ev.f1;
    precision += ev.precision;
    recall += ev.recall;
    cosine += ev.cosine;
  }
  const double dk = static_cast<double>(k);
  report.f1 = f1 / dk;
  report.precision = precision / dk;
  report.recall = recall / dk;
  report.cosine = cosine / dk;
  report.seed = cfg.seed;
  report.k = k;
  report.dim = cfg.latent_dim;
  return report;
}

}  // namespace flatsomatic
