#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatsomatic/errors.hpp"
#include "flatsomatic/linalg.hpp"

namespace flatsomatic {

/// Thresholds probabilities to {0,1}; ties (entry == threshold) map to 1.
inline Matrix binarize(const Matrix& probs, double threshold = 0.5) {
  Matrix out(probs.rows(), probs.cols());
  auto pv = probs.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < pv.size(); ++i) ov[i] = pv[i] >= threshold ? 1.0 : 0.0;
  return out;
}

struct MicroF1 {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Each ratio is 1 when its denominator is 0 (vacuous truth convention).
inline MicroF1 micro_f1_from_counts(double tp, double fp, double fn) {
  auto ratio = [](double num, double den) { return den == 0.0 ? 1.0 : num / den; };
  MicroF1 r;
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  r.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  return r;
}

/// Micro-averaged F1 over all cells of two binary matrices.
inline MicroF1 micro_f1(const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    throw shape_error("micro_f1: shape mismatch");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  auto yv = y.values();
  auto pv = yhat.values();
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const bool t = yv[i] != 0.0;
    const bool p = pv[i] != 0.0;
    if (t && p)
      tp += 1.0;
    else if (!t && p)
      fp += 1.0;
    else if (t && !p)
      fn += 1.0;
  }
  return micro_f1_from_counts(tp, fp, fn);
}

/// Mean over rows of <x_i, xhat_i>/(|x_i||xhat_i|); rows where either norm is
/// zero contribute 0.
inline double cosine_similarity(const Matrix& x, const Matrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
    throw shape_error("cosine_similarity: shape mismatch");
  if (x.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* a = x.row(i);
    const double* b = xhat.row(i);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      dot += a[j] * b[j];
      na += a[j] * a[j];
      nb += b[j] * b[j];
    }
    if (na > 0.0 && nb > 0.0) acc += dot / (std::sqrt(na) * std::sqrt(nb));
  }
  return acc / static_cast<double>(x.rows());
}

// ---------------------------------------------------------------------------
// Report

struct FoldMetrics {
  std::size_t fold = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cosine = 0.0;
};

struct MetricsReport {
  std::optional<double> f1, precision, recall, cosine;
  std::optional<double> nmi, nmi_vae, nmi_pca;
  std::vector<FoldMetrics> per_fold;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<std::size_t> dim;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    auto put = [&](const char* key, const auto& opt) {
      if (opt) j[key] = *opt;
    };
    put("f1", f1);
    put("precision", precision);
    put("recall", recall);
    put("cosine", cosine);
    put("nmi", nmi);
    put("nmi_vae", nmi_vae);
    put("nmi_pca", nmi_pca);
    if (!per_fold.empty()) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& fm : per_fold) {
        nlohmann::ordered_json o;
        o["fold"] = fm.fold;
        o["f1"] = fm.f1;
        o["precision"] = fm.precision;
        o["recall"] = fm.recall;
        o["cosine"] = fm.cosine;
        arr.push_back(std::move(o));
      }
      j["per_fold"] = std::move(arr);
    }
    put("seed", seed);
    put("k", k);
    put("dim", dim);
    return j;
  }

  static MetricsReport from_json(const nlohmann::ordered_json& j) {
    MetricsReport r;
    auto get = [&](const char* key, auto& opt) {
      if (j.contains(key)) opt = j.at(key).template get<typename std::decay_t<decltype(opt)>::value_type>();
    };
    get("f1", r.f1);
    get("precision", r.precision);
    get("recall", r.recall);
    get("cosine", r.cosine);
    get("nmi", r.nmi);
    get("nmi_vae", r.nmi_vae);
    get("nmi_pca", r.nmi_pca);
    if (j.contains("per_fold")) {
      for (const auto& o : j.at("per_fold")) {
        FoldMetrics fm;
        fm.fold = o.at("fold").get<std::size_t>();
        fm.f1 = o.at("f1").get<double>();
        fm.precision = o.at("precision").get<double>();
        fm.recall = o.at("recall").get<double>();
        fm.cosine = o.at("cosine").get<double>();
        r.per_fold.push_back(fm);
      }
    }
    get("seed", r.seed);
    get("k", r.k);
    get("dim", r.dim);
    return r;
  }
};

}  // namespace flatsomatic
