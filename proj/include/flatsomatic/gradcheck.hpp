#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace flatsomatic {

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t params_checked = 0;
  std::string worst_array;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool within(double tolerance) const { return max_rel_error <= tolerance; }
};

/// One parameter array paired with its analytic gradient.
struct GradCheckSlot {
  std::string name;
  std::span<double> params;
  std::span<const double> analytic;
};

/// Central differences (f(t+e) - f(t-e)) / 2e per coordinate against the
/// analytic gradient; relative error |a-n| / max(|a|, |n|, denom_floor).
/// loss_fn must be deterministic: dropout masks and reparameterization noise
/// frozen. Raise denom_floor toward 1e-6 * |loss| when the loss magnitude
/// makes cancellation noise in the differences exceed 1e-8.
template <typename LossFn>
FiniteDiffReport finite_diff_check(LossFn&& loss_fn, std::span<GradCheckSlot> slots,
                                   double epsilon, double denom_floor = 1e-8) {
  FiniteDiffReport report;
  for (auto& slot : slots) {
    for (std::size_t i = 0; i < slot.params.size(); ++i) {
      const double saved = slot.params[i];
      slot.params[i] = saved + epsilon;
      const double lp = loss_fn();
      slot.params[i] = saved - epsilon;
      const double lm = loss_fn();
      slot.params[i] = saved;
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double analytic = slot.analytic[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), denom_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.params_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_array = slot.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace flatsomatic
