#pragma once

#include <string>
#include <vector>

#include "cell/common.hpp"

namespace cell {

constexpr double kProbClamp = 1e-7;

inline double clamp_probability(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

// Average binary cross-entropy; predictions are clamped to
// [1e-7, 1 - 1e-7] first.
double logloss(const Vec& preds, const std::vector<int>& labels);

// Mann-Whitney AUC with average-rank tie handling:
// P(score+ > score-) + 0.5 * P(tie). Requires both classes present.
double auc(const Vec& preds, const std::vector<int>& labels);

struct EvalReport {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t n = 0;
  double positive_ratio = 0.0;

  std::string to_json() const;
};

EvalReport evaluate(const Vec& preds, const std::vector<int>& labels);

}  // namespace cell
