#include "cell/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace cell {

double logloss(const Vec& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw UserError("logloss: length mismatch");
  if (preds.empty()) throw UserError("logloss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = clamp_probability(preds[i]);
    total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(preds.size());
}

double auc(const Vec& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw UserError("auc: length mismatch");
  const std::size_t n = preds.size();
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y != 0);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw UserError("auc: need at least one positive and one negative");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a] < preds[b];
  });

  // Average ranks over tie groups, then the Mann-Whitney statistic.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && preds[order[j + 1]] == preds[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) pos_rank_sum += avg_rank;
    i = j + 1;
  }
  const double u = pos_rank_sum -
                   static_cast<double>(n_pos) *
                       (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalReport evaluate(const Vec& preds, const std::vector<int>& labels) {
  EvalReport r;
  r.n = preds.size();
  r.auc = auc(preds, labels);
  r.logloss = logloss(preds, labels);
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y != 0);
  r.positive_ratio = static_cast<double>(n_pos) / static_cast<double>(r.n);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["auc"] = auc;
  j["logloss"] = logloss;
  j["n"] = n;
  j["positive_ratio"] = positive_ratio;
  return j.dump(2);
}

}  // namespace cell
