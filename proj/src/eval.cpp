#include "vq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vq/error.hpp"
#include "vq/rng.hpp"

namespace vq {

ConfusionCounts confusion(const std::vector<CaseLabel>& predicted,
                          const std::vector<CaseLabel>& actual,
                          CaseLabel positive) {
  if (predicted.size() != actual.size())
    throw InvalidArgument("confusion: prediction/label count mismatch");
  if (predicted.empty()) throw InvalidArgument("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred_pos = predicted[i] == positive;
    const bool is_pos = actual[i] == positive;
    if (pred_pos && is_pos) ++c.tp;
    else if (pred_pos && !is_pos) ++c.fp;
    else if (!pred_pos && is_pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ClassMetrics metrics(const ConfusionCounts& c) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto ratio = [nan](long num, long den) {
    return den > 0 ? static_cast<double>(num) / den : nan;
  };
  ClassMetrics m;
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  return m;
}

ClassMetrics metrics(const std::vector<CaseLabel>& predicted,
                     const std::vector<CaseLabel>& actual, CaseLabel positive) {
  return metrics(confusion(predicted, actual, positive));
}

RocCurve roc(const std::vector<double>& scores,
             const std::vector<bool>& positive) {
  if (scores.size() != positive.size())
    throw InvalidArgument("roc: score/label count mismatch");
  if (scores.empty()) throw InvalidArgument("roc: empty input");
  for (double s : scores)
    if (!std::isfinite(s)) throw InvalidArgument("roc: non-finite score");

  long n_pos = 0;
  for (bool b : positive) n_pos += b ? 1 : 0;
  const long n_neg = static_cast<long>(scores.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw InvalidArgument("roc: need at least one positive and one negative");

  // Sweep the decision threshold down through the distinct scores; every
  // run of tied scores flips together, giving one curve point per
  // threshold.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });

  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (positive[order[i]]) ++tp;
      else ++fp;
      ++i;
    }
    curve.points.emplace_back(static_cast<double>(fp) / n_neg,
                              static_cast<double>(tp) / n_pos);
  }

  double auc = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& [x0, y0] = curve.points[k - 1];
    const auto& [x1, y1] = curve.points[k];
    auc += 0.5 * (y0 + y1) * (x1 - x0);
  }
  curve.auc = auc;
  return curve;
}

SplitIndices split_dataset(const std::vector<CaseLabel>& labels,
                           double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidArgument("split_dataset: train_fraction must be in (0, 1)");
  if (labels.empty()) throw InvalidArgument("split_dataset: empty dataset");

  SplitIndices split;
  for (CaseLabel cls :
       {CaseLabel::Negative, CaseLabel::Intermediate, CaseLabel::High}) {
    std::vector<int> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(static_cast<int>(i));
    if (members.empty()) continue;
    if (members.size() < 2)
      throw InvalidArgument("split_dataset: class '" +
                            std::string(label_token(cls)) +
                            "' has fewer than 2 cases");

    Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(cls)));
    for (std::size_t i = members.size() - 1; i > 0; --i)
      std::swap(members[i], members[rng.below(i + 1)]);

    const long n = static_cast<long>(members.size());
    long n_train = std::lround(train_fraction * static_cast<double>(n));
    n_train = std::clamp(n_train, 1L, n - 1);
    split.train.insert(split.train.end(), members.begin(),
                       members.begin() + n_train);
    split.validation.insert(split.validation.end(),
                            members.begin() + n_train, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace vq
