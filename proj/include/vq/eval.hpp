#pragma once

// Stratified dataset splitting, one-vs-rest confusion metrics, and ROC/AUC
// with the intermediate and high classes grouped as positive.

#include <cstdint>
#include <utility>
#include <vector>

#include "vq/phantom.hpp"

namespace vq {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

// One-vs-rest counts for `positive` against the rest.
ConfusionCounts confusion(const std::vector<CaseLabel>& predicted,
                          const std::vector<CaseLabel>& actual,
                          CaseLabel positive);

struct ClassMetrics {
  double sensitivity = 0.0;  // tp / (tp + fn)
  double specificity = 0.0;  // tn / (tn + fp)
  double ppv = 0.0;          // tp / (tp + fp)
  double npv = 0.0;          // tn / (tn + fn)
};

// Zero-denominator ratios come back as quiet NaN, never 0.
ClassMetrics metrics(const ConfusionCounts& counts);
ClassMetrics metrics(const std::vector<CaseLabel>& predicted,
                     const std::vector<CaseLabel>& actual, CaseLabel positive);

struct RocCurve {
  // (false-positive rate, true-positive rate), from (0,0) to (1,1),
  // one point per distinct score threshold.
  std::vector<std::pair<double, double>> points;
  double auc = 0.0;  // trapezoidal area; ties get half credit
};

RocCurve roc(const std::vector<double>& scores,
             const std::vector<bool>& positive);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> validation;
};

// Stratified split: every class is shuffled and cut independently at
// train_fraction (rounded to nearest, at least one case per side).
// Deterministic under seed.
SplitIndices split_dataset(const std::vector<CaseLabel>& labels,
                           double train_fraction, std::uint64_t seed);

}  // namespace vq
