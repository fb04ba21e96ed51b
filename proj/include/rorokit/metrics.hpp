#pragma once

#include <span>
#include <utility>

#include "rorokit/order.hpp"

namespace rorokit {

/// Exact ordered-pair matching counts. Precision and recall are 1 when their
/// denominators are 0; F1 is 0 when precision + recall is 0.
struct PairMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  double precision() const;
  double recall() const;
  double f1() const;

  PairMetrics& operator+=(const PairMetrics& o) {
    true_positives += o.true_positives;
    false_positives += o.false_positives;
    false_negatives += o.false_negatives;
    return *this;
  }
};

/// Throws std::invalid_argument when element counts differ.
PairMetrics pair_f1(const Relation& gold, const Relation& pred);

/// Micro average: counts are pooled before computing the ratios.
PairMetrics corpus_f1(std::span<const std::pair<Relation, Relation>> gold_pred);

}  // namespace rorokit
