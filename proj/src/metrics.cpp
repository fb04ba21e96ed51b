#include "rorokit/metrics.hpp"

#include <stdexcept>
#include <string>

namespace rorokit {

double PairMetrics::precision() const {
  const auto denom = true_positives + false_positives;
  return denom == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(denom);
}

double PairMetrics::recall() const {
  const auto denom = true_positives + false_negatives;
  return denom == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(denom);
}

double PairMetrics::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

PairMetrics pair_f1(const Relation& gold, const Relation& pred) {
  if (gold.element_count() != pred.element_count())
    throw std::invalid_argument("pair_f1: gold has " + std::to_string(gold.element_count()) + " elements, prediction " +
                                std::to_string(pred.element_count()));
  PairMetrics m;
  for (const auto& p : pred.pairs()) {
    if (gold.contains(p)) ++m.true_positives;
    else ++m.false_positives;
  }
  m.false_negatives = gold.size() - m.true_positives;
  return m;
}

PairMetrics corpus_f1(std::span<const std::pair<Relation, Relation>> gold_pred) {
  PairMetrics total;
  for (const auto& [gold, pred] : gold_pred) total += pair_f1(gold, pred);
  return total;
}

}  // namespace rorokit
