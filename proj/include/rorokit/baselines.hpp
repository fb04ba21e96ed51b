#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rorokit/layout.hpp"
#include "rorokit/metrics.hpp"
#include "rorokit/rop.hpp"

namespace rorokit::eval {

/// Row-major order of the segments. Segments are sorted by vertical center;
/// a new band starts when the next center is more than half the median
/// segment height below the previous one. Bands read top to bottom, each
/// band left to right by x0.
Permutation heuristic_reading_order(const Document& doc);

/// Reading order pairs implied by a word sequence. At word level these are
/// the adjacent words; at segment level segments are ordered by the first
/// appearance of any of their words and adjacent segments are paired.
/// Throws InvalidPermutation if the sequence is not a permutation of the
/// document's words.
Relation sequence_to_relation(std::span<const Index> word_sequence, const Document& doc, rop::Level level);

/// Word sequence reading segments in the given order, words in segment order.
std::vector<Index> expand_segment_order(std::span<const Index> segment_order, const Document& doc);

/// Gold relation at a level: the segment isdr or its word-level derivation.
Relation gold_relation(const Document& doc, rop::Level level);

/// Best achievable adjacency recall for a permutation (brute force up to
/// nine elements, bipartite matching above).
PermutationRecall permutation_ceiling(const Relation& gold);

enum class SystemKind { model, heuristic, permutation_oracle };
std::string to_string(SystemKind kind);

struct System {
  std::string name;
  SystemKind kind = SystemKind::heuristic;
  const rop::RopModel* model = nullptr;  // required for SystemKind::model
};

struct SystemScore {
  std::string name;
  SystemKind kind = SystemKind::heuristic;
  PairMetrics metrics;
  std::size_t docs = 0;
  std::vector<std::string> skipped;  // over the model's limits, scored as empty predictions
};

struct BenchmarkOptions {
  rop::Level level = rop::Level::segment;
  std::optional<Split> split;  // every document when empty
  unsigned threads = 1;
};

struct BenchmarkReport {
  std::vector<SystemScore> systems;
  double mean_best_recall = 1.0;  // permutation ceiling averaged over documents
  std::size_t ceiling_docs = 0;
};

/// Number of worker threads requested through ROROKIT_THREADS (default 1).
unsigned threads_from_env();

/// Micro pair-F1 of every system on the selected documents. Documents are
/// processed independently; results are merged in corpus order.
BenchmarkReport benchmark_report(const Corpus& corpus, std::span<const System> systems,
                                 const BenchmarkOptions& options = {});

/// {"systems": [{"name", "precision", "recall", "f1", "docs"}], "ceiling": {"mean_best_recall"}}
nlohmann::json to_json(const BenchmarkReport& report);
std::string format_table(const BenchmarkReport& report);

}  // namespace rorokit::eval
