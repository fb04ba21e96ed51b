#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rorokit {

using Index = std::size_t;
using Pair = std::pair<Index, Index>;
using Permutation = std::vector<Index>;

/// Thrown when an operation needs an acyclic relation and got a cycle.
class CycleError : public std::runtime_error {
public:
  CycleError(const std::string& what, std::vector<Index> witness)
      : std::runtime_error(what), witness_(std::move(witness)) {}
  const std::vector<Index>& witness() const { return witness_; }

private:
  std::vector<Index> witness_;
};

class InvalidPermutation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class SizeLimitError : public std::length_error {
public:
  using std::length_error::length_error;
};

/// A binary relation over the elements {0, ..., element_count - 1}.
///
/// Pairs are kept in a sorted set, so iteration order is lexicographic and
/// duplicates collapse. Construction validates index ranges.
class Relation {
public:
  Relation() = default;
  explicit Relation(Index element_count) : n_(element_count) {}
  Relation(Index element_count, std::initializer_list<Pair> pairs);
  Relation(Index element_count, std::span<const Pair> pairs);

  Index element_count() const { return n_; }
  const std::set<Pair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  bool contains(Index from, Index to) const { return pairs_.count({from, to}) != 0; }
  bool contains(const Pair& p) const { return pairs_.count(p) != 0; }

  /// Returns false when the pair was already present.
  bool insert(Index from, Index to);
  bool erase(Index from, Index to) { return pairs_.erase({from, to}) != 0; }

  /// Outgoing adjacency lists, each sorted ascending.
  std::vector<std::vector<Index>> successors() const;

  bool is_subset_of(const Relation& other) const;

  friend bool operator==(const Relation&, const Relation&) = default;

private:
  Index n_ = 0;
  std::set<Pair> pairs_;
};

enum class ViolationKind {
  cycle,
  reflexive_pair,
  antisymmetry_pair,
  missing_transitive_pair,
  incomparable_pair,
};

std::string to_string(ViolationKind kind);

struct OrderViolation {
  ViolationKind kind;
  std::vector<Index> witness;
};

struct CheckResult {
  bool ok = true;
  std::optional<OrderViolation> violation;
  explicit operator bool() const { return ok; }
};

/// Acyclicity test. On failure the witness is a closed walk s1..sk,s1.
CheckResult is_acyclic(const Relation& rel);

/// Smallest transitive superset. Dense bit-matrix Warshall up to
/// kDenseClosureLimit elements, per-source BFS above it.
Relation transitive_closure(const Relation& rel);
inline constexpr Index kDenseClosureLimit = 2048;

namespace detail {
Relation closure_warshall(const Relation& rel);
Relation closure_bfs(const Relation& rel);
}  // namespace detail

/// Irreflexive, antisymmetric and transitive. The first violation in
/// (row, column) scan order is reported.
CheckResult is_strict_partial_order(const Relation& rel);

/// Strict partial order in which every two distinct elements are comparable.
CheckResult is_strict_total_order(const Relation& rel);

/// Adjacent pairs (perm[i], perm[i+1]) of a permutation of [0, perm.size()).
Relation permutation_to_relation(std::span<const Index> perm);

/// Checks that perm is a permutation of [0, n); throws InvalidPermutation.
void validate_permutation(std::span<const Index> perm, Index n);

enum class TieBreak { index_order, geometry };

/// A linear extension of an acyclic relation (Kahn's algorithm). Among
/// available elements the smallest key wins; with TieBreak::index_order the
/// key is the element index, with TieBreak::geometry it is `keys[i]`
/// (typically (top, left)) with the index as a secondary key. Throws
/// CycleError on cyclic input.
using GeometryKey = std::pair<double, double>;
Permutation topological_linearization(const Relation& rel, TieBreak tie_break = TieBreak::index_order,
                                      std::span<const GeometryKey> keys = {});

struct PermutationRecall {
  Permutation permutation;
  double recall = 1.0;
  std::size_t matched = 0;
};

inline constexpr Index kBruteForceLimit = 9;

/// Exhaustive search over all N! permutations for the one whose adjacency
/// covers the most pairs of rel. Refuses N > kBruteForceLimit.
PermutationRecall best_permutation_recall(const Relation& rel);

/// Same optimum for acyclic relations, computed as a maximum bipartite
/// matching between out-copies and in-copies of the elements (a matching in a
/// DAG is a set of vertex-disjoint paths, which concatenate into a
/// permutation). No size limit.
PermutationRecall max_adjacency_cover(const Relation& rel);

void to_json(nlohmann::json& j, const Relation& rel);
void from_json(const nlohmann::json& j, Relation& rel);

}  // namespace rorokit
