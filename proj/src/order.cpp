#include "rorokit/order.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <queue>
#include <tuple>

namespace rorokit {

namespace {

void check_index(Index n, Index from, Index to) {
  if (from >= n || to >= n) {
    throw std::out_of_range("relation pair (" + std::to_string(from) + ", " + std::to_string(to) +
                            ") out of range for " + std::to_string(n) + " elements");
  }
}

// Row-major bit matrix; row i holds the successors of i.
class BitMatrix {
public:
  explicit BitMatrix(Index n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  void set(Index i, Index j) { bits_[i * words_ + j / 64] |= std::uint64_t{1} << (j % 64); }
  bool test(Index i, Index j) const { return (bits_[i * words_ + j / 64] >> (j % 64)) & 1U; }

  void or_row_into(Index src, Index dst) {
    auto* d = &bits_[dst * words_];
    const auto* s = &bits_[src * words_];
    for (Index w = 0; w < words_; ++w) d[w] |= s[w];
  }

  Relation to_relation() const {
    Relation out(n_);
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < n_; ++j)
        if (test(i, j)) out.insert(i, j);
    return out;
  }

private:
  Index n_;
  Index words_;
  std::vector<std::uint64_t> bits_;
};

}  // namespace

Relation::Relation(Index element_count, std::initializer_list<Pair> pairs) : n_(element_count) {
  for (const auto& [a, b] : pairs) insert(a, b);
}

Relation::Relation(Index element_count, std::span<const Pair> pairs) : n_(element_count) {
  for (const auto& [a, b] : pairs) insert(a, b);
}

bool Relation::insert(Index from, Index to) {
  check_index(n_, from, to);
  return pairs_.emplace(from, to).second;
}

std::vector<std::vector<Index>> Relation::successors() const {
  std::vector<std::vector<Index>> adj(n_);
  for (const auto& [a, b] : pairs_) adj[a].push_back(b);
  return adj;
}

bool Relation::is_subset_of(const Relation& other) const {
  return std::includes(other.pairs_.begin(), other.pairs_.end(), pairs_.begin(), pairs_.end());
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::cycle: return "cycle";
    case ViolationKind::reflexive_pair: return "reflexive-pair";
    case ViolationKind::antisymmetry_pair: return "antisymmetry-pair";
    case ViolationKind::missing_transitive_pair: return "missing-transitive-pair";
    case ViolationKind::incomparable_pair: return "incomparable-pair";
  }
  return "unknown";
}

CheckResult is_acyclic(const Relation& rel) {
  const Index n = rel.element_count();
  const auto adj = rel.successors();
  enum : std::uint8_t { white, gray, black };
  std::vector<std::uint8_t> color(n, white);
  std::vector<Index> path;
  // (node, next successor slot)
  std::vector<std::pair<Index, Index>> stack;

  for (Index root = 0; root < n; ++root) {
    if (color[root] != white) continue;
    stack.emplace_back(root, 0);
    color[root] = gray;
    path.push_back(root);
    while (!stack.empty()) {
      auto& [u, slot] = stack.back();
      if (slot == adj[u].size()) {
        color[u] = black;
        path.pop_back();
        stack.pop_back();
        continue;
      }
      const Index v = adj[u][slot++];
      if (color[v] == gray) {
        auto start = std::find(path.begin(), path.end(), v);
        std::vector<Index> witness(start, path.end());
        witness.push_back(v);
        return {false, OrderViolation{ViolationKind::cycle, std::move(witness)}};
      }
      if (color[v] == white) {
        color[v] = gray;
        path.push_back(v);
        stack.emplace_back(v, 0);
      }
    }
  }
  return {};
}

namespace detail {

Relation closure_warshall(const Relation& rel) {
  const Index n = rel.element_count();
  BitMatrix reach(n);
  for (const auto& [a, b] : rel.pairs()) reach.set(a, b);
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      if (reach.test(i, k)) reach.or_row_into(k, i);
  return reach.to_relation();
}

Relation closure_bfs(const Relation& rel) {
  const Index n = rel.element_count();
  const auto adj = rel.successors();
  Relation out(n);
  std::vector<Index> seen(n, n);  // seen[v] == source marks v reached from source
  std::vector<Index> queue;
  for (Index s = 0; s < n; ++s) {
    queue.assign(adj[s].begin(), adj[s].end());
    for (Index v : queue) seen[v] = s;
    for (Index head = 0; head < queue.size(); ++head) {
      for (Index w : adj[queue[head]]) {
        if (seen[w] != s) {
          seen[w] = s;
          queue.push_back(w);
        }
      }
    }
    std::sort(queue.begin(), queue.end());
    for (Index v : queue) out.insert(s, v);
  }
  return out;
}

}  // namespace detail

Relation transitive_closure(const Relation& rel) {
  return rel.element_count() <= kDenseClosureLimit ? detail::closure_warshall(rel) : detail::closure_bfs(rel);
}

CheckResult is_strict_partial_order(const Relation& rel) {
  for (const auto& [a, b] : rel.pairs())
    if (a == b) return {false, OrderViolation{ViolationKind::reflexive_pair, {a}}};
  for (const auto& [a, b] : rel.pairs())
    if (a < b && rel.contains(b, a)) return {false, OrderViolation{ViolationKind::antisymmetry_pair, {a, b}}};

  const auto adj = rel.successors();
  for (const auto& [a, b] : rel.pairs())
    for (Index c : adj[b])
      if (!rel.contains(a, c)) return {false, OrderViolation{ViolationKind::missing_transitive_pair, {a, b, c}}};
  return {};
}

CheckResult is_strict_total_order(const Relation& rel) {
  auto spo = is_strict_partial_order(rel);
  if (!spo) return spo;
  const Index n = rel.element_count();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (!rel.contains(i, j) && !rel.contains(j, i))
        return {false, OrderViolation{ViolationKind::incomparable_pair, {i, j}}};
  return {};
}

void validate_permutation(std::span<const Index> perm, Index n) {
  if (perm.size() != n)
    throw InvalidPermutation("expected " + std::to_string(n) + " elements, got " + std::to_string(perm.size()));
  std::vector<bool> seen(n, false);
  for (Index v : perm) {
    if (v >= n) throw InvalidPermutation("index " + std::to_string(v) + " out of range");
    if (seen[v]) throw InvalidPermutation("duplicate index " + std::to_string(v));
    seen[v] = true;
  }
}

Relation permutation_to_relation(std::span<const Index> perm) {
  validate_permutation(perm, perm.size());
  Relation out(perm.size());
  for (Index i = 0; i + 1 < perm.size(); ++i) out.insert(perm[i], perm[i + 1]);
  return out;
}

Permutation topological_linearization(const Relation& rel, TieBreak tie_break, std::span<const GeometryKey> keys) {
  const Index n = rel.element_count();
  if (tie_break == TieBreak::geometry && keys.size() != n)
    throw std::invalid_argument("geometry tie-break needs one key per element");
  if (auto acyclic = is_acyclic(rel); !acyclic)
    throw CycleError("relation is cyclic; no linear extension exists", acyclic.violation->witness);

  using Entry = std::tuple<double, double, Index>;
  auto entry = [&](Index i) -> Entry {
    if (tie_break == TieBreak::geometry) return {keys[i].first, keys[i].second, i};
    return {0.0, 0.0, i};
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  std::vector<Index> indegree(n, 0);
  for (const auto& [a, b] : rel.pairs()) ++indegree[b];
  for (Index i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(entry(i));

  const auto adj = rel.successors();
  Permutation order;
  order.reserve(n);
  while (!ready.empty()) {
    const Index u = std::get<2>(ready.top());
    ready.pop();
    order.push_back(u);
    for (Index v : adj[u])
      if (--indegree[v] == 0) ready.push(entry(v));
  }
  return order;
}

namespace {

std::size_t count_adjacent_matches(const Relation& rel, const Permutation& perm) {
  std::size_t matched = 0;
  for (Index i = 0; i + 1 < perm.size(); ++i) matched += rel.contains(perm[i], perm[i + 1]) ? 1 : 0;
  return matched;
}

double ratio(std::size_t matched, std::size_t total) {
  return total == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace

PermutationRecall best_permutation_recall(const Relation& rel) {
  const Index n = rel.element_count();
  if (n > kBruteForceLimit)
    throw SizeLimitError("exhaustive permutation search limited to " + std::to_string(kBruteForceLimit) +
                         " elements, got " + std::to_string(n));
  Permutation perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  PermutationRecall best{perm, ratio(0, rel.size()), 0};
  if (rel.empty()) return best;

  const std::size_t ceiling = std::min<std::size_t>(rel.size(), n == 0 ? 0 : n - 1);
  do {
    const auto matched = count_adjacent_matches(rel, perm);
    if (matched > best.matched) {
      best = {perm, 0.0, matched};
      if (matched == ceiling) break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.recall = ratio(best.matched, rel.size());
  return best;
}

PermutationRecall max_adjacency_cover(const Relation& rel) {
  const Index n = rel.element_count();
  if (auto acyclic = is_acyclic(rel); !acyclic)
    throw CycleError("adjacency cover requires an acyclic relation", acyclic.violation->witness);

  const auto adj = rel.successors();
  constexpr Index none = static_cast<Index>(-1);
  std::vector<Index> match_out(n, none);  // u -> v
  std::vector<Index> match_in(n, none);   // v -> u
  std::vector<Index> visit_stamp(n, none);

  // Kuhn's augmenting paths.
  auto augment = [&](auto&& self, Index u, Index stamp) -> bool {
    for (Index v : adj[u]) {
      if (visit_stamp[v] == stamp) continue;
      visit_stamp[v] = stamp;
      if (match_in[v] == none || self(self, match_in[v], stamp)) {
        match_out[u] = v;
        match_in[v] = u;
        return true;
      }
    }
    return false;
  };
  for (Index root = 0; root < n; ++root) augment(augment, root, root);

  Permutation perm;
  perm.reserve(n);
  for (Index s = 0; s < n; ++s) {
    if (match_in[s] != none) continue;
    for (Index v = s; v != none; v = match_out[v]) perm.push_back(v);
  }
  PermutationRecall out{std::move(perm), 0.0, 0};
  out.matched = count_adjacent_matches(rel, out.permutation);
  out.recall = ratio(out.matched, rel.size());
  return out;
}

void to_json(nlohmann::json& j, const Relation& rel) {
  auto pairs = nlohmann::json::array();
  for (const auto& [a, b] : rel.pairs()) pairs.push_back({a, b});
  j = nlohmann::json{{"n", rel.element_count()}, {"pairs", std::move(pairs)}};
}

void from_json(const nlohmann::json& j, Relation& rel) {
  Relation out(j.at("n").get<Index>());
  for (const auto& p : j.at("pairs")) {
    if (!p.is_array() || p.size() != 2) throw std::invalid_argument("relation pair must be [i, j]");
    out.insert(p[0].get<Index>(), p[1].get<Index>());
  }
  rel = std::move(out);
}

}  // namespace rorokit
