#include <doctest.h>

#include <json.hpp>

#include "oracles.hpp"
#include "rorokit/order.hpp"

using namespace rorokit;

TEST_CASE("is_acyclic") {
  CHECK(is_acyclic(Relation(3, {{0, 1}, {0, 2}})).ok);
  CHECK(is_acyclic(Relation(5)).ok);

  auto cyc = is_acyclic(Relation(3, {{0, 1}, {1, 2}, {2, 0}}));
  REQUIRE_FALSE(cyc.ok);
  CHECK(cyc.violation->kind == ViolationKind::cycle);
  CHECK(cyc.violation->witness == std::vector<Index>{0, 1, 2, 0});

  auto self = is_acyclic(Relation(2, {{1, 1}}));
  REQUIRE_FALSE(self.ok);
  CHECK(self.violation->witness == std::vector<Index>{1, 1});
}

TEST_CASE("cycle witness is a closed walk inside the relation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + trial % 7;
    auto rel = oracle::to_relation(n, oracle::random_pairs(rng, n, 0.3, true));
    auto res = is_acyclic(rel);
    if (res.ok) {
      CHECK_NOTHROW(topological_linearization(rel));
      continue;
    }
    const auto& w = res.violation->witness;
    REQUIRE(w.size() >= 2);
    CHECK(w.front() == w.back());
    for (std::size_t k = 0; k + 1 < w.size(); ++k) CHECK(rel.contains(w[k], w[k + 1]));
  }
}

TEST_CASE("relation rejects out-of-range pairs") {
  Relation r(2);
  CHECK_THROWS_AS(r.insert(0, 2), std::out_of_range);
  CHECK(r.insert(0, 1));
  CHECK_FALSE(r.insert(0, 1));
  CHECK(r.size() == 1);
}

TEST_CASE("transitive_closure examples") {
  CHECK(transitive_closure(Relation(3, {{0, 1}, {1, 2}})) == Relation(3, {{0, 1}, {1, 2}, {0, 2}}));
  CHECK(transitive_closure(Relation(3, {{0, 1}, {0, 2}})) == Relation(3, {{0, 1}, {0, 2}}));
  CHECK(transitive_closure(Relation(4)).empty());
  CHECK(transitive_closure(Relation(2, {{0, 1}, {1, 0}})) == Relation(2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
}

TEST_CASE("closure matches the composition fixed point on random relations") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 1 + trial % 9;
    const auto pairs = oracle::random_pairs(rng, n, 0.25, true);
    const auto rel = oracle::to_relation(n, pairs);
    const auto expected = oracle::to_relation(n, oracle::composition_fixed_point(pairs));
    CHECK(transitive_closure(rel) == expected);
    CHECK(detail::closure_bfs(rel) == expected);
  }
}

TEST_CASE("closure of N=6 relation with 10 pairs") {
  std::mt19937_64 rng(6);
  oracle::PairSet pairs;
  std::uniform_int_distribution<Index> pick(0, 5);
  while (pairs.size() < 10) pairs.emplace(pick(rng), pick(rng));
  CHECK(transitive_closure(oracle::to_relation(6, pairs)) == oracle::to_relation(6, oracle::composition_fixed_point(pairs)));
}

TEST_CASE("closure properties: idempotent, extensive, minimal") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    const Index n = 1 + trial % 12;
    const auto rel = oracle::to_relation(n, oracle::random_pairs(rng, n, 0.2, true));
    const auto closed = transitive_closure(rel);
    CHECK(transitive_closure(closed) == closed);
    CHECK(rel.is_subset_of(closed));
    if (n > 7) continue;
    // Removing any pair that is not in rel must break transitivity.
    for (const auto& p : closed.pairs()) {
      if (rel.contains(p)) continue;
      oracle::PairSet smaller(closed.pairs().begin(), closed.pairs().end());
      smaller.erase(p);
      CHECK_FALSE(oracle::is_transitive(smaller));
    }
  }
}

TEST_CASE("closure of an acyclic relation is a strict partial order (Lemma 1 and Theorem 2)") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 1 + trial % 12;
    const auto closed = transitive_closure(oracle::to_relation(n, oracle::random_dag(rng, n, 0.3)));
    CHECK(is_strict_partial_order(closed).ok);
    for (const auto& [a, b] : closed.pairs()) CHECK_FALSE(closed.contains(b, a));
  }
}

TEST_CASE("large relations use the BFS closure") {
  const Index n = kDenseClosureLimit + 3;
  Relation chain(n);
  for (Index i = 0; i + 1 < 50; ++i) chain.insert(i, i + 1);
  const auto closed = transitive_closure(chain);
  CHECK(closed.size() == 50 * 49 / 2);
  CHECK(closed.contains(0, 49));
}

TEST_CASE("is_strict_partial_order violations") {
  auto refl = is_strict_partial_order(Relation(1, {{0, 0}}));
  REQUIRE_FALSE(refl.ok);
  CHECK(refl.violation->kind == ViolationKind::reflexive_pair);
  CHECK(refl.violation->witness == std::vector<Index>{0});

  auto anti = is_strict_partial_order(Relation(2, {{0, 1}, {1, 0}}));
  REQUIRE_FALSE(anti.ok);
  CHECK(anti.violation->kind == ViolationKind::antisymmetry_pair);
  CHECK(anti.violation->witness == std::vector<Index>{0, 1});

  auto trans = is_strict_partial_order(Relation(3, {{0, 1}, {1, 2}}));
  REQUIRE_FALSE(trans.ok);
  CHECK(trans.violation->kind == ViolationKind::missing_transitive_pair);
  CHECK(trans.violation->witness == std::vector<Index>{0, 1, 2});
}

TEST_CASE("is_strict_total_order") {
  CHECK(is_strict_total_order(transitive_closure(Relation(3, {{0, 1}, {1, 2}}))).ok);
  auto partial = is_strict_total_order(Relation(3, {{0, 1}, {0, 2}}));
  REQUIRE_FALSE(partial.ok);
  CHECK(partial.violation->kind == ViolationKind::incomparable_pair);
  CHECK(partial.violation->witness == std::vector<Index>{1, 2});
  CHECK(is_strict_total_order(Relation(1)).ok);
}

TEST_CASE("permutation_to_relation") {
  const std::vector<Index> p1{2, 0, 1};
  CHECK(permutation_to_relation(p1) == Relation(3, {{2, 0}, {0, 1}}));
  const std::vector<Index> p2{0};
  CHECK(permutation_to_relation(p2).empty());
  const std::vector<Index> p3{0, 1, 2, 3};
  CHECK(permutation_to_relation(p3) == Relation(4, {{0, 1}, {1, 2}, {2, 3}}));

  const std::vector<Index> dup{0, 0, 1};
  CHECK_THROWS_AS(permutation_to_relation(dup), InvalidPermutation);
  const std::vector<Index> range{0, 3, 1};
  CHECK_THROWS_AS(permutation_to_relation(range), InvalidPermutation);
}

TEST_CASE("topological_linearization") {
  CHECK(topological_linearization(Relation(3, {{0, 1}, {0, 2}})) == Permutation{0, 1, 2});
  CHECK(topological_linearization(Relation(3)) == Permutation{0, 1, 2});
  try {
    topological_linearization(Relation(3, {{0, 1}, {1, 2}, {2, 0}}));
    FAIL("expected a cycle error");
  } catch (const CycleError& e) {
    CHECK(e.witness() == std::vector<Index>{0, 1, 2, 0});
  }

  // Geometry: element 2 sits above element 1.
  const std::vector<GeometryKey> keys{{0, 0}, {50, 0}, {10, 0}};
  CHECK(topological_linearization(Relation(3, {{0, 1}, {0, 2}}), TieBreak::geometry, keys) == Permutation{0, 2, 1});
}

TEST_CASE("linearization respects every pair of an acyclic relation") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 10;
    const auto rel = oracle::to_relation(n, oracle::random_dag(rng, n, 0.35));
    const auto perm = topological_linearization(rel);
    REQUIRE(perm.size() == n);
    std::vector<Index> pos(n);
    for (Index i = 0; i < n; ++i) pos[perm[i]] = i;
    for (const auto& [a, b] : rel.pairs()) CHECK(pos[a] < pos[b]);
  }
  Relation chain(5, {{3, 1}, {1, 4}, {4, 0}, {0, 2}});
  CHECK(permutation_to_relation(topological_linearization(chain)).is_subset_of(transitive_closure(chain)));
}

TEST_CASE("best_permutation_recall examples") {
  auto star = best_permutation_recall(Relation(3, {{0, 1}, {0, 2}}));
  CHECK(star.recall == doctest::Approx(0.5));
  auto chain = best_permutation_recall(Relation(3, {{0, 1}, {1, 2}}));
  CHECK(chain.recall == 1.0);
  CHECK(chain.permutation == Permutation{0, 1, 2});
  auto grid = best_permutation_recall(Relation(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}));
  CHECK(grid.recall == doctest::Approx(0.5));
  CHECK(grid.matched == 2);

  auto empty = best_permutation_recall(Relation(4));
  CHECK(empty.recall == 1.0);
  CHECK(empty.permutation == Permutation{0, 1, 2, 3});
  CHECK_THROWS_AS(best_permutation_recall(Relation(10)), SizeLimitError);
}

TEST_CASE("best_permutation_recall agrees with brute force and the matching route") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 8;
    const auto pairs = oracle::random_dag(rng, n, 0.4);
    const auto rel = oracle::to_relation(n, pairs);
    const auto best = best_permutation_recall(rel);
    const auto cover = max_adjacency_cover(rel);
    const auto expected = oracle::brute_force_adjacency(n, pairs);
    CHECK(best.matched == expected);
    CHECK(cover.matched == expected);
    CHECK(cover.recall == doctest::Approx(best.recall));
    validate_permutation(cover.permutation, n);
    if (pairs.size() > n - 1) CHECK(best.recall <= static_cast<double>(n - 1) / pairs.size() + 1e-12);
    // Recall 1 exactly when a linear extension's adjacency carries every pair.
    CHECK((best.recall == 1.0) == (expected == pairs.size()));
  }
}

TEST_CASE("relation json form") {
  Relation r(3, {{2, 0}, {0, 1}});
  nlohmann::json j = r;
  CHECK(j.dump() == R"({"n":3,"pairs":[[0,1],[2,0]]})");
  CHECK(j.get<Relation>() == r);
  CHECK_THROWS(nlohmann::json::parse(R"({"n":2,"pairs":[[0,2]]})").get<Relation>());
}
