#include <doctest.h>

#include <random>

#include "forge/enumerate.hpp"
#include "forge/error.hpp"
#include "forge/games.hpp"

using namespace forge;

namespace {

Structure graph(int n, std::vector<std::pair<int, int>> edges, bool both = false) {
  Structure s(n);
  s.declare_relation("E", 2);
  for (auto [a, b] : edges) {
    s.add_tuple("E", {a, b});
    if (both) s.add_tuple("E", {b, a});
  }
  return s;
}

Structure clique(int n) {
  std::vector<std::pair<int, int>> e;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) e.push_back({a, b});
  return graph(n, e);
}

Structure random_graph(std::mt19937& rng, int n, int percent) {
  Structure s(n);
  s.declare_relation("E", 2);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (static_cast<int>(rng() % 100) < percent) s.add_tuple("E", {a, b});
  return s;
}

bool sentence_agreement(const Structure& a, const Structure& b, int k, int q) {
  return !distinguishing_formula(a, b, k, q).formula.has_value();
}

}  // namespace

TEST_CASE("partial isomorphism predicate") {
  auto a = graph(3, {{0, 1}});
  auto b = graph(3, {{2, 0}});
  CHECK(is_partial_isomorphism(a, b, {{0, 2}, {1, 0}}));
  CHECK_FALSE(is_partial_isomorphism(a, b, {{0, 0}, {1, 2}}));
  CHECK_FALSE(is_partial_isomorphism(a, b, {{0, 1}, {2, 1}}));
  CHECK(is_partial_isomorphism(a, b, std::vector<std::pair<Element, Element>>{}));
  CHECK_THROWS_AS(is_partial_isomorphism(a, b, PartialMap{{{1, 0, 0}, {1, 1, 1}}}), InvalidParameter);
}

TEST_CASE("pebble game on small examples") {
  auto seg = new_segment(4);
  for (int k = 1; k <= 4; ++k) CHECK(pebble_equiv(seg, seg, k));
  // A single vertex replaced by cliques of sizes 2 and 3.
  CHECK(pebble_equiv(clique(2), clique(3), 2));
  CHECK_FALSE(pebble_equiv(clique(2), clique(3), 3));
  auto r = pebble_game(clique(2), clique(3), 3);
  CHECK_FALSE(r.duplicator);
  CHECK_FALSE(r.witness.empty());
  CHECK_THROWS_AS(pebble_equiv(seg, seg, 0), InvalidParameter);
  Structure other(2);
  other.declare_relation("F", 2);
  CHECK_THROWS_AS(pebble_equiv(seg, other, 2), InvalidParameter);
}

TEST_CASE("initial placements") {
  auto seg = new_segment(4);
  PartialMap ends{{{1, 0, 3}}};
  CHECK_FALSE(pebble_equiv(seg, seg, 2, ends));
  CHECK(pebble_equiv(seg, seg, 2, PartialMap{{{1, 2, 2}}}));
  // Not a partial isomorphism: Spoiler has already won.
  CHECK_FALSE(pebble_equiv(seg, seg, 3, PartialMap{{{1, 0, 0}, {2, 1, 2}}}));
  CHECK(pebble_equiv(seg, seg, 2, PartialMap{{{1, 0, 0}, {2, 1, 1}}}));
  CHECK_THROWS_AS(pebble_equiv(seg, seg, 1, PartialMap{{{1, 0, 0}, {2, 1, 1}}}), InvalidParameter);
}

TEST_CASE("fast pebble solver agrees with the survivor-set reference") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    int na = 1 + static_cast<int>(rng() % 4), nb = 1 + static_cast<int>(rng() % 4);
    auto a = random_graph(rng, na, 40);
    auto b = trial % 3 == 0 ? a : random_graph(rng, nb, 40);
    for (int k = 1; k <= 3; ++k) {
      CAPTURE(trial);
      CAPTURE(k);
      CHECK(pebble_equiv(a, b, k) == pebble_equiv_reference(a, b, k));
      Element x = static_cast<Element>(rng() % a.size()), y = static_cast<Element>(rng() % b.size());
      PartialMap init{{{1, x, y}}};
      CHECK(pebble_equiv(a, b, k, init) == pebble_equiv_reference(a, b, k, init));
    }
  }
}

TEST_CASE("pebble equivalence is an equivalence relation and monotone in k") {
  std::mt19937 rng(5);
  std::vector<Structure> corpus;
  for (int i = 0; i < 14; ++i) corpus.push_back(random_graph(rng, 2 + static_cast<int>(rng() % 3), 35));
  corpus.push_back(corpus[0]);
  for (int k = 1; k <= 3; ++k) {
    std::vector<std::vector<bool>> eq(corpus.size(), std::vector<bool>(corpus.size()));
    for (std::size_t i = 0; i < corpus.size(); ++i)
      for (std::size_t j = 0; j < corpus.size(); ++j) eq[i][j] = pebble_equiv(corpus[i], corpus[j], k);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      CHECK(eq[i][i]);
      for (std::size_t j = 0; j < corpus.size(); ++j) {
        CHECK(eq[i][j] == eq[j][i]);
        if (k > 1 && eq[i][j]) CHECK(pebble_equiv(corpus[i], corpus[j], k - 1));
        for (std::size_t l = 0; l < corpus.size(); ++l)
          if (eq[i][j] && eq[j][l]) CHECK(eq[i][l]);
      }
    }
  }
}

TEST_CASE("counting game examples") {
  auto two_edges = graph(4, {{0, 1}, {2, 3}}, true);
  auto one_edge = graph(4, {{0, 1}}, true);
  CHECK(counting_equiv(two_edges, two_edges, 2));
  CHECK_FALSE(counting_equiv(two_edges, one_edge, 2));
  CHECK_FALSE(counting_equiv(clique(2), clique(3), 1));
  CHECK(pebble_equiv(clique(2), clique(3), 1));
  auto r = counting_game(clique(2), clique(3), 1);
  CHECK_FALSE(r.witness.empty());
}

TEST_CASE("counting game refines the pebble game and matches the two-part move simulation") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    int na = 1 + static_cast<int>(rng() % 3), nb = 1 + static_cast<int>(rng() % 3);
    auto a = random_graph(rng, na, 45);
    auto b = random_graph(rng, nb, 45);
    for (int k = 1; k <= 2; ++k) {
      bool c = counting_equiv(a, b, k);
      CHECK(c == counting_equiv_simulation(a, b, k));
      if (c) CHECK(pebble_equiv(a, b, k));
    }
  }
}

TEST_CASE("distinguishing formulas") {
  auto k2 = clique(2), k3 = clique(3);
  CHECK_FALSE(distinguishing_formula(k3, k3, 3, 3).formula);
  auto d = distinguishing_formula(k2, k3, 3, 3);
  REQUIRE(d.formula);
  CHECK(evaluate(k2, *d.formula) != evaluate(k3, *d.formula));
  CHECK(count_vars(*d.formula) <= 3);
  CHECK(quantifier_rank(*d.formula) <= 3);
  CHECK_FALSE(distinguishing_formula(k2, k3, 2, 3).formula);

  // The type-based fallback alone.
  DistinguishOptions no_enum;
  no_enum.enumeration_cap = 0;
  auto e = distinguishing_formula(k2, k3, 3, 3, {}, {}, no_enum);
  REQUIRE(e.formula);
  CHECK(e.method == "characteristic");
  CHECK(evaluate(k2, *e.formula));
  CHECK_FALSE(evaluate(k3, *e.formula));
}

TEST_CASE("characteristic formulas hold exactly on equivalent structures") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    auto a = random_graph(rng, 1 + static_cast<int>(rng() % 3), 40);
    auto b = trial % 4 == 0 ? a : random_graph(rng, 1 + static_cast<int>(rng() % 3), 40);
    for (int q = 0; q <= 2; ++q) {
      auto chi = characteristic_formula(a, 2, q);
      CHECK(evaluate(a, chi));
      CHECK(evaluate(b, chi) == sentence_agreement(a, b, 2, q));
    }
  }
}

TEST_CASE("game agreement implies agreement of one-free-variable formulas") {
  std::mt19937 rng(23);
  auto fs = enumerate_formulas(new_segment(1).vocabulary(), {2, 2, 5});
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_graph(rng, 3, 40);
    auto b = trial % 2 ? a : random_graph(rng, 3, 40);
    for (Element x = 0; x < 3; ++x)
      for (Element y = 0; y < 3; ++y) {
        if (!pebble_equiv(a, b, 2, PartialMap{{{1, x, y}}})) continue;
        Evaluator ea(a), eb(b);
        for (const auto& f : fs) {
          if (free_vars(f).count("x2")) continue;
          Assignment ga{{"x1", x}}, gb{{"x1", y}};
          CHECK(ea.evaluate(f, ga) == eb.evaluate(f, gb));
        }
        CHECK_FALSE(distinguishing_formula(a, b, 2, 2, {x}, {y}).formula);
      }
  }
}
