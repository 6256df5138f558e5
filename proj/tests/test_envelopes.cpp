#include <doctest.h>

#include <map>
#include <random>

#include "forge/enumerate.hpp"
#include "forge/envelopes.hpp"
#include "forge/error.hpp"
#include "forge/eval.hpp"
#include "forge/games.hpp"

using namespace forge;

namespace {

Hypergraph hypergraph(int nodes, std::vector<Multiset> edges) {
  Hypergraph h;
  h.nodes = nodes;
  for (auto& a : edges) h.edges.insert(a);
  return h;
}

// Nodes 0..h-1, then one vertex per entry of `proj`; `edges` are vertex index pairs.
Envelope hand_envelope(int h, const std::vector<int>& proj, const std::vector<std::pair<int, int>>& edges) {
  Envelope e;
  e.structure = Structure(h + static_cast<int>(proj.size()), "E");
  e.structure.declare_relation("P", 2);
  for (int a = 0; a < h; ++a) {
    e.nodes.push_back(a);
    e.structure.add_tuple("P", {a, a});
  }
  for (std::size_t i = 0; i < proj.size(); ++i) e.structure.add_tuple("P", {h + static_cast<int>(i), proj[i]});
  for (auto [x, y] : edges) {
    e.structure.add_tuple("P", {h + x, h + y});
    e.structure.add_tuple("P", {h + y, h + x});
  }
  return e;
}

bool condition_passes(const EnvelopeValidation& v, const std::string& name) {
  for (const auto& c : v.conditions)
    if (c.name == name) return c.pass;
  FAIL("missing condition " << name);
  return false;
}

const Hypergraph& no_edges() {
  static const Hypergraph h = hypergraph(2, {});
  return h;
}

// Every vertex over node 0 is a k-clique by itself.
const Hypergraph& singleton_edge() {
  static const Hypergraph h = hypergraph(2, {{{0, 1}}});
  return h;
}

const Hypergraph& pair_edge() {
  static const Hypergraph h = hypergraph(2, {{{0, 1}, {1, 1}}});
  return h;
}

const Envelope& pair_good(int which) {
  static const Envelope a = generate_envelope(pair_edge(), 3, 1);
  static const Envelope b = generate_envelope(pair_edge(), 3, 2);
  return which == 0 ? a : b;
}

const Envelope& small_good(int which) {
  static const Envelope a = generate_envelope(no_edges(), 3, 11);
  static const Envelope b = generate_envelope(no_edges(), 3, 12);
  return which == 0 ? a : b;
}

const Envelope& singleton_good(int which) {
  static const Envelope a = generate_envelope(singleton_edge(), 4, 5);
  static const Envelope b = generate_envelope(singleton_edge(), 4, 6);
  return which == 0 ? a : b;
}

std::set<Tuple> random_relation(std::mt19937_64& rng, int n, int arity) {
  std::set<Tuple> r;
  int total = 1;
  for (int i = 0; i < arity; ++i) total *= n;
  for (int code = 0; code < total; ++code) {
    if (rng() % 3 != 0) continue;
    Tuple t;
    for (int c = code, i = 0; i < arity; ++i, c /= n) t.push_back(c % n);
    r.insert(t);
  }
  return r;
}

}  // namespace

TEST_CASE("multisets and orientation") {
  Multiset a{{0, 1}, {2, 3}};
  CHECK(multiset_size(a) == 4);
  CHECK(multiset_of({2, 0, 2, 2}) == a);
  CHECK(is_oriented(a));
  CHECK(oriented_set(a) == std::vector<int>{0, 2});
  CHECK(oriented_set(Multiset{{5, 4}, {1, 2}}) == std::vector<int>{1, 5});
  CHECK_FALSE(is_oriented(Multiset{{0, 2}, {1, 2}}));
  CHECK_THROWS_AS(oriented_set(Multiset{{0, 1}, {1, 1}}), InvalidParameter);
}

TEST_CASE("hypergraph and envelope text round trips") {
  auto h = parse_hypergraph("hypergraph T\nnodes 3\n# comment\nedge 0:1 1:1\nedge 2:2\n");
  CHECK(h.name == "T");
  CHECK(h.nodes == 3);
  CHECK(h.has_edge(Multiset{{0, 1}, {1, 1}}));
  CHECK(h.has_edge(Multiset{{2, 2}}));
  CHECK(h.below(2).edges.empty());
  CHECK(h.below(3).edges.size() == 2);
  CHECK(parse_hypergraph(print_hypergraph(h)).edges == h.edges);
  CHECK_THROWS(parse_hypergraph("hypergraph T\nnodes 1\n"));
  CHECK_THROWS(parse_hypergraph("hypergraph T\nnodes 2\nedge 3:1\n"));
  CHECK_THROWS(parse_hypergraph("hypergraph T\nnodes 2\nedge 0:0\n"));

  auto e = hand_envelope(2, {0, 1}, {{0, 1}});
  auto back = parse_envelope(print_envelope(e));
  CHECK(back.structure == e.structure);
  CHECK(back.nodes == e.nodes);
  const auto& g = small_good(0);
  CHECK(print_envelope(parse_envelope(print_envelope(g))) == print_envelope(g));
}

TEST_CASE("envelope conditions") {
  CHECK(validate_envelope(hand_envelope(3, {}, {})).pass);
  CHECK(validate_envelope(hand_envelope(2, {0, 0, 1}, {{0, 1}, {1, 2}})).pass);

  auto back_edge = hand_envelope(2, {0}, {});
  back_edge.structure.add_tuple("P", {0, 2});
  auto v = validate_envelope(back_edge);
  CHECK_FALSE(v.pass);
  CHECK_FALSE(condition_passes(v, "nodes-see-no-vertex"));
  CHECK(condition_passes(v, "unique-projection"));

  auto two = hand_envelope(2, {0}, {});
  two.structure.add_tuple("P", {2, 1});
  v = validate_envelope(two);
  CHECK_FALSE(condition_passes(v, "unique-projection"));
  CHECK(condition_passes(v, "nodes-see-no-vertex"));

  auto loop = hand_envelope(2, {0}, {});
  loop.structure.add_tuple("P", {2, 2});
  CHECK_FALSE(condition_passes(validate_envelope(loop), "vertex-graph"));
  auto one_way = hand_envelope(2, {0, 1}, {});
  one_way.structure.add_tuple("P", {2, 3});
  CHECK_FALSE(condition_passes(validate_envelope(one_way), "vertex-graph"));
  auto not_identity = hand_envelope(2, {}, {});
  not_identity.structure.add_tuple("P", {0, 1});
  CHECK_FALSE(condition_passes(validate_envelope(not_identity), "identity-on-nodes"));
}

TEST_CASE("cliques, plebeians and closures") {
  auto e = hand_envelope(2, {0, 1, 0, 1}, {{0, 1}, {1, 2}, {2, 3}});
  CHECK(k_cliques(e, no_edges(), 3).empty());
  for (Element x : vertices(e)) CHECK(is_plebeian(e, no_edges(), 3, x));
  CHECK(closure(e, no_edges(), 3, {2, 4}) == std::vector<Element>{2, 4});

  auto h = hypergraph(2, {{{0, 1}, {1, 1}}});
  auto cl = k_cliques(e, h, 3);
  CHECK(cl == std::vector<std::vector<Element>>{{2, 3}, {3, 4}, {4, 5}});
  CHECK(closure(e, h, 3, {2}) == std::vector<Element>{2, 3});
  CHECK(closure(e, h, 3, {0, 3}) == std::vector<Element>{0, 2, 3, 4});
  CHECK_FALSE(is_plebeian(e, h, 3, 2));
  CHECK(projections(e) == std::vector<int>{-1, -1, 0, 1, 0, 1});
  CHECK_THROWS_AS(k_cliques(e, h, 2), InvalidParameter);
  CHECK_THROWS_AS(closure(e, h, 2, {}), InvalidParameter);

  // The planted cliques {2,3} and {3,4} overlap.
  auto report = check_k_good(e, h, 3);
  CHECK(report.g0 == Verdict::Fail);
  CHECK(report.overall() == Verdict::Fail);
}

TEST_CASE("goodness failures carry witnesses") {
  auto bare = hand_envelope(2, {}, {});
  auto r = check_k_good(bare, no_edges(), 3);
  CHECK(r.g1 == Verdict::Fail);
  CHECK(r.witness.find("X={}") != std::string::npos);

  // A vertex adjacent to both members of a planted clique.
  auto h = hypergraph(3, {{{0, 1}, {1, 1}}});
  auto covered = hand_envelope(3, {0, 1, 2}, {{0, 1}, {0, 2}, {1, 2}});
  CHECK(check_k_good(covered, h, 3).g0 == Verdict::Fail);

  GoodnessBounds tiny;
  tiny.max_sets = 3;
  auto capped = check_k_good(small_good(0), no_edges(), 3, tiny);
  CHECK(capped.overall() == Verdict::Indeterminate);
}

TEST_CASE("generated envelopes pass the checker") {
  GenerationStats stats;
  auto e = generate_envelope(no_edges(), 3, 11, {}, &stats);
  CHECK(validate_envelope(e).pass);
  CHECK(stats.report.overall() == Verdict::Pass);
  CHECK(check_k_good(e, no_edges(), 3).overall() == Verdict::Pass);
  CHECK(k_cliques(e, no_edges(), 3).empty());
  CHECK(print_envelope(generate_envelope(no_edges(), 3, 11)) == print_envelope(e));
  CHECK(print_envelope(small_good(1)) != print_envelope(e));
  for (int a = 0; a < 2; ++a) CHECK(e.structure.constant("n" + std::to_string(a)) == e.nodes[a]);

  GenerationOptions none;
  none.pool = 1;
  none.retries = 0;
  CHECK_THROWS_AS(generate_envelope(no_edges(), 3, 1, none), GenerationFailure);
  CHECK_THROWS_AS(generate_envelope(no_edges(), 2, 1), InvalidParameter);
}

TEST_CASE("every hyperedge below k is the projection of a clique") {
  auto covered = [](const Envelope& e, const Hypergraph& h, int k) {
    auto proj = projections(e);
    std::set<Multiset> seen;
    for (const auto& c : k_cliques(e, h, k)) {
      std::vector<int> ps;
      for (Element x : c) ps.push_back(proj[x]);
      seen.insert(multiset_of(ps));
    }
    return seen;
  };
  for (int which = 0; which < 2; ++which) {
    CHECK(covered(pair_good(which), pair_edge(), 3) == pair_edge().edges);
    CHECK(covered(singleton_good(which), singleton_edge(), 4) == singleton_edge().edges);
  }
  CHECK(check_k_good(pair_good(0), pair_edge(), 3).overall() == Verdict::Pass);
  CHECK(validate_envelope(pair_good(1)).pass);
}

TEST_CASE("goodness is monotone in k and closures stay small") {
  for (int which = 0; which < 2; ++which) {
    const auto& e = singleton_good(which);
    CHECK(check_k_good(e, singleton_edge(), 4).overall() == Verdict::Pass);
    CHECK(check_k_good(e, singleton_edge(), 3).overall() == Verdict::Pass);
  }
  // Every vertex is an isolated k-clique; G2 needs one outside X over each node.
  auto singletons = hypergraph(2, {{{0, 1}}, {{1, 1}}});
  auto four_each = hand_envelope(2, {0, 0, 0, 0, 1, 1, 1, 1}, {});
  CHECK(check_k_good(four_each, singletons, 4).overall() == Verdict::Pass);
  CHECK(check_k_good(four_each, singletons, 3).overall() == Verdict::Pass);
  auto three_each = hand_envelope(2, {0, 0, 0, 1, 1, 1}, {});
  CHECK(check_k_good(three_each, singletons, 4).g2 == Verdict::Fail);
  CHECK(check_k_good(three_each, singletons, 3).overall() == Verdict::Pass);

  auto h = hypergraph(2, {{{0, 1}, {1, 1}}});
  auto e = hand_envelope(2, {0, 1, 0, 1, 0, 1}, {{0, 1}, {2, 3}, {4, 5}, {1, 2}});
  auto verts = vertices(e);
  for (int k = 3; k <= 4; ++k)
    for (Element a : verts)
      for (Element b : verts)
        for (Element c : verts) {
          std::vector<Element> x{a, b, c};
          x.resize(k - 1);
          CHECK(static_cast<int>(closure(e, h, k, x).size()) <= k * k);
        }
  std::mt19937_64 rng(7);
  const auto& g = singleton_good(0);
  auto gv = vertices(g);
  for (int t = 0; t < 200; ++t) {
    std::vector<Element> x;
    for (int i = 0; i < 3; ++i) x.push_back(gv[rng() % gv.size()]);
    CHECK(static_cast<int>(closure(g, singleton_edge(), 4, x).size()) <= 16);
  }
}

TEST_CASE("k-correct and k-nice maps") {
  auto h = hypergraph(2, {{{0, 1}, {1, 1}}});
  auto e = hand_envelope(2, {0, 1, 0, 1}, {{0, 1}, {1, 3}});
  auto f = hand_envelope(2, {0, 1, 0, 1}, {{2, 3}});
  CHECK(is_k_correct({}, e, f, h, 3));
  CHECK(is_k_nice({}, e, f, h, 3));
  CHECK(is_k_correct({{0, 0}, {1, 1}}, e, f, h, 3));
  CHECK_FALSE(is_k_correct({{0, 1}}, e, f, h, 3));
  // Vertex 4 is plebeian in e, vertex 4 is a clique member in f.
  CHECK_FALSE(is_k_correct({{4, 4}}, e, f, h, 3));
  CHECK(is_k_correct({{4, 2}}, e, f, h, 3));
  CHECK(is_k_correct({{2, 4}}, e, f, h, 3));
  CHECK(is_k_nice({{2, 4}}, e, f, h, 3));
  CHECK(is_k_nice({{2, 4}, {3, 5}}, e, f, h, 3));
  CHECK_FALSE(is_k_correct({{2, 4}, {3, 2}}, e, f, h, 3));
  // 3 is forced onto 5, but 3 and 5 are adjacent in e while 5 and 3 are not in f.
  CHECK(is_k_correct({{2, 4}, {5, 3}}, e, f, h, 3));
  CHECK_FALSE(is_k_nice({{2, 4}, {5, 3}}, e, f, h, 3));
  CHECK_THROWS_AS(is_k_correct({}, e, hand_envelope(3, {}, {}), h, 3), InvalidParameter);
}

TEST_CASE("Duplicator answers every pebble move inside k-nice maps") {
  const auto& e = pair_good(0);
  const auto& f = pair_good(1);
  const Hypergraph& h = pair_edge();
  const int k = 3;
  MapChecker mc(e, f, h, k);
  std::mt19937_64 rng(99);
  const int ne = e.structure.size(), nf = f.structure.size();
  auto answer = [&](const ElementMap& eta, Element x) -> std::optional<Element> {
    for (Element y = 0; y < nf; ++y) {
      auto next = eta;
      next.push_back({x, y});
      if (mc.nice(next)) return y;
    }
    return std::nullopt;
  };
  int positions = 0;
  for (int t = 0; t < 40; ++t) {
    ElementMap eta;
    bool ok = true;
    for (int i = 0; i < k - 1 && ok; ++i) {
      Element x = static_cast<Element>(rng() % ne);
      auto y = answer(eta, x);
      ok = y.has_value();
      if (ok) eta.push_back({x, *y});
    }
    REQUIRE(ok);
    ++positions;
    for (int s = 0; s < 5; ++s) CHECK(answer(eta, static_cast<Element>(rng() % ne)).has_value());
  }
  CHECK(positions == 40);
  CHECK(pebble_equiv(e.structure, f.structure, 3));
}

TEST_CASE("envelopes of the same hypergraph agree on sentences") {
  const auto& e = small_good(0);
  const auto& f = small_good(1);
  CHECK(pebble_equiv(e.structure, f.structure, 3));
  Vocabulary v;
  v.add_relation("P", 2);
  auto all = enumerate_formulas(v, {3, 2, 5});
  int sentences = 0;
  for (const auto& phi : all) {
    if (!free_var_order(phi).empty()) continue;
    ++sentences;
    CHECK(evaluate_pointwise(e.structure, phi) == evaluate_pointwise(f.structure, phi));
  }
  CHECK(sentences > 10);
}

TEST_CASE("tables and projected relations") {
  auto e = hand_envelope(2, {0, 1, 0}, {{0, 1}});
  CHECK(zero_table_of(e, {4}).text() == "not P(v1,v1)");
  CHECK(zero_table_of(e, {0}).text() == "P(v1,v1)");
  CHECK(zero_table_of(e, {2, 3}).text() == "not v1 = v2 and not P(v1,v1) and P(v1,v2) and P(v2,v1) and not P(v2,v2)");
  CHECK(zero_table_of(e, {}).text() == "true");
  auto lone = k_table_of(e, 3, {4});
  CHECK(lone.rfind(zero_table_of(e, {4}).text() + " | ", 0) == 0);
  CHECK(lone.find("2:") == std::string::npos);
  CHECK(k_table_of(e, 3, {2}).find("2:") != std::string::npos);
  CHECK(k_table_of(e, 3, {2}) != lone);

  const auto& g = small_good(0);
  const auto& g2 = small_good(1);
  Vocabulary voc = g.structure.vocabulary();
  // m = 0: plain evaluation.
  for (const char* text : {"exists x. (P(x,n0) and not x = n0)", "forall x. forall y. (not P(x,y) or P(y,x))",
                           "exists x. exists y. (P(x,n0) and P(y,n1) and P(x,y))"}) {
    PhiMinusQuery q{parse_formula(text, voc), {}, {}, ""};
    CHECK(phi_minus(g, 3, q, {}, {}) == evaluate_pointwise(g.structure, q.phi));
  }
  PhiMinusQuery both{parse_formula("exists z. (P(z,u) and P(x,z) and P(y,z))", voc), {"u"}, {"x", "y"}, ""};
  for (int a = 0; a < 2; ++a)
    for (int b1 = 0; b1 < 2; ++b1)
      for (int b2 = 0; b2 < 2; ++b2) CHECK(phi_minus(g, 3, both, {a}, {b1, b2}) == phi_minus(g2, 3, both, {a}, {b1, b2}));
  CHECK(phi_minus(g, 3, both, {0}, {0, 1}, 4) == std::nullopt);
  CHECK_THROWS_AS(phi_minus(g, 3, both, {}, {0, 1}), InvalidParameter);
}

TEST_CASE("truth at vertex tuples is fixed by the table and the projection") {
  const auto& e = small_good(0);
  const int k = 3;
  Vocabulary voc = e.structure.vocabulary();
  std::vector<PhiMinusQuery> queries = {
      {parse_formula("exists z. (P(x,z) and P(y,z) and not P(z,u))", voc), {"u"}, {"x", "y"}, ""},
      {parse_formula("P(x,y) or exists z. (P(x,z) and P(z,y) and P(z,u))", voc), {"u"}, {"x", "y"}, ""},
      {parse_formula("forall z. (not P(z,u) or z = u or P(x,z) or P(y,z))", voc), {"u"}, {"x", "y"}, ""},
  };
  auto proj = projections(e);
  auto verts = vertices(e);
  std::mt19937_64 rng(17);
  int checked = 0;
  for (auto& q : queries)
    for (int a = 0; a < 2; ++a) {
      std::map<std::pair<std::string, std::vector<int>>, bool> cache;
      for (int t = 0; t < 40; ++t) {
        std::vector<Element> x{verts[rng() % verts.size()], verts[rng() % verts.size()]};
        std::vector<int> b{proj[x[0]], proj[x[1]]};
        auto table = k_table_of(e, k, x);
        auto key = std::make_pair(table, b);
        if (!cache.count(key)) {
          q.table = table;
          auto r = phi_minus(e, k, q, {a}, b);
          REQUIRE(r.has_value());
          cache[key] = *r;
        }
        Assignment g{{q.node_vars[0], e.nodes[a]}, {"x", x[0]}, {"y", x[1]}};
        CHECK(evaluate_pointwise(e.structure, q.phi, g) == cache[key]);
        ++checked;
      }
    }
  CHECK(checked == 240);
}

TEST_CASE("irreflexive decomposition") {
  auto one = irreflexive_decomposition({{0}, {2}}, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].pattern == std::vector<int>{0});
  CHECK(one[0].tuples == std::set<Tuple>{{0}, {2}});

  auto two = irreflexive_decomposition({{0, 0}, {0, 1}}, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].pattern == std::vector<int>{0, 0});
  CHECK(two[0].tuples == std::set<Tuple>{{0}});
  CHECK(two[1].pattern == std::vector<int>{0, 1});
  CHECK(two[1].tuples == std::set<Tuple>{{0, 1}});

  CHECK(irreflexive_decomposition({}, 3).size() == 5);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 60; ++t) {
    int n = 1 + static_cast<int>(rng() % 4), r = 1 + static_cast<int>(rng() % 3);
    auto rel = random_relation(rng, n, r);
    auto parts = irreflexive_decomposition(rel, r);
    CHECK(recompose(parts) == rel);
    for (const auto& p : parts)
      for (const auto& tu : p.tuples) CHECK(std::set<Element>(tu.begin(), tu.end()).size() == tu.size());
  }
}

TEST_CASE("oriented encoding of relations") {
  CHECK(encode_oriented({3}, 2) == Multiset{{3, 2}});
  CHECK(encode_oriented({1, 0}, 3) == Multiset{{1, 1}, {0, 2}});
  CHECK(encode_oriented({1, 0}, 5) == Multiset{{1, 1}, {0, 4}});
  CHECK(oriented_set(encode_oriented({2, 0, 1}, 8)) == std::vector<int>{2, 0, 1});
  CHECK_THROWS_AS(encode_oriented({0, 1}, 2), InvalidParameter);

  Structure m(3);
  CHECK(build_hypergraph(m, {}).edges.empty());
  CHECK(build_hypergraph(m, {LevelRelation{2, 1, {}}, LevelRelation{3, 2, {}}}).edges.empty());
  auto h = build_hypergraph(m, {LevelRelation{2, 1, {{0}}}});
  CHECK(h.nodes == 3);
  CHECK(h.edges == std::set<Multiset>{{{0, 2}}});
  CHECK_THROWS_AS(build_hypergraph(m, {LevelRelation{2, 2, {{0, 1}}}}), InvalidParameter);
  CHECK(build_hypergraph(m, {LevelRelation{5, 1, {{0}}}}).edges.empty());

  std::mt19937_64 rng(3);
  for (int t = 0; t < 40; ++t) {
    int n = 2 + static_cast<int>(rng() % 3), r = 1 + static_cast<int>(rng() % 2);
    int level = std::max(2, r * (r + 1) / 2) + static_cast<int>(rng() % 2);
    if (level > n) continue;
    std::set<Tuple> rel;
    for (const auto& tu : random_relation(rng, n, r))
      if (std::set<Element>(tu.begin(), tu.end()).size() == tu.size()) rel.insert(tu);
    auto hg = build_hypergraph(Structure(n), {LevelRelation{level, r, rel}});
    CHECK(hg.edges.size() == rel.size());
    for (const auto& a : hg.edges) CHECK(multiset_size(a) == level);
  }
}
