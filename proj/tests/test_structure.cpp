#include <doctest.h>

#include <algorithm>
#include <random>

#include "forge/error.hpp"
#include "forge/structure.hpp"

using namespace forge;

namespace {

int out_degree(const Structure& s, Element x) {
  int d = 0;
  for (const auto& t : s.relation("E").tuples()) d += t[0] == x;
  return d;
}

int in_degree(const Structure& s, Element x) {
  int d = 0;
  for (const auto& t : s.relation("E").tuples()) d += t[1] == x;
  return d;
}

Structure digraph(int n, std::vector<std::pair<int, int>> edges) {
  Structure s(n);
  s.declare_relation("E", 2);
  for (auto [a, b] : edges) s.add_tuple("E", {a, b});
  return s;
}

}  // namespace

TEST_CASE("segment") {
  CHECK_THROWS_AS(new_segment(0), InvalidParameter);
  Structure s1 = new_segment(1);
  CHECK(s1.size() == 1);
  CHECK(s1.relation("E").size() == 0);

  Structure s3 = new_segment(3);
  CHECK(s3.relation("E").sorted() == std::vector<Tuple>{{0, 1}, {1, 2}});
  CHECK(s3.label(0) == "d1");
  CHECK(s3.find_label("d3") == 2);

  for (int j = 1; j <= 9; ++j) {
    Structure s = new_segment(j);
    CHECK(s.size() == j);
    CHECK(static_cast<int>(s.relation("E").size()) == j - 1);
    int sources = 0;
    for (Element x = 0; x < j; ++x) {
      CHECK(out_degree(s, x) <= 1);
      CHECK(in_degree(s, x) <= 1);
      sources += in_degree(s, x) == 0;
    }
    CHECK(sources == 1);
  }
}

TEST_CASE("induced substructure") {
  Structure s3 = new_segment(3);
  CHECK(induced_substructure(s3, {0, 1, 2}) == s3);
  CHECK(induced_substructure(s3, {0, 1}).relation("E").sorted() == std::vector<Tuple>{{0, 1}});
  Structure ends = induced_substructure(s3, {0, 2});
  CHECK(ends.relation("E").size() == 0);
  CHECK(ends.label(1) == "d3");
  CHECK_THROWS_AS(induced_substructure(s3, {}), InvalidParameter);
  CHECK_THROWS_AS(induced_substructure(s3, {5}), InvalidParameter);
}

TEST_CASE("replace with clique") {
  // a -> v -> b
  Structure f = digraph(3, {{0, 1}, {1, 2}});
  CHECK(brute_force_isomorphic(replace_with_clique(f, 1, 1), f));

  Structure g = replace_with_clique(f, 1, 2);
  // a=0, b=1, v1=2, v2=3
  CHECK(g.size() == 4);
  CHECK(g.relation("E").sorted() == std::vector<Tuple>{{0, 2}, {0, 3}, {2, 1}, {2, 3}, {3, 1}, {3, 2}});

  Structure iso = digraph(1, {});
  Structure tri = replace_with_clique(iso, 0, 3);
  CHECK(tri.size() == 3);
  CHECK(tri.relation("E").size() == 6);
  CHECK_THROWS_AS(replace_with_clique(f, 7, 2), InvalidParameter);

  std::mt19937 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 1 + static_cast<int>(rng() % 6);
    Structure r(n);
    r.declare_relation("E", 2);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (rng() % 3 == 0) r.add_tuple("E", {a, b});
    Element v = static_cast<Element>(rng() % n);
    CHECK(brute_force_isomorphic(replace_with_clique(r, v, 1), r));
  }
}

TEST_CASE("isomorphism check") {
  Structure a = digraph(3, {{0, 1}, {1, 2}});
  Structure b = digraph(3, {{2, 0}, {0, 1}});
  Structure c = digraph(3, {{0, 1}, {2, 1}});
  CHECK(brute_force_isomorphic(a, b));
  CHECK_FALSE(brute_force_isomorphic(a, c));
}

TEST_CASE("clique attachment and growth") {
  IndexedStructure g = indexed_segment(2);
  Element d = 0;
  attach_clique(g, d, 0, "empty");
  CHECK(g.structure.size() == 2);
  CHECK(g.index.has("empty"));

  const Artifact& c = attach_clique(g, d, 2, "c2");
  auto m = c.members;
  REQUIRE(m.size() == 2);
  CHECK(g.structure.holds("E", {m[0], m[1]}));
  CHECK(g.structure.holds("E", {m[1], m[0]}));
  CHECK(g.structure.holds("E", {m[0], d}));
  CHECK(g.structure.holds("E", {m[1], d}));

  attach_clique(g, d, 3, "c3");
  CHECK(g.index.owner(m[0])->tag == "c2");
  CHECK(g.index.owner(g.index.at("c3").members[0])->tag == "c3");
  CHECK(audit_index(g).empty());

  IndexedStructure before = g;
  grow_clique(g, "c2", 0);
  CHECK(g.structure == before.structure);

  grow_clique(g, "c2", 3);
  const Artifact& grown = g.index.at("c2");
  CHECK(grown.members.size() == 5);
  for (Element x : grown.members) {
    CHECK(g.structure.holds("E", {x, d}));
    for (Element y : grown.members)
      if (x != y) CHECK(g.structure.holds("E", {x, y}));
  }
  CHECK(audit_index(g).empty());
  // Untouched part is unchanged.
  std::vector<Element> old(before.structure.size());
  for (Element e = 0; e < before.structure.size(); ++e) old[e] = e;
  CHECK(induced_substructure(g.structure, old) == before.structure);

  CHECK_THROWS_AS(grow_clique(g, "nope", 1), InvalidParameter);

  IndexedStructure once = indexed_segment(1);
  attach_clique(once, 0, 2, "c");
  IndexedStructure twice = once;
  grow_clique(once, "c", 3);
  grow_clique(twice, "c", 1);
  grow_clique(twice, "c", 2);
  CHECK(brute_force_isomorphic(once.structure, twice.structure));
}

TEST_CASE("clique inventory") {
  IndexedStructure g = indexed_segment(2);
  CHECK(clique_inventory(g, 0, 100).empty());
  attach_clique(g, 0, 7, "a");
  attach_clique(g, 0, 3, "b");
  attach_clique(g, 1, 2, "c");
  CHECK(clique_inventory(g, 0, 5) == std::vector<int>{3});
  CHECK(clique_inventory(g, 0, 100) == std::vector<int>{3, 7});
}

TEST_CASE("audit catches a broken clique") {
  IndexedStructure g = indexed_segment(1);
  const Artifact& c = attach_clique(g, 0, 3, "c");
  Element a = c.members[0], b = c.members[1];
  Structure s(g.structure.size());
  s.declare_relation("E", 2);
  for (const auto& t : g.structure.relation("E").tuples())
    if (!(t[0] == a && t[1] == b)) s.add_tuple("E", t);
  g.structure = s;
  CHECK_FALSE(audit_index(g).empty());
}

TEST_CASE("text format round trip") {
  Structure s = new_segment(3);
  s.declare_relation("S", 1);
  s.add_tuple("S", {2});
  s.declare_relation("F", 0);
  s.add_tuple("F", {});
  s.set_constant("c", 1);
  std::string text = print_structure(s);
  CHECK(text ==
        "structure segment3\nuniverse 3\nlabel 0 d1\nlabel 1 d2\nlabel 2 d3\nconst c 1\n"
        "rel E/2\n0 1\n1 2\nrel F/0\n()\nrel S/1\n2\n");
  Structure back = parse_structure(text);
  CHECK(back == s);
  CHECK(print_structure(back) == text);

  Structure commented = parse_structure("# c\nstructure x # name\nuniverse 2\nrel E/2\n1 0\n\n0 1\n");
  CHECK(print_structure(commented) == "structure x\nuniverse 2\nrel E/2\n0 1\n1 0\n");

  CHECK_THROWS_AS(parse_structure("universe 2\n"), ParseError);
  CHECK_THROWS_AS(parse_structure("structure x\nuniverse 2\nrel E/2\n0 5\n"), ParseError);
  CHECK_THROWS_AS(parse_structure("structure x\nuniverse 2\nrel E/2\n0\n"), ParseError);
  CHECK_THROWS_AS(parse_structure("structure x\nuniverse 2\n0 1\n"), ParseError);
  CHECK_THROWS_AS(parse_structure("structure x\nuniverse 2\nlabel 0 a\nlabel 1 a\n"), ParseError);
}
