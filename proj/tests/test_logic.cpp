#include <doctest.h>

#include <queue>
#include <random>

#include "forge/error.hpp"
#include "forge/eval.hpp"
#include "forge/formula.hpp"

using namespace forge;

namespace {

const char* kTC = "lfp P(x,y). (E(x,y) or exists z. (E(x,z) and P(z,y))) (u,v)";

Vocabulary graph_vocab() {
  Vocabulary v;
  v.add_relation("E", 2);
  return v;
}

Vocabulary labeled_vocab(const Structure& s) {
  Vocabulary v = s.vocabulary();
  for (Element e = 0; e < s.size(); ++e)
    if (!s.label(e).empty()) v.add_constant(s.label(e));
  return v;
}

// dist[a][b] = length of the shortest nonempty path, or -1.
std::vector<std::vector<int>> path_lengths(const Structure& s) {
  const int n = s.size();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (int a = 0; a < n; ++a) {
    std::queue<int> q;
    for (int b = 0; b < n; ++b)
      if (s.holds("E", {a, b})) {
        dist[a][b] = 1;
        q.push(b);
      }
    while (!q.empty()) {
      int x = q.front();
      q.pop();
      for (int b = 0; b < n; ++b)
        if (s.holds("E", {x, b}) && dist[a][b] < 0) {
          dist[a][b] = dist[a][x] + 1;
          q.push(b);
        }
    }
  }
  return dist;
}

Structure random_digraph(std::mt19937& rng, int n, int percent) {
  Structure s(n);
  s.declare_relation("E", 2);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (static_cast<int>(rng() % 100) < percent) s.add_tuple("E", {a, b});
  return s;
}

}  // namespace

TEST_CASE("parse and print") {
  Vocabulary v = graph_vocab();
  Formula e = parse_formula("E(x,y)", v);
  CHECK(e->kind == NodeKind::Rel);
  CHECK(dump_ast(e) == "(rel E x y)");

  Formula tc = parse_formula(kTC, v);
  CHECK(tc->kind == NodeKind::Lfp);
  CHECK(free_vars(tc) == std::set<std::string>{"u", "v"});
  CHECK(dump_ast(tc) == "(lfp P (x y) (or (rel E x y) (exists z (and (rel E x z) (pred P z y)))) (u v))");
  CHECK(dump_ast(parse_formula(to_string(tc), v)) == dump_ast(tc));

  CHECK_THROWS_AS(parse_formula("lfp P(x). not P(x) (u)", v), PositivityError);
  CHECK_THROWS_AS(parse_formula("E(x)", v), ArityError);
  CHECK_THROWS_AS(parse_formula("lfp P(x). P(x,x) (u)", v), ArityError);
  CHECK_THROWS_AS(parse_formula("(E(x,y) and", v), ParseError);
  CHECK_THROWS_AS(parse_formula("F(x)", v), ParseError);
  try {
    parse_formula("E(x,y) E", v);
    FAIL("expected a syntax error");
  } catch (const ParseError& err) {
    CHECK(err.position() == 7);
  }

  Formula c = parse_formula("count>=2 x. # comment\n E(x,y)", v);
  CHECK(dump_ast(c) == "(count>= 2 x (rel E x y))");
  Formula prec = parse_formula("not E(x,y) and E(y,x) or x = y", v);
  CHECK(dump_ast(prec) == "(or (and (not (rel E x y)) (rel E y x)) (= x y))");
  Formula q = parse_formula("exists x. E(x,y) and E(y,x)", v);
  CHECK(dump_ast(q) == "(exists x (and (rel E x y) (rel E y x)))");
  CHECK(dump_ast(parse_formula(to_string(q), v)) == dump_ast(q));
  Formula nested = parse_formula("(exists x. E(x,y)) and not x = y", v);
  CHECK(dump_ast(parse_formula(to_string(nested), v)) == dump_ast(nested));
}

TEST_CASE("positivity") {
  Vocabulary v = graph_vocab();
  Vocabulary vp = v;
  vp.add_relation("P", 2);
  vp.add_relation("Q", 1);
  CHECK(check_positive(parse_formula("P(x,y) or E(x,y)", vp), "P"));
  CHECK(check_positive(parse_formula("not not Q(x)", vp), "Q"));
  CHECK_FALSE(check_positive(parse_formula("not (E(x,y) and P(x,y))", vp), "P"));
  CHECK(check_positive(parse_formula("count>=2 y. P(x,y)", vp), "P"));
}

TEST_CASE("variable counts") {
  Vocabulary v = graph_vocab();
  Formula e = parse_formula("E(x,y)", v);
  CHECK(count_vars(e) == 2);
  CHECK(free_vars(e) == std::set<std::string>{"x", "y"});
  CHECK(count_vars(parse_formula("exists y. E(x,y) and exists y. E(y,x)", v)) == 2);
  CHECK(count_vars(parse_formula("(exists y. E(x,y)) and exists y. E(y,x)", v)) == 2);
  // Literal count of distinct names in the transitive-closure formula: x, y, z, u, v.
  CHECK(count_vars(parse_formula(kTC, v)) == 5);
}

TEST_CASE("evaluate on segments") {
  Structure s3 = new_segment(3);
  Vocabulary v = labeled_vocab(s3);
  CHECK(evaluate(s3, parse_formula("E(d1,d2)", v)));
  CHECK_FALSE(evaluate(s3, parse_formula("E(d1,d3)", v)));
  CHECK_FALSE(evaluate(s3, parse_formula("count>=2 x. E(x,d2)", v)));
  CHECK(evaluate(s3, parse_formula("count>=1 x. E(x,d2)", v)));

  Structure s4 = new_segment(4);
  Formula tc = parse_formula(kTC, graph_vocab());
  CHECK(evaluate(s4, tc, {{"u", 0}, {"v", 3}}));
  CHECK_FALSE(evaluate(s4, tc, {{"u", 3}, {"v", 0}}));
  CHECK_THROWS_AS(evaluate(s4, tc, {{"u", 0}}), EvaluationError);
  CHECK_THROWS_AS(evaluate(s4, pred_atom("P", {var_term("x")}), {{"x", 0}}), EvaluationError);
}

TEST_CASE("transitive closure against reachability") {
  Formula tc = parse_formula(kTC, graph_vocab());
  std::mt19937 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    Structure s = random_digraph(rng, 1 + static_cast<int>(rng() % 7), 25);
    auto dist = path_lengths(s);
    Table t = evaluate_table(s, tc);
    int longest = 0;
    for (int a = 0; a < s.size(); ++a)
      for (int b = 0; b < s.size(); ++b) {
        CHECK(t.at({{"u", a}, {"v", b}}) == (dist[a][b] > 0));
        CHECK(evaluate_pointwise(s, tc, {{"u", a}, {"v", b}}) == (dist[a][b] > 0));
        longest = std::max(longest, dist[a][b]);
      }
    CHECK(inductive_depth(s, tc) == longest);
  }
}

TEST_CASE("stage traces") {
  Vocabulary v = graph_vocab();
  Structure s4 = new_segment(4);
  StageTrace fals = lfp_stages(s4, truth(false), "P", {"x"});
  CHECK(fals.depth == 0);
  CHECK(fals.stages.size() == 1);
  CHECK(fals.stages[0].empty());

  Formula tc = parse_formula(kTC, v);
  StageTrace t = lfp_stages(s4, tc);
  CHECK(t.depth == 3);
  CHECK(t.stages.front().empty());
  auto dist = path_lengths(s4);
  for (int i = 0; i <= t.depth; ++i) {
    std::set<Tuple> expect;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (dist[a][b] > 0 && dist[a][b] <= i) expect.insert({a, b});
    CHECK(t.stages[i] == expect);
  }

  StageTrace c = lfp_stages(s4, parse_formula("exists z. E(x,z)", v), "P", {"x"});
  CHECK(c.depth == 1);
  CHECK(c.stages[1] == std::set<Tuple>{{0}, {1}, {2}});

  Vocabulary vp = v;
  vp.add_relation("P", 1);
  CHECK_THROWS_AS(lfp_stages(s4, parse_formula("not P(x)", vp), "P", {"x"}), PositivityError);
}

TEST_CASE("segment depth") {
  Formula tc = parse_formula(kTC, graph_vocab());
  for (int j = 2; j <= 8; ++j) CHECK(inductive_depth(new_segment(j), tc) == j - 1);
  Formula constant = parse_formula("lfp P(x). exists y. E(x,y) (u)", graph_vocab());
  std::mt19937 rng(3);
  for (int i = 0; i < 10; ++i) CHECK(inductive_depth(random_digraph(rng, 5, 30), constant) <= 1);
}

TEST_CASE("parameters and nesting") {
  Vocabulary v = graph_vocab();
  // Reachability from a fixed source w, as a unary induction with parameter w.
  Formula reach = parse_formula("lfp P(x). (E(w,x) or exists y. (P(y) and E(y,x))) (u)", v);
  CHECK(free_vars(reach) == std::set<std::string>{"u", "w"});
  std::mt19937 rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    Structure s = random_digraph(rng, 6, 22);
    auto dist = path_lengths(s);
    int longest = 0;
    for (int w = 0; w < 6; ++w) {
      StageTrace t = lfp_stages(s, reach, {{"w", w}});
      int far = 0;
      for (int u = 0; u < 6; ++u) {
        CHECK(evaluate(s, reach, {{"u", u}, {"w", w}}) == (dist[w][u] > 0));
        CHECK(t.stages.back().count({u}) == (dist[w][u] > 0 ? 1u : 0u));
        far = std::max(far, dist[w][u]);
      }
      CHECK(t.depth == far);
      longest = std::max(longest, far);
    }
    CHECK(inductive_depth(s, reach) == longest);
  }
  // Nested: vertices from which every successor reaches a sink.
  Formula nested = parse_formula(
      "forall y. (not E(u,y) or lfp Q(x). ((not exists z. E(x,z)) or exists z. (E(x,z) and Q(z))) (y))", v);
  for (int trial = 0; trial < 10; ++trial) {
    Structure s = random_digraph(rng, 5, 25);
    for (int u = 0; u < 5; ++u)
      CHECK(evaluate(s, nested, {{"u", u}}) == evaluate_pointwise(s, nested, {{"u", u}}));
  }
}
