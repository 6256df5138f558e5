#include <doctest.h>

#include <random>
#include <set>

#include "forge/enumerate.hpp"
#include "forge/error.hpp"
#include "forge/eval.hpp"

using namespace forge;

namespace {

Vocabulary vocab_of(std::initializer_list<std::pair<const char*, int>> rels) {
  Vocabulary v;
  for (auto [name, arity] : rels) v.add_relation(name, arity);
  return v;
}

// Second implementation: formulas as strings, size exactly s, rank at most q.
std::vector<std::string> naive(const Vocabulary& vocab, int k, int q, int s) {
  std::vector<std::string> out;
  if (s == 1) {
    for (const auto& r : vocab.relations()) {
      int total = 1;
      for (int i = 0; i < r.arity; ++i) total *= k;
      for (int code = 0; code < total; ++code) {
        std::string t = r.name + "(";
        int c = code;
        std::vector<int> digits(r.arity);
        for (int i = r.arity - 1; i >= 0; --i) {
          digits[i] = c % k;
          c /= k;
        }
        for (int i = 0; i < r.arity; ++i) t += (i ? "," : "") + std::string("x") + std::to_string(digits[i] + 1);
        out.push_back(t + ")");
      }
    }
    for (int a = 1; a <= k; ++a)
      for (int b = 1; b <= k; ++b) out.push_back("x" + std::to_string(a) + "=x" + std::to_string(b));
    return out;
  }
  for (const auto& f : naive(vocab, k, q, s - 1)) out.push_back("~" + f);
  for (int a = 1; a < s - 1; ++a)
    for (const auto& f : naive(vocab, k, q, a))
      for (const auto& g : naive(vocab, k, q, s - 1 - a)) {
        out.push_back("(" + f + "&" + g + ")");
        out.push_back("(" + f + "|" + g + ")");
      }
  if (q > 0)
    for (const auto& f : naive(vocab, k, q - 1, s - 1))
      for (int v = 1; v <= k; ++v) {
        out.push_back("E" + std::to_string(v) + "." + f);
        out.push_back("A" + std::to_string(v) + "." + f);
      }
  return out;
}

Structure random_structure(std::mt19937& rng, const Vocabulary& vocab, int n) {
  Structure s(n);
  for (const auto& r : vocab.relations()) {
    s.declare_relation(r.name, r.arity);
    std::vector<int> t(r.arity, 0);
    while (true) {
      if (rng() % 2) s.add_tuple(r.name, t);
      int p = r.arity - 1;
      while (p >= 0 && ++t[p] == n) t[p--] = 0;
      if (p < 0) break;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("enumeration base case over one unary relation") {
  auto vocab = vocab_of({{"R", 1}});
  auto fs = enumerate_formulas(vocab, {1, 0, 2});
  std::set<std::string> dumps;
  for (const auto& f : fs) dumps.insert(dump_ast(f));
  CHECK(dumps.count(dump_ast(parse_formula("R(x1)", vocab))));
  CHECK(dumps.count(dump_ast(parse_formula("not R(x1)", vocab))));
  CHECK(dumps.count(dump_ast(parse_formula("x1 = x1", vocab))));
  CHECK(fs.size() == 4);
}

TEST_CASE("enumeration count agrees with an independent recount") {
  for (auto vocab : {vocab_of({{"E", 2}}), vocab_of({{"R", 1}, {"E", 2}}), vocab_of({{"S", 0}, {"R", 1}})})
    for (int k = 1; k <= 3; ++k)
      for (int q = 0; q <= 3; ++q)
        for (int s = 1; s <= 3; ++s) {
          std::size_t expected = 0;
          for (int t = 1; t <= s; ++t) expected += naive(vocab, k, q, t).size();
          EnumerationBounds b{k, q, s};
          CHECK(count_formulas(vocab, b) == expected);
          auto fs = enumerate_formulas(vocab, b);
          CHECK(fs.size() == expected);
          std::set<std::string> dumps;
          for (const auto& f : fs) {
            dumps.insert(dump_ast(f));
            CHECK(quantifier_rank(f) <= q);
            CHECK(count_vars(f) <= k);
            CHECK(static_cast<int>(ast_size(f)) <= s);
            CHECK(is_first_order(f));
          }
          CHECK(dumps.size() == fs.size());
        }
}

TEST_CASE("enumeration is deterministic and refuses large bounds") {
  auto vocab = vocab_of({{"E", 2}});
  auto a = enumerate_formulas(vocab, {2, 2, 5});
  auto b = enumerate_formulas(vocab, {2, 2, 5});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(dump_ast(a[i]) == dump_ast(b[i]));
  CHECK_THROWS_AS(enumerate_formulas(vocab, {kMaxEnumVars + 1, 1, 3}), ResourceError);
  CHECK_THROWS_AS(enumerate_formulas(vocab, {3, 3, 12}), ResourceError);
  CHECK_THROWS_AS(enumerate_formulas(vocab, {2, 2, 5}, 10), ResourceError);
}

TEST_CASE("negation duality and count>=1 against exists on enumerated formulas") {
  auto vocab = vocab_of({{"E", 2}, {"R", 1}});
  auto fs = enumerate_formulas(vocab, {2, 2, 4});
  std::mt19937 rng(7);
  for (int n = 1; n <= 4; ++n) {
    auto m = random_structure(rng, vocab, n);
    Evaluator ev(m);
    for (std::size_t idx = 0; idx < fs.size(); idx += 3) {
      const auto& f = fs[idx];
      for (Element a = 0; a < n; ++a)
        for (Element b = 0; b < n; ++b) {
          Assignment g{{"x1", a}, {"x2", b}};
          bool v = ev.evaluate(f, g);
          CHECK(ev.evaluate(negation(f), g) == !v);
          CHECK(ev.evaluate(count_at_least(1, "x1", f), g) == ev.evaluate(exists("x1", f), g));
          CHECK(evaluate_pointwise(m, f, g) == v);
        }
    }
  }
}
