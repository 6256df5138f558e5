#include "forge/enumerate.hpp"

#include <limits>

#include "forge/error.hpp"

namespace forge {

namespace {

using Count = std::uint64_t;
constexpr Count kSat = std::numeric_limits<Count>::max();

Count add(Count a, Count b) { return a > kSat - b ? kSat : a + b; }
Count mul(Count a, Count b) {
  if (a == 0 || b == 0) return 0;
  return a > kSat / b ? kSat : a * b;
}

void check_bounds(const EnumerationBounds& b) {
  if (b.k < 1 || b.q < 0 || b.s < 1) throw InvalidParameter("enumeration bounds must be positive");
  if (b.k > kMaxEnumVars || b.q > kMaxEnumRank || b.s > kMaxEnumSize)
    throw ResourceError("enumeration bounds k=" + std::to_string(b.k) + " q=" + std::to_string(b.q) +
                        " s=" + std::to_string(b.s) + " exceed the supported range");
}

std::vector<Formula> atoms(const Vocabulary& vocab, int k) {
  auto pool = variable_pool(k);
  std::vector<Formula> out;
  for (const auto& r : vocab.relations()) {
    std::vector<int> idx(r.arity, 0);
    while (true) {
      std::vector<Term> ts;
      for (int i : idx) ts.push_back(var_term(pool[i]));
      out.push_back(rel_atom(r.name, ts));
      int p = r.arity - 1;
      while (p >= 0 && ++idx[p] == k) idx[p--] = 0;
      if (p < 0) break;
    }
  }
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) out.push_back(equality(var_term(pool[a]), var_term(pool[b])));
  return out;
}

}  // namespace

std::vector<std::string> variable_pool(int k) {
  std::vector<std::string> v;
  for (int i = 1; i <= k; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

std::uint64_t count_formulas(const Vocabulary& vocab, const EnumerationBounds& b) {
  check_bounds(b);
  const Count n_atoms = atoms(vocab, b.k).size();
  // c[s][r]: formulas of size exactly s and rank exactly r.
  std::vector<std::vector<Count>> c(b.s + 1, std::vector<Count>(b.q + 1, 0));
  c[1][0] = n_atoms;
  for (int s = 2; s <= b.s; ++s) {
    for (int r = 0; r <= b.q; ++r) c[s][r] = add(c[s][r], c[s - 1][r]);
    for (int a = 1; a + 1 < s; ++a) {
      int bb = s - 1 - a;
      for (int r1 = 0; r1 <= b.q; ++r1)
        for (int r2 = 0; r2 <= b.q; ++r2) {
          int r = std::max(r1, r2);
          c[s][r] = add(c[s][r], mul(2, mul(c[a][r1], c[bb][r2])));
        }
    }
    for (int r = 0; r < b.q; ++r) c[s][r + 1] = add(c[s][r + 1], mul(2 * b.k, c[s - 1][r]));
  }
  Count total = 0;
  for (int s = 1; s <= b.s; ++s)
    for (int r = 0; r <= b.q; ++r) total = add(total, c[s][r]);
  return total;
}

std::vector<Formula> enumerate_formulas(const Vocabulary& vocab, const EnumerationBounds& b, std::uint64_t cap) {
  Count total = count_formulas(vocab, b);
  if (total > cap)
    throw ResourceError("enumeration would produce " + (total == kSat ? std::string("too many") : std::to_string(total)) +
                        " formulas (cap " + std::to_string(cap) + ")");
  auto pool = variable_pool(b.k);
  // by_size[s] in emission order, with ranks alongside.
  std::vector<std::vector<Formula>> by_size(b.s + 1);
  std::vector<std::vector<int>> rank(b.s + 1);
  std::vector<Formula> out;
  out.reserve(total);
  auto emit = [&](int s, Formula f, int r) {
    by_size[s].push_back(f);
    rank[s].push_back(r);
    out.push_back(std::move(f));
  };
  for (auto& a : atoms(vocab, b.k)) emit(1, a, 0);
  for (int s = 2; s <= b.s; ++s) {
    for (std::size_t i = 0; i < by_size[s - 1].size(); ++i) emit(s, negation(by_size[s - 1][i]), rank[s - 1][i]);
    for (int op = 0; op < 2; ++op)
      for (int a = 1; a + 1 < s; ++a) {
        int bb = s - 1 - a;
        for (std::size_t i = 0; i < by_size[a].size(); ++i)
          for (std::size_t j = 0; j < by_size[bb].size(); ++j) {
            int r = std::max(rank[a][i], rank[bb][j]);
            emit(s, op == 0 ? conjunction(by_size[a][i], by_size[bb][j]) : disjunction(by_size[a][i], by_size[bb][j]), r);
          }
      }
    for (int op = 0; op < 2; ++op)
      for (const auto& v : pool)
        for (std::size_t i = 0; i < by_size[s - 1].size(); ++i) {
          if (rank[s - 1][i] >= b.q) continue;
          emit(s, op == 0 ? exists(v, by_size[s - 1][i]) : forall(v, by_size[s - 1][i]), rank[s - 1][i] + 1);
        }
  }
  return out;
}

}  // namespace forge
