#include <algorithm>
#include <map>
#include <set>

#include "atomic.hpp"
#include "forge/enumerate.hpp"
#include "forge/games.hpp"

namespace forge {

namespace detail {

std::vector<Formula> atom_list(const Structure& s, const std::vector<Term>& terms) {
  std::vector<Formula> out;
  const int total = static_cast<int>(terms.size());
  for (int i = 0; i < total; ++i)
    for (int j = i + 1; j < total; ++j) out.push_back(equality(terms[i], terms[j]));
  for (const auto& [name, rel] : s.relations()) {
    if (rel.arity() == 0) {
      out.push_back(rel_atom(name, {}));
      continue;
    }
    if (total == 0) continue;
    std::vector<int> idx(rel.arity(), 0);
    while (true) {
      std::vector<Term> ts;
      for (int i : idx) ts.push_back(terms[i]);
      out.push_back(rel_atom(name, ts));
      int p = rel.arity() - 1;
      while (p >= 0 && ++idx[p] == total) idx[p--] = 0;
      if (p < 0) break;
    }
  }
  return out;
}

}  // namespace detail

using namespace detail;

namespace {

// Rank-r types of positions (partial assignments of x1..xk) over one or two structures,
// interned jointly so equal ids mean agreement on all rank-r formulas over x1..xk.
class TypeTable {
 public:
  TypeTable(std::vector<const Structure*> structs, int k, int q, std::size_t cap) : k_(k), q_(q) {
    for (const Structure* s : structs) sides_.emplace_back(*s);
    std::size_t total = 0;
    for (const auto& s : sides_) {
      std::size_t p = 1;
      for (int i = 0; i < k; ++i) {
        p *= static_cast<std::size_t>(s.n + 1);
        if (p > cap) throw ResourceError("type table exceeds the cap");
      }
      positions_.push_back(p);
      total += p;
    }
    if (total * static_cast<std::size_t>(q + 1) > cap) throw ResourceError("type table exceeds the cap");
    build();
  }

  int k() const { return k_; }
  const Side& side(int s) const { return sides_[s]; }
  int type(int r, int s, std::size_t pos) const { return types_[r][s][pos]; }
  std::size_t positions(int s) const { return positions_[s]; }

  std::size_t encode(int s, const std::vector<Element>& assign) const {
    std::size_t idx = 0, w = 1;
    for (int i = 0; i < k_; ++i) {
      idx += static_cast<std::size_t>(assign[i] + 1) * w;
      w *= static_cast<std::size_t>(sides_[s].n + 1);
    }
    return idx;
  }

  std::vector<Element> decode(int s, std::size_t idx) const {
    std::vector<Element> a(k_);
    for (int i = 0; i < k_; ++i) {
      a[i] = static_cast<Element>(idx % (sides_[s].n + 1)) - 1;
      idx /= static_cast<std::size_t>(sides_[s].n + 1);
    }
    return a;
  }

  std::size_t moved(int s, std::size_t pos, int i, Element e) const {
    std::size_t w = 1;
    for (int j = 0; j < i; ++j) w *= static_cast<std::size_t>(sides_[s].n + 1);
    std::size_t cur = (pos / w) % static_cast<std::size_t>(sides_[s].n + 1);
    return pos - cur * w + static_cast<std::size_t>(e + 1) * w;
  }

  // Sorted distinct rank-(r-1) types reachable by moving x_i.
  std::vector<int> children(int r, int s, std::size_t pos, int i) const {
    std::vector<int> out;
    for (Element e = 0; e < sides_[s].n; ++e) out.push_back(types_[r - 1][s][moved(s, pos, i, e)]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<Term> terms(const std::vector<Element>& assign) const {
    std::vector<Term> out;
    for (int i = 0; i < k_; ++i)
      if (assign[i] >= 0) out.push_back(var_term("x" + std::to_string(i + 1)));
    for (const auto& [name, e] : sides_[0].s->constants()) out.push_back(const_term(name));
    return out;
  }

  void atomic_bits(int s, const std::vector<Element>& assign, std::vector<std::uint8_t>& bits) const {
    std::vector<Element> elems;
    for (Element e : assign)
      if (e >= 0) elems.push_back(e);
    sides_[s].atomic_type(elems.data(), static_cast<int>(elems.size()), bits);
  }

 private:
  void build() {
    const int ns = static_cast<int>(sides_.size());
    types_.assign(q_ + 1, std::vector<std::vector<int>>(ns));
    Interner<std::uint8_t> base;
    std::vector<std::uint8_t> bits, key;
    for (int s = 0; s < ns; ++s) {
      types_[0][s].resize(positions_[s]);
      for (std::size_t pos = 0; pos < positions_[s]; ++pos) {
        auto assign = decode(s, pos);
        atomic_bits(s, assign, bits);
        key.clear();
        for (Element e : assign) key.push_back(e >= 0);
        key.insert(key.end(), bits.begin(), bits.end());
        types_[0][s][pos] = base(key);
      }
    }
    std::vector<int> ikey;
    for (int r = 1; r <= q_; ++r) {
      Interner<int> level;
      for (int s = 0; s < ns; ++s) {
        types_[r][s].resize(positions_[s]);
        for (std::size_t pos = 0; pos < positions_[s]; ++pos) {
          ikey.assign(1, types_[r - 1][s][pos]);
          for (int i = 0; i < k_; ++i) {
            ikey.push_back(-1);
            auto c = children(r, s, pos, i);
            ikey.insert(ikey.end(), c.begin(), c.end());
          }
          types_[r][s][pos] = level(ikey);
        }
      }
    }
  }

  int k_, q_;
  std::vector<Side> sides_;
  std::vector<std::size_t> positions_;
  std::vector<std::vector<std::vector<int>>> types_;
};

std::vector<Element> padded(const std::vector<Element>& init, int k) {
  std::vector<Element> a(k, -1);
  std::copy(init.begin(), init.end(), a.begin());
  return a;
}

void check_init(const Structure& m, const std::vector<Element>& init, int k) {
  if (static_cast<int>(init.size()) > k) throw InvalidParameter("more initial elements than variables");
  for (Element e : init)
    if (!m.in_universe(e)) throw InvalidParameter("initial element " + std::to_string(e) + " outside the universe");
}

class Separator {
 public:
  explicit Separator(const TypeTable& t) : t_(t) {}

  // Formula of rank <= r over x1..xk true at pa in A and false at pb in B.
  Formula separate(int r, std::size_t pa, std::size_t pb) {
    while (r > 0 && t_.type(r - 1, 0, pa) != t_.type(r - 1, 1, pb)) --r;
    auto key = std::make_tuple(r, t_.type(r, 0, pa), t_.type(r, 1, pb));
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    Formula f = r == 0 ? literal(pa, pb) : quantified(r, pa, pb);
    memo_.emplace(key, f);
    return f;
  }

 private:
  Formula literal(std::size_t pa, std::size_t pb) {
    auto xa = t_.decode(0, pa), xb = t_.decode(1, pb);
    for (int i = 0; i < t_.k(); ++i)
      if ((xa[i] >= 0) != (xb[i] >= 0)) throw Error("positions with different domains");
    std::vector<std::uint8_t> ba, bb;
    t_.atomic_bits(0, xa, ba);
    t_.atomic_bits(1, xb, bb);
    auto atoms = atom_list(*t_.side(0).s, t_.terms(xa));
    for (std::size_t i = 0; i < ba.size(); ++i)
      if (ba[i] != bb[i]) return ba[i] ? atoms[i] : negation(atoms[i]);
    throw Error("positions agree on every atom");
  }

  Formula quantified(int r, std::size_t pa, std::size_t pb) {
    const int na = t_.side(0).n, nb = t_.side(1).n;
    for (int i = 0; i < t_.k(); ++i) {
      const std::string x = "x" + std::to_string(i + 1);
      auto ca = t_.children(r, 0, pa, i), cb = t_.children(r, 1, pb, i);
      for (Element a = 0; a < na; ++a) {
        std::size_t qa = t_.moved(0, pa, i, a);
        if (std::binary_search(cb.begin(), cb.end(), t_.type(r - 1, 0, qa))) continue;
        std::vector<Formula> parts;
        std::set<int> seen;
        for (Element b = 0; b < nb; ++b) {
          std::size_t qb = t_.moved(1, pb, i, b);
          if (seen.insert(t_.type(r - 1, 1, qb)).second) parts.push_back(separate(r - 1, qa, qb));
        }
        return exists(x, conjunction(parts));
      }
      for (Element b = 0; b < nb; ++b) {
        std::size_t qb = t_.moved(1, pb, i, b);
        if (std::binary_search(ca.begin(), ca.end(), t_.type(r - 1, 1, qb))) continue;
        std::vector<Formula> parts;
        std::set<int> seen;
        for (Element a = 0; a < na; ++a) {
          std::size_t qa = t_.moved(0, pa, i, a);
          if (seen.insert(t_.type(r - 1, 0, qa)).second) parts.push_back(separate(r - 1, qa, qb));
        }
        return forall(x, disjunction(parts));
      }
    }
    throw Error("positions have equal child types");
  }

  const TypeTable& t_;
  std::map<std::tuple<int, int, int>, Formula> memo_;
};

Assignment assignment_of(const std::vector<Element>& init) {
  Assignment a;
  for (std::size_t i = 0; i < init.size(); ++i) a["x" + std::to_string(i + 1)] = init[i];
  return a;
}

bool free_within(const Formula& f, std::size_t l) {
  for (const auto& v : free_vars(f)) {
    if (v.size() < 2 || v[0] != 'x') return false;
    int idx = std::stoi(v.substr(1));
    if (idx < 1 || static_cast<std::size_t>(idx) > l) return false;
  }
  return true;
}

}  // namespace

struct RankTypes::Impl {
  const Structure& a;
  const Structure& b;
  int k, q;
  TypeTable table;
  Impl(const Structure& a_, const Structure& b_, int k_, int q_, std::size_t cap)
      : a(a_), b(b_), k(k_), q(q_), table({&a_, &b_}, k_, q_, cap) {}
};

RankTypes::RankTypes(const Structure& a, const Structure& b, int k, int q, std::size_t cap) {
  check_vocabularies(a, b);
  if (k < 1 || q < 0) throw InvalidParameter("need k >= 1 and q >= 0");
  impl_ = std::make_unique<Impl>(a, b, k, q, cap);
}

RankTypes::~RankTypes() = default;

bool RankTypes::agree(const std::vector<Element>& a_init, const std::vector<Element>& b_init) const {
  const Impl& I = *impl_;
  if (a_init.size() != b_init.size()) throw InvalidParameter("initial tuples differ in length");
  check_init(I.a, a_init, I.k);
  check_init(I.b, b_init, I.k);
  return I.table.type(I.q, 0, I.table.encode(0, padded(a_init, I.k))) ==
         I.table.type(I.q, 1, I.table.encode(1, padded(b_init, I.k)));
}

DistinguishResult distinguishing_formula(const Structure& a, const Structure& b, int k, int q,
                                         const std::vector<Element>& a_init, const std::vector<Element>& b_init,
                                         const DistinguishOptions& opts) {
  check_vocabularies(a, b);
  if (k < 1 || q < 0) throw InvalidParameter("need k >= 1 and q >= 0");
  if (a_init.size() != b_init.size()) throw InvalidParameter("initial tuples differ in length");
  check_init(a, a_init, k);
  check_init(b, b_init, k);
  const Assignment ga = assignment_of(a_init), gb = assignment_of(b_init);

  if (k <= kMaxEnumVars && q <= kMaxEnumRank && count_formulas(a.vocabulary(), {k, q, 1}) <= opts.enumeration_cap) {
    EnumerationBounds bounds{k, q, opts.short_size};
    if (bounds.s == 0) {
      bounds.s = 1;
      while (bounds.s < kMaxEnumSize) {
        EnumerationBounds next{k, q, bounds.s + 1};
        if (count_formulas(a.vocabulary(), next) > opts.enumeration_cap) break;
        bounds.s = next.s;
      }
    }
    Evaluator ea(a, opts.table_cap), eb(b, opts.table_cap);
    for (const auto& f : enumerate_formulas(a.vocabulary(), bounds, opts.enumeration_cap)) {
      if (!free_within(f, a_init.size())) continue;
      if (ea.evaluate(f, ga) != eb.evaluate(f, gb)) return {f, "enumeration"};
    }
  }

  TypeTable table({&a, &b}, k, q, opts.table_cap);
  std::size_t pa = table.encode(0, padded(a_init, k)), pb = table.encode(1, padded(b_init, k));
  if (table.type(q, 0, pa) == table.type(q, 1, pb)) return {};
  Separator sep(table);
  Formula f = sep.separate(q, pa, pb);
  Evaluator ea(a, opts.table_cap), eb(b, opts.table_cap);
  if (!ea.evaluate(f, ga) || eb.evaluate(f, gb)) throw Error("separating formula failed its own check");
  return {f, "characteristic"};
}

Formula characteristic_formula(const Structure& a, int k, int q, const std::vector<Element>& init) {
  if (k < 1 || q < 0) throw InvalidParameter("need k >= 1 and q >= 0");
  check_init(a, init, k);
  TypeTable table({&a}, k, q, std::size_t{1} << 26);
  std::map<std::pair<int, int>, Formula> memo;
  std::function<Formula(int, std::size_t)> chi = [&](int r, std::size_t pos) -> Formula {
    auto key = std::make_pair(r, table.type(r, 0, pos));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::vector<Formula> parts;
    if (r == 0) {
      auto assign = table.decode(0, pos);
      std::vector<std::uint8_t> bits;
      table.atomic_bits(0, assign, bits);
      auto atoms = atom_list(a, table.terms(assign));
      for (std::size_t i = 0; i < bits.size(); ++i) parts.push_back(bits[i] ? atoms[i] : negation(atoms[i]));
    } else {
      parts.push_back(chi(r - 1, pos));
      for (int i = 0; i < k; ++i) {
        const std::string x = "x" + std::to_string(i + 1);
        std::map<int, Formula> kids;
        for (Element e = 0; e < a.size(); ++e) {
          std::size_t next = table.moved(0, pos, i, e);
          int t = table.type(r - 1, 0, next);
          if (!kids.count(t)) kids.emplace(t, chi(r - 1, next));
        }
        std::vector<Formula> alts;
        for (const auto& [t, f] : kids) {
          parts.push_back(exists(x, f));
          alts.push_back(f);
        }
        parts.push_back(forall(x, disjunction(alts)));
      }
    }
    Formula f = conjunction(parts);
    memo.emplace(key, f);
    return f;
  };
  return chi(q, table.encode(0, padded(init, k)));
}

}  // namespace forge
