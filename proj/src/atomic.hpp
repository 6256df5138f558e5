#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "forge/error.hpp"
#include "forge/formula.hpp"
#include "forge/structure.hpp"

namespace forge::detail {

inline void check_vocabularies(const Structure& a, const Structure& b) {
  if (a.vocabulary() != b.vocabulary()) throw InvalidParameter("structures have different vocabularies");
}

// Fast membership for one relation of one structure.
struct RelView {
  int arity = 0;
  const Relation* rel = nullptr;
  std::vector<std::uint8_t> dense;
  int n = 0;

  bool holds(const Element* t) const {
    if (!dense.empty() || arity == 0) {
      std::size_t idx = 0;
      for (int i = 0; i < arity; ++i) idx = idx * n + static_cast<std::size_t>(t[i]);
      return arity == 0 ? !rel->empty() : dense[idx] != 0;
    }
    return rel->contains(Tuple(t, t + arity));
  }
};

struct Side {
  const Structure* s = nullptr;
  int n = 0;
  std::vector<RelView> rels;
  std::vector<Element> consts;

  explicit Side(const Structure& st) : s(&st), n(st.size()) {
    for (const auto& [name, rel] : st.relations()) {
      RelView v;
      v.arity = rel.arity();
      v.rel = &rel;
      v.n = n;
      std::size_t size = 1;
      for (int i = 0; i < v.arity; ++i) size *= static_cast<std::size_t>(n);
      if (v.arity > 0 && v.arity <= 3 && size <= (std::size_t{1} << 26)) {
        v.dense.assign(size, 0);
        for (const auto& t : rel.tuples()) {
          std::size_t idx = 0;
          for (Element e : t) idx = idx * n + static_cast<std::size_t>(e);
          v.dense[idx] = 1;
        }
      }
      rels.push_back(std::move(v));
    }
    for (const auto& [name, e] : st.constants()) consts.push_back(e);
  }

  // Atomic type of tuple t (length m) together with the constants, as a bit string.
  void atomic_type(const Element* t, int m, std::vector<std::uint8_t>& out) const {
    out.clear();
    const int total = m + static_cast<int>(consts.size());
    auto term = [&](int i) { return i < m ? t[i] : consts[i - m]; };
    for (int i = 0; i < total; ++i)
      for (int j = i + 1; j < total; ++j) out.push_back(term(i) == term(j));
    std::vector<int> idx;
    Element buf[16];
    for (const auto& r : rels) {
      if (r.arity > 16) throw InvalidParameter("arity above 16 unsupported by the game solver");
      if (r.arity == 0) {
        out.push_back(!r.rel->empty());
        continue;
      }
      if (total == 0) continue;
      idx.assign(r.arity, 0);
      while (true) {
        for (int i = 0; i < r.arity; ++i) buf[i] = term(idx[i]);
        out.push_back(r.holds(buf));
        int p = r.arity - 1;
        while (p >= 0 && ++idx[p] == total) idx[p--] = 0;
        if (p < 0) break;
      }
    }
  }
};

struct VecHash {
  template <class T>
  std::size_t operator()(const std::vector<T>& v) const {
    std::size_t h = v.size();
    for (const auto& x : v) h = hash_combine(h, std::hash<T>()(x));
    return h;
  }
};

template <class T>
class Interner {
 public:
  int operator()(const std::vector<T>& key) {
    auto [it, fresh] = ids_.emplace(key, static_cast<int>(ids_.size()));
    return it->second;
  }
  int size() const { return static_cast<int>(ids_.size()); }

 private:
  std::unordered_map<std::vector<T>, int, VecHash> ids_;
};

// Atoms in the order of Side::atomic_type over the given terms (variables first, then constants).
std::vector<Formula> atom_list(const Structure& s, const std::vector<Term>& terms);

}  // namespace forge::detail
