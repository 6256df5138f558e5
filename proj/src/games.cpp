#include "forge/games.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "forge/error.hpp"
#include "atomic.hpp"

namespace forge {

using namespace detail;

namespace {

std::string describe_map(const std::vector<std::pair<Element, Element>>& m) {
  std::string s = "{";
  for (std::size_t i = 0; i < m.size(); ++i)
    s += (i ? ", " : "") + std::to_string(m[i].first) + "->" + std::to_string(m[i].second);
  return s + "}";
}

std::vector<std::pair<Element, Element>> pairs_of(const PartialMap& m) {
  std::set<int> seen;
  std::vector<std::pair<Element, Element>> out;
  for (const auto& p : m.pairs) {
    if (p.pebble < 1) throw InvalidParameter("pebble indices start at 1");
    if (!seen.insert(p.pebble).second) throw InvalidParameter("pebble " + std::to_string(p.pebble) + " used twice");
    out.push_back({p.a, p.b});
  }
  return out;
}

// Open-addressing set cleared in O(1) between uses.
class DistinctSet {
 public:
  void reset(std::size_t expected) {
    std::size_t want = 16;
    while (want < 2 * expected) want <<= 1;
    if (want > keys_.size()) {
      keys_.assign(want, 0);
      stamp_.assign(want, 0);
      now_ = 0;
    }
    if (++now_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      now_ = 1;
    }
  }

  // True when v was not present.
  bool insert(std::uint64_t v) {
    const std::size_t mask = keys_.size() - 1;
    std::size_t h = static_cast<std::size_t>((v * 0x9e3779b97f4a7c15ULL) >> 17) & mask;
    while (stamp_[h] == now_) {
      if (keys_[h] == v) return false;
      h = (h + 1) & mask;
    }
    stamp_[h] = now_;
    keys_[h] = v;
    return true;
  }

 private:
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t now_ = 0;
};

}  // namespace

bool is_partial_isomorphism(const Structure& a, const Structure& b,
                            const std::vector<std::pair<Element, Element>>& map) {
  check_vocabularies(a, b);
  std::vector<std::pair<Element, Element>> m = map;
  for (const auto& [name, e] : a.constants()) m.push_back({e, *b.constant(name)});
  for (const auto& [x, y] : m)
    if (!a.in_universe(x) || !b.in_universe(y)) return false;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if ((m[i].first == m[j].first) != (m[i].second == m[j].second)) return false;
  Side sa(a), sb(b);
  std::vector<Element> ta, tb;
  for (const auto& [x, y] : m) {
    ta.push_back(x);
    tb.push_back(y);
  }
  std::vector<std::uint8_t> qa, qb;
  Side bare_a = sa, bare_b = sb;
  bare_a.consts.clear();
  bare_b.consts.clear();
  bare_a.atomic_type(ta.data(), static_cast<int>(ta.size()), qa);
  bare_b.atomic_type(tb.data(), static_cast<int>(tb.size()), qb);
  return qa == qb;
}

bool is_partial_isomorphism(const Structure& a, const Structure& b, const PartialMap& map) {
  return is_partial_isomorphism(a, b, pairs_of(map));
}

// ---------------------------------------------------------------- pebble refinement

struct PebbleSolver::Impl {
  Side sa, sb;
  int k;
  int m;  // k - 1 pebbles per tuple
  std::vector<int> col[2];
  std::vector<std::size_t> power[2];
  int colours = 0;
  int rounds = 0;
  int sep_round = -1;
  Interner<std::uint8_t> types;

  Impl(const Structure& a, const Structure& b, int k_, std::size_t cap) : sa(a), sb(b), k(k_), m(k_ - 1) {
    check_vocabularies(a, b);
    if (k < 1) throw InvalidParameter("k must be at least 1");
    std::size_t work = 0;
    for (int s = 0; s < 2; ++s) {
      int n = side(s).n;
      power[s].assign(m + 1, 1);
      for (int i = m - 1; i >= 0; --i) {
        if (n != 0 && power[s][i + 1] > cap / static_cast<std::size_t>(std::max(n, 1)))
          throw ResourceError("pebble game on " + std::to_string(n) + " elements with k=" + std::to_string(k) +
                              " exceeds the cap");
        power[s][i] = power[s][i + 1] * static_cast<std::size_t>(n);
      }
      work += power[s][0];
    }
    if (work > cap) throw ResourceError("pebble game exceeds the cap");
    refine();
  }

  const Side& side(int s) const { return s == 0 ? sa : sb; }

  std::size_t tuples(int s) const { return power[s][0]; }

  void decode(int s, std::size_t idx, std::vector<Element>& t) const {
    t.resize(m);
    for (int i = 0; i < m; ++i) t[i] = static_cast<Element>((idx / power[s][i + 1]) % side(s).n);
  }

  // Index of t without coordinate i, as an (m-1)-tuple.
  static std::size_t rest(int n, const std::vector<Element>& t, int i) {
    std::size_t r = 0;
    for (int j = 0; j < static_cast<int>(t.size()); ++j)
      if (j != i) r = r * static_cast<std::size_t>(n) + static_cast<std::size_t>(t[j]);
    return r;
  }

  int atp(int s, const std::vector<Element>& t) {
    std::vector<std::uint8_t> bits;
    side(s).atomic_type(t.data(), static_cast<int>(t.size()), bits);
    return types(bits);
  }

  void refine() {
    std::vector<Element> t;
    bool need_ext = m < 2;
    for (const auto& r : sa.rels) need_ext |= r.arity > 2;
    // Initial colours: atomic types.
    for (int s = 0; s < 2; ++s) {
      col[s].resize(tuples(s));
      for (std::size_t idx = 0; idx < tuples(s); ++idx) {
        decode(s, idx, t);
        col[s][idx] = atp(s, t);
      }
    }
    colours = count_colours();
    std::vector<std::vector<int>> ext(2);
    if (need_ext) {
      // Type of each (k-1)-tuple extended by one more element.
      std::vector<Element> tw;
      for (int s = 0; s < 2; ++s) {
        int n = side(s).n;
        ext[s].resize(tuples(s) * static_cast<std::size_t>(n));
        for (std::size_t idx = 0; idx < tuples(s); ++idx) {
          decode(s, idx, t);
          tw = t;
          tw.push_back(0);
          for (int w = 0; w < n; ++w) {
            tw[m] = w;
            ext[s][idx * n + w] = atp(s, tw);
          }
        }
      }
    }
    std::vector<std::uint64_t> sigs;
    std::vector<std::uint64_t> key;
    DistinctSet seen;
    while (true) {
      Interner<std::uint64_t> next_ids;
      std::vector<int> next[2];
      const std::uint64_t base = static_cast<std::uint64_t>(std::max(colours, types.size()) + 1);
      for (int s = 0; s < 2; ++s) {
        const int n = side(s).n;
        next[s].resize(tuples(s));
        // For coordinate i, colours with every other coordinate fixed are made contiguous.
        std::vector<std::vector<int>> cols(m > 0 ? m - 1 : 0);
        for (int i = 0; i + 1 < m; ++i) {
          cols[i].resize(tuples(s));
          for (std::size_t idx = 0; idx < tuples(s); ++idx) {
            decode(s, idx, t);
            cols[i][rest(n, t, i) * n + t[i]] = col[s][idx];
          }
        }
        std::vector<const int*> row(m);
        for (std::size_t idx = 0; idx < tuples(s); ++idx) {
          decode(s, idx, t);
          for (int i = 0; i < m; ++i)
            row[i] = (i + 1 < m ? cols[i].data() : col[s].data()) + rest(n, t, i) * n;
          sigs.clear();
          seen.reset(n);
          for (int w = 0; w < n; ++w) {
            std::uint64_t sig = need_ext ? static_cast<std::uint64_t>(ext[s][idx * n + w]) : 0;
            for (int i = 0; i < m; ++i) sig = sig * base + static_cast<std::uint64_t>(row[i][w]);
            if (seen.insert(sig)) sigs.push_back(sig);
          }
          std::sort(sigs.begin(), sigs.end());
          key.assign(1, static_cast<std::uint64_t>(col[s][idx]));
          key.insert(key.end(), sigs.begin(), sigs.end());
          next[s][idx] = next_ids(key);
        }
      }
      ++rounds;
      col[0] = std::move(next[0]);
      col[1] = std::move(next[1]);
      int c = next_ids.size();
      if (sep_round < 0 && !same_sets()) sep_round = rounds;
      if (c == colours) break;
      colours = c;
    }
    if (sep_round < 0 && !same_sets()) sep_round = 0;
    // Signatures are packed as base^m * ext; guard the packing range.
    double range = 1;
    for (int i = 0; i < m; ++i) range *= static_cast<double>(std::max(colours, types.size()) + 1);
    if (need_ext) range *= static_cast<double>(types.size() + 1);
    if (range > 1.8e19) throw ResourceError("too many colours for signature packing");
  }

  int count_colours() const {
    std::set<int> all(col[0].begin(), col[0].end());
    all.insert(col[1].begin(), col[1].end());
    return static_cast<int>(all.size());
  }

  std::size_t diagonal(int s, Element a) const {
    std::size_t idx = 0;
    for (int i = 0; i < m; ++i) idx += static_cast<std::size_t>(a) * power[s][i + 1];
    return idx;
  }

  std::set<int> diagonal_colours(int s) const {
    std::set<int> out;
    for (Element a = 0; a < side(s).n; ++a) out.insert(m == 0 ? col[s][0] : col[s][diagonal(s, a)]);
    return out;
  }

  bool same_sets() const {
    if (m == 0) return col[0][0] == col[1][0];
    return diagonal_colours(0) == diagonal_colours(1);
  }

  std::size_t index_of(int s, const std::vector<Element>& t) const {
    std::size_t idx = 0;
    for (int i = 0; i < m; ++i) idx += static_cast<std::size_t>(t[i]) * power[s][i + 1];
    return idx;
  }

  int colour(int s, const std::vector<Element>& t) const { return m == 0 ? col[s][0] : col[s][index_of(s, t)]; }

  GameResult empty_position() const {
    GameResult r;
    r.rounds = rounds;
    r.duplicator = same_sets();
    if (!r.duplicator) {
      auto ca = diagonal_colours(0), cb = diagonal_colours(1);
      for (int s = 0; s < 2 && r.witness.empty(); ++s)
        for (Element a = 0; a < side(s).n; ++a) {
          int c = m == 0 ? col[s][0] : col[s][diagonal(s, a)];
          if (!(s == 0 ? cb : ca).count(c)) {
            r.witness = std::string("Spoiler pebbles ") + (s == 0 ? "A" : "B") + ":" + std::to_string(a) +
                        "; no answer in " + (s == 0 ? "B" : "A") + " survives (separated in round " +
                        std::to_string(sep_round) + ")";
            break;
          }
        }
      if (r.witness.empty()) r.witness = "empty position lost";
    }
    return r;
  }
};

PebbleSolver::PebbleSolver(const Structure& a, const Structure& b, int k, std::size_t cap)
    : impl_(std::make_unique<Impl>(a, b, k, cap)) {}

PebbleSolver::~PebbleSolver() = default;

int PebbleSolver::rounds() const { return impl_->rounds; }

GameResult PebbleSolver::from(const PartialMap& init) const {
  const Impl& I = *impl_;
  auto pairs = pairs_of(init);
  if (static_cast<int>(pairs.size()) > I.k) throw InvalidParameter("more initial pebbles than k");
  std::vector<PebblePair> sorted = init.pairs;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.pebble < y.pebble; });
  GameResult r;
  r.rounds = I.rounds;
  if (!is_partial_isomorphism(*I.sa.s, *I.sb.s, pairs)) {
    r.witness = "initial placement " + describe_map(pairs) + " is not a partial isomorphism";
    return r;
  }
  if (sorted.empty()) return I.empty_position();
  std::vector<Element> ta, tb;
  for (const auto& p : sorted) {
    ta.push_back(p.a);
    tb.push_back(p.b);
  }
  const int l = static_cast<int>(sorted.size());
  if (l <= I.m) {
    while (static_cast<int>(ta.size()) < I.m) {
      ta.push_back(ta.back());
      tb.push_back(tb.back());
    }
    r.duplicator = I.colour(0, ta) == I.colour(1, tb);
    if (!r.duplicator) r.witness = "position " + describe_map(pairs) + " separated by the refinement";
    return r;
  }
  // All k pebbles placed: Spoiler must lift one first.
  for (int i = 0; i < l; ++i) {
    std::vector<Element> ra, rb;
    for (int j = 0; j < l; ++j)
      if (j != i) {
        ra.push_back(ta[j]);
        rb.push_back(tb[j]);
      }
    if (I.colour(0, ra) != I.colour(1, rb)) {
      r.witness = "Spoiler lifts pebble " + std::to_string(sorted[i].pebble) + " from " + describe_map(pairs);
      return r;
    }
  }
  r.duplicator = true;
  return r;
}

GameResult pebble_game(const Structure& a, const Structure& b, int k, const PartialMap& init) {
  return PebbleSolver(a, b, k).from(init);
}

bool pebble_equiv(const Structure& a, const Structure& b, int k, const PartialMap& init) {
  return pebble_game(a, b, k, init).duplicator;
}

// ---------------------------------------------------------------- reference solver

bool pebble_equiv_reference(const Structure& a, const Structure& b, int k, const PartialMap& init) {
  check_vocabularies(a, b);
  if (k < 1) throw InvalidParameter("k must be at least 1");
  using Map = std::vector<std::pair<Element, Element>>;
  auto start = pairs_of(init);
  if (static_cast<int>(start.size()) > k) throw InvalidParameter("more initial pebbles than k");
  if (!is_partial_isomorphism(a, b, start)) return false;
  std::sort(start.begin(), start.end());
  start.erase(std::unique(start.begin(), start.end()), start.end());

  // All partial isomorphisms of size <= k, as sorted pair lists.
  std::map<Map, bool> alive;
  std::function<void(Map&, Element)> grow = [&](Map& cur, Element from) {
    alive[cur] = true;
    if (static_cast<int>(cur.size()) == k) return;
    for (Element x = from; x < a.size(); ++x)
      for (Element y = 0; y < b.size(); ++y) {
        cur.push_back({x, y});
        if (is_partial_isomorphism(a, b, cur)) grow(cur, x + 1);
        cur.pop_back();
      }
  };
  Map empty;
  if (!is_partial_isomorphism(a, b, empty)) return false;
  grow(empty, 0);
  if (alive.size() > 2'000'000) throw ResourceError("reference solver position count exceeds the cap");

  auto extended = [](const Map& p, Element x, Element y) {
    Map q = p;
    for (const auto& [u, v] : q)
      if (u == x) return v == y ? std::optional<Map>(q) : std::nullopt;
    q.push_back({x, y});
    std::sort(q.begin(), q.end());
    return std::optional<Map>(q);
  };
  auto survives = [&](const std::optional<Map>& q) {
    if (!q) return false;
    auto it = alive.find(*q);
    return it != alive.end() && it->second;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [p, live] : alive) {
      if (!live) continue;
      bool ok = true;
      for (std::size_t i = 0; i < p.size() && ok; ++i) {
        Map q = p;
        q.erase(q.begin() + static_cast<long>(i));
        ok = survives(q);
      }
      if (ok && static_cast<int>(p.size()) < k) {
        for (Element x = 0; x < a.size() && ok; ++x) {
          bool answered = false;
          for (Element y = 0; y < b.size() && !answered; ++y) answered = survives(extended(p, x, y));
          ok = answered;
        }
        for (Element y = 0; y < b.size() && ok; ++y) {
          bool answered = false;
          for (Element x = 0; x < a.size() && !answered; ++x) answered = survives(extended(p, x, y));
          ok = answered;
        }
      }
      if (!ok) {
        live = false;
        changed = true;
      }
    }
  }
  return survives(start);
}

// ---------------------------------------------------------------- counting game

namespace {

// Perfect matching in the bipartite graph given by ok(a, b), |A| = |B| = n.
bool perfect_matching(int n, const std::function<bool(int, int)>& ok) {
  std::vector<int> match_b(n, -1);
  std::vector<std::vector<int>> adj(n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (ok(x, y)) adj[x].push_back(y);
  std::vector<int> seen(n, -1);
  std::function<bool(int, int)> augment = [&](int x, int stamp) {
    for (int y : adj[x]) {
      if (seen[y] == stamp) continue;
      seen[y] = stamp;
      if (match_b[y] < 0 || augment(match_b[y], stamp)) {
        match_b[y] = x;
        return true;
      }
    }
    return false;
  };
  for (int x = 0; x < n; ++x)
    if (!augment(x, x)) return false;
  return true;
}

}  // namespace

GameResult counting_game(const Structure& a, const Structure& b, int k) {
  check_vocabularies(a, b);
  if (k < 1) throw InvalidParameter("k must be at least 1");
  GameResult r;
  if (a.size() != b.size()) {
    r.witness = "universe sizes differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                "): Spoiler picks the larger universe as his set";
    return r;
  }
  if (!is_partial_isomorphism(a, b, std::vector<std::pair<Element, Element>>{})) {
    r.witness = "constants disagree";
    return r;
  }
  const int n = a.size();
  if (n == 0) {
    r.duplicator = true;
    return r;
  }
  std::size_t per = 1;
  for (int i = 0; i < k; ++i) {
    per *= static_cast<std::size_t>(n);
    if (per > 5000) throw ResourceError("counting game exceeds the cap");
  }
  Side sa(a), sb(b);
  Interner<std::uint8_t> types;
  std::vector<int> ta(per), tb(per);
  std::vector<Element> t(k);
  std::vector<std::uint8_t> bits;
  auto decode = [&](std::size_t idx) {
    for (int i = k - 1; i >= 0; --i) {
      t[i] = static_cast<Element>(idx % n);
      idx /= n;
    }
  };
  std::vector<std::size_t> pw(k, 1);
  for (int i = k - 2; i >= 0; --i) pw[i] = pw[i + 1] * n;
  for (std::size_t idx = 0; idx < per; ++idx) {
    decode(idx);
    sa.atomic_type(t.data(), k, bits);
    ta[idx] = types(bits);
    sb.atomic_type(t.data(), k, bits);
    tb[idx] = types(bits);
  }
  std::vector<std::uint8_t> alive(per * per);
  for (std::size_t x = 0; x < per; ++x)
    for (std::size_t y = 0; y < per; ++y) alive[x * per + y] = ta[x] == tb[y];
  bool changed = true;
  while (changed) {
    changed = false;
    ++r.rounds;
    for (std::size_t x = 0; x < per; ++x)
      for (std::size_t y = 0; y < per; ++y) {
        if (!alive[x * per + y]) continue;
        std::vector<Element> xa(k), yb(k);
        for (int i = 0; i < k; ++i) {
          xa[i] = static_cast<Element>((x / pw[i]) % n);
          yb[i] = static_cast<Element>((y / pw[i]) % n);
        }
        bool ok = true;
        for (int i = 0; i < k && ok; ++i) {
          std::size_t bx = x - xa[i] * pw[i], by = y - yb[i] * pw[i];
          ok = perfect_matching(n, [&](int u, int v) { return alive[(bx + u * pw[i]) * per + by + v * pw[i]] != 0; });
        }
        if (!ok) {
          alive[x * per + y] = 0;
          changed = true;
        }
      }
  }
  std::size_t diag = 0;
  for (int i = 0; i < k; ++i) diag += pw[i];
  r.duplicator = perfect_matching(n, [&](int u, int v) { return alive[(u * diag) * per + v * diag] != 0; });
  if (!r.duplicator) r.witness = "no bijection between A and B survives the first move";
  return r;
}

bool counting_equiv(const Structure& a, const Structure& b, int k) { return counting_game(a, b, k).duplicator; }

bool counting_equiv_simulation(const Structure& a, const Structure& b, int k) {
  check_vocabularies(a, b);
  if (k < 1) throw InvalidParameter("k must be at least 1");
  const int na = a.size(), nb = b.size();
  if (na > 6 || nb > 6) throw ResourceError("two-part move simulation is limited to 6 elements");
  const int cells = na * nb + 1;  // 0 = pebble off the board
  std::size_t positions = 1;
  for (int i = 0; i < k; ++i) {
    positions *= static_cast<std::size_t>(cells);
    if (positions > 1'000'000) throw ResourceError("two-part move simulation exceeds the cap");
  }
  std::vector<std::size_t> pw(k, 1);
  for (int i = 1; i < k; ++i) pw[i] = pw[i - 1] * cells;
  auto cell = [&](std::size_t pos, int i) { return static_cast<int>((pos / pw[i]) % cells); };
  std::vector<std::uint8_t> good(positions);
  for (std::size_t pos = 0; pos < positions; ++pos) {
    std::vector<std::pair<Element, Element>> m;
    for (int i = 0; i < k; ++i) {
      int c = cell(pos, i);
      if (c) m.push_back({(c - 1) / nb, (c - 1) % nb});
    }
    good[pos] = is_partial_isomorphism(a, b, m);
  }
  auto place = [&](std::size_t pos, int i, Element x, Element y) {
    return pos - static_cast<std::size_t>(cell(pos, i)) * pw[i] + static_cast<std::size_t>(1 + x * nb + y) * pw[i];
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t pos = 0; pos < positions; ++pos) {
      if (!good[pos]) continue;
      bool ok = true;
      for (int i = 0; i < k && ok; ++i) {
        // Spoiler's set S in A: Duplicator needs |S| elements of B each answerable from S.
        for (int s = 1; s < (1 << na) && ok; ++s) {
          int answerable = 0;
          for (Element y = 0; y < nb; ++y) {
            bool any = false;
            for (Element x = 0; x < na && !any; ++x)
              if ((s >> x) & 1) any = good[place(pos, i, x, y)] != 0;
            answerable += any;
          }
          ok = answerable >= __builtin_popcount(static_cast<unsigned>(s));
        }
        for (int s = 1; s < (1 << nb) && ok; ++s) {
          int answerable = 0;
          for (Element x = 0; x < na; ++x) {
            bool any = false;
            for (Element y = 0; y < nb && !any; ++y)
              if ((s >> y) & 1) any = good[place(pos, i, x, y)] != 0;
            answerable += any;
          }
          ok = answerable >= __builtin_popcount(static_cast<unsigned>(s));
        }
      }
      if (!ok) {
        good[pos] = 0;
        changed = true;
      }
    }
  }
  return good[0] != 0;
}

}  // namespace forge
