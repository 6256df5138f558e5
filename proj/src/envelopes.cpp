#include "forge/envelopes.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <random>
#include <sstream>
#include <unordered_map>

#include "forge/error.hpp"
#include "forge/eval.hpp"
#include "atomic.hpp"

namespace forge {

// ---------------------------------------------------------------- multisets

int multiset_size(const Multiset& a) {
  int total = 0;
  for (const auto& [node, mult] : a) total += mult;
  return total;
}

Multiset multiset_of(const std::vector<int>& nodes) {
  Multiset out;
  for (int a : nodes) ++out[a];
  return out;
}

bool is_oriented(const Multiset& a) {
  std::set<int> mults;
  for (const auto& [node, mult] : a)
    if (!mults.insert(mult).second) return false;
  return true;
}

std::vector<int> oriented_set(const Multiset& a) {
  if (!is_oriented(a)) throw InvalidParameter("multiset " + multiset_to_string(a) + " is not oriented");
  std::vector<std::pair<int, int>> by_mult;
  for (const auto& [node, mult] : a) by_mult.push_back({mult, node});
  std::sort(by_mult.begin(), by_mult.end());
  std::vector<int> out;
  for (const auto& [mult, node] : by_mult) out.push_back(node);
  return out;
}

std::string multiset_to_string(const Multiset& a) {
  std::string s;
  for (const auto& [node, mult] : a) s += (s.empty() ? "" : " ") + std::to_string(node) + ":" + std::to_string(mult);
  return "{" + s + "}";
}

Hypergraph Hypergraph::below(int k) const {
  Hypergraph out;
  out.name = name;
  out.nodes = nodes;
  for (const auto& e : edges)
    if (multiset_size(e) < k) out.edges.insert(e);
  return out;
}

namespace {

std::vector<std::string> tokens_of(std::string line) {
  auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  std::istringstream ls(line);
  std::vector<std::string> tok;
  for (std::string t; ls >> t;) tok.push_back(t);
  return tok;
}

int parse_count(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size() || v < 0 || v > 100000000) throw ParseError("bad number '" + tok + "'", line);
    return static_cast<int>(v);
  } catch (const std::logic_error&) {
    throw ParseError("bad number '" + tok + "'", line);
  }
}

}  // namespace

Hypergraph parse_hypergraph(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  Hypergraph h;
  bool have_name = false, have_nodes = false;
  while (std::getline(in, raw)) {
    ++line_no;
    auto tok = tokens_of(raw);
    if (tok.empty()) continue;
    if (!have_name) {
      if (tok[0] != "hypergraph" || tok.size() != 2) throw ParseError("expected 'hypergraph <name>'", line_no);
      h.name = tok[1];
      have_name = true;
      continue;
    }
    if (!have_nodes) {
      if (tok[0] != "nodes" || tok.size() != 2) throw ParseError("expected 'nodes <n>'", line_no);
      h.nodes = parse_count(tok[1], line_no);
      if (h.nodes < 2) throw ParseError("a hypergraph needs at least 2 nodes", line_no);
      have_nodes = true;
      continue;
    }
    if (tok[0] != "edge" || tok.size() < 2) throw ParseError("expected 'edge <node:mult> ...'", line_no);
    Multiset e;
    for (std::size_t i = 1; i < tok.size(); ++i) {
      auto colon = tok[i].find(':');
      if (colon == std::string::npos) throw ParseError("expected <node:mult>, got '" + tok[i] + "'", line_no);
      int node = parse_count(tok[i].substr(0, colon), line_no);
      int mult = parse_count(tok[i].substr(colon + 1), line_no);
      if (node >= h.nodes) throw ParseError("node " + std::to_string(node) + " out of range", line_no);
      if (mult < 1) throw ParseError("multiplicities start at 1", line_no);
      if (e.count(node)) throw ParseError("node " + std::to_string(node) + " repeated in an edge", line_no);
      e[node] = mult;
    }
    h.edges.insert(e);
  }
  if (!have_nodes) throw ParseError("missing header", line_no);
  return h;
}

std::string print_hypergraph(const Hypergraph& h) {
  std::ostringstream out;
  out << "hypergraph " << h.name << "\nnodes " << h.nodes << "\n";
  for (const auto& e : h.edges) {
    out << "edge";
    for (const auto& [node, mult] : e) out << " " << node << ":" << mult;
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- envelope files

Envelope parse_envelope(const std::string& text) {
  std::istringstream in(text);
  std::string raw, rest;
  std::size_t line_no = 0;
  std::optional<std::vector<Element>> nodes;
  while (std::getline(in, raw)) {
    ++line_no;
    auto tok = tokens_of(raw);
    if (!tok.empty() && tok[0] == "nodes") {
      if (nodes) throw ParseError("second 'nodes' line", line_no);
      nodes.emplace();
      for (std::size_t i = 1; i < tok.size(); ++i) nodes->push_back(parse_count(tok[i], line_no));
      rest += "\n";
      continue;
    }
    rest += raw + "\n";
  }
  if (!nodes) throw ParseError("missing 'nodes' line", line_no);
  Envelope e;
  e.structure = parse_structure(rest);
  e.nodes = *nodes;
  for (Element a : e.nodes)
    if (!e.structure.in_universe(a)) throw ParseError("node " + std::to_string(a) + " outside the universe", line_no);
  return e;
}

std::string print_envelope(const Envelope& e) {
  std::string s = print_structure(e.structure) + "nodes";
  for (Element a : e.nodes) s += " " + std::to_string(a);
  return s + "\n";
}

// ---------------------------------------------------------------- internal view

namespace {

std::string set_text(const std::vector<Element>& xs) {
  std::string s;
  for (Element x : xs) s += (s.empty() ? "" : ",") + std::to_string(x);
  return "{" + s + "}";
}

struct View {
  int n = 0;
  std::vector<std::uint8_t> p;
  std::vector<int> node_of;
  std::vector<int> proj;
  std::vector<Element> verts;
  std::vector<std::vector<Element>> nbrs;

  explicit View(const Envelope& e) : n(e.structure.size()) {
    p.assign(static_cast<std::size_t>(n) * n, 0);
    if (e.structure.has_relation(kEnvelopeRelation)) {
      const Relation& r = e.structure.relation(kEnvelopeRelation);
      if (r.arity() != 2) throw InvalidParameter("P must be binary");
      for (const auto& t : r.tuples()) p[static_cast<std::size_t>(t[0]) * n + t[1]] = 1;
    }
    node_of.assign(n, -1);
    for (std::size_t i = 0; i < e.nodes.size(); ++i) {
      Element a = e.nodes[i];
      if (!e.structure.in_universe(a)) throw InvalidParameter("node element out of range");
      if (node_of[a] >= 0) throw InvalidParameter("element " + std::to_string(a) + " designated twice");
      node_of[a] = static_cast<int>(i);
    }
    proj.assign(n, -1);
    nbrs.resize(n);
    for (Element x = 0; x < n; ++x) {
      if (node_of[x] >= 0) continue;
      verts.push_back(x);
      int found = -1, count = 0;
      for (std::size_t i = 0; i < e.nodes.size(); ++i)
        if (P(x, e.nodes[i])) {
          found = static_cast<int>(i);
          ++count;
        }
      if (count == 1) proj[x] = found;
    }
    for (Element x : verts)
      for (Element y : verts)
        if (x != y && P(x, y)) nbrs[x].push_back(y);
  }

  bool P(Element a, Element b) const { return p[static_cast<std::size_t>(a) * n + b] != 0; }
  bool is_vertex(Element x) const { return node_of[x] < 0; }
  bool adj(Element x, Element y) const { return P(x, y); }

  Multiset image(const std::vector<Element>& xs) const {
    Multiset m;
    for (Element x : xs) ++m[proj[x]];
    return m;
  }
};

// Every nonempty sub-multiset of a hyperedge.
std::set<Multiset> prefixes_of(const Hypergraph& h) {
  std::set<Multiset> out;
  for (const auto& e : h.edges) {
    std::vector<std::pair<int, int>> items(e.begin(), e.end());
    std::vector<int> take(items.size(), 0);
    while (true) {
      std::size_t i = 0;
      while (i < items.size() && take[i] == items[i].second) take[i++] = 0;
      if (i == items.size()) break;
      ++take[i];
      Multiset sub;
      for (std::size_t j = 0; j < items.size(); ++j)
        if (take[j] > 0) sub[items[j].first] = take[j];
      out.insert(sub);
    }
  }
  return out;
}

struct CliqueSet {
  std::vector<std::vector<Element>> list;
  std::vector<std::vector<int>> of;
};

CliqueSet find_cliques(const View& v, const Hypergraph& h, int k) {
  Hypergraph hk = h.below(k);
  auto prefixes = prefixes_of(hk);
  CliqueSet cs;
  cs.of.resize(v.n);
  std::vector<Element> cur;
  std::function<void(const std::vector<Element>&)> grow = [&](const std::vector<Element>& cand) {
    Multiset m = v.image(cur);
    if (!prefixes.count(m)) return;
    if (hk.has_edge(m)) {
      int id = static_cast<int>(cs.list.size());
      cs.list.push_back(cur);
      for (Element x : cur) cs.of[x].push_back(id);
    }
    if (static_cast<int>(cur.size()) + 1 >= k) return;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      Element w = cand[i];
      std::vector<Element> next;
      for (std::size_t j = i + 1; j < cand.size(); ++j)
        if (v.adj(w, cand[j])) next.push_back(cand[j]);
      cur.push_back(w);
      grow(next);
      cur.pop_back();
    }
  };
  for (Element x : v.verts) {
    if (v.proj[x] < 0) continue;
    std::vector<Element> cand;
    for (Element y : v.nbrs[x])
      if (y > x && v.proj[y] >= 0) cand.push_back(y);
    cur = {x};
    grow(cand);
  }
  std::vector<std::size_t> order(cs.list.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cs.list[a] < cs.list[b]; });
  CliqueSet sorted;
  sorted.of.resize(v.n);
  for (std::size_t i : order) {
    int id = static_cast<int>(sorted.list.size());
    for (Element x : cs.list[i]) sorted.of[x].push_back(id);
    sorted.list.push_back(cs.list[i]);
  }
  return sorted;
}

void require_k(int k) {
  if (k < 3) throw InvalidParameter("k must be at least 3");
}

std::vector<Element> closure_of(const CliqueSet& cs, const std::vector<Element>& x) {
  std::vector<Element> out = x;
  for (Element e : x)
    if (e >= 0 && e < static_cast<int>(cs.of.size()))
      for (int id : cs.of[e]) out.insert(out.end(), cs.list[id].begin(), cs.list[id].end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------- validation

EnvelopeValidation validate_envelope(const Envelope& e) {
  EnvelopeValidation rep;
  auto fail = [&](ConditionCheck& c, const std::string& why) {
    if (c.pass) c.witness = why;
    c.pass = false;
  };
  ConditionCheck ident{"identity-on-nodes", true, ""}, graph{"vertex-graph", true, ""},
      unique{"unique-projection", true, ""}, blind{"nodes-see-no-vertex", true, ""};
  std::optional<View> v;
  try {
    v.emplace(e);
  } catch (const InvalidParameter& err) {
    fail(ident, err.what());
    rep.conditions = {ident, graph, unique, blind};
    rep.pass = false;
    return rep;
  }
  for (Element a : e.nodes)
    for (Element b : e.nodes)
      if (v->P(a, b) != (a == b)) fail(ident, "P(" + std::to_string(a) + "," + std::to_string(b) + ")" + (a == b ? " missing" : " holds"));
  for (Element x : v->verts) {
    if (v->P(x, x)) fail(graph, "P(" + std::to_string(x) + "," + std::to_string(x) + ") holds");
    for (Element y : v->verts)
      if (v->P(x, y) && !v->P(y, x)) fail(graph, "P(" + std::to_string(x) + "," + std::to_string(y) + ") is not symmetric");
    std::vector<Element> seen;
    for (Element a : e.nodes)
      if (v->P(x, a)) seen.push_back(a);
    if (seen.size() != 1)
      fail(unique, "vertex " + std::to_string(x) + " projects to " + std::to_string(seen.size()) + " nodes " + set_text(seen));
    for (Element a : e.nodes)
      if (v->P(a, x)) fail(blind, "P(" + std::to_string(a) + "," + std::to_string(x) + ") holds for node " + std::to_string(a));
  }
  rep.conditions = {ident, graph, unique, blind};
  for (const auto& c : rep.conditions) rep.pass = rep.pass && c.pass;
  return rep;
}

std::vector<int> projections(const Envelope& e) { return View(e).proj; }

std::vector<Element> vertices(const Envelope& e) { return View(e).verts; }

struct CliqueIndex::Impl {
  int n;
  std::vector<bool> vertex;
  CliqueSet cs;
};

CliqueIndex::CliqueIndex(const Envelope& e, const Hypergraph& h, int k) {
  require_k(k);
  View v(e);
  impl_ = std::make_unique<Impl>();
  impl_->n = v.n;
  for (Element x = 0; x < v.n; ++x) impl_->vertex.push_back(v.is_vertex(x));
  impl_->cs = find_cliques(v, h, k);
}

CliqueIndex::~CliqueIndex() = default;

const std::vector<std::vector<Element>>& CliqueIndex::cliques() const { return impl_->cs.list; }

bool CliqueIndex::is_plebeian(Element x) const {
  if (x < 0 || x >= impl_->n || !impl_->vertex[x]) return false;
  return impl_->cs.of[x].empty();
}

std::vector<Element> CliqueIndex::closure(const std::vector<Element>& x) const { return closure_of(impl_->cs, x); }

std::vector<std::vector<Element>> k_cliques(const Envelope& e, const Hypergraph& h, int k) {
  return CliqueIndex(e, h, k).cliques();
}

bool is_plebeian(const Envelope& e, const Hypergraph& h, int k, Element x) {
  return CliqueIndex(e, h, k).is_plebeian(x);
}

std::vector<Element> closure(const Envelope& e, const Hypergraph& h, int k, const std::vector<Element>& x) {
  return CliqueIndex(e, h, k).closure(x);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "PASS";
    case Verdict::Fail:
      return "FAIL";
    case Verdict::Indeterminate:
      return "INDETERMINATE";
  }
  return "?";
}

Verdict GoodnessReport::overall() const {
  if (g0 == Verdict::Fail || g1 == Verdict::Fail || g2 == Verdict::Fail) return Verdict::Fail;
  if (g0 == Verdict::Indeterminate || g1 == Verdict::Indeterminate || g2 == Verdict::Indeterminate)
    return Verdict::Indeterminate;
  return Verdict::Pass;
}

// ---------------------------------------------------------------- k-goodness

namespace {

constexpr int kMaxPatternBits = 22;

// Patterns a request may ask for, indexed by pattern bits.
struct Admissible {
  std::vector<std::uint8_t> ok;
  int total = 0;
};

struct GoodnessChecker {
  const View& v;
  Hypergraph hk;
  int k;
  CliqueSet cs;
  std::vector<std::vector<Element>> plebs;  // per node
  // Orderings of hyperedges and, for each, the k-cliques listed in that order.
  std::vector<std::vector<int>> tuples;
  std::vector<std::vector<std::vector<Element>>> realizers;
  std::vector<std::uint8_t> in_x, in_c;
  // Admissible patterns depend only on the shape of the closure.
  std::unordered_map<std::vector<int>, std::vector<Admissible>, detail::VecHash> g1_memo, g2_memo;
  std::vector<std::uint32_t> mark;
  std::uint32_t stamp = 0;

  GoodnessChecker(const View& view, const Hypergraph& h, int k_) : v(view), hk(h.below(k_)), k(k_) {
    cs = find_cliques(v, hk, k);
    plebs.resize(hk.nodes);
    for (Element x : v.verts)
      if (v.proj[x] >= 0 && cs.of[x].empty()) plebs[v.proj[x]].push_back(x);
    for (const auto& e : hk.edges) {
      std::vector<int> a;
      for (const auto& [node, mult] : e) a.insert(a.end(), mult, node);
      do {
        tuples.push_back(a);
        realizers.emplace_back();
        auto& out = realizers.back();
        for (const auto& q : cs.list) {
          if (v.image(q) != e) continue;
          std::vector<Element> y = q;
          std::sort(y.begin(), y.end());
          do {
            bool ok = true;
            for (std::size_t m = 0; m < y.size(); ++m) ok = ok && v.proj[y[m]] == a[m];
            if (ok) out.push_back(y);
          } while (std::next_permutation(y.begin(), y.end()));
        }
      } while (std::next_permutation(a.begin(), a.end()));
    }
    in_x.assign(v.n, 0);
    in_c.assign(v.n, 0);
  }

  bool is_clique(const std::vector<Element>& c, unsigned mask) const {
    for (std::size_t i = 0; i < c.size(); ++i)
      if (mask >> i & 1)
        for (std::size_t j = i + 1; j < c.size(); ++j)
          if ((mask >> j & 1) && !v.adj(c[i], c[j])) return false;
    return true;
  }

  bool g1_admissible(const std::vector<Element>& c, const std::vector<unsigned>& inner, int a, unsigned y) const {
    for (unsigned q : inner)
      if ((q & y) == q) return false;
    // z together with a clique S inside Y must not be a k-clique.
    for (unsigned s = y;; s = (s - 1) & y) {
      if (std::popcount(s) <= k - 2 && is_clique(c, s)) {
        Multiset m;
        ++m[a];
        for (std::size_t i = 0; i < c.size(); ++i)
          if (s >> i & 1) ++m[v.proj[c[i]]];
        if (hk.has_edge(m)) return false;
      }
      if (s == 0) break;
    }
    return true;
  }

  bool g2_admissible(const std::vector<Element>& c, const std::vector<unsigned>& inner, const std::vector<int>& a,
                     std::uint64_t r) const {
    const int s = static_cast<int>(c.size()), l = static_cast<int>(a.size());
    auto bit = [&](int i, int m) { return (r >> (i * l + m) & 1) != 0; };
    for (int i = 0; i < s; ++i) {
      bool all = true;
      for (int m = 0; m < l; ++m) all = all && bit(i, m);
      if (all) return false;
    }
    for (unsigned q : inner)
      for (int m = 0; m < l; ++m) {
        bool all = true;
        for (int i = 0; i < s; ++i)
          if (q >> i & 1) all = all && bit(i, m);
        if (all) return false;
      }
    // No k-clique other than the new one may pass through a new vertex.
    const unsigned full_c = s == 0 ? 0u : ((1u << s) - 1);
    for (unsigned t = full_c;; t = (t - 1) & full_c) {
      if (std::popcount(t) <= k - 2 && is_clique(c, t)) {
        for (unsigned mm = 1; mm < (1u << l); ++mm) {
          if (std::popcount(t) + std::popcount(mm) >= k) continue;
          if (t == 0 && mm == (1u << l) - 1) continue;
          bool joined = true;
          for (int i = 0; i < s && joined; ++i)
            if (t >> i & 1)
              for (int m = 0; m < l; ++m)
                if ((mm >> m & 1) && !bit(i, m)) joined = false;
          if (!joined) continue;
          Multiset ms;
          for (int i = 0; i < s; ++i)
            if (t >> i & 1) ++ms[v.proj[c[i]]];
          for (int m = 0; m < l; ++m)
            if (mm >> m & 1) ++ms[a[m]];
          if (hk.has_edge(ms)) return false;
        }
      }
      if (t == 0) break;
    }
    return true;
  }

  static std::string bits_text(const std::vector<Element>& c, unsigned mask) {
    std::vector<Element> sel;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (mask >> i & 1) sel.push_back(c[i]);
    return set_text(sel);
  }

  void fresh_marks(std::size_t size) {
    if (mark.size() < size) {
      mark.assign(size, 0);
      stamp = 0;
    }
    if (++stamp == 0) {
      std::fill(mark.begin(), mark.end(), 0);
      stamp = 1;
    }
  }

  static void note(GoodnessReport& rep, const std::string& why) {
    rep.witness += (rep.witness.empty() ? "" : "; ") + why;
  }

  // Checks one X for every condition still passing.
  void check_set(const std::vector<Element>& x, GoodnessReport& rep) {
    std::vector<Element> c = closure_of(cs, x);
    const int s = static_cast<int>(c.size());
    std::vector<unsigned> inner;
    for (Element e : x)
      for (int id : cs.of[e]) {
        unsigned mask = 0;
        for (Element y : cs.list[id]) mask |= 1u << (std::lower_bound(c.begin(), c.end(), y) - c.begin());
        if (std::find(inner.begin(), inner.end(), mask) == inner.end()) inner.push_back(mask);
      }
    std::sort(inner.begin(), inner.end());
    std::vector<int> shape = {s};
    for (Element e : c) shape.push_back(v.proj[e]);
    for (int i = 0; i < s; ++i)
      for (int j = i + 1; j < s; ++j) shape.push_back(v.adj(c[i], c[j]));
    for (unsigned q : inner) shape.push_back(static_cast<int>(q));

    for (Element e : x) in_x[e] = 1;
    for (Element e : c) in_c[e] = 1;

    if (rep.g1 == Verdict::Pass && s > kMaxPatternBits) {
      rep.g1 = Verdict::Indeterminate;
      note(rep, "closure of " + set_text(x) + " too large for G1 patterns");
    }
    if (rep.g1 == Verdict::Pass) {
      auto it = g1_memo.find(shape);
      if (it == g1_memo.end()) {
        std::vector<Admissible> per(hk.nodes);
        for (int a = 0; a < hk.nodes; ++a) {
          per[a].ok.assign(std::size_t{1} << s, 0);
          for (unsigned y = 0; y < (1u << s); ++y)
            if (g1_admissible(c, inner, a, y)) {
              per[a].ok[y] = 1;
              ++per[a].total;
            }
        }
        it = g1_memo.emplace(shape, std::move(per)).first;
      }
      for (int a = 0; a < hk.nodes && rep.g1 == Verdict::Pass; ++a) {
        const Admissible& adm = it->second[a];
        if (adm.total == 0) continue;
        fresh_marks(adm.ok.size());
        int found = 0;
        for (Element z : plebs[a]) {
          if (in_c[z]) continue;
          unsigned pat = 0;
          for (int i = 0; i < s; ++i)
            if (v.adj(z, c[i])) pat |= 1u << i;
          if (mark[pat] == stamp) continue;
          mark[pat] = stamp;
          if (adm.ok[pat] && ++found == adm.total) break;
        }
        if (found < adm.total)
          for (unsigned y = 0; y < adm.ok.size(); ++y)
            if (adm.ok[y] && mark[y] != stamp) {
              rep.g1 = Verdict::Fail;
              note(rep, "G1: X=" + set_text(x) + " node " + std::to_string(a) + " Y=" + bits_text(c, y) +
                            ": no plebeian vertex");
              break;
            }
      }
    }

    for (std::size_t t = 0; t < tuples.size() && rep.g2 == Verdict::Pass; ++t) {
      const auto& a = tuples[t];
      const int l = static_cast<int>(a.size());
      if (s * l > kMaxPatternBits) {
        rep.g2 = Verdict::Indeterminate;
        note(rep, "closure of " + set_text(x) + " too large for G2 patterns");
        break;
      }
      auto it = g2_memo.find(shape);
      if (it == g2_memo.end()) {
        std::vector<Admissible> per(tuples.size());
        for (std::size_t u = 0; u < tuples.size(); ++u) {
          const int lu = static_cast<int>(tuples[u].size());
          if (s * lu > kMaxPatternBits) continue;
          per[u].ok.assign(std::size_t{1} << (s * lu), 0);
          for (std::uint64_t r = 0; r < per[u].ok.size(); ++r)
            if (g2_admissible(c, inner, tuples[u], r)) {
              per[u].ok[r] = 1;
              ++per[u].total;
            }
        }
        it = g2_memo.emplace(shape, std::move(per)).first;
      }
      const Admissible& adm = it->second[t];
      if (adm.total == 0) continue;
      fresh_marks(adm.ok.size());
      int found = 0;
      for (const auto& y : realizers[t]) {
        bool clear = true;
        for (Element e : y) clear = clear && !in_x[e];
        if (!clear) continue;
        std::uint64_t pat = 0;
        for (int i = 0; i < s; ++i)
          for (int m = 0; m < l; ++m)
            if (v.adj(c[i], y[m])) pat |= std::uint64_t{1} << (i * l + m);
        if (mark[pat] == stamp) continue;
        mark[pat] = stamp;
        if (adm.ok[pat] && ++found == adm.total) break;
      }
      if (found < adm.total)
        for (std::uint64_t r = 0; r < adm.ok.size(); ++r)
          if (adm.ok[r] && mark[r] != stamp) {
            std::string pattern;
            for (int i = 0; i < s; ++i)
              for (int m = 0; m < l; ++m)
                if (r >> (i * l + m) & 1)
                  pattern += (pattern.empty() ? "" : ",") + std::to_string(c[i]) + "~" + std::to_string(m + 1);
            std::string nodes;
            for (int n : a) nodes += (nodes.empty() ? "" : ",") + std::to_string(n);
            rep.g2 = Verdict::Fail;
            note(rep, "G2: X=" + set_text(x) + " nodes (" + nodes + ") R={" + pattern + "}: no k-clique");
            break;
          }
    }
    for (Element e : x) in_x[e] = 0;
    for (Element e : c) in_c[e] = 0;
  }
};

std::uint64_t choose_sum(std::uint64_t n, int upto, std::uint64_t limit) {
  std::uint64_t total = 0, term = 1;
  for (int s = 0; s <= upto; ++s) {
    if (s > 0) {
      if (n < static_cast<std::uint64_t>(s)) break;
      long double next = static_cast<long double>(term) * (n - s + 1) / s;
      if (next > static_cast<long double>(limit)) return limit + 1;
      term = static_cast<std::uint64_t>(next + 0.5L);
    }
    total += term;
    if (total > limit) return limit + 1;
  }
  return total;
}

}  // namespace

GoodnessReport check_k_good(const Envelope& e, const Hypergraph& h, int k, const GoodnessBounds& bounds) {
  require_k(k);
  View v(e);
  if (static_cast<int>(e.nodes.size()) != h.nodes)
    throw InvalidParameter("envelope has " + std::to_string(e.nodes.size()) + " nodes, hypergraph " +
                           std::to_string(h.nodes));
  GoodnessChecker chk(v, h, k);
  GoodnessReport rep;
  rep.cliques = static_cast<int>(chk.cs.list.size());
  for (Element x : v.verts)
    if (chk.cs.of[x].size() > 1) {
      rep.g0 = Verdict::Fail;
      rep.witness = "G0: vertex " + std::to_string(x) + " lies in " + set_text(chk.cs.list[chk.cs.of[x][0]]) +
                    " and " + set_text(chk.cs.list[chk.cs.of[x][1]]);
      return rep;
    }
  for (const auto& q : chk.cs.list) {
    std::vector<Element> common = v.nbrs[q[0]];
    for (std::size_t i = 1; i < q.size(); ++i) {
      std::vector<Element> next;
      for (Element z : common)
        if (v.adj(q[i], z)) next.push_back(z);
      common = std::move(next);
    }
    if (!common.empty()) {
      rep.g0 = Verdict::Fail;
      rep.witness = "G0: vertex " + std::to_string(common[0]) + " is adjacent to all of k-clique " + set_text(q);
      return rep;
    }
  }
  const int nv = static_cast<int>(v.verts.size());
  if (choose_sum(nv, k - 1, bounds.max_sets) > bounds.max_sets) {
    rep.g1 = rep.g2 = Verdict::Indeterminate;
    rep.witness = "more than " + std::to_string(bounds.max_sets) + " sets X to check";
    return rep;
  }
  std::vector<int> idx;
  std::vector<Element> x;
  auto open = [&] { return rep.g1 == Verdict::Pass || rep.g2 == Verdict::Pass; };
  std::function<bool(int)> walk = [&](int start) {
    x.clear();
    for (int i : idx) x.push_back(v.verts[i]);
    ++rep.sets_checked;
    chk.check_set(x, rep);
    if (!open()) return false;
    if (static_cast<int>(idx.size()) + 1 >= k) return true;
    for (int i = start; i < nv; ++i) {
      idx.push_back(i);
      bool ok = walk(i + 1);
      idx.pop_back();
      if (!ok) return false;
    }
    return true;
  };
  walk(0);
  return rep;
}

// ---------------------------------------------------------------- generation

namespace {

struct Draft {
  int nodes = 0;
  std::vector<int> proj;  // per vertex
  std::vector<std::vector<std::uint8_t>> adj;
  std::vector<int> planted;  // planted clique id per vertex, -1 otherwise

  int add(int node, int clique) {
    proj.push_back(node);
    planted.push_back(clique);
    for (auto& row : adj) row.push_back(0);
    adj.emplace_back(proj.size(), 0);
    return static_cast<int>(proj.size()) - 1;
  }
};

// Would the edge u-v close a clique of size < k projecting onto a hyperedge?
bool closes_clique(const Draft& d, const Hypergraph& hk, const std::set<Multiset>& prefixes, int k, int u, int w) {
  std::vector<int> common;
  if (k > 3)
    for (int z = 0; z < static_cast<int>(d.proj.size()); ++z)
      if (z != u && z != w && d.adj[u][z] && d.adj[w][z]) common.push_back(z);
  std::vector<int> cur = {u, w};
  std::function<bool(std::size_t)> search = [&](std::size_t from) {
    Multiset m;
    for (int z : cur) ++m[d.proj[z]];
    if (!prefixes.count(m)) return false;
    if (hk.has_edge(m)) return true;
    if (static_cast<int>(cur.size()) + 1 >= k) return false;
    for (std::size_t i = from; i < common.size(); ++i) {
      bool ok = true;
      for (std::size_t j = 2; j < cur.size() && ok; ++j) ok = d.adj[cur[j]][common[i]] != 0;
      if (!ok) continue;
      cur.push_back(common[i]);
      bool hit = search(i + 1);
      cur.pop_back();
      if (hit) return true;
    }
    return false;
  };
  return search(0);
}

// Would the edge u-w make u adjacent to every member of w's planted clique?
bool covers_clique(const Draft& d, const std::vector<std::vector<int>>& members, int u, int w) {
  if (d.planted[w] < 0) return false;
  for (int y : members[d.planted[w]])
    if (y != w && (y == u || !d.adj[u][y])) return false;
  return true;
}

Envelope draft_envelope(const Hypergraph& h, int k, std::uint64_t seed, int pool, int cliques, const Structure* base) {
  Hypergraph hk = h.below(k);
  auto prefixes = prefixes_of(hk);
  Draft d;
  d.nodes = h.nodes;
  int clique_id = 0;
  for (const auto& e : hk.edges)
    for (int c = 0; c < cliques; ++c, ++clique_id) {
      std::vector<int> members;
      for (const auto& [node, mult] : e)
        for (int i = 0; i < mult; ++i) members.push_back(d.add(node, clique_id));
      for (int a : members)
        for (int b : members)
          if (a != b) d.adj[a][b] = 1;
    }
  for (int a = 0; a < h.nodes; ++a) {
    if (hk.has_edge(Multiset{{a, 1}})) continue;
    for (int i = 0; i < pool; ++i) d.add(a, -1);
  }
  std::mt19937_64 rng(seed);
  const int nv = static_cast<int>(d.proj.size());
  std::vector<std::vector<int>> members(clique_id);
  for (int u = 0; u < nv; ++u)
    if (d.planted[u] >= 0) members[d.planted[u]].push_back(u);
  for (int u = 0; u < nv; ++u)
    for (int w = u + 1; w < nv; ++w) {
      bool coin = (rng() >> 63) != 0;
      if (d.planted[u] >= 0 && d.planted[u] == d.planted[w]) continue;
      if (!coin || closes_clique(d, hk, prefixes, k, u, w) || covers_clique(d, members, u, w) ||
          covers_clique(d, members, w, u))
        continue;
      d.adj[u][w] = d.adj[w][u] = 1;
    }

  Envelope env;
  Structure& s = env.structure;
  s = Structure(h.nodes + nv, h.name.empty() ? "E" : "E_" + h.name);
  s.declare_relation(kEnvelopeRelation, 2);
  for (int a = 0; a < h.nodes; ++a) {
    env.nodes.push_back(a);
    s.add_tuple(kEnvelopeRelation, {a, a});
    s.set_constant("n" + std::to_string(a), a);
  }
  for (int u = 0; u < nv; ++u) {
    s.add_tuple(kEnvelopeRelation, {h.nodes + u, d.proj[u]});
    for (int w = 0; w < nv; ++w)
      if (d.adj[u][w]) s.add_tuple(kEnvelopeRelation, {h.nodes + u, h.nodes + w});
  }
  if (base) {
    if (base->size() != h.nodes) throw InvalidParameter("base structure size differs from the hypergraph");
    for (const auto& [name, rel] : base->relations()) {
      if (name == kEnvelopeRelation) throw InvalidParameter("base structure already uses P");
      s.declare_relation(name, rel.arity());
      for (const auto& t : rel.tuples()) s.add_tuple(name, t);
    }
  }
  return env;
}

}  // namespace

Envelope generate_envelope(const Hypergraph& h, int k, std::uint64_t seed, const GenerationOptions& opts,
                           GenerationStats* stats) {
  require_k(k);
  if (h.nodes < 2) throw InvalidParameter("a hypergraph needs at least 2 nodes");
  if (opts.pool < 0 || opts.cliques < 0 || opts.retries < 0) throw InvalidParameter("negative generation parameter");
  int pool = opts.pool > 0 ? opts.pool : 2 * k;
  int cliques = opts.cliques;
  GenerationStats local;
  GenerationStats& st = stats ? *stats : local;
  for (int attempt = 0; attempt <= opts.retries; ++attempt) {
    std::uint64_t attempt_seed = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt);
    Envelope env = draft_envelope(h, k, attempt_seed, pool, cliques, opts.base);
    st.attempts = attempt + 1;
    st.pool = pool;
    st.cliques = cliques;
    if (!validate_envelope(env).pass) throw GenerationFailure("generator produced an invalid envelope");
    st.report = check_k_good(env, h, k, opts.bounds);
    Verdict verdict = st.report.overall();
    if (verdict == Verdict::Pass) return env;
    if (verdict == Verdict::Indeterminate)
      throw GenerationFailure("k-goodness check over budget after " + std::to_string(attempt + 1) +
                              " attempts: " + st.report.witness);
    if (st.report.g0 == Verdict::Fail)
      throw GenerationFailure("planted cliques overlap (" + st.report.witness + ")");
    if (st.report.g1 == Verdict::Fail) pool *= 2;
    if (st.report.g2 == Verdict::Fail) cliques = std::max(1, cliques * 2);
  }
  throw GenerationFailure("no " + std::to_string(k) + "-good envelope after " + std::to_string(opts.retries + 1) +
                          " attempts; last report: " + st.report.witness);
}

// ---------------------------------------------------------------- k-correct and k-nice maps

namespace {

struct MapCheck {
  const View& ve;
  const View& vf;
  const CliqueSet& ce;
  const CliqueSet& cf;

  // Conditions of k-correctness for one pair, ignoring the other pairs.
  bool pair_ok(Element x, Element y) const {
    if (!ve.is_vertex(x)) return ve.node_of[x] == vf.node_of[y];
    if (!vf.is_vertex(y) || ve.proj[x] != vf.proj[y]) return false;
    if (ce.of[x].empty() != cf.of[y].empty()) return false;
    for (int id : ce.of[x]) {
      Multiset want = ve.image(ce.list[id]);
      bool found = false;
      for (int jd : cf.of[y]) found = found || vf.image(cf.list[jd]) == want;
      if (!found) return false;
    }
    return true;
  }

  bool compatible(Element x, Element y, Element x2, Element y2) const {
    if ((x == x2) != (y == y2)) return false;
    return ve.P(x, x2) == vf.P(y, y2) && ve.P(x2, x) == vf.P(y2, y);
  }

  bool correct(const ElementMap& eta) const {
    for (std::size_t i = 0; i < eta.size(); ++i) {
      auto [x, y] = eta[i];
      if (x < 0 || x >= ve.n || y < 0 || y >= vf.n) return false;
      if (ve.P(x, x) != vf.P(y, y) || !pair_ok(x, y)) return false;
      for (std::size_t j = 0; j < i; ++j)
        if (!compatible(x, y, eta[j].first, eta[j].second)) return false;
    }
    return true;
  }
};

void require_same_nodes(const Envelope& e, const Envelope& f) {
  if (e.nodes.size() != f.nodes.size()) throw InvalidParameter("envelopes for different hypergraphs");
}

}  // namespace

struct MapChecker::Impl {
  View ve, vf;
  CliqueSet ce, cf;
  MapCheck mc{ve, vf, ce, cf};

  Impl(const Envelope& e, const Envelope& f, const Hypergraph& h, int k)
      : ve(e), vf(f), ce(find_cliques(ve, h, k)), cf(find_cliques(vf, h, k)) {}
};

MapChecker::MapChecker(const Envelope& e, const Envelope& f, const Hypergraph& h, int k) {
  require_k(k);
  require_same_nodes(e, f);
  impl_ = std::make_unique<Impl>(e, f, h, k);
}

MapChecker::~MapChecker() = default;

bool MapChecker::correct(const ElementMap& eta) const { return impl_->mc.correct(eta); }

bool MapChecker::nice(const ElementMap& eta) const {
  const auto& mc = impl_->mc;
  const View& ve = impl_->ve;
  const View& vf = impl_->vf;
  if (!mc.correct(eta)) return false;
  std::vector<Element> dom;
  for (const auto& [x, y] : eta) dom.push_back(x);
  auto target = closure_of(impl_->ce, dom);
  std::vector<Element> todo;
  for (Element x : target)
    if (std::find(dom.begin(), dom.end(), x) == dom.end()) todo.push_back(x);
  ElementMap cur = eta;
  std::function<bool(std::size_t)> extend = [&](std::size_t i) {
    if (i == todo.size()) return true;
    Element x = todo[i];
    for (Element y = 0; y < vf.n; ++y) {
      if (ve.P(x, x) != vf.P(y, y) || !mc.pair_ok(x, y)) continue;
      bool ok = true;
      for (const auto& [x2, y2] : cur) ok = ok && mc.compatible(x, y, x2, y2);
      if (!ok) continue;
      cur.push_back({x, y});
      if (extend(i + 1)) return true;
      cur.pop_back();
    }
    return false;
  };
  return extend(0);
}

bool is_k_correct(const ElementMap& eta, const Envelope& e, const Envelope& f, const Hypergraph& h, int k) {
  return MapChecker(e, f, h, k).correct(eta);
}

bool is_k_nice(const ElementMap& eta, const Envelope& e, const Envelope& f, const Hypergraph& h, int k) {
  return MapChecker(e, f, h, k).nice(eta);
}

// ---------------------------------------------------------------- tables

std::string ZeroTable::text() const {
  std::string s;
  for (const auto& l : literals) s += (s.empty() ? "" : " and ") + l;
  return s.empty() ? "true" : s;
}

namespace {

ZeroTable zero_table(const View& v, const std::vector<Element>& x) {
  ZeroTable t;
  auto name = [](std::size_t i) { return "v" + std::to_string(i + 1); };
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      t.literals.push_back(std::string(x[i] == x[j] ? "" : "not ") + name(i) + " = " + name(j));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      t.literals.push_back(std::string(v.P(x[i], x[j]) ? "" : "not ") + "P(" + name(i) + "," + name(j) + ")");
  return t;
}

std::string k_table(const View& v, int k, const std::vector<Element>& x) {
  std::set<std::string> holding;
  std::vector<Element> u;
  // Cliques of size < k meeting x, listed as ordered tuples of distinct vertices.
  std::set<std::vector<Element>> cliques;
  std::function<void(std::vector<Element>&)> grow = [&](std::vector<Element>& cur) {
    cliques.insert(cur);
    if (static_cast<int>(cur.size()) + 1 >= k) return;
    for (Element w : v.nbrs[cur.front()]) {
      if (std::find(cur.begin(), cur.end(), w) != cur.end()) continue;
      bool ok = true;
      for (Element c : cur) ok = ok && v.adj(c, w);
      if (!ok) continue;
      cur.push_back(w);
      grow(cur);
      cur.pop_back();
    }
  };
  for (Element e : x)
    if (v.is_vertex(e)) {
      std::vector<Element> cur = {e};
      grow(cur);
    }
  for (const auto& c : cliques) {
    std::vector<Element> sorted = c;
    std::sort(sorted.begin(), sorted.end());
    do {
      u = sorted;
      u.insert(u.end(), x.begin(), x.end());
      holding.insert(std::to_string(sorted.size()) + ":" + zero_table(v, u).text());
    } while (std::next_permutation(sorted.begin(), sorted.end()));
  }
  std::string out = zero_table(v, x).text();
  for (const auto& s : holding) out += " | " + s;
  return out;
}

}  // namespace

ZeroTable zero_table_of(const Envelope& e, const std::vector<Element>& x) {
  View v(e);
  for (Element a : x)
    if (!e.structure.in_universe(a)) throw InvalidParameter("element out of range");
  return zero_table(v, x);
}

std::string k_table_of(const Envelope& e, int k, const std::vector<Element>& x) {
  require_k(k);
  View v(e);
  for (Element a : x)
    if (!e.structure.in_universe(a)) throw InvalidParameter("element out of range");
  return k_table(v, k, x);
}

namespace {

// The k-table identifier starts with the 0-table, which is much cheaper to compute.
bool table_may_match(const View& v, const std::vector<Element>& x, const std::string& table) {
  if (table.empty()) return true;
  std::string zero = zero_table(v, x).text();
  return table.compare(0, zero.size(), zero) == 0 && (table.size() == zero.size() || table[zero.size()] == ' ');
}

}  // namespace

std::optional<bool> phi_minus(const Envelope& e, int k, const PhiMinusQuery& query, const std::vector<int>& a,
                              const std::vector<int>& b, std::uint64_t budget) {
  require_k(k);
  if (a.size() != query.node_vars.size() || b.size() != query.vertex_vars.size())
    throw InvalidParameter("node or vertex tuple length does not match the query");
  View v(e);
  std::vector<std::vector<Element>> over(b.size());
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] < 0 || b[i] >= static_cast<int>(e.nodes.size())) throw InvalidParameter("node index out of range");
    for (Element x : v.verts)
      if (v.proj[x] == b[i]) over[i].push_back(x);
    total *= std::max<std::uint64_t>(over[i].size(), 1);
    if (over[i].empty()) return false;
    if (total > budget) return std::nullopt;
  }
  Assignment g;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= static_cast<int>(e.nodes.size())) throw InvalidParameter("node index out of range");
    g[query.node_vars[i]] = e.nodes[a[i]];
  }
  std::vector<std::size_t> pos(b.size(), 0);
  std::vector<Element> x(b.size());
  while (true) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      x[i] = over[i][pos[i]];
      g[query.vertex_vars[i]] = x[i];
    }
    if (table_may_match(v, x, query.table) && evaluate_pointwise(e.structure, query.phi, g) &&
        (query.table.empty() || k_table(v, k, x) == query.table))
      return true;
    std::size_t i = 0;
    while (i < b.size() && ++pos[i] == over[i].size()) pos[i++] = 0;
    if (i == b.size()) break;
  }
  return false;
}

// ---------------------------------------------------------------- relations to hypergraphs

namespace {

// Set partitions of {0..r-1} as restricted growth strings, in lexicographic order.
std::vector<std::vector<int>> partitions(int r) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void(int)> rec = [&](int blocks) {
    if (static_cast<int>(cur.size()) == r) {
      out.push_back(cur);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      cur.push_back(b);
      rec(std::max(blocks, b + 1));
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

}  // namespace

std::vector<IrreflexivePart> irreflexive_decomposition(const std::set<Tuple>& r, int arity) {
  if (arity < 0) throw InvalidParameter("negative arity");
  std::vector<IrreflexivePart> parts;
  std::map<std::vector<int>, std::size_t> where;
  for (auto& p : partitions(arity)) {
    where[p] = parts.size();
    parts.push_back({p, {}});
  }
  for (const auto& t : r) {
    if (static_cast<int>(t.size()) != arity) throw InvalidParameter("tuple length does not match the arity");
    std::vector<int> pattern;
    Tuple reps;
    for (Element e : t) {
      auto it = std::find(reps.begin(), reps.end(), e);
      if (it == reps.end()) {
        pattern.push_back(static_cast<int>(reps.size()));
        reps.push_back(e);
      } else {
        pattern.push_back(static_cast<int>(it - reps.begin()));
      }
    }
    parts[where.at(pattern)].tuples.insert(reps);
  }
  return parts;
}

std::set<Tuple> recompose(const std::vector<IrreflexivePart>& parts) {
  std::set<Tuple> out;
  for (const auto& p : parts)
    for (const auto& u : p.tuples) {
      Tuple t;
      for (int b : p.pattern) t.push_back(u.at(b));
      out.insert(t);
    }
  return out;
}

Multiset encode_oriented(const Tuple& t, int level) {
  const int r = static_cast<int>(t.size());
  if (r < 1) throw InvalidParameter("only positive arities are encoded");
  if (r * (r + 1) / 2 > level)
    throw InvalidParameter("arity " + std::to_string(r) + " does not fit level " + std::to_string(level));
  Multiset m;
  for (int i = 0; i < r; ++i) {
    if (m.count(t[i])) throw InvalidParameter("tuple is not irreflexive");
    m[t[i]] = i + 1;
  }
  m[t[r - 1]] += level - r * (r + 1) / 2;
  return m;
}

Hypergraph build_hypergraph(const Structure& m, const std::vector<LevelRelation>& rho) {
  if (m.size() < 2) throw InvalidParameter("a hypergraph needs at least 2 nodes");
  Hypergraph h;
  h.name = m.name();
  h.nodes = m.size();
  std::set<int> levels;
  for (const auto& rel : rho) {
    if (rel.level < 2) throw InvalidParameter("levels start at 2");
    if (!levels.insert(rel.level).second) throw InvalidParameter("level " + std::to_string(rel.level) + " given twice");
    if (rel.arity < 1 || rel.arity * (rel.arity + 1) / 2 > rel.level)
      throw InvalidParameter("arity " + std::to_string(rel.arity) + " violates r(r+1)/2 <= " + std::to_string(rel.level));
    for (const auto& t : rel.tuples) {
      if (static_cast<int>(t.size()) != rel.arity) throw InvalidParameter("tuple length does not match the arity");
      for (Element e : t)
        if (!m.in_universe(e)) throw InvalidParameter("tuple outside the universe");
    }
    // Levels above the structure size contribute nothing.
    if (rel.level > m.size()) continue;
    for (const auto& t : rel.tuples) h.edges.insert(encode_oriented(t, rel.level));
  }
  return h;
}

}  // namespace forge
