#include "forge/constructions.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "forge/error.hpp"
#include "forge/games.hpp"

namespace forge {

namespace {

void relation_names(const Formula& f, std::set<std::string>& out) {
  if (f->kind == NodeKind::Rel) out.insert(f->symbol);
  for (const auto& c : f->children) relation_names(c, out);
}

int segment_length(const IndexedStructure& g) {
  int j = 0;
  for (const auto& a : g.index.artifacts())
    if (a.kind == ArtifactKind::Segment) ++j;
  return j;
}

int clique_size(const IndexedStructure& g, const std::string& tag) {
  return static_cast<int>(g.index.at(tag).members.size());
}

// Table of a formula with at most one free variable, as a function of that variable.
struct UnaryTruth {
  Evaluator ev;
  Formula f;
  std::string var;

  UnaryTruth(const Structure& m, Formula f_) : ev(m), f(std::move(f_)) {
    auto vars = free_var_order(f);
    if (vars.size() > 1) throw ConstructionError("formula has more than one free variable: " + to_string(f));
    if (!vars.empty()) var = vars.front();
  }

  bool at(Element a) {
    Assignment g;
    if (!var.empty()) g[var] = a;
    return ev.evaluate(f, g);
  }
};

}  // namespace

// ---------------------------------------------------------------- labeled segments

FormulaList parse_delta_list(const std::string& text) {
  FormulaList out;
  Vocabulary vocab;
  vocab.add_relation("E", 2);
  std::istringstream in(text);
  std::string line;
  const std::regex aux(R"(\bS(\d+)\s*\()");
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const int i = static_cast<int>(out.size()) + 1;
    for (auto it = std::sregex_iterator(line.begin(), line.end(), aux); it != std::sregex_iterator(); ++it) {
      int r = std::stoi((*it)[1].str());
      if (r >= i)
        throw ConstructionError("S" + std::to_string(r) + " occurs in formula " + std::to_string(i));
    }
    Formula f = parse_formula(line, vocab);
    out.push_back(f);
    vocab.add_relation("S" + std::to_string(i), static_cast<int>(free_vars(f).size()));
  }
  return out;
}

BuildResult build_labeled_D(int j, const FormulaList& delta) {
  if (j < 1) throw InvalidParameter("j must be positive");
  for (std::size_t i = 1; i <= delta.size(); ++i) {
    const std::string s = "S" + std::to_string(i);
    for (std::size_t r = 1; r <= i; ++r) {
      std::set<std::string> names;
      relation_names(delta[r - 1], names);
      if (names.count(s)) throw ConstructionError(s + " occurs in formula " + std::to_string(r));
    }
  }
  BuildResult out{indexed_segment(j), {}};
  out.trace.stages.push_back(out.result);
  const int last = std::min<int>(j, static_cast<int>(delta.size()));
  for (int i = 1; i <= last; ++i) {
    const Formula& f = delta[i - 1];
    const std::string s = "S" + std::to_string(i);
    Table t = evaluate_table(out.result.structure, f);
    out.result.structure.declare_relation(s, static_cast<int>(t.vars.size()));
    StageRecord rec;
    rec.stage = i;
    rec.artifact = s;
    for (const auto& tuple : t.tuples()) out.result.structure.add_tuple(s, tuple);
    rec.delta = static_cast<int>(out.result.structure.relation(s).size());
    out.trace.records.push_back(rec);
    out.trace.stages.push_back(out.result);
  }
  return out;
}

// ---------------------------------------------------------------- one free variable

std::vector<int> clique_schedule(const FormulaList& theta) {
  std::vector<int> v{0};
  for (std::size_t i = 1; i <= theta.size(); ++i) {
    if (i > 28) throw ResourceError("clique schedule overflows");
    v.push_back(std::max(count_vars(theta[i - 1]), v.back() + (1 << (i + 1))));
  }
  return v;
}

std::string clique_tag(int d, int level) { return "C[d" + std::to_string(d + 1) + "," + std::to_string(level) + "]"; }

BuildResult build_H(int j, const FormulaList& theta, const Corruption& corrupt) {
  if (j < 1) throw InvalidParameter("j must be positive");
  for (const auto& f : theta)
    if (free_vars(f).size() > 1) throw ConstructionError("formula has more than one free variable: " + to_string(f));
  const auto v = clique_schedule(theta);
  const int last = std::min<int>(j, static_cast<int>(theta.size()));
  BuildResult out{indexed_segment(j), {}};
  IndexedStructure& h = out.result;
  out.trace.sizes = v;
  for (int d = 0; d < j; ++d)
    for (int i = 1; i <= last; ++i) {
      int size = v[i] - (corrupt.undersized_level == i ? 1 : 0);
      attach_clique(h, d, size, clique_tag(d, i));
      Artifact& a = h.index.at(clique_tag(d, i));
      a.level = i;
      a.base_size = size;
    }
  out.trace.stages.push_back(h);
  for (int i = 1; i <= last; ++i) {
    const IndexedStructure prev = h;
    UnaryTruth truth(prev.structure, theta[i - 1]);
    for (int d = 0; d < j; ++d) {
      std::vector<int> bits{truth.at(d)};
      for (int s = 1; s <= i; ++s) {
        const auto& members = prev.index.at(clique_tag(d, s)).members;
        if (members.empty()) {
          bits.push_back(0);
          continue;
        }
        Element rep = *std::min_element(members.begin(), members.end());
        bool b = truth.at(rep);
        for (Element m : members)
          if (truth.at(m) != b)
            throw ConstructionError("representative dependence in " + clique_tag(d, s) + " at stage " +
                                    std::to_string(i));
        bits.push_back(b);
      }
      int n = 0;
      for (int s = 0; s <= i; ++s) n |= bits[s] << s;
      if (n > (1 << (i + 1)) - 1) throw ConstructionError("bit capacity exceeded");
      if (static_cast<std::size_t>(i + 1) < v.size() && v[i] + n >= v[i + 1])
        throw ConstructionError("grown clique reaches the next level size");
      StageRecord rec;
      rec.stage = i;
      rec.artifact = clique_tag(d, i);
      rec.old_size = clique_size(h, rec.artifact);
      rec.delta = n;
      rec.bits = bits;
      grow_clique(h, rec.artifact, n);
      out.trace.records.push_back(rec);
    }
    for (int d = 0; d < j; ++d)
      for (int s = 1; s < i; ++s)
        if (clique_size(h, clique_tag(d, s)) != clique_size(prev, clique_tag(d, s)))
          throw ConstructionError("stage " + std::to_string(i) + " changed a lower-level clique");
    out.trace.stages.push_back(h);
  }
  if (corrupt.extra_growth_level >= 1 && corrupt.extra_growth_level <= last) {
    grow_clique(h, clique_tag(0, corrupt.extra_growth_level), 1);
    out.trace.stages.back() = h;
  }
  return out;
}

bool decode_phi(const IndexedStructure& h, int i, Element a, const FormulaList& theta) {
  if (i < 1 || i > static_cast<int>(theta.size())) throw InvalidParameter("formula index out of range");
  if (!h.structure.in_universe(a)) throw InvalidParameter("element outside universe");
  const auto v = clique_schedule(theta);
  const Artifact* own = h.index.owner(a);
  if (!own) throw InvalidParameter("element " + std::to_string(a) + " has no artifact");
  Element d;
  int s;
  if (own->kind == ArtifactKind::Segment) {
    d = a;
    s = 0;
  } else if (own->kind == ArtifactKind::Clique && own->targets.size() == 1) {
    d = own->targets.front();
    s = std::min(i, own->level);
  } else {
    throw InvalidParameter("element " + std::to_string(a) + " is not part of a one-variable construction");
  }
  const std::string tag = clique_tag(d, i);
  if (!h.index.has(tag)) throw InvalidParameter("formula index out of range for this structure");
  int n = clique_size(h, tag) - v[i];
  if (n < 0) return false;
  return (n >> s) & 1;
}

// ---------------------------------------------------------------- arbitrary arity

std::vector<int> arity_schedule(const FormulaList& gamma) {
  std::vector<long long> a{1};
  std::vector<int> out{1};
  for (const auto& f : gamma) {
    long long next = 1 + a.back() * 2 * static_cast<long long>(free_vars(f).size());
    if (next > 1'000'000) throw ResourceError("arity schedule overflows");
    a.push_back(next);
    out.push_back(static_cast<int>(next));
  }
  return out;
}

std::vector<int> gadget_clique_schedule(const FormulaList& gamma) {
  const auto a = arity_schedule(gamma);
  std::vector<int> w{0};
  for (std::size_t i = 1; i <= gamma.size(); ++i) w.push_back(std::max(count_vars(gamma[i - 1]), 1 + w.back() + a[i - 1]));
  return w;
}

namespace {

struct CliqueSlot {
  int d;  // 0-based segment vertex
  std::string tag;
};

std::vector<CliqueSlot> gadget_cliques(const IndexedStructure& g, const std::string& gadget) {
  std::vector<CliqueSlot> out;
  for (const auto& a : g.index.artifacts())
    if (a.parent == gadget && a.kind == ArtifactKind::Clique) out.push_back({a.targets.front(), a.tag});
  return out;
}

std::vector<std::string> gadgets_at(const IndexedStructure& g, int level) {
  std::vector<std::string> out;
  for (const auto& a : g.index.artifacts())
    if (a.kind == ArtifactKind::Gadget && a.level == level) out.push_back(a.tag);
  return out;
}

bool is_modified(const std::vector<int>& seq) {
  return std::any_of(seq.begin(), seq.end(), [](int x) { return x != 0; });
}

void check_free(const FormulaList& gamma) {
  for (std::size_t i = 0; i < gamma.size(); ++i)
    if (free_vars(gamma[i]).empty())
      throw InvalidParameter("formula " + std::to_string(i + 1) + " has no free variable; add a dummy one");
}

}  // namespace

std::string add_gadget(IndexedStructure& g, int level, int arity, int w) {
  const int j = segment_length(g);
  const std::string tag = "T" + std::to_string(level) + "." + std::to_string(gadgets_at(g, level).size() + 1);
  Artifact gadget;
  gadget.tag = tag;
  gadget.kind = ArtifactKind::Gadget;
  gadget.level = level;
  gadget.base_size = arity;
  g.index.add(gadget);
  Element apex = g.structure.add_element(tag + "/t");
  Artifact top;
  top.tag = tag + "/t";
  top.kind = ArtifactKind::Apex;
  top.members = {apex};
  top.level = level;
  top.base_size = 1;
  top.parent = tag;
  g.index.add(top);
  for (int d = 0; d < j; ++d)
    for (int c = 1; c <= arity; ++c) {
      const std::string ct = tag + "/d" + std::to_string(d + 1) + "c" + std::to_string(c);
      attach_clique(g, d, 0, ct);
      Artifact& a = g.index.at(ct);
      a.sources = {apex};
      a.parent = tag;
      a.level = level;
      a.base_size = w;
      grow_clique(g, ct, w);
    }
  return tag;
}

void write_slots(IndexedStructure& g, const std::string& gadget, const std::vector<int>& sequence) {
  const Artifact& ga = g.index.at(gadget);
  if (ga.kind != ArtifactKind::Gadget) throw InvalidParameter(gadget + " is not a gadget");
  const int arity = ga.base_size;
  const int j = segment_length(g);
  if (static_cast<int>(sequence.size()) > arity) throw ConstructionError("sequence longer than the gadget arity");
  if (is_modified(read_slots(g, gadget))) throw ConstructionError(gadget + " already encodes a sequence");
  auto cliques = gadget_cliques(g, gadget);
  std::vector<std::size_t> cursor(j, 0);
  std::vector<std::vector<std::string>> by_d(j);
  for (const auto& c : cliques) by_d[c.d].push_back(c.tag);
  for (std::size_t q = 1; q <= sequence.size(); ++q) {
    int d = sequence[q - 1];
    if (d == 0) continue;
    if (d < 0 || d > j) throw ConstructionError("slot value " + std::to_string(d) + " outside 0.." + std::to_string(j));
    if (cursor[d - 1] >= by_d[d - 1].size()) throw ConstructionError("gadget out of cliques at d" + std::to_string(d));
    grow_clique(g, by_d[d - 1][cursor[d - 1]++], static_cast<int>(q));
  }
}

std::vector<int> read_slots(const IndexedStructure& g, const std::string& gadget) {
  const Artifact& ga = g.index.at(gadget);
  if (ga.kind != ArtifactKind::Gadget) throw InvalidParameter(gadget + " is not a gadget");
  std::vector<int> seq(ga.base_size, 0);
  for (const auto& c : gadget_cliques(g, gadget)) {
    const Artifact& a = g.index.at(c.tag);
    int growth = static_cast<int>(a.members.size()) - a.base_size;
    if (growth == 0) continue;
    if (growth < 0 || growth > ga.base_size || seq[growth - 1] != 0)
      throw ConstructionError("gadget " + gadget + " has an inconsistent clique " + c.tag);
    seq[growth - 1] = c.d + 1;
  }
  return seq;
}

std::vector<int> element_code(const IndexedStructure& g, int i, Element a, const FormulaList& gamma) {
  if (i < 1 || i > static_cast<int>(gamma.size())) throw InvalidParameter("formula index out of range");
  const auto arity = arity_schedule(gamma);
  const int width = arity[i - 1];
  std::vector<int> code(2 * width, 0);
  const Artifact* own = g.index.owner(a);
  if (!own) throw InvalidParameter("element " + std::to_string(a) + " has no artifact");
  if (own->kind == ArtifactKind::Segment) {
    code[0] = a + 1;
    return code;
  }
  if (own->parent.empty()) throw InvalidParameter("element " + std::to_string(a) + " is not in a gadget");
  const Artifact& gadget = g.index.at(own->parent);
  const int t = gadget.level;
  std::vector<int> seq;
  if (t < i) seq = read_slots(g, gadget.tag);
  if (t < i && is_modified(seq)) {
    if (static_cast<int>(seq.size()) > width) throw ConstructionError("gadget longer than the slot width");
    std::copy(seq.begin(), seq.end(), code.begin());
    if (own->kind == ArtifactKind::Clique) {
      const int d = own->targets.front() + 1;
      const int growth = static_cast<int>(own->members.size()) - own->base_size;
      if (growth > 0) {
        code[width + growth - 1] = d;
      } else {
        code[width] = d;
        code[width + 1] = d;
      }
    }
    return code;
  }
  code[0] = own->kind == ArtifactKind::Clique ? own->targets.front() + 1 : 0;
  code[1] = t;
  return code;
}

std::vector<int> tuple_sequence(const IndexedStructure& g, int i, const Tuple& t, const FormulaList& gamma) {
  std::vector<int> seq;
  for (Element a : t) {
    auto c = element_code(g, i, a, gamma);
    seq.insert(seq.end(), c.begin(), c.end());
  }
  seq.push_back(1);
  return seq;
}

std::vector<int> colocation(const IndexedStructure& g, const Tuple& t) {
  std::vector<int> out;
  for (std::size_t p = 0; p < t.size(); ++p)
    for (std::size_t q = p + 1; q < t.size(); ++q) {
      const Artifact* a = g.index.owner(t[p]);
      const Artifact* b = g.index.owner(t[q]);
      if (t[p] == t[q])
        out.push_back(0);
      else if (a && a == b)
        out.push_back(1);
      else if (a && b && !a->parent.empty() && a->parent == b->parent)
        out.push_back(2);
      else
        out.push_back(3);
    }
  return out;
}

Element decode_segment_code(const IndexedStructure& g, const std::vector<int>& code) {
  if (code.empty() || code[0] < 1 || code[0] > segment_length(g)) return -1;
  for (std::size_t i = 1; i < code.size(); ++i)
    if (code[i] != 0) return -1;
  return code[0] - 1;
}

BuildResult build_G(int j, const FormulaList& gamma, GadgetPolicy policy, int universe_cap) {
  if (j < 1) throw InvalidParameter("j must be positive");
  check_free(gamma);
  const auto arity = arity_schedule(gamma);
  const auto w = gadget_clique_schedule(gamma);
  const int last = std::min<int>(j, static_cast<int>(gamma.size()));
  std::vector<long long> count(last + 1, 1);
  if (policy == GadgetPolicy::Faithful)
    for (int i = 1; i <= last; ++i) {
      long long n = 1;
      for (int s = 0; s < arity[i]; ++s) {
        n *= j + 1;
        if (n > universe_cap) throw ResourceError("faithful gadget count (j+1)^A_" + std::to_string(i) + " exceeds the cap");
      }
      count[i] = n;
    }
  while (true) {
    long long estimate = j;
    for (int i = 1; i <= last; ++i)
      estimate += count[i] * (1 + static_cast<long long>(j) * arity[i] * w[i] +
                              static_cast<long long>(arity[i]) * (arity[i] + 1) / 2);
    if (estimate > universe_cap)
      throw ResourceError("estimated universe size " + std::to_string(estimate) + " exceeds the cap " +
                          std::to_string(universe_cap));
    BuildResult out{indexed_segment(j), {}};
    IndexedStructure& g = out.result;
    out.trace.sizes = w;
    out.trace.arities = arity;
    out.trace.policy = policy == GadgetPolicy::Lean ? "lean" : "faithful";
    out.trace.gadgets.assign(count.begin(), count.end());
    for (int i = 1; i <= last; ++i)
      for (long long r = 0; r < count[i]; ++r) add_gadget(g, i, arity[i], w[i]);
    out.trace.stages.push_back(g);
    bool grow = false;
    for (int i = 1; i <= last && !grow; ++i) {
      const IndexedStructure prev = g;
      Table t = evaluate_table(prev.structure, gamma[i - 1]);
      std::map<std::pair<std::vector<int>, std::vector<int>>, Tuple> keys;
      std::vector<std::pair<std::vector<int>, std::vector<int>>> order;
      for (const auto& tuple : t.tuples()) {
        auto key = std::make_pair(tuple_sequence(prev, i, tuple, gamma), colocation(prev, tuple));
        if (keys.emplace(key, tuple).second) order.push_back(key);
      }
      auto free_gadgets = gadgets_at(prev, i);
      const long long needed = static_cast<long long>(order.size()) + (policy == GadgetPolicy::Lean ? 1 : 0);
      if (needed > static_cast<long long>(free_gadgets.size())) {
        if (policy == GadgetPolicy::Faithful)
          throw ConstructionError("level " + std::to_string(i) + " needs " + std::to_string(order.size()) +
                                  " gadgets, only " + std::to_string(free_gadgets.size()) + " allocated");
        count[i] = needed;
        grow = true;
        break;
      }
      for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& key = order[r];
        StageRecord rec;
        rec.stage = i;
        rec.artifact = free_gadgets[r];
        rec.old_size = static_cast<int>(j) * arity[i] * w[i] + 1;
        rec.delta = 0;
        for (std::size_t q = 1; q <= key.first.size(); ++q)
          if (key.first[q - 1]) rec.delta += static_cast<int>(q);
        rec.sequence = key.first;
        rec.tuple = keys.at(key);
        write_slots(g, free_gadgets[r], key.first);
        g.index.at(free_gadgets[r]).payload = key.second;
        out.trace.records.push_back(rec);
      }
      for (const auto& a : prev.index.artifacts())
        if (a.kind == ArtifactKind::Clique && a.level < i &&
            g.index.at(a.tag).members.size() != a.members.size())
          throw ConstructionError("stage " + std::to_string(i) + " changed a lower-level clique");
      out.trace.stages.push_back(g);
    }
    if (!grow) return out;
  }
}

bool decode_psi(const IndexedStructure& g, int i, const Tuple& t, const FormulaList& gamma) {
  if (i < 1 || i > static_cast<int>(gamma.size())) throw InvalidParameter("formula index out of range");
  if (t.size() != free_vars(gamma[i - 1]).size()) throw InvalidParameter("tuple length differs from the free variable count");
  for (Element a : t)
    if (!g.structure.in_universe(a)) throw InvalidParameter("element outside universe");
  auto gadgets = gadgets_at(g, i);
  if (gadgets.empty() && segment_length(g) < i) throw InvalidParameter("formula index out of range for this structure");
  const auto seq = tuple_sequence(g, i, t, gamma);
  const auto pattern = colocation(g, t);
  for (const auto& tag : gadgets)
    if (g.index.at(tag).payload == pattern && read_slots(g, tag) == seq) return true;
  return false;
}

// ---------------------------------------------------------------- elementary substructure

std::vector<Tuple> sample_tuples(const Structure& m, int count, int max_length, std::uint64_t seed) {
  if (m.size() == 0 || max_length < 1) throw InvalidParameter("cannot sample from an empty universe");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, max_length), elem(0, m.size() - 1);
  std::vector<Tuple> out;
  for (int c = 0; c < count; ++c) {
    Tuple t(len(rng));
    for (auto& e : t) e = elem(rng);
    out.push_back(t);
  }
  return out;
}

SubstructureReport verify_elementary_substructure(const BuildTrace& trace, int i, const std::vector<Tuple>& sample,
                                                  int k, const SubstructureOptions& opts) {
  if (i < 1 || i > static_cast<int>(trace.stages.size())) throw InvalidParameter("stage out of range");
  if (k < 1) throw InvalidParameter("k must be positive");
  const Structure& s = trace.stages[i - 1].structure;
  const Structure& t = trace.stages.back().structure;
  SubstructureReport rep;
  rep.rank = opts.rank;
  std::size_t longest = 0;
  for (const auto& tuple : sample) {
    longest = std::max(longest, tuple.size());
    for (Element e : tuple)
      if (!s.in_universe(e)) throw InvalidParameter("sample element outside the stage universe");
  }
  auto power = [](std::size_t n, int e) {
    double p = 1;
    for (int c = 0; c < e; ++c) p *= static_cast<double>(n);
    return p;
  };
  const double budget = static_cast<double>(opts.budget);
  const double n = static_cast<double>(std::max(s.size(), t.size()));
  auto game_cost = [&](int v) {
    double pos = power(s.size(), v - 1) + power(t.size(), v - 1);
    return std::max(pos, pos * n * (v - 1) / 25.0);
  };
  int kg = k;
  while (kg > 1 && game_cost(kg) > budget) --kg;
  int kf = std::min(k, opts.max_formula_vars);
  auto type_cost = [&](int v) {
    double pos = power(s.size() + 1, v) + power(t.size() + 1, v);
    return std::max(pos * (opts.rank + 1), pos * n * v * opts.rank / 25.0);
  };
  while (kf > 1 && type_cost(kf) > budget) --kf;
  rep.game_pebbles = kg;
  rep.formula_vars = kf;
  if (static_cast<int>(longest) > kg || type_cost(kf) > budget) {
    rep.indeterminate = true;
    rep.pass = false;
    rep.violations.push_back("budget too small for the requested check");
    return rep;
  }
  PebbleSolver game(s, t, kg, opts.budget * 4);
  RankTypes types(s, t, kf, opts.rank, opts.budget * 4);
  for (const auto& tuple : sample) {
    std::string name = "(";
    for (std::size_t p = 0; p < tuple.size(); ++p) name += (p ? "," : "") + std::to_string(tuple[p]);
    name += ")";
    PartialMap init;
    for (std::size_t p = 0; p < tuple.size(); ++p) init.pairs.push_back({static_cast<int>(p) + 1, tuple[p], tuple[p]});
    auto g = game.from(init);
    if (!g.duplicator) rep.violations.push_back("tuple " + name + ": Spoiler wins the " + std::to_string(kg) + "-pebble game: " + g.witness);
    if (static_cast<int>(tuple.size()) <= kf && !types.agree(tuple, tuple)) {
      DistinguishOptions d;
      d.enumeration_cap = 2000;
      auto w = distinguishing_formula(s, t, kf, opts.rank, tuple, tuple, d);
      rep.violations.push_back("tuple " + name + ": formula " + (w.formula ? to_string(*w.formula) : "?") +
                               " differs between stage " + std::to_string(i - 1) + " and the final stage");
    }
    ++rep.checked;
  }
  rep.pass = rep.violations.empty();
  return rep;
}

}  // namespace forge
