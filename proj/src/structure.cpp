#include "forge/structure.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

void Vocabulary::add_relation(const std::string& name, int arity) {
  if (arity < 0) throw InvalidParameter("negative arity for " + name);
  if (this->arity(name) || has_constant(name))
    throw InvalidParameter("duplicate symbol " + name);
  RelationSymbol s{name, arity};
  auto it = std::lower_bound(relations_.begin(), relations_.end(), s,
                             [](const auto& a, const auto& b) { return a.name < b.name; });
  relations_.insert(it, s);
}

void Vocabulary::add_constant(const std::string& name) {
  if (arity(name) || has_constant(name)) throw InvalidParameter("duplicate symbol " + name);
  constants_.insert(std::lower_bound(constants_.begin(), constants_.end(), name), name);
}

std::optional<int> Vocabulary::arity(const std::string& name) const {
  for (const auto& r : relations_)
    if (r.name == name) return r.arity;
  return std::nullopt;
}

bool Vocabulary::has_constant(const std::string& name) const {
  return std::binary_search(constants_.begin(), constants_.end(), name);
}

int Vocabulary::max_arity() const {
  int m = 0;
  for (const auto& r : relations_) m = std::max(m, r.arity);
  return m;
}

bool Relation::insert(Tuple t) {
  if (static_cast<int>(t.size()) != arity_)
    throw InvalidParameter("tuple length " + std::to_string(t.size()) + " for arity " +
                           std::to_string(arity_));
  return tuples_.insert(std::move(t)).second;
}

std::vector<Tuple> Relation::sorted() const {
  std::vector<Tuple> v(tuples_.begin(), tuples_.end());
  std::sort(v.begin(), v.end());
  return v;
}

Structure::Structure(int n, std::string name) : name_(std::move(name)) {
  if (n < 0) throw InvalidParameter("negative universe size");
  size_ = n;
  labels_.assign(n, "");
}

Element Structure::add_element(const std::string& label) {
  Element e = size_++;
  labels_.emplace_back();
  if (!label.empty()) set_label(e, label);
  return e;
}

void Structure::declare_relation(const std::string& name, int arity) {
  auto it = relations_.find(name);
  if (it != relations_.end()) {
    if (it->second.arity() != arity) throw ArityError("relation " + name + " redeclared");
    return;
  }
  if (arity < 0) throw InvalidParameter("negative arity for " + name);
  relations_.emplace(name, Relation(arity));
}

const Relation& Structure::relation(const std::string& name) const {
  auto it = relations_.find(name);
  if (it == relations_.end()) throw InvalidParameter("unknown relation " + name);
  return it->second;
}

bool Structure::add_tuple(const std::string& name, Tuple t) {
  auto it = relations_.find(name);
  if (it == relations_.end()) throw InvalidParameter("unknown relation " + name);
  for (Element e : t)
    if (!in_universe(e)) throw InvalidParameter("element " + std::to_string(e) + " outside universe");
  return it->second.insert(std::move(t));
}

bool Structure::holds(const std::string& name, const Tuple& t) const {
  return relation(name).contains(t);
}

const std::string& Structure::label(Element e) const {
  if (!in_universe(e)) throw InvalidParameter("element outside universe");
  return labels_[e];
}

void Structure::set_label(Element e, const std::string& label) {
  if (!in_universe(e)) throw InvalidParameter("element outside universe");
  if (label.empty() || label.find_first_of(" \t\n#") != std::string::npos)
    throw InvalidParameter("bad label '" + label + "'");
  auto it = label_index_.find(label);
  if (it != label_index_.end() && it->second != e) throw InvalidParameter("duplicate label " + label);
  if (!labels_[e].empty()) label_index_.erase(labels_[e]);
  labels_[e] = label;
  label_index_[label] = e;
}

std::optional<Element> Structure::find_label(const std::string& label) const {
  auto it = label_index_.find(label);
  if (it == label_index_.end()) return std::nullopt;
  return it->second;
}

void Structure::set_constant(const std::string& name, Element e) {
  if (!in_universe(e)) throw InvalidParameter("constant outside universe");
  constants_[name] = e;
}

std::optional<Element> Structure::constant(const std::string& name) const {
  auto it = constants_.find(name);
  if (it == constants_.end()) return std::nullopt;
  return it->second;
}

Vocabulary Structure::vocabulary() const {
  Vocabulary v;
  for (const auto& [name, rel] : relations_) v.add_relation(name, rel.arity());
  for (const auto& [name, e] : constants_) v.add_constant(name);
  return v;
}

bool Structure::operator==(const Structure& o) const {
  return size_ == o.size_ && relations_ == o.relations_ && labels_ == o.labels_ &&
         constants_ == o.constants_;
}

Structure new_segment(int j) {
  if (j < 1) throw InvalidParameter("segment length must be positive");
  Structure s(0, "segment" + std::to_string(j));
  for (int k = 1; k <= j; ++k) s.add_element("d" + std::to_string(k));
  s.declare_relation("E", 2);
  for (int k = 0; k + 1 < j; ++k) s.add_tuple("E", {k, k + 1});
  return s;
}

Structure induced_substructure(const Structure& m, const std::vector<Element>& x) {
  if (x.empty()) throw InvalidParameter("empty element set");
  std::vector<Element> sorted(x);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<Element> remap(m.size(), -1);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!m.in_universe(sorted[i])) throw InvalidParameter("element outside universe");
    remap[sorted[i]] = static_cast<Element>(i);
  }
  Structure out(0, m.name());
  for (Element e : sorted) out.add_element(m.label(e));
  for (const auto& [name, rel] : m.relations()) {
    out.declare_relation(name, rel.arity());
    for (const auto& t : rel.tuples()) {
      Tuple u;
      u.reserve(t.size());
      bool inside = true;
      for (Element e : t) {
        if (remap[e] < 0) {
          inside = false;
          break;
        }
        u.push_back(remap[e]);
      }
      if (inside) out.add_tuple(name, std::move(u));
    }
  }
  for (const auto& [name, e] : m.constants())
    if (remap[e] >= 0) out.set_constant(name, remap[e]);
  return out;
}

Structure replace_with_clique(const Structure& f, Element v, int i) {
  if (!f.in_universe(v)) throw InvalidParameter("vertex outside universe");
  if (i < 1) throw InvalidParameter("clique size must be positive");
  std::string edge;
  for (const auto& [name, rel] : f.relations()) {
    if (rel.arity() != 2 || !edge.empty())
      throw InvalidParameter("replace_with_clique needs exactly one binary relation");
    edge = name;
  }
  if (edge.empty()) throw InvalidParameter("replace_with_clique needs exactly one binary relation");

  Structure out(0, f.name());
  std::vector<Element> remap(f.size(), -1);
  for (Element e = 0; e < f.size(); ++e)
    if (e != v) remap[e] = out.add_element(f.label(e));
  std::vector<Element> clique;
  for (int c = 1; c <= i; ++c)
    clique.push_back(out.add_element(f.label(v).empty() ? "" : f.label(v) + "." + std::to_string(c)));
  out.declare_relation(edge, 2);
  for (const auto& t : f.relation(edge).tuples()) {
    if (t[0] == v && t[1] == v) {
      for (Element c : clique) out.add_tuple(edge, {c, c});
    } else if (t[0] == v) {
      for (Element c : clique) out.add_tuple(edge, {c, remap[t[1]]});
    } else if (t[1] == v) {
      for (Element c : clique) out.add_tuple(edge, {remap[t[0]], c});
    } else {
      out.add_tuple(edge, {remap[t[0]], remap[t[1]]});
    }
  }
  for (Element a : clique)
    for (Element b : clique)
      if (a != b) out.add_tuple(edge, {a, b});
  for (const auto& [name, e] : f.constants())
    out.set_constant(name, e == v ? clique.front() : remap[e]);
  return out;
}

Artifact& GadgetIndex::add(Artifact a) {
  if (has(a.tag)) throw InvalidParameter("duplicate artifact tag " + a.tag);
  std::size_t idx = artifacts_.size();
  by_tag_[a.tag] = idx;
  if (a.kind != ArtifactKind::Gadget)
    for (Element e : a.members)
      if (!owner_.emplace(e, idx).second)
        throw InvalidParameter("element " + std::to_string(e) + " already owned");
  artifacts_.push_back(std::move(a));
  return artifacts_.back();
}

const Artifact& GadgetIndex::at(const std::string& tag) const {
  auto it = by_tag_.find(tag);
  if (it == by_tag_.end()) throw InvalidParameter("unknown artifact " + tag);
  return artifacts_[it->second];
}

Artifact& GadgetIndex::at(const std::string& tag) {
  auto it = by_tag_.find(tag);
  if (it == by_tag_.end()) throw InvalidParameter("unknown artifact " + tag);
  return artifacts_[it->second];
}

const Artifact* GadgetIndex::owner(Element e) const {
  auto it = owner_.find(e);
  return it == owner_.end() ? nullptr : &artifacts_[it->second];
}

void GadgetIndex::record_member(const std::string& tag, Element e) {
  auto it = by_tag_.find(tag);
  if (it == by_tag_.end()) throw InvalidParameter("unknown artifact " + tag);
  if (!owner_.emplace(e, it->second).second)
    throw InvalidParameter("element " + std::to_string(e) + " already owned");
  artifacts_[it->second].members.push_back(e);
}

IndexedStructure indexed_segment(int j) {
  IndexedStructure g{new_segment(j), {}};
  for (Element e = 0; e < j; ++e) {
    Artifact a;
    a.tag = g.structure.label(e);
    a.kind = ArtifactKind::Segment;
    a.members = {e};
    a.base_size = 1;
    g.index.add(std::move(a));
  }
  return g;
}

namespace {

Element add_clique_member(IndexedStructure& g, Artifact& a, const std::string& relation) {
  Element x = g.structure.add_element(a.tag + "." + std::to_string(a.members.size()));
  for (Element m : a.members) {
    g.structure.add_tuple(relation, {x, m});
    g.structure.add_tuple(relation, {m, x});
  }
  for (Element t : a.targets) g.structure.add_tuple(relation, {x, t});
  for (Element s : a.sources) g.structure.add_tuple(relation, {s, x});
  return x;
}

}  // namespace

const Artifact& attach_clique(IndexedStructure& g, Element d, int size, const std::string& tag,
                              const std::string& relation) {
  if (!g.structure.in_universe(d)) throw InvalidParameter("attachment target outside universe");
  if (size < 0) throw InvalidParameter("negative clique size");
  g.structure.declare_relation(relation, 2);
  Artifact a;
  a.tag = tag;
  a.kind = ArtifactKind::Clique;
  a.targets = {d};
  a.base_size = size;
  Artifact& stored = g.index.add(std::move(a));
  for (int c = 0; c < size; ++c) {
    Element x = add_clique_member(g, stored, relation);
    g.index.record_member(tag, x);
  }
  return g.index.at(tag);
}

void grow_clique(IndexedStructure& g, const std::string& tag, int delta, const std::string& relation) {
  if (!g.index.has(tag)) throw InvalidParameter("unknown artifact " + tag);
  if (delta < 0) throw InvalidParameter("negative growth");
  Artifact& a = g.index.at(tag);
  if (a.kind != ArtifactKind::Clique) throw InvalidParameter(tag + " is not a clique");
  for (int c = 0; c < delta; ++c) {
    Element x = add_clique_member(g, g.index.at(tag), relation);
    g.index.record_member(tag, x);
  }
}

std::vector<int> clique_inventory(const IndexedStructure& g, Element d, int bound) {
  if (!g.structure.in_universe(d)) throw InvalidParameter("vertex outside universe");
  std::vector<int> sizes;
  for (const auto& a : g.index.artifacts()) {
    if (a.kind != ArtifactKind::Clique) continue;
    if (std::find(a.targets.begin(), a.targets.end(), d) == a.targets.end()) continue;
    int s = static_cast<int>(a.members.size());
    if (s < bound) sizes.push_back(s);
  }
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

std::vector<std::string> audit_index(const IndexedStructure& g) {
  std::vector<std::string> problems;
  const Structure& s = g.structure;
  std::vector<int> owners(s.size(), 0);
  for (const auto& a : g.index.artifacts()) {
    if (a.kind == ArtifactKind::Gadget) continue;
    for (Element e : a.members) {
      if (!s.in_universe(e)) {
        problems.push_back(a.tag + ": member outside universe");
        continue;
      }
      ++owners[e];
    }
    if (a.kind != ArtifactKind::Clique) continue;
    if (!s.has_relation("E")) {
      problems.push_back(a.tag + ": no edge relation");
      continue;
    }
    const Relation& e = s.relation("E");
    for (Element x : a.members) {
      for (Element y : a.members)
        if (x != y && !e.contains({x, y})) problems.push_back(a.tag + ": missing clique edge");
      for (Element t : a.targets)
        if (!e.contains({x, t})) problems.push_back(a.tag + ": missing target edge");
      for (Element src : a.sources)
        if (!e.contains({src, x})) problems.push_back(a.tag + ": missing source edge");
    }
  }
  if (!g.index.artifacts().empty())
    for (Element e = 0; e < s.size(); ++e)
      if (owners[e] != 1)
        problems.push_back("element " + std::to_string(e) + " owned by " + std::to_string(owners[e]) +
                           " artifacts");
  return problems;
}

std::string print_structure(const Structure& m) {
  std::ostringstream out;
  out << "structure " << m.name() << "\n";
  out << "universe " << m.size() << "\n";
  for (Element e = 0; e < m.size(); ++e)
    if (!m.label(e).empty()) out << "label " << e << " " << m.label(e) << "\n";
  for (const auto& [name, e] : m.constants()) out << "const " << name << " " << e << "\n";
  for (const auto& [name, rel] : m.relations()) {
    out << "rel " << name << "/" << rel.arity() << "\n";
    for (const auto& t : rel.sorted()) {
      if (t.empty()) {
        out << "()\n";
        continue;
      }
      for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << t[i];
      out << "\n";
    }
  }
  return out.str();
}

namespace {

int parse_int(const std::string& tok, std::size_t line) {
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

Structure parse_structure(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::optional<Structure> m;
  std::string name;
  std::string current;
  bool have_universe = false;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (name.empty()) {
      if (tok[0] != "structure" || tok.size() != 2) throw ParseError("expected 'structure <name>'", line_no);
      name = tok[1];
      continue;
    }
    if (!have_universe) {
      if (tok[0] != "universe" || tok.size() != 2) throw ParseError("expected 'universe <n>'", line_no);
      m.emplace(parse_int(tok[1], line_no), name);
      have_universe = true;
      continue;
    }
    try {
      if (tok[0] == "label") {
        if (tok.size() != 3) throw ParseError("expected 'label <id> <string>'", line_no);
        m->set_label(parse_int(tok[1], line_no), tok[2]);
        current.clear();
      } else if (tok[0] == "const") {
        if (tok.size() != 3) throw ParseError("expected 'const <name> <id>'", line_no);
        m->set_constant(tok[1], parse_int(tok[2], line_no));
        current.clear();
      } else if (tok[0] == "rel") {
        auto slash = tok.size() == 2 ? tok[1].find('/') : std::string::npos;
        if (slash == std::string::npos) throw ParseError("expected 'rel <name>/<arity>'", line_no);
        current = tok[1].substr(0, slash);
        if (current.empty()) throw ParseError("empty relation name", line_no);
        if (m->has_relation(current)) throw ParseError("relation " + current + " declared twice", line_no);
        m->declare_relation(current, parse_int(tok[1].substr(slash + 1), line_no));
      } else {
        if (current.empty()) throw ParseError("tuple outside a relation block", line_no);
        Tuple t;
        if (!(tok.size() == 1 && tok[0] == "()"))
          for (const auto& x : tok) t.push_back(parse_int(x, line_no));
        if (static_cast<int>(t.size()) != m->relation(current).arity())
          throw ParseError("tuple length does not match arity of " + current, line_no);
        m->add_tuple(current, std::move(t));
      }
    } catch (const InvalidParameter& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!m) throw ParseError("missing header", line_no);
  return *m;
}

bool brute_force_isomorphic(const Structure& a, const Structure& b) {
  if (a.size() != b.size()) return false;
  if (a.vocabulary() != b.vocabulary()) return false;
  for (const auto& [name, rel] : a.relations())
    if (rel.size() != b.relation(name).size()) return false;
  const int n = a.size();
  std::vector<Element> f(n, -1);
  std::vector<bool> used(n, false);

  auto check_all = [&]() {
    for (const auto& [name, rel] : a.relations()) {
      const Relation& rb = b.relation(name);
      for (const auto& t : rel.tuples()) {
        Tuple u;
        for (Element e : t) u.push_back(f[e]);
        if (!rb.contains(u)) return false;
      }
    }
    for (const auto& [name, e] : a.constants())
      if (f[e] != *b.constant(name)) return false;
    return true;
  };
  // Binary and unary facts among the first `upto` assigned elements.
  auto check_prefix = [&](Element x) {
    for (const auto& [name, rel] : a.relations()) {
      const Relation& rb = b.relation(name);
      if (rel.arity() == 1) {
        if (rel.contains({x}) != rb.contains({f[x]})) return false;
      } else if (rel.arity() == 2) {
        for (Element y = 0; y <= x; ++y) {
          if (rel.contains({x, y}) != rb.contains({f[x], f[y]})) return false;
          if (rel.contains({y, x}) != rb.contains({f[y], f[x]})) return false;
        }
      }
    }
    return true;
  };
  std::function<bool(Element)> go = [&](Element x) -> bool {
    if (x == n) return check_all();
    for (Element y = 0; y < n; ++y) {
      if (used[y]) continue;
      f[x] = y;
      used[y] = true;
      if (check_prefix(x) && go(x + 1)) return true;
      used[y] = false;
    }
    f[x] = -1;
    return false;
  };
  return go(0);
}

}  // namespace forge
