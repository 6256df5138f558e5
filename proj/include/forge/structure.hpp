#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace forge {

using Element = int;
using Tuple = std::vector<Element>;

inline std::size_t hash_combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

struct TupleHash {
  std::size_t operator()(const Tuple& t) const {
    std::size_t h = t.size();
    for (Element e : t) h = hash_combine(h, static_cast<std::size_t>(e));
    return h;
  }
};

struct RelationSymbol {
  std::string name;
  int arity = 0;
  bool operator==(const RelationSymbol&) const = default;
};

class Vocabulary {
 public:
  void add_relation(const std::string& name, int arity);
  void add_constant(const std::string& name);

  // Sorted by name.
  const std::vector<RelationSymbol>& relations() const { return relations_; }
  const std::vector<std::string>& constants() const { return constants_; }
  std::optional<int> arity(const std::string& name) const;
  bool has_constant(const std::string& name) const;
  int max_arity() const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<RelationSymbol> relations_;
  std::vector<std::string> constants_;
};

class Relation {
 public:
  explicit Relation(int arity = 0) : arity_(arity) {}

  int arity() const { return arity_; }
  std::size_t size() const { return tuples_.size(); }
  bool empty() const { return tuples_.empty(); }
  bool contains(const Tuple& t) const { return tuples_.count(t) != 0; }
  bool insert(Tuple t);
  bool erase(const Tuple& t) { return tuples_.erase(t) != 0; }
  const std::unordered_set<Tuple, TupleHash>& tuples() const { return tuples_; }
  // Lexicographic order.
  std::vector<Tuple> sorted() const;

  bool operator==(const Relation& o) const { return arity_ == o.arity_ && tuples_ == o.tuples_; }

 private:
  int arity_;
  std::unordered_set<Tuple, TupleHash> tuples_;
};

// Finite relational structure over the universe 0..size()-1.
class Structure {
 public:
  Structure() = default;
  explicit Structure(int n, std::string name = "M");

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  int size() const { return size_; }
  bool in_universe(Element e) const { return e >= 0 && e < size_; }
  Element add_element(const std::string& label = "");

  void declare_relation(const std::string& name, int arity);
  bool has_relation(const std::string& name) const { return relations_.count(name) != 0; }
  const Relation& relation(const std::string& name) const;
  const std::map<std::string, Relation>& relations() const { return relations_; }
  // Returns true when the tuple was new.
  bool add_tuple(const std::string& name, Tuple t);
  bool holds(const std::string& name, const Tuple& t) const;

  const std::string& label(Element e) const;
  void set_label(Element e, const std::string& label);
  std::optional<Element> find_label(const std::string& label) const;
  bool has_labels() const { return !label_index_.empty(); }

  void set_constant(const std::string& name, Element e);
  std::optional<Element> constant(const std::string& name) const;
  const std::map<std::string, Element>& constants() const { return constants_; }

  // Relation symbols and constant names (labels are not part of it).
  Vocabulary vocabulary() const;

  bool operator==(const Structure& o) const;

 private:
  std::string name_ = "M";
  int size_ = 0;
  std::map<std::string, Relation> relations_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, Element> label_index_;
  std::map<std::string, Element> constants_;
};

Structure new_segment(int j);
Structure induced_substructure(const Structure& m, const std::vector<Element>& x);
Structure replace_with_clique(const Structure& f, Element v, int i);

enum class ArtifactKind { Segment, Clique, Apex, Gadget };

struct Artifact {
  std::string tag;
  ArtifactKind kind = ArtifactKind::Clique;
  std::vector<Element> members;
  // Each member has an edge to each target, each source has an edge to each member.
  std::vector<Element> targets;
  std::vector<Element> sources;
  int level = 0;
  int base_size = 0;
  std::string parent;
  // Construction-specific data (gadget codes and the like).
  std::vector<int> payload;
};

class GadgetIndex {
 public:
  Artifact& add(Artifact a);
  bool has(const std::string& tag) const { return by_tag_.count(tag) != 0; }
  const Artifact& at(const std::string& tag) const;
  Artifact& at(const std::string& tag);
  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  // Leaf artifact (segment vertex, clique, apex) owning e.
  const Artifact* owner(Element e) const;
  void record_member(const std::string& tag, Element e);

 private:
  std::vector<Artifact> artifacts_;
  std::unordered_map<std::string, std::size_t> by_tag_;
  std::unordered_map<Element, std::size_t> owner_;
};

struct IndexedStructure {
  Structure structure;
  GadgetIndex index;
};

// Segment of length j with one Segment artifact per vertex, tagged by label.
IndexedStructure indexed_segment(int j);

const Artifact& attach_clique(IndexedStructure& g, Element d, int size, const std::string& tag,
                              const std::string& relation = "E");
void grow_clique(IndexedStructure& g, const std::string& tag, int delta,
                 const std::string& relation = "E");
std::vector<int> clique_inventory(const IndexedStructure& g, Element d, int bound);
// Empty when every recorded size and disjointness claim holds.
std::vector<std::string> audit_index(const IndexedStructure& g);

std::string print_structure(const Structure& m);
Structure parse_structure(const std::string& text);

// Brute force; intended for structures with at most ~10 elements.
bool brute_force_isomorphic(const Structure& a, const Structure& b);

}  // namespace forge
