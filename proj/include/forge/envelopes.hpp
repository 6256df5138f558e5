#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "forge/formula.hpp"
#include "forge/structure.hpp"

namespace forge {

// ---- multisets and hypergraphs

// Node -> multiplicity (every stored multiplicity is >= 1).
using Multiset = std::map<int, int>;

int multiset_size(const Multiset& a);
Multiset multiset_of(const std::vector<int>& nodes);
// Distinct multiplicities pairwise different.
bool is_oriented(const Multiset& a);
// Support ordered by increasing multiplicity; throws InvalidParameter when not oriented.
std::vector<int> oriented_set(const Multiset& a);
std::string multiset_to_string(const Multiset& a);

struct Hypergraph {
  std::string name = "H";
  int nodes = 0;
  std::set<Multiset> edges;

  bool has_edge(const Multiset& a) const { return edges.count(a) != 0; }
  // Hyperedges of cardinality < k.
  Hypergraph below(int k) const;
};

// "hypergraph <name>", "nodes <n>", then "edge <node:mult> ..." lines; '#' starts a comment.
Hypergraph parse_hypergraph(const std::string& text);
std::string print_hypergraph(const Hypergraph& h);

// ---- envelopes

// Structure over {P} (plus optional relations on nodes). nodes[i] is the element standing
// for node i of the hypergraph.
struct Envelope {
  Structure structure;
  std::vector<Element> nodes;
};

constexpr const char* kEnvelopeRelation = "P";

// Structure text with an extra "nodes <e0> <e1> ..." line.
Envelope parse_envelope(const std::string& text);
std::string print_envelope(const Envelope& e);

struct ConditionCheck {
  std::string name;
  bool pass = true;
  std::string witness;
};

struct EnvelopeValidation {
  bool pass = true;
  // identity-on-nodes, vertex-graph, unique-projection, nodes-see-no-vertex.
  std::vector<ConditionCheck> conditions;
};

EnvelopeValidation validate_envelope(const Envelope& e);

// Node index of each element's projection; -1 for nodes (and for vertices without a unique
// projection).
std::vector<int> projections(const Envelope& e);
std::vector<Element> vertices(const Envelope& e);

// Cliques of the vertex graph of size < k whose projection multiset is a hyperedge, each
// sorted, in lexicographic order.
std::vector<std::vector<Element>> k_cliques(const Envelope& e, const Hypergraph& h, int k);
bool is_plebeian(const Envelope& e, const Hypergraph& h, int k, Element x);
// X together with every k-clique meeting X, sorted.
std::vector<Element> closure(const Envelope& e, const Hypergraph& h, int k, const std::vector<Element>& x);

// The k-cliques of one envelope, computed once for repeated queries.
class CliqueIndex {
 public:
  CliqueIndex(const Envelope& e, const Hypergraph& h, int k);
  ~CliqueIndex();
  CliqueIndex(const CliqueIndex&) = delete;
  CliqueIndex& operator=(const CliqueIndex&) = delete;

  const std::vector<std::vector<Element>>& cliques() const;
  bool is_plebeian(Element x) const;
  std::vector<Element> closure(const std::vector<Element>& x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class Verdict { Pass, Fail, Indeterminate };
std::string to_string(Verdict v);

struct GoodnessBounds {
  // Largest number of sets X the checker may visit.
  std::uint64_t max_sets = 20'000'000;
};

struct GoodnessReport {
  Verdict g0 = Verdict::Pass, g1 = Verdict::Pass, g2 = Verdict::Pass;
  std::string witness;
  std::uint64_t sets_checked = 0;
  int cliques = 0;

  Verdict overall() const;
};

// Brute force over every vertex set X with |X| < k (nodes in X change nothing).
//
// G0 also requires every k-clique to be maximal: no vertex is adjacent to all its members.
// The exclusions of G2 below assume this, and without it the k-pebble game tells apart two
// envelopes that pass G0-G2 as literally stated.
//
// G1 asks, for every node a and every Y inside the closure of X that contains no k-clique,
// for a plebeian z over a outside X adjacent to exactly Y within the closure. G2 asks, for
// every ordering of a hyperedge of cardinality < k and every pattern R between the closure
// and the new clique, for a k-clique disjoint from X realizing R. R must leave no vertex
// adjacent to the whole new clique and no new vertex adjacent to a whole k-clique of the
// closure.
//
// A request is also dropped when satisfying it would itself create a k-clique other than
// the requested one (for G1, any k-clique through z). Without this no envelope could pass
// once some hyperedge has two elements: a plebeian over a adjacent to a vertex over b would
// lie in the k-clique {z, y} when {a, b} is a hyperedge.
GoodnessReport check_k_good(const Envelope& e, const Hypergraph& h, int k, const GoodnessBounds& bounds = {});

struct GenerationOptions {
  // Plebeian vertices per node; 0 means 2k.
  int pool = 0;
  // Planted k-cliques per hyperedge.
  int cliques = 2;
  // Further attempts after the first; each doubles the pool when G1 failed and the planted
  // cliques when G2 failed.
  int retries = 10;
  // Relations of a tau_1 structure on the nodes (same universe size as the hypergraph).
  const Structure* base = nullptr;
  GoodnessBounds bounds;
};

struct GenerationStats {
  int attempts = 0;
  int pool = 0;
  int cliques = 0;
  GoodnessReport report;
};

// Plants the cliques, adds the plebeian pools, then draws every other vertex pair with
// probability 1/2, skipping an edge when it would close a k-clique that was not planted or
// make a vertex adjacent to a whole planted clique.
// Nodes are elements 0..h.nodes-1 and are named by constants n0, n1, .... Throws
// GenerationFailure (carrying the last report) when no attempt is k-good.
Envelope generate_envelope(const Hypergraph& h, int k, std::uint64_t seed, const GenerationOptions& opts = {},
                           GenerationStats* stats = nullptr);

// ---- maps between envelopes

using ElementMap = std::vector<std::pair<Element, Element>>;

bool is_k_correct(const ElementMap& eta, const Envelope& e, const Envelope& f, const Hypergraph& h, int k);
// Searches for a k-correct extension of eta to the closure of its domain.
bool is_k_nice(const ElementMap& eta, const Envelope& e, const Envelope& f, const Hypergraph& h, int k);

// Keeps the clique index of both envelopes for repeated checks.
class MapChecker {
 public:
  MapChecker(const Envelope& e, const Envelope& f, const Hypergraph& h, int k);
  ~MapChecker();
  MapChecker(const MapChecker&) = delete;
  MapChecker& operator=(const MapChecker&) = delete;

  bool correct(const ElementMap& eta) const;
  bool nice(const ElementMap& eta) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- tables

// Equalities v_i = v_j (i < j) then P(v_i, v_j) over all ordered pairs, as literals.
struct ZeroTable {
  std::vector<std::string> literals;
  bool operator==(const ZeroTable&) const = default;
  auto operator<=>(const ZeroTable&) const = default;
  std::string text() const;
};

ZeroTable zero_table_of(const Envelope& e, const std::vector<Element>& x);

// Canonical identifier of the k-table holding at x: its 0-table and, for each j < k, the
// (j,k)-tables that hold (a j-clique meeting x together with the 0-table of (u, x)).
std::string k_table_of(const Envelope& e, int k, const std::vector<Element>& x);

struct PhiMinusQuery {
  Formula phi;
  // Variables bound to nodes and to vertices.
  std::vector<std::string> node_vars;
  std::vector<std::string> vertex_vars;
  // k-table identifier the vertices must carry; empty means no constraint.
  std::string table;
};

// Is there a vertex tuple x with F(x) = b, table(x) = query.table and E |= phi(a, x)?
// nullopt when the number of candidate tuples exceeds `budget`.
std::optional<bool> phi_minus(const Envelope& e, int k, const PhiMinusQuery& query, const std::vector<int>& a,
                              const std::vector<int>& b, std::uint64_t budget = 50'000'000);

// ---- relations to hypergraphs

struct IrreflexivePart {
  // Block of each argument position, blocks numbered in order of first appearance.
  std::vector<int> pattern;
  // One entry per block; entries pairwise distinct.
  std::set<Tuple> tuples;
};

// One part per set partition of the argument positions (parts may be empty).
std::vector<IrreflexivePart> irreflexive_decomposition(const std::set<Tuple>& r, int arity);
std::set<Tuple> recompose(const std::vector<IrreflexivePart>& parts);

struct LevelRelation {
  // Level i >= 2; requires arity (arity + 1) / 2 <= i.
  int level = 2;
  int arity = 1;
  // Irreflexive tuples over the structure's universe.
  std::set<Tuple> tuples;
};

// The tuple (a_1..a_r) at level i becomes the multiset with multiplicities 1, 2, ..., r, the
// last raised by i - r(r+1)/2 so that it has cardinality i.
Multiset encode_oriented(const Tuple& t, int level);
Hypergraph build_hypergraph(const Structure& m, const std::vector<LevelRelation>& rho);

}  // namespace forge
