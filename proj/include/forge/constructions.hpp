#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/eval.hpp"
#include "forge/formula.hpp"
#include "forge/structure.hpp"

namespace forge {

using FormulaList = std::vector<Formula>;

struct StageRecord {
  int stage = 0;
  std::string artifact;
  int old_size = 0;
  int delta = 0;
  // build_H: bits of n(d,i), bit 0 first.
  std::vector<int> bits;
  // build_G: the slot sequence written into the gadget.
  std::vector<int> sequence;
  // build_G: first satisfying tuple with this code; build_D: a tuple put into S_i.
  Tuple tuple;
};

struct BuildTrace {
  // Structures after stage 0, 1, ..., last.
  std::vector<IndexedStructure> stages;
  std::vector<StageRecord> records;
  // v_i (build_H) or w_i (build_G), index 0 included.
  std::vector<int> sizes;
  // A_i (build_G), index 0 included.
  std::vector<int> arities;
  // build_G: gadgets allocated per level, index 0 unused.
  std::vector<int> gadgets;
  std::string policy;
};

struct BuildResult {
  IndexedStructure result;
  BuildTrace trace;
};

// Test hooks that deliberately break a construction.
struct Corruption {
  // Base cliques of this level start one vertex short (0 = off).
  int undersized_level = 0;
  // Adds one extra vertex to C_{d1,level} after the build (0 = off).
  int extra_growth_level = 0;
};

constexpr int kDefaultUniverseCap = 4000;

// ---- labeled segments

// Reads Delta_1..Delta_t, one per line, where line i may use E and S1..S(i-1) with the arities
// fixed by the earlier lines. Throws ConstructionError when line i mentions S_r with r >= i.
FormulaList parse_delta_list(const std::string& text);
BuildResult build_labeled_D(int j, const FormulaList& delta);

// ---- one free variable

// v_0 = 0, v_i = max(var(Theta_i), v_{i-1} + 2^{i+1}).
std::vector<int> clique_schedule(const FormulaList& theta);
std::string clique_tag(int d, int level);
BuildResult build_H(int j, const FormulaList& theta, const Corruption& corrupt = {});
bool decode_phi(const IndexedStructure& h, int i, Element a, const FormulaList& theta);

// ---- arbitrary arity

enum class GadgetPolicy { Lean, Faithful };

// A_0 = 1, A_i = 1 + A_{i-1} * 2 f_i.
std::vector<int> arity_schedule(const FormulaList& gamma);
// w_0 = 0, w_i = max(var(Gamma_i), 1 + w_{i-1} + A_{i-1}).
std::vector<int> gadget_clique_schedule(const FormulaList& gamma);

// Code of element a as seen at stage i: 2 A_{i-1} slots over {0..j}.
std::vector<int> element_code(const IndexedStructure& g, int i, Element a, const FormulaList& gamma);
// Slot sequence of length A_i for a tuple at stage i: the element codes followed by 1.
std::vector<int> tuple_sequence(const IndexedStructure& g, int i, const Tuple& t, const FormulaList& gamma);
// Pairwise placement of tuple entries: 0 equal, 1 same clique, 2 same gadget, 3 otherwise.
std::vector<int> colocation(const IndexedStructure& g, const Tuple& t);
// Segment vertex coded by a code whose only nonzero slot is the first, or -1.
Element decode_segment_code(const IndexedStructure& g, const std::vector<int>& code);

// Grows the cliques of a level-i gadget to write `sequence`; reading it back gives the
// same sequence.
void write_slots(IndexedStructure& g, const std::string& gadget, const std::vector<int>& sequence);
std::vector<int> read_slots(const IndexedStructure& g, const std::string& gadget);
// Adds an unmodified gadget at `level` with cliques of size w attached to every segment vertex.
std::string add_gadget(IndexedStructure& g, int level, int arity, int w);

BuildResult build_G(int j, const FormulaList& gamma, GadgetPolicy policy = GadgetPolicy::Lean,
                    int universe_cap = kDefaultUniverseCap);
bool decode_psi(const IndexedStructure& g, int i, const Tuple& t, const FormulaList& gamma);

// ---- elementary substructure check

struct SubstructureReport {
  bool pass = true;
  bool indeterminate = false;
  int game_pebbles = 0;
  int formula_vars = 0;
  int rank = 3;
  int checked = 0;
  std::vector<std::string> violations;
};

struct SubstructureOptions {
  int rank = 3;
  // Largest position table the game and type checks may build.
  std::size_t budget = 4'000'000;
  int max_formula_vars = 3;
};

// Stage i-1 against the final stage: every sample tuple (from the stage i-1 universe) must
// satisfy the same formulas with at most min(k, formula_vars) variables and rank <= rank, and
// Duplicator must win the pebble game started on the tuple. Pebble and variable counts are
// lowered to fit the budget; the report records what was used.
SubstructureReport verify_elementary_substructure(const BuildTrace& trace, int i, const std::vector<Tuple>& sample,
                                                  int k, const SubstructureOptions& opts = {});
std::vector<Tuple> sample_tuples(const Structure& m, int count, int max_length, std::uint64_t seed);

}  // namespace forge
