#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/eval.hpp"
#include "forge/formula.hpp"
#include "forge/structure.hpp"

namespace forge {

struct PebblePair {
  int pebble = 1;
  Element a = 0;
  Element b = 0;
};

struct PartialMap {
  std::vector<PebblePair> pairs;
};

// Injective, preserves every relation and its negation on the domain, and agrees with the
// interpretation of constants (constants are treated as permanently pebbled).
bool is_partial_isomorphism(const Structure& a, const Structure& b,
                            const std::vector<std::pair<Element, Element>>& map);
bool is_partial_isomorphism(const Structure& a, const Structure& b, const PartialMap& map);

struct GameResult {
  bool duplicator = false;
  // Spoiler case: a position Duplicator cannot survive.
  std::string witness;
  int rounds = 0;
};

constexpr std::size_t kDefaultGameCap = std::size_t{1} << 24;

// Positions of the k-pebble game with k-1 pebbles placed, refined to the greatest fixpoint
// jointly over A and B. Two (k-1)-tuples get the same colour iff Duplicator wins from the
// position pairing them. Rounds are synchronous: every colour of round r+1 is computed from
// the colours of round r.
class PebbleSolver {
 public:
  PebbleSolver(const Structure& a, const Structure& b, int k, std::size_t cap = kDefaultGameCap);
  ~PebbleSolver();
  PebbleSolver(const PebbleSolver&) = delete;
  PebbleSolver& operator=(const PebbleSolver&) = delete;

  GameResult from(const PartialMap& init) const;
  int rounds() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

bool pebble_equiv(const Structure& a, const Structure& b, int k, const PartialMap& init = {});
GameResult pebble_game(const Structure& a, const Structure& b, int k, const PartialMap& init = {});

// Literal survivor-set pruning over partial isomorphisms of size <= k. Exponential; for
// cross-checking on tiny structures.
bool pebble_equiv_reference(const Structure& a, const Structure& b, int k, const PartialMap& init = {});

// Counting game via the bijection form over positions with all k pebbles placed.
GameResult counting_game(const Structure& a, const Structure& b, int k);
bool counting_equiv(const Structure& a, const Structure& b, int k);
// Direct simulation of the two-part move (set, then answering set, then element choices).
bool counting_equiv_simulation(const Structure& a, const Structure& b, int k);

struct DistinguishOptions {
  // Short formulas tried before the characteristic sentence; 0 picks the largest size
  // whose enumeration stays below `enumeration_cap`.
  int short_size = 0;
  std::uint64_t enumeration_cap = 60'000;
  std::size_t table_cap = std::size_t{1} << 26;
};

struct DistinguishResult {
  std::optional<Formula> formula;
  // "enumeration" or "characteristic"; empty when none exists.
  std::string method;
};

// A formula with at most k variables and rank at most q on which A and B disagree, or none.
// Short enumerated formulas are tried first (the first disagreement in enumeration order);
// otherwise a separating formula is built from rank-q types, which holds in A and fails in
// B. `a_init` and `b_init` assign x1.. (pointed structures); empty for sentences. Complete
// for the given bounds.
DistinguishResult distinguishing_formula(const Structure& a, const Structure& b, int k, int q,
                                         const std::vector<Element>& a_init = {},
                                         const std::vector<Element>& b_init = {},
                                         const DistinguishOptions& opts = {});

// Rank-q types over x1..xk of all positions of A and B, computed once so that many initial
// tuples can be compared.
class RankTypes {
 public:
  RankTypes(const Structure& a, const Structure& b, int k, int q, std::size_t cap = std::size_t{1} << 26);
  ~RankTypes();
  RankTypes(const RankTypes&) = delete;
  RankTypes& operator=(const RankTypes&) = delete;

  // (A, a_init) and (B, b_init) agree on every formula over x1..xk of rank <= q.
  bool agree(const std::vector<Element>& a_init, const std::vector<Element>& b_init) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Rank-q characteristic formula of (A, x1..xl = init) over variables x1..xk: B, b satisfies
// it iff (A, a) and (B, b) agree on every such formula.
Formula characteristic_formula(const Structure& a, int k, int q, const std::vector<Element>& init = {});

}  // namespace forge
