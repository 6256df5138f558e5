#pragma once

#include <cstdint>
#include <vector>

#include "forge/formula.hpp"

namespace forge {

struct EnumerationBounds {
  int k = 2;  // variables x1..xk
  int q = 2;  // quantifier rank
  int s = 4;  // AST size (nodes)
};

// Largest bounds accepted by enumerate_formulas.
constexpr int kMaxEnumVars = 4;
constexpr int kMaxEnumRank = 4;
constexpr int kMaxEnumSize = 12;
constexpr std::uint64_t kDefaultEnumCap = 2'000'000;

// Number of formulas enumerate_formulas would produce (saturates at UINT64_MAX).
std::uint64_t count_formulas(const Vocabulary& vocab, const EnumerationBounds& b);

// Every first-order formula over `vocab` (relation atoms and equalities over x1..xk, not,
// and, or, exists, forall) with rank <= q and size <= s, each exactly once, ordered by size
// then by constructor. Subformulas are shared between results. Throws ResourceError when the
// bounds are outside the supported range or the stream would exceed `cap`.
std::vector<Formula> enumerate_formulas(const Vocabulary& vocab, const EnumerationBounds& b,
                                        std::uint64_t cap = kDefaultEnumCap);

std::vector<std::string> variable_pool(int k);

}  // namespace forge
