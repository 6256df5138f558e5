#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "forge/formula.hpp"
#include "forge/structure.hpp"

namespace forge {

using Assignment = std::map<std::string, Element>;

// Truth values of a formula for every assignment to `vars` (row-major, vars[0] most significant).
struct Table {
  std::vector<std::string> vars;
  int n = 0;
  std::vector<std::uint8_t> data;

  std::size_t index(const Assignment& a) const;
  bool at(const Assignment& a) const { return data[index(a)] != 0; }
  // Tuples (ordered as `vars`) where the table is true.
  std::vector<Tuple> tuples() const;
};

struct StageTrace {
  int arity = 0;
  // P_0 = {} .. P_depth, where P_depth = P_{depth+1}.
  std::vector<std::set<Tuple>> stages;
  int depth = 0;
};

constexpr std::size_t kDefaultTableCap = std::size_t{1} << 27;

// Bottom-up evaluator with per-node memoized tables. Tables of subformulas without free
// predicate variables are kept for the lifetime of the evaluator, so one evaluator can
// answer many formulas that share subterms.
class Evaluator {
 public:
  explicit Evaluator(const Structure& m, std::size_t table_cap = kDefaultTableCap);
  ~Evaluator();
  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  const Structure& structure() const { return m_; }
  // Table over free_var_order(f); f must not contain free predicate variables.
  const Table& table(const Formula& f);
  bool evaluate(const Formula& f, const Assignment& a);
  // Stage trace of an LFP node, sliced at the parameter values in `a`.
  StageTrace stages(const Formula& lfp_node, const Assignment& a);
  // Largest depth over all parameter assignments.
  int depth(const Formula& lfp_node);
  void clear();

 private:
  struct Impl;
  const Structure& m_;
  std::unique_ptr<Impl> impl_;
};

bool evaluate(const Structure& m, const Formula& f, const Assignment& a = {});
// Top-down evaluation with early exit; intended for large structures and small formulas.
bool evaluate_pointwise(const Structure& m, const Formula& f, const Assignment& a = {});
Table evaluate_table(const Structure& m, const Formula& f);

StageTrace lfp_stages(const Structure& m, const Formula& body, const std::string& pred,
                      const std::vector<std::string>& bound, const Assignment& params = {});
StageTrace lfp_stages(const Structure& m, const Formula& lfp_node, const Assignment& params = {});
int inductive_depth(const Structure& m, const Formula& lfp_formula);

// Resolves a term under an assignment; constants fall back to element labels.
Element resolve_term(const Structure& m, const Term& t, const Assignment& a);

}  // namespace forge
