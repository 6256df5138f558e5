#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "forge/structure.hpp"

namespace forge {

enum class NodeKind { True, False, Rel, PredVar, Eq, Not, And, Or, Exists, Forall, Lfp, Count };

struct Term {
  bool is_constant = false;
  std::string name;
  bool operator==(const Term&) const = default;
  auto operator<=>(const Term&) const = default;
};

struct Node;
using Formula = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::True;
  // Relation or predicate-variable name.
  std::string symbol;
  // Atom arguments, the two sides of an equality, or LFP arguments.
  std::vector<Term> terms;
  std::vector<Formula> children;
  // Variable bound by a quantifier or counting quantifier.
  std::string var;
  // Variables bound by an LFP operator.
  std::vector<std::string> bound;
  int threshold = 0;
};

Term var_term(const std::string& name);
Term const_term(const std::string& name);

Formula truth(bool value);
Formula rel_atom(const std::string& name, std::vector<Term> terms);
Formula pred_atom(const std::string& name, std::vector<Term> terms);
Formula equality(Term a, Term b);
Formula negation(Formula f);
Formula conjunction(Formula a, Formula b);
Formula disjunction(Formula a, Formula b);
// Folds left; an empty list gives true (resp. false).
Formula conjunction(const std::vector<Formula>& fs);
Formula disjunction(const std::vector<Formula>& fs);
Formula exists(const std::string& var, Formula body);
Formula forall(const std::string& var, Formula body);
Formula count_at_least(int c, const std::string& var, Formula body);
Formula lfp(const std::string& pred, std::vector<std::string> bound, Formula body, std::vector<Term> args);

// Identifiers that are constants of `vocab` parse as constant terms, other lowercase
// identifiers as variables.
Formula parse_formula(const std::string& text, const Vocabulary& vocab);
// One formula per non-blank line; '#' starts a comment.
std::vector<Formula> parse_formula_list(const std::string& text, const Vocabulary& vocab);

// Concrete syntax accepted by parse_formula.
std::string to_string(const Formula& f);
// Canonical parenthesized form.
std::string dump_ast(const Formula& f);

bool check_positive(const Formula& body, const std::string& pred);
// Throws PositivityError naming the first offending LFP.
void check_all_positive(const Formula& f);

// Turns relation atoms named `pred` into predicate-variable atoms.
Formula bind_predicate(const Formula& f, const std::string& pred);

std::set<std::string> free_vars(const Formula& f);
std::set<std::string> free_predicates(const Formula& f);
// Distinct variables, free or bound.
int count_vars(const Formula& f);
std::set<std::string> all_vars(const Formula& f);
int quantifier_rank(const Formula& f);
bool is_first_order(const Formula& f);
std::size_t ast_size(const Formula& f);

// Free variables in the order used for tuples: lexicographic by name.
std::vector<std::string> free_var_order(const Formula& f);

}  // namespace forge
