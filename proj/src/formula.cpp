#include "forge/formula.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

namespace {

std::shared_ptr<Node> make(NodeKind k) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  return n;
}

}  // namespace

Term var_term(const std::string& name) { return Term{false, name}; }
Term const_term(const std::string& name) { return Term{true, name}; }

Formula truth(bool value) {
  static const Formula t = make(NodeKind::True);
  static const Formula f = make(NodeKind::False);
  return value ? t : f;
}

Formula rel_atom(const std::string& name, std::vector<Term> terms) {
  auto n = make(NodeKind::Rel);
  n->symbol = name;
  n->terms = std::move(terms);
  return n;
}

Formula pred_atom(const std::string& name, std::vector<Term> terms) {
  auto n = make(NodeKind::PredVar);
  n->symbol = name;
  n->terms = std::move(terms);
  return n;
}

Formula equality(Term a, Term b) {
  auto n = make(NodeKind::Eq);
  n->terms = {std::move(a), std::move(b)};
  return n;
}

Formula negation(Formula f) {
  auto n = make(NodeKind::Not);
  n->children = {std::move(f)};
  return n;
}

Formula conjunction(Formula a, Formula b) {
  auto n = make(NodeKind::And);
  n->children = {std::move(a), std::move(b)};
  return n;
}

Formula disjunction(Formula a, Formula b) {
  auto n = make(NodeKind::Or);
  n->children = {std::move(a), std::move(b)};
  return n;
}

Formula conjunction(const std::vector<Formula>& fs) {
  if (fs.empty()) return truth(true);
  Formula acc = fs[0];
  for (std::size_t i = 1; i < fs.size(); ++i) acc = conjunction(acc, fs[i]);
  return acc;
}

Formula disjunction(const std::vector<Formula>& fs) {
  if (fs.empty()) return truth(false);
  Formula acc = fs[0];
  for (std::size_t i = 1; i < fs.size(); ++i) acc = disjunction(acc, fs[i]);
  return acc;
}

Formula exists(const std::string& var, Formula body) {
  auto n = make(NodeKind::Exists);
  n->var = var;
  n->children = {std::move(body)};
  return n;
}

Formula forall(const std::string& var, Formula body) {
  auto n = make(NodeKind::Forall);
  n->var = var;
  n->children = {std::move(body)};
  return n;
}

Formula count_at_least(int c, const std::string& var, Formula body) {
  if (c < 1) throw InvalidParameter("counting threshold must be positive");
  auto n = make(NodeKind::Count);
  n->threshold = c;
  n->var = var;
  n->children = {std::move(body)};
  return n;
}

Formula lfp(const std::string& pred, std::vector<std::string> bound, Formula body, std::vector<Term> args) {
  if (bound.size() != args.size())
    throw ArityError("lfp " + pred + ": " + std::to_string(bound.size()) + " bound variables but " +
                     std::to_string(args.size()) + " arguments");
  std::set<std::string> distinct(bound.begin(), bound.end());
  if (distinct.size() != bound.size()) throw InvalidParameter("lfp " + pred + ": repeated bound variable");
  auto n = make(NodeKind::Lfp);
  n->symbol = pred;
  n->bound = std::move(bound);
  n->children = {std::move(body)};
  n->terms = std::move(args);
  return n;
}

// ---------------------------------------------------------------- parser

namespace {

enum class Tok { Ident, Int, LParen, RParen, Comma, Dot, Eq, Geq, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Tok::Ident, s.substr(start, i - start), start});
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      out.push_back({Tok::Int, s.substr(start, i - start), start});
    } else if (c == '>' && i + 1 < s.size() && s[i + 1] == '=') {
      i += 2;
      out.push_back({Tok::Geq, ">=", start});
    } else {
      Tok k;
      switch (c) {
        case '(': k = Tok::LParen; break;
        case ')': k = Tok::RParen; break;
        case ',': k = Tok::Comma; break;
        case '.': k = Tok::Dot; break;
        case '=': k = Tok::Eq; break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", start);
      }
      ++i;
      out.push_back({k, std::string(1, c), start});
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

bool is_keyword(const std::string& s) {
  static const std::set<std::string> kw = {"not",  "and",   "or",    "exists", "forall",
                                           "lfp",  "count", "true",  "false"};
  return kw.count(s) != 0;
}

class Parser {
 public:
  Parser(const std::string& text, const Vocabulary& vocab) : toks_(tokenize(text)), vocab_(vocab) {}

  Formula parse() {
    Formula f = parse_or();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().pos); }

  bool accept_word(const char* w) {
    if (peek().kind == Tok::Ident && peek().text == w) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what);
    ++pos_;
  }

  std::string variable() {
    if (peek().kind != Tok::Ident || is_keyword(peek().text)) fail("expected variable");
    if (vocab_.has_constant(peek().text)) fail("'" + peek().text + "' is a constant, not a variable");
    if (!std::islower(static_cast<unsigned char>(peek().text[0]))) fail("variables start lowercase");
    return next().text;
  }

  Term term() {
    if (peek().kind != Tok::Ident || is_keyword(peek().text)) fail("expected term");
    if (vocab_.has_constant(peek().text)) return const_term(next().text);
    return var_term(variable());
  }

  std::vector<Term> term_list() {
    expect(Tok::LParen, "'('");
    std::vector<Term> ts;
    if (peek().kind != Tok::RParen) {
      ts.push_back(term());
      while (peek().kind == Tok::Comma) {
        ++pos_;
        ts.push_back(term());
      }
    }
    expect(Tok::RParen, "')'");
    return ts;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (accept_word("or")) f = disjunction(f, parse_and());
    return f;
  }

  Formula parse_and() {
    Formula f = parse_unary();
    while (accept_word("and")) f = conjunction(f, parse_unary());
    return f;
  }

  Formula parse_unary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      ++pos_;
      Formula f = parse_or();
      expect(Tok::RParen, "')'");
      return f;
    }
    if (t.kind != Tok::Ident) fail("expected formula");
    if (accept_word("true")) return truth(true);
    if (accept_word("false")) return truth(false);
    if (accept_word("not")) return negation(parse_unary());
    if (t.text == "exists" || t.text == "forall") {
      bool ex = next().text == "exists";
      std::string v = variable();
      expect(Tok::Dot, "'.'");
      Formula body = parse_or();
      return ex ? exists(v, body) : forall(v, body);
    }
    if (accept_word("count")) {
      expect(Tok::Geq, "'>='");
      if (peek().kind != Tok::Int) fail("expected threshold");
      int c = std::stoi(next().text);
      if (c < 1) fail("threshold must be positive");
      std::string v = variable();
      expect(Tok::Dot, "'.'");
      return count_at_least(c, v, parse_or());
    }
    if (accept_word("lfp")) return parse_lfp();
    return parse_atom();
  }

  Formula parse_lfp() {
    std::size_t at = peek().pos;
    if (peek().kind != Tok::Ident || is_keyword(peek().text)) fail("expected predicate variable");
    std::string p = next().text;
    if (vocab_.arity(p) || vocab_.has_constant(p)) fail("predicate variable " + p + " clashes with vocabulary");
    expect(Tok::LParen, "'('");
    std::vector<std::string> bound;
    if (peek().kind != Tok::RParen) {
      bound.push_back(variable());
      while (peek().kind == Tok::Comma) {
        ++pos_;
        bound.push_back(variable());
      }
    }
    expect(Tok::RParen, "')'");
    expect(Tok::Dot, "'.'");
    scopes_.push_back({p, static_cast<int>(bound.size())});
    Formula body = parse_or();
    scopes_.pop_back();
    if (peek().kind != Tok::LParen) fail("expected lfp arguments");
    std::vector<Term> args = term_list();
    if (args.size() != bound.size())
      throw ArityError("lfp " + p + " at " + std::to_string(at) + ": " + std::to_string(bound.size()) +
                       " bound variables but " + std::to_string(args.size()) + " arguments");
    return lfp(p, std::move(bound), std::move(body), std::move(args));
  }

  Formula parse_atom() {
    std::size_t at = peek().pos;
    if (peek().kind == Tok::Ident && toks_[pos_ + 1].kind == Tok::LParen) {
      std::string name = next().text;
      std::vector<Term> ts = term_list();
      for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
        if (it->first != name) continue;
        if (it->second != static_cast<int>(ts.size()))
          throw ArityError("predicate " + name + " at " + std::to_string(at) + " used with " +
                           std::to_string(ts.size()) + " arguments, declared " + std::to_string(it->second));
        return pred_atom(name, std::move(ts));
      }
      auto ar = vocab_.arity(name);
      if (!ar) throw ParseError("unknown relation " + name, at);
      if (*ar != static_cast<int>(ts.size()))
        throw ArityError("relation " + name + " at " + std::to_string(at) + " has arity " +
                         std::to_string(*ar) + ", got " + std::to_string(ts.size()) + " arguments");
      return rel_atom(name, std::move(ts));
    }
    Term a = term();
    expect(Tok::Eq, "'=' or '('");
    Term b = term();
    return equality(std::move(a), std::move(b));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const Vocabulary& vocab_;
  std::vector<std::pair<std::string, int>> scopes_;
};

}  // namespace

Formula parse_formula(const std::string& text, const Vocabulary& vocab) {
  Formula f = Parser(text, vocab).parse();
  check_all_positive(f);
  return f;
}

std::vector<Formula> parse_formula_list(const std::string& text, const Vocabulary& vocab) {
  std::vector<Formula> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_formula(line, vocab));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

// ---------------------------------------------------------------- printers

namespace {

std::string term_list_str(const std::vector<Term>& ts) {
  std::string s = "(";
  for (std::size_t i = 0; i < ts.size(); ++i) s += (i ? "," : "") + ts[i].name;
  return s + ")";
}

bool is_binder(NodeKind k) {
  return k == NodeKind::Exists || k == NodeKind::Forall || k == NodeKind::Count;
}

void print(const Formula& f, std::string& out);

void print_operand(const Formula& f, std::string& out) {
  if (is_binder(f->kind)) {
    out += "(";
    print(f, out);
    out += ")";
  } else {
    print(f, out);
  }
}

void print(const Formula& f, std::string& out) {
  switch (f->kind) {
    case NodeKind::True: out += "true"; break;
    case NodeKind::False: out += "false"; break;
    case NodeKind::Rel:
    case NodeKind::PredVar: out += f->symbol + term_list_str(f->terms); break;
    case NodeKind::Eq: out += f->terms[0].name + " = " + f->terms[1].name; break;
    case NodeKind::Not:
      out += "not ";
      if (f->children[0]->kind == NodeKind::Eq) {
        out += "(";
        print(f->children[0], out);
        out += ")";
      } else {
        print_operand(f->children[0], out);
      }
      break;
    case NodeKind::And:
    case NodeKind::Or:
      out += "(";
      print_operand(f->children[0], out);
      out += f->kind == NodeKind::And ? " and " : " or ";
      print_operand(f->children[1], out);
      out += ")";
      break;
    case NodeKind::Exists:
    case NodeKind::Forall:
      out += (f->kind == NodeKind::Exists ? "exists " : "forall ") + f->var + ". ";
      print(f->children[0], out);
      break;
    case NodeKind::Count:
      out += "count>=" + std::to_string(f->threshold) + " " + f->var + ". ";
      print(f->children[0], out);
      break;
    case NodeKind::Lfp: {
      out += "lfp " + f->symbol + "(";
      for (std::size_t i = 0; i < f->bound.size(); ++i) out += (i ? "," : "") + f->bound[i];
      out += "). ";
      print_operand(f->children[0], out);
      out += " " + term_list_str(f->terms);
      break;
    }
  }
}

std::string term_sexp(const Term& t) { return t.is_constant ? "'" + t.name : t.name; }

void dump(const Formula& f, std::string& out) {
  auto terms = [&](const std::vector<Term>& ts) {
    for (const auto& t : ts) out += " " + term_sexp(t);
  };
  switch (f->kind) {
    case NodeKind::True: out += "true"; return;
    case NodeKind::False: out += "false"; return;
    case NodeKind::Rel:
      out += "(rel " + f->symbol;
      terms(f->terms);
      break;
    case NodeKind::PredVar:
      out += "(pred " + f->symbol;
      terms(f->terms);
      break;
    case NodeKind::Eq:
      out += "(=";
      terms(f->terms);
      break;
    case NodeKind::Not:
    case NodeKind::And:
    case NodeKind::Or:
      out += f->kind == NodeKind::Not ? "(not" : f->kind == NodeKind::And ? "(and" : "(or";
      for (const auto& c : f->children) {
        out += " ";
        dump(c, out);
      }
      break;
    case NodeKind::Exists:
    case NodeKind::Forall:
      out += (f->kind == NodeKind::Exists ? "(exists " : "(forall ") + f->var + " ";
      dump(f->children[0], out);
      break;
    case NodeKind::Count:
      out += "(count>= " + std::to_string(f->threshold) + " " + f->var + " ";
      dump(f->children[0], out);
      break;
    case NodeKind::Lfp:
      out += "(lfp " + f->symbol + " (";
      for (std::size_t i = 0; i < f->bound.size(); ++i) out += (i ? " " : "") + f->bound[i];
      out += ") ";
      dump(f->children[0], out);
      out += " (";
      for (std::size_t i = 0; i < f->terms.size(); ++i) out += (i ? " " : "") + term_sexp(f->terms[i]);
      out += ")";
      break;
  }
  out += ")";
}

}  // namespace

std::string to_string(const Formula& f) {
  std::string s;
  print(f, s);
  return s;
}

std::string dump_ast(const Formula& f) {
  std::string s;
  dump(f, s);
  return s;
}

// ---------------------------------------------------------------- syntactic queries

namespace {

// Returns false on the first occurrence of pred under an odd number of negations.
bool positive(const Formula& f, const std::string& pred, bool neg) {
  switch (f->kind) {
    case NodeKind::Rel:
    case NodeKind::PredVar: return !(f->symbol == pred && neg);
    case NodeKind::Not: return positive(f->children[0], pred, !neg);
    case NodeKind::Lfp:
      if (f->symbol == pred) return true;
      return positive(f->children[0], pred, neg);
    default:
      for (const auto& c : f->children)
        if (!positive(c, pred, neg)) return false;
      return true;
  }
}

void collect_free(const Formula& f, std::set<std::string>& out) {
  switch (f->kind) {
    case NodeKind::Rel:
    case NodeKind::PredVar:
    case NodeKind::Eq:
      for (const auto& t : f->terms)
        if (!t.is_constant) out.insert(t.name);
      return;
    case NodeKind::Exists:
    case NodeKind::Forall:
    case NodeKind::Count: {
      std::set<std::string> inner;
      collect_free(f->children[0], inner);
      inner.erase(f->var);
      out.insert(inner.begin(), inner.end());
      return;
    }
    case NodeKind::Lfp: {
      std::set<std::string> inner;
      collect_free(f->children[0], inner);
      for (const auto& b : f->bound) inner.erase(b);
      out.insert(inner.begin(), inner.end());
      for (const auto& t : f->terms)
        if (!t.is_constant) out.insert(t.name);
      return;
    }
    default:
      for (const auto& c : f->children) collect_free(c, out);
  }
}

void collect_preds(const Formula& f, std::set<std::string>& out) {
  if (f->kind == NodeKind::PredVar) {
    out.insert(f->symbol);
    return;
  }
  if (f->kind == NodeKind::Lfp) {
    std::set<std::string> inner;
    collect_preds(f->children[0], inner);
    inner.erase(f->symbol);
    out.insert(inner.begin(), inner.end());
    return;
  }
  for (const auto& c : f->children) collect_preds(c, out);
}

void collect_all(const Formula& f, std::set<std::string>& out) {
  for (const auto& t : f->terms)
    if (!t.is_constant) out.insert(t.name);
  if (!f->var.empty()) out.insert(f->var);
  for (const auto& b : f->bound) out.insert(b);
  for (const auto& c : f->children) collect_all(c, out);
}

}  // namespace

bool check_positive(const Formula& body, const std::string& pred) { return positive(body, pred, false); }

void check_all_positive(const Formula& f) {
  if (f->kind == NodeKind::Lfp && !check_positive(f->children[0], f->symbol))
    throw PositivityError("predicate " + f->symbol + " occurs negatively in the body of lfp " + f->symbol +
                          ": " + to_string(f));
  for (const auto& c : f->children) check_all_positive(c);
}

Formula bind_predicate(const Formula& f, const std::string& pred) {
  if (f->kind == NodeKind::Rel && f->symbol == pred) return pred_atom(pred, f->terms);
  if (f->kind == NodeKind::Lfp && f->symbol == pred) return f;
  bool changed = false;
  std::vector<Formula> kids;
  for (const auto& c : f->children) {
    kids.push_back(bind_predicate(c, pred));
    changed |= kids.back() != c;
  }
  if (!changed) return f;
  auto n = std::make_shared<Node>(*f);
  n->children = std::move(kids);
  return n;
}

std::set<std::string> free_vars(const Formula& f) {
  std::set<std::string> s;
  collect_free(f, s);
  return s;
}

std::set<std::string> free_predicates(const Formula& f) {
  std::set<std::string> s;
  collect_preds(f, s);
  return s;
}

std::set<std::string> all_vars(const Formula& f) {
  std::set<std::string> s;
  collect_all(f, s);
  return s;
}

int count_vars(const Formula& f) { return static_cast<int>(all_vars(f).size()); }

int quantifier_rank(const Formula& f) {
  int r = 0;
  for (const auto& c : f->children) r = std::max(r, quantifier_rank(c));
  if (is_binder(f->kind)) ++r;
  return r;
}

bool is_first_order(const Formula& f) {
  if (f->kind == NodeKind::Lfp || f->kind == NodeKind::PredVar || f->kind == NodeKind::Count) return false;
  for (const auto& c : f->children)
    if (!is_first_order(c)) return false;
  return true;
}

std::size_t ast_size(const Formula& f) {
  std::size_t s = 1;
  for (const auto& c : f->children) s += ast_size(c);
  return s;
}

std::vector<std::string> free_var_order(const Formula& f) {
  auto s = free_vars(f);
  return {s.begin(), s.end()};
}

}  // namespace forge
