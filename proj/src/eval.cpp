#include "forge/eval.hpp"

#include <algorithm>
#include <functional>

#include "forge/error.hpp"

namespace forge {

std::size_t Table::index(const Assignment& a) const {
  std::size_t idx = 0;
  for (const auto& v : vars) {
    auto it = a.find(v);
    if (it == a.end()) throw EvaluationError("unbound variable " + v);
    if (it->second < 0 || it->second >= n) throw EvaluationError("variable " + v + " assigned outside universe");
    idx = idx * n + static_cast<std::size_t>(it->second);
  }
  return idx;
}

std::vector<Tuple> Table::tuples() const {
  std::vector<Tuple> out;
  const std::size_t m = vars.size();
  Tuple t(m, 0);
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    if (data[idx]) out.push_back(t);
    for (std::size_t i = m; i-- > 0;) {
      if (++t[i] < n) break;
      t[i] = 0;
    }
  }
  return out;
}

Element resolve_term(const Structure& m, const Term& t, const Assignment& a) {
  if (t.is_constant) {
    if (auto c = m.constant(t.name)) return *c;
    if (auto l = m.find_label(t.name)) return *l;
    throw EvaluationError("constant " + t.name + " not interpreted");
  }
  auto it = a.find(t.name);
  if (it == a.end()) throw EvaluationError("unbound variable " + t.name);
  return it->second;
}

namespace {

std::size_t checked_power(int n, std::size_t m, std::size_t cap) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < m; ++i) {
    if (n != 0 && r > cap / static_cast<std::size_t>(n))
      throw ResourceError("table over " + std::to_string(m) + " variables on " + std::to_string(n) +
                          " elements exceeds the cap");
    r *= static_cast<std::size_t>(n);
  }
  if (r > cap) throw ResourceError("table exceeds the cap");
  return r;
}

std::vector<std::string> sorted_union(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Calls fn(digits, source_index) for every assignment to `target`; the source index is
// the position of the restriction in a table over `source_vars`.
template <class Fn>
void odometer(int n, const std::vector<std::string>& target, const std::vector<std::string>& source_vars,
              Fn&& fn) {
  const std::size_t m = target.size();
  std::vector<std::size_t> stride(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    auto it = std::find(source_vars.begin(), source_vars.end(), target[i]);
    if (it == source_vars.end()) continue;
    std::size_t s = 1;
    for (auto j = it + 1; j != source_vars.end(); ++j) s *= static_cast<std::size_t>(n);
    stride[i] = s;
  }
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) total *= static_cast<std::size_t>(n);
  if (n == 0 && m > 0) return;
  std::vector<int> digit(m, 0);
  std::size_t src = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    fn(digit, src);
    for (std::size_t i = m; i-- > 0;) {
      src += stride[i];
      if (++digit[i] < n) break;
      digit[i] = 0;
      src -= stride[i] * static_cast<std::size_t>(n);
    }
  }
}

Table reshape(const Table& src, const std::vector<std::string>& target, std::size_t cap) {
  if (src.vars == target) return src;
  Table out{target, src.n, {}};
  out.data.resize(checked_power(src.n, target.size(), cap));
  std::size_t pos = 0;
  odometer(src.n, target, src.vars, [&](const std::vector<int>&, std::size_t s) { out.data[pos++] = src.data[s]; });
  return out;
}

struct PredBinding {
  std::string name;
  const Table* stage;
  std::size_t arity;
};

}  // namespace

struct Evaluator::Impl {
  const Structure& m;
  int n;
  std::size_t cap;
  std::unordered_map<const Node*, std::pair<Formula, Table>> memo;
  std::unordered_map<const Node*, std::pair<Formula, std::vector<Table>>> traces;
  std::unordered_map<const Node*, std::pair<Formula, std::vector<std::string>>> preds;
  std::unordered_map<const Node*, std::pair<Formula, std::vector<std::string>>> fvars;
  std::unordered_map<std::string, std::vector<std::uint8_t>> dense;
  std::vector<PredBinding> env;

  Impl(const Structure& s, std::size_t c) : m(s), n(s.size()), cap(c) {}

  // Free predicate variables, memoized over the DAG.
  const std::vector<std::string>& free_preds(const Formula& f) {
    auto it = preds.find(f.get());
    if (it != preds.end()) return it->second.second;
    std::vector<std::string> out;
    if (f->kind == NodeKind::PredVar) {
      out.push_back(f->symbol);
    } else {
      for (const auto& c : f->children) {
        const auto& p = free_preds(c);
        out = sorted_union(out, p);
      }
      if (f->kind == NodeKind::Lfp) out.erase(std::remove(out.begin(), out.end(), f->symbol), out.end());
    }
    return preds.emplace(f.get(), std::make_pair(f, std::move(out))).first->second.second;
  }

  const std::vector<std::string>& free_var_list(const Formula& f) {
    auto it = fvars.find(f.get());
    if (it != fvars.end()) return it->second.second;
    std::vector<std::string> out;
    switch (f->kind) {
      case NodeKind::Rel:
      case NodeKind::PredVar:
      case NodeKind::Eq: out = term_vars(f->terms); break;
      case NodeKind::Exists:
      case NodeKind::Forall:
      case NodeKind::Count:
        out = free_var_list(f->children[0]);
        out.erase(std::remove(out.begin(), out.end(), f->var), out.end());
        break;
      case NodeKind::Lfp:
        for (const auto& v : free_var_list(f->children[0]))
          if (std::find(f->bound.begin(), f->bound.end(), v) == f->bound.end()) out.push_back(v);
        out = sorted_union(out, term_vars(f->terms));
        break;
      default:
        for (const auto& c : f->children) out = sorted_union(out, free_var_list(c));
    }
    return fvars.emplace(f.get(), std::make_pair(f, std::move(out))).first->second.second;
  }

  const std::vector<std::uint8_t>* dense_relation(const std::string& name) {
    auto it = dense.find(name);
    if (it != dense.end()) return &it->second;
    const Relation& r = m.relation(name);
    if (r.arity() > 3) return nullptr;
    std::size_t size = 1;
    for (int i = 0; i < r.arity(); ++i) size *= static_cast<std::size_t>(n);
    if (size > (std::size_t{1} << 26)) return nullptr;
    std::vector<std::uint8_t> d(size, 0);
    for (const auto& t : r.tuples()) {
      std::size_t idx = 0;
      for (Element e : t) idx = idx * n + static_cast<std::size_t>(e);
      d[idx] = 1;
    }
    return &dense.emplace(name, std::move(d)).first->second;
  }

  Element constant_of(const Term& t) { return resolve_term(m, t, {}); }

  std::vector<std::string> term_vars(const std::vector<Term>& ts) {
    std::vector<std::string> v;
    for (const auto& t : ts)
      if (!t.is_constant) v.push_back(t.name);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }

  // For each term: -1 - element for constants, else the index of its variable in vars.
  std::vector<int> term_slots(const std::vector<Term>& ts, const std::vector<std::string>& vars) {
    std::vector<int> slots;
    for (const auto& t : ts) {
      if (t.is_constant) {
        slots.push_back(-1 - constant_of(t));
      } else {
        slots.push_back(static_cast<int>(std::find(vars.begin(), vars.end(), t.name) - vars.begin()));
      }
    }
    return slots;
  }

  Table atom(const Formula& f) {
    Table out{term_vars(f->terms), n, {}};
    out.data.resize(checked_power(n, out.vars.size(), cap));
    auto slots = term_slots(f->terms, out.vars);
    const auto* d = dense_relation(f->symbol);
    const Relation& rel = m.relation(f->symbol);
    Tuple t(f->terms.size());
    std::size_t pos = 0;
    odometer(n, out.vars, {}, [&](const std::vector<int>& digit, std::size_t) {
      for (std::size_t i = 0; i < slots.size(); ++i) t[i] = slots[i] < 0 ? -1 - slots[i] : digit[slots[i]];
      if (d) {
        std::size_t idx = 0;
        for (Element e : t) idx = idx * n + static_cast<std::size_t>(e);
        out.data[pos++] = (*d)[idx];
      } else {
        out.data[pos++] = rel.contains(t);
      }
    });
    return out;
  }

  Table eq(const Formula& f) {
    Table out{term_vars(f->terms), n, {}};
    out.data.resize(checked_power(n, out.vars.size(), cap));
    auto slots = term_slots(f->terms, out.vars);
    std::size_t pos = 0;
    odometer(n, out.vars, {}, [&](const std::vector<int>& digit, std::size_t) {
      int a = slots[0] < 0 ? -1 - slots[0] : digit[slots[0]];
      int b = slots[1] < 0 ? -1 - slots[1] : digit[slots[1]];
      out.data[pos++] = a == b;
    });
    return out;
  }

  // Reads stage table `stage` (over bound positions then params) at the atom's arguments.
  Table read_stage(const Table& stage, std::size_t arity, const std::vector<Term>& args) {
    std::vector<std::string> params(stage.vars.begin() + static_cast<long>(arity), stage.vars.end());
    std::vector<std::string> sorted_params = params;
    std::sort(sorted_params.begin(), sorted_params.end());
    Table out{sorted_union(term_vars(args), sorted_params), n, {}};
    out.data.resize(checked_power(n, out.vars.size(), cap));
    auto slots = term_slots(args, out.vars);
    std::vector<std::size_t> param_slot;
    for (const auto& p : params)
      param_slot.push_back(static_cast<std::size_t>(std::find(out.vars.begin(), out.vars.end(), p) - out.vars.begin()));
    std::size_t pos = 0;
    odometer(n, out.vars, {}, [&](const std::vector<int>& digit, std::size_t) {
      std::size_t idx = 0;
      for (int s : slots) idx = idx * n + static_cast<std::size_t>(s < 0 ? -1 - s : digit[s]);
      for (std::size_t p : param_slot) idx = idx * n + static_cast<std::size_t>(digit[p]);
      out.data[pos++] = stage.data[idx];
    });
    return out;
  }

  Table quantify(const Formula& f) {
    Table child = compute(f->children[0]);
    auto it = std::find(child.vars.begin(), child.vars.end(), f->var);
    if (it == child.vars.end()) {
      if (f->kind == NodeKind::Exists) {
        if (n == 0) std::fill(child.data.begin(), child.data.end(), 0);
      } else if (f->kind == NodeKind::Count) {
        if (n < f->threshold) std::fill(child.data.begin(), child.data.end(), 0);
      } else if (n == 0) {
        std::fill(child.data.begin(), child.data.end(), 1);
      }
      return child;
    }
    Table out{{}, n, {}};
    for (const auto& v : child.vars)
      if (v != f->var) out.vars.push_back(v);
    out.data.resize(checked_power(n, out.vars.size(), cap));
    std::vector<int> counts(out.data.size(), 0);
    // Destination index skips the quantified digit.
    std::size_t pos = 0;
    odometer(n, child.vars, out.vars, [&](const std::vector<int>&, std::size_t dst) {
      counts[dst] += child.data[pos++];
    });
    const int need = f->kind == NodeKind::Exists ? 1 : f->kind == NodeKind::Count ? f->threshold : n;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = counts[i] >= need;
    return out;
  }

  Table lfp_node(const Formula& f) {
    const Formula& body = f->children[0];
    const std::size_t r = f->bound.size();
    checked_power(n, r, cap);
    std::vector<Table> stages;
    Table stage{f->bound, n, {}};
    stage.data.assign(checked_power(n, r, cap), 0);
    // Parameters: free variables of the body other than the bound ones.
    std::vector<std::string> layout = f->bound;
    for (const auto& v : free_var_list(body))
      if (std::find(f->bound.begin(), f->bound.end(), v) == f->bound.end()) layout.push_back(v);
    check_no_shadowing(f, layout);
    stage.vars = layout;
    stage.data.assign(checked_power(n, layout.size(), cap), 0);
    env.push_back({f->symbol, nullptr, r});
    std::size_t limit = 1;
    for (std::size_t i = 0; i < r; ++i) limit *= static_cast<std::size_t>(n);
    while (true) {
      env.back().stage = &stage;
      Table t = compute(body);
      stages.push_back(stage);
      Table next = reshape(t, stage.vars, cap);
      bool grew = false;
      for (std::size_t i = 0; i < next.data.size(); ++i) {
        if (stage.data[i] && !next.data[i]) {
          env.pop_back();
          throw EvaluationError("non-monotone stage in lfp " + f->symbol);
        }
        grew |= next.data[i] && !stage.data[i];
      }
      if (!grew) break;
      stage = std::move(next);
      if (stages.size() > limit + 1) {
        env.pop_back();
        throw EvaluationError("lfp " + f->symbol + " exceeded n^r stages");
      }
    }
    env.pop_back();
    Table out = read_stage(stage, r, f->terms);
    if (free_preds(f).empty()) traces[f.get()] = {f, std::move(stages)};
    return out;
  }

  static void collect_binders(const Formula& f, std::set<std::string>& out) {
    if (!f->var.empty()) out.insert(f->var);
    for (const auto& c : f->children) collect_binders(c, out);
  }

  void check_no_shadowing(const Formula& f, const std::vector<std::string>& layout) {
    std::set<std::string> binders;
    collect_binders(f->children[0], binders);
    for (std::size_t i = f->bound.size(); i < layout.size(); ++i)
      if (binders.count(layout[i]))
        throw EvaluationError("lfp " + f->symbol + ": parameter " + layout[i] + " is rebound inside the body");
  }

  Table compute(const Formula& f) {
    const bool cacheable = free_preds(f).empty();
    if (cacheable) {
      auto it = memo.find(f.get());
      if (it != memo.end()) return it->second.second;
    }
    Table out;
    switch (f->kind) {
      case NodeKind::True:
      case NodeKind::False:
        out = Table{{}, n, {static_cast<std::uint8_t>(f->kind == NodeKind::True)}};
        break;
      case NodeKind::Rel: out = atom(f); break;
      case NodeKind::Eq: out = eq(f); break;
      case NodeKind::PredVar: {
        const PredBinding* b = nullptr;
        for (auto it = env.rbegin(); it != env.rend(); ++it)
          if (it->name == f->symbol) {
            b = &*it;
            break;
          }
        if (!b) throw EvaluationError("free predicate variable " + f->symbol);
        out = read_stage(*b->stage, b->arity, f->terms);
        break;
      }
      case NodeKind::Not:
        out = compute(f->children[0]);
        for (auto& x : out.data) x = !x;
        break;
      case NodeKind::And:
      case NodeKind::Or: {
        Table a = compute(f->children[0]);
        Table b = compute(f->children[1]);
        auto vars = sorted_union(a.vars, b.vars);
        a = reshape(a, vars, cap);
        b = reshape(b, vars, cap);
        if (f->kind == NodeKind::And) {
          for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] &= b.data[i];
        } else {
          for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] |= b.data[i];
        }
        out = std::move(a);
        break;
      }
      case NodeKind::Exists:
      case NodeKind::Forall:
      case NodeKind::Count: out = quantify(f); break;
      case NodeKind::Lfp: out = lfp_node(f); break;
    }
    if (cacheable) memo[f.get()] = {f, out};
    return out;
  }
};

Evaluator::Evaluator(const Structure& m, std::size_t table_cap)
    : m_(m), impl_(std::make_unique<Impl>(m, table_cap)) {}

Evaluator::~Evaluator() = default;

void Evaluator::clear() {
  impl_->memo.clear();
  impl_->traces.clear();
  impl_->preds.clear();
  impl_->fvars.clear();
}

const Table& Evaluator::table(const Formula& f) {
  if (!impl_->free_preds(f).empty())
    throw EvaluationError("free predicate variable " + impl_->free_preds(f).front());
  impl_->compute(f);
  return impl_->memo.at(f.get()).second;
}

bool Evaluator::evaluate(const Formula& f, const Assignment& a) {
  const Table& t = table(f);
  return t.at(a);
}

StageTrace Evaluator::stages(const Formula& node, const Assignment& a) {
  if (node->kind != NodeKind::Lfp) throw InvalidParameter("not an lfp formula");
  table(node);
  const auto& tables = impl_->traces.at(node.get()).second;
  const std::size_t r = node->bound.size();
  const Table& layout = tables.front();
  const int n = impl_->n;
  // Slice each stage at the parameter values.
  std::size_t base = 0;
  std::size_t block = 1;
  for (std::size_t i = 0; i < r; ++i) block *= static_cast<std::size_t>(n);
  for (std::size_t i = r; i < layout.vars.size(); ++i) {
    auto it = a.find(layout.vars[i]);
    if (it == a.end()) throw EvaluationError("unbound parameter " + layout.vars[i]);
    base = base * n + static_cast<std::size_t>(it->second);
  }
  StageTrace trace;
  trace.arity = static_cast<int>(r);
  std::size_t rest = 1;
  for (std::size_t i = r; i < layout.vars.size(); ++i) rest *= static_cast<std::size_t>(n);
  for (const auto& t : tables) {
    std::set<Tuple> s;
    Tuple tup(r, 0);
    for (std::size_t off = 0; off < block; ++off) {
      if (!t.data[off * rest + base]) continue;
      std::size_t x = off;
      for (std::size_t i = r; i-- > 0;) {
        tup[i] = static_cast<Element>(x % n);
        x /= n;
      }
      s.insert(tup);
    }
    if (!trace.stages.empty() && trace.stages.back() == s) break;
    if (!trace.stages.empty() && !std::includes(s.begin(), s.end(), trace.stages.back().begin(),
                                                trace.stages.back().end()))
      throw EvaluationError("non-monotone stage");
    trace.stages.push_back(std::move(s));
  }
  trace.depth = static_cast<int>(trace.stages.size()) - 1;
  if (static_cast<std::size_t>(trace.depth) > block) throw EvaluationError("depth exceeds n^r");
  return trace;
}

int Evaluator::depth(const Formula& node) {
  if (node->kind != NodeKind::Lfp) throw InvalidParameter("not an lfp formula");
  table(node);
  return static_cast<int>(impl_->traces.at(node.get()).second.size()) - 1;
}

bool evaluate(const Structure& m, const Formula& f, const Assignment& a) {
  Evaluator ev(m);
  return ev.evaluate(f, a);
}

Table evaluate_table(const Structure& m, const Formula& f) {
  Evaluator ev(m);
  return ev.table(f);
}

StageTrace lfp_stages(const Structure& m, const Formula& body, const std::string& pred,
                      const std::vector<std::string>& bound, const Assignment& params) {
  if (!check_positive(body, pred)) throw PositivityError("predicate " + pred + " occurs negatively");
  std::vector<Term> args;
  for (const auto& b : bound) args.push_back(var_term(b));
  return lfp_stages(m, lfp(pred, bound, bind_predicate(body, pred), args), params);
}

StageTrace lfp_stages(const Structure& m, const Formula& lfp_node, const Assignment& params) {
  if (lfp_node->kind != NodeKind::Lfp) throw InvalidParameter("not an lfp formula");
  check_all_positive(lfp_node);
  Evaluator ev(m);
  return ev.stages(lfp_node, params);
}

int inductive_depth(const Structure& m, const Formula& f) {
  if (f->kind != NodeKind::Lfp) throw InvalidParameter("top-level node must be lfp");
  check_all_positive(f);
  Evaluator ev(m);
  return ev.depth(f);
}

// ---------------------------------------------------------------- pointwise

namespace {

class Pointwise {
 public:
  explicit Pointwise(const Structure& m) : m_(m) {}

  bool eval(const Formula& f, Assignment& a) {
    switch (f->kind) {
      case NodeKind::True: return true;
      case NodeKind::False: return false;
      case NodeKind::Rel: {
        Tuple t;
        t.reserve(f->terms.size());
        for (const auto& x : f->terms) t.push_back(resolve_term(m_, x, a));
        return m_.relation(f->symbol).contains(t);
      }
      case NodeKind::Eq: return resolve_term(m_, f->terms[0], a) == resolve_term(m_, f->terms[1], a);
      case NodeKind::PredVar: {
        Tuple t;
        for (const auto& x : f->terms) t.push_back(resolve_term(m_, x, a));
        for (auto it = env_.rbegin(); it != env_.rend(); ++it)
          if (it->first == f->symbol) return it->second->count(t) != 0;
        throw EvaluationError("free predicate variable " + f->symbol);
      }
      case NodeKind::Not: return !eval(f->children[0], a);
      case NodeKind::And: return eval(f->children[0], a) && eval(f->children[1], a);
      case NodeKind::Or: return eval(f->children[0], a) || eval(f->children[1], a);
      case NodeKind::Exists:
      case NodeKind::Forall:
      case NodeKind::Count: {
        auto saved = a.find(f->var) == a.end() ? std::optional<Element>() : std::optional<Element>(a[f->var]);
        int hits = 0;
        const int need = f->kind == NodeKind::Count ? f->threshold : 1;
        bool result = f->kind == NodeKind::Forall;
        for (Element e = 0; e < m_.size(); ++e) {
          a[f->var] = e;
          bool v = eval(f->children[0], a);
          if (f->kind == NodeKind::Forall) {
            if (!v) {
              result = false;
              break;
            }
          } else if (v && ++hits >= need) {
            result = true;
            break;
          }
        }
        if (saved) {
          a[f->var] = *saved;
        } else {
          a.erase(f->var);
        }
        return result;
      }
      case NodeKind::Lfp: return lfp(f, a);
    }
    return false;
  }

 private:
  bool lfp(const Formula& f, Assignment& a) {
    const std::size_t r = f->bound.size();
    std::set<Tuple> stage;
    Tuple target;
    for (const auto& t : f->terms) target.push_back(resolve_term(m_, t, a));
    std::vector<std::pair<std::string, std::optional<Element>>> saved;
    for (const auto& b : f->bound) saved.push_back({b, a.count(b) ? std::optional<Element>(a[b]) : std::nullopt});
    const int n = m_.size();
    while (true) {
      env_.push_back({f->symbol, &stage});
      std::set<Tuple> next;
      Tuple t(r, 0);
      bool done = n == 0 && r > 0;
      while (!done) {
        for (std::size_t i = 0; i < r; ++i) a[f->bound[i]] = t[i];
        if (eval(f->children[0], a)) next.insert(t);
        done = true;
        for (std::size_t i = r; i-- > 0;) {
          if (++t[i] < n) {
            done = false;
            break;
          }
          t[i] = 0;
        }
      }
      env_.pop_back();
      if (next == stage) break;
      stage = std::move(next);
    }
    for (auto& [name, v] : saved) {
      if (v) {
        a[name] = *v;
      } else {
        a.erase(name);
      }
    }
    return stage.count(target) != 0;
  }

  const Structure& m_;
  std::vector<std::pair<std::string, const std::set<Tuple>*>> env_;
};

}  // namespace

bool evaluate_pointwise(const Structure& m, const Formula& f, const Assignment& a) {
  Assignment copy = a;
  return Pointwise(m).eval(f, copy);
}

}  // namespace forge
