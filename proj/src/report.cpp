#include "forge/report.hpp"

#include <algorithm>
#include <random>

#include "forge/enumerate.hpp"
#include "forge/error.hpp"
#include "forge/eval.hpp"
#include "forge/games.hpp"

namespace forge {

std::string to_string(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Indeterminate: return "INDETERMINATE";
  }
  return "?";
}

Status status_of(Verdict v) {
  switch (v) {
    case Verdict::Pass: return Status::Pass;
    case Verdict::Fail: return Status::Fail;
    case Verdict::Indeterminate: return Status::Indeterminate;
  }
  return Status::Indeterminate;
}

void Report::add(Record r) { records_.push_back(std::move(r)); }

void Report::append(const Report& other) {
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

bool Report::any(Status s) const {
  return std::any_of(records_.begin(), records_.end(), [&](const Record& r) { return r.status == s; });
}

int Report::exit_code() const {
  if (any(Status::Fail)) return 1;
  if (any(Status::Indeterminate)) return 3;
  return 0;
}

std::string Report::json_lines(bool timing) const {
  std::vector<const Record*> order;
  for (const auto& r : records_) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const Record* a, const Record* b) {
    if (a->check != b->check) return a->check < b->check;
    return a->params.dump() < b->params.dump();
  });
  std::string out;
  for (const Record* r : order) {
    Json j;
    j["check"] = r->check;
    j["status"] = to_string(r->status);
    j["params"] = r->params;
    j["detail"] = r->detail;
    if (timing) j["seconds"] = r->seconds;
    out += j.dump() + "\n";
  }
  return out;
}

std::optional<Formula> first_lfp(const Formula& f) {
  if (f->kind == NodeKind::Lfp) return f;
  for (const auto& c : f->children)
    if (auto found = first_lfp(c)) return found;
  return std::nullopt;
}

// ---------------------------------------------------------------- deterministic construction

namespace {

Record decoder_record(const BuildResult& h, const FormulaList& theta, int j) {
  Stopwatch clock;
  Record r{"decoder", Status::Pass, {{"j", j}}};
  const auto& s = h.result.structure;
  Evaluator ev(s);
  long pairs = 0, mismatches = 0;
  Json first;
  for (int i = 1; i <= std::min<int>(j, static_cast<int>(theta.size())); ++i) {
    auto vars = free_var_order(theta[i - 1]);
    for (Element a = 0; a < s.size(); ++a) {
      Assignment g;
      if (!vars.empty()) g[vars[0]] = a;
      bool truth = ev.evaluate(theta[i - 1], g);
      bool decoded = decode_phi(h.result, i, a, theta);
      ++pairs;
      if (truth != decoded) {
        if (mismatches++ == 0) first = {{"i", i}, {"a", a}, {"formula", truth}, {"decoder", decoded}};
      }
    }
  }
  r.detail = {{"universe", s.size()}, {"pairs", pairs}, {"mismatches", mismatches}};
  if (mismatches > 0) {
    r.status = Status::Fail;
    r.detail["witness"] = first;
  }
  r.seconds = clock.seconds();
  return r;
}

Record substructure_record(const BuildResult& h, const FormulaList& theta, int j, const MccolmOptions& opts) {
  Stopwatch clock;
  Record r{"elementary-substructure", Status::Pass, {{"j", j}}};
  auto v = clique_schedule(theta);
  Json stages = Json::array();
  for (int i = 1; i < static_cast<int>(h.trace.stages.size()); ++i) {
    int k = std::max(2, v[std::min<std::size_t>(i, v.size() - 1)]);
    const auto& lower = h.trace.stages[i - 1].structure;
    // Segment vertices always, then random tuples.
    std::vector<Tuple> sample;
    for (const auto& a : h.trace.stages[i - 1].index.artifacts())
      if (a.kind == ArtifactKind::Segment)
        for (Element e : a.members) sample.push_back({e});
    for (auto& t : sample_tuples(lower, opts.samples, 1, opts.seed + static_cast<std::uint64_t>(i)))
      sample.push_back(std::move(t));
    auto rep = verify_elementary_substructure(h.trace, i, sample, k);
    Json st = {{"i", i},      {"checked", rep.checked},         {"pebbles", rep.game_pebbles},
               {"rank", rep.rank}, {"formula_vars", rep.formula_vars}, {"pass", rep.pass}};
    if (!rep.violations.empty()) st["witness"] = rep.violations.front();
    if (!rep.pass) r.status = Status::Fail;
    if (rep.indeterminate && r.status == Status::Pass) r.status = Status::Indeterminate;
    stages.push_back(st);
  }
  r.detail["stages"] = stages;
  r.seconds = clock.seconds();
  return r;
}

}  // namespace

Report verify_mccolm(const FormulaList& theta, const MccolmOptions& opts) {
  Report rep;
  std::optional<Formula> depth_formula = opts.depth_formula;
  if (!depth_formula)
    for (const auto& f : theta)
      if ((depth_formula = first_lfp(f))) break;

  Json depths = Json::array();
  bool built_all = true, decoders_ok = true, depth_known = depth_formula.has_value();
  Status first_order = Status::Pass;
  for (int j : opts.js) {
    Stopwatch clock;
    BuildResult h;
    try {
      h = build_H(j, theta, opts.corrupt);
    } catch (const ConstructionError& e) {
      rep.add({"build", Status::Fail, {{"j", j}}, {{"reason", e.what()}}, clock.seconds()});
      built_all = false;
      continue;
    }
    int n = h.result.structure.size();
    if (n > opts.universe_cap) {
      rep.add({"build", Status::Indeterminate, {{"j", j}},
               {{"reason", "universe " + std::to_string(n) + " exceeds cap " + std::to_string(opts.universe_cap)}},
               clock.seconds()});
      built_all = false;
      continue;
    }
    auto audit = audit_index(h.result);
    rep.add({"build", audit.empty() ? Status::Pass : Status::Fail, {{"j", j}}, {{"universe", n}, {"audit", audit}},
             clock.seconds()});
    if (!audit.empty()) first_order = Status::Fail;
    auto dec = decoder_record(h, theta, j);
    decoders_ok = decoders_ok && dec.status == Status::Pass;
    if (dec.status != Status::Pass) first_order = Status::Fail;
    rep.add(dec);
    if (opts.substructure) {
      auto sub = substructure_record(h, theta, j, opts);
      if (sub.status == Status::Fail) first_order = Status::Fail;
      if (sub.status == Status::Indeterminate && first_order == Status::Pass) first_order = Status::Indeterminate;
      rep.add(sub);
    }
    if (depth_formula) {
      Stopwatch dclock;
      int d = inductive_depth(h.result.structure, *depth_formula);
      depths.push_back(d);
      rep.add({"depth", Status::Pass, {{"j", j}}, {{"depth", d}}, dclock.seconds()});
    }
  }
  if (!built_all && first_order == Status::Pass) first_order = Status::Indeterminate;
  rep.add({"first-order-on-class", first_order, {{"js", opts.js}},
           {{"formulas", theta.size()}, {"decoders", decoders_ok}}});

  Record unbounded{"unbounded-depth", Status::Pass, {{"js", opts.js}}};
  if (!depth_known) {
    unbounded.status = Status::Indeterminate;
    unbounded.detail["reason"] = "no LFP formula in the list; pass a depth formula";
  } else {
    unbounded.detail["depths"] = depths;
    unbounded.detail["formula"] = to_string(*depth_formula);
    bool increasing = depths.size() >= 2;
    for (std::size_t i = 1; i < depths.size(); ++i)
      increasing = increasing && depths[i].get<int>() > depths[i - 1].get<int>();
    if (!built_all) {
      unbounded.status = Status::Indeterminate;
      unbounded.detail["reason"] = "not every H_j was built";
    } else if (!increasing) {
      unbounded.status = Status::Fail;
      unbounded.detail["witness"] = "depths do not strictly increase";
    }
  }
  rep.add(unbounded);
  return rep;
}

// ---------------------------------------------------------------- envelopes

std::vector<Formula> select_sentences(const Vocabulary& vocab, int count, int k, int q) {
  // Every structure with one or two elements over vocab's binary relations; sentences that
  // are constant on all of them are skipped.
  std::vector<Structure> probes;
  std::vector<std::string> binary;
  for (const auto& r : vocab.relations())
    if (r.arity == 2) binary.push_back(r.name);
  for (int n = 1; n <= 2; ++n) {
    const int cells = n * n * static_cast<int>(binary.size());
    for (long mask = 0; mask < (1L << cells); ++mask) {
      Structure m(n);
      for (const auto& name : binary) m.declare_relation(name, 2);
      for (int c = 0; c < cells; ++c)
        if (mask >> c & 1) m.add_tuple(binary[c / (n * n)], {c % (n * n) / n, c % n});
      probes.push_back(std::move(m));
    }
  }
  int size = q + 1;
  while (size < kMaxEnumSize && count_formulas(vocab, {k, q, size + 1}) <= kSentencePool) ++size;
  std::vector<Formula> pool;
  for (const auto& f : enumerate_formulas(vocab, {k, q, size})) {
    if (static_cast<int>(ast_size(f)) != size || !free_vars(f).empty() || quantifier_rank(f) != q) continue;
    bool seen_true = false, seen_false = false;
    for (const auto& m : probes) (evaluate_pointwise(m, f) ? seen_true : seen_false) = true;
    if (seen_true && seen_false) pool.push_back(f);
  }
  std::vector<Formula> out;
  const std::size_t take = std::min<std::size_t>(count < 0 ? 0 : count, pool.size());
  for (std::size_t i = 0; i < take; ++i) out.push_back(pool[i * pool.size() / take]);
  return out;
}

namespace {

Vocabulary envelope_vocabulary() {
  Vocabulary v;
  v.add_relation(kEnvelopeRelation, 2);
  return v;
}

// Random positions with k-1 pebbles built inside k-nice maps, each probed with further
// Spoiler moves that Duplicator must answer inside k-nice maps.
Record nice_replay(const Envelope& e1, const Envelope& e2, const Hypergraph& h, int k, int samples,
                   std::uint64_t seed) {
  Stopwatch clock;
  Record r{"k-nice-replay", Status::Pass, {{"k", k}, {"samples", samples}}};
  MapChecker mc(e1, e2, h, k);
  std::mt19937_64 rng(seed);
  const int n1 = e1.structure.size(), n2 = e2.structure.size();
  auto answer = [&](const ElementMap& eta, Element x) -> std::optional<Element> {
    for (Element y = 0; y < n2; ++y) {
      auto next = eta;
      next.push_back({x, y});
      if (mc.nice(next)) return y;
    }
    return std::nullopt;
  };
  int probes = 0;
  for (int t = 0; t < samples && r.status == Status::Pass; ++t) {
    ElementMap eta;
    for (int i = 0; i <= k - 1 && r.status == Status::Pass; ++i) {
      Element x = static_cast<Element>(rng() % n1);
      auto y = answer(eta, x);
      ++probes;
      if (!y) {
        r.status = Status::Fail;
        Json pos = Json::array();
        for (auto [a, b] : eta) pos.push_back({a, b});
        r.detail["witness"] = {{"position", pos}, {"spoiler", x}};
      } else if (i < k - 1) {
        eta.push_back({x, *y});
      }
    }
  }
  r.detail["probes"] = probes;
  r.seconds = clock.seconds();
  return r;
}

}  // namespace

Report envelope_agreement(const Envelope& e1, const Envelope& e2, const Hypergraph& h, int k,
                          const AgreementOptions& opts) {
  Report rep;
  {
    Stopwatch clock;
    Record r{"pebble-equiv", Status::Pass, {{"k", k}}};
    try {
      auto g = pebble_game(e1.structure, e2.structure, k);
      r.detail = {{"winner", g.duplicator ? "DUPLICATOR" : "SPOILER"}, {"rounds", g.rounds}};
      if (!g.duplicator) {
        r.status = Status::Fail;
        r.detail["witness"] = g.witness;
      }
    } catch (const ResourceError& e) {
      r.status = Status::Indeterminate;
      r.detail["reason"] = e.what();
    }
    r.seconds = clock.seconds();
    rep.add(r);
  }
  {
    Stopwatch clock;
    Record r{"sentence-agreement", Status::Pass, {{"k", k}, {"rank", opts.rank}, {"sentences", opts.sentences}}};
    auto sentences = select_sentences(envelope_vocabulary(), opts.sentences, k, opts.rank);
    Json rows = Json::array();
    for (const auto& f : sentences) {
      bool a = evaluate_pointwise(e1.structure, f), b = evaluate_pointwise(e2.structure, f);
      rows.push_back({{"sentence", to_string(f)}, {"value", a}});
      if (a != b && r.status == Status::Pass) {
        r.status = Status::Fail;
        r.detail["witness"] = to_string(f);
      }
    }
    if (static_cast<int>(sentences.size()) < opts.sentences) {
      r.status = Status::Indeterminate;
      r.detail["reason"] = "enumeration produced fewer sentences than requested";
    }
    r.detail["checked"] = rows;
    r.seconds = clock.seconds();
    rep.add(r);
  }
  if (opts.nice_samples > 0) rep.add(nice_replay(e1, e2, h, k, opts.nice_samples, opts.seed));
  return rep;
}

Report verify_envelope_pipeline(const Hypergraph& h, const PipelineOptions& opts) {
  Report rep;
  std::vector<Envelope> made;
  const Hypergraph below = h.below(opts.k);
  for (std::uint64_t seed : opts.seeds) {
    Json params = {{"seed", seed}, {"k", opts.k}};
    Stopwatch clock;
    GenerationStats stats;
    Envelope e;
    try {
      e = generate_envelope(h, opts.k, seed, opts.generation, &stats);
    } catch (const GenerationFailure& f) {
      rep.add({"generate", Status::Fail, params, {{"reason", f.what()}, {"attempts", stats.attempts}}, clock.seconds()});
      continue;
    }
    rep.add({"generate", Status::Pass, params,
             {{"universe", e.structure.size()}, {"attempts", stats.attempts}, {"pool", stats.pool},
              {"cliques", stats.cliques}},
             clock.seconds()});

    Stopwatch vclock;
    auto v = validate_envelope(e);
    Record vr{"validate", v.pass ? Status::Pass : Status::Fail, params};
    for (const auto& c : v.conditions) {
      vr.detail[c.name] = c.pass;
      if (!c.pass) vr.detail["witness"] = c.witness;
    }
    vr.seconds = vclock.seconds();
    rep.add(vr);

    Stopwatch gclock;
    auto good = check_k_good(e, h, opts.k, opts.generation.bounds);
    Record gr{"k-good", status_of(good.overall()), params,
              {{"G0", to_string(good.g0)}, {"G1", to_string(good.g1)}, {"G2", to_string(good.g2)},
               {"sets", good.sets_checked}, {"k_cliques", good.cliques}}};
    if (!good.witness.empty()) gr.detail["witness"] = good.witness;
    gr.seconds = gclock.seconds();
    rep.add(gr);

    Stopwatch cclock;
    auto proj = projections(e);
    CliqueIndex index(e, h, opts.k);
    std::set<Multiset> seen;
    for (const auto& c : index.cliques()) {
      std::vector<int> ps;
      for (Element x : c) ps.push_back(proj[x]);
      seen.insert(multiset_of(ps));
    }
    Record cr{"hyperedges-projected", Status::Pass, params, {{"hyperedges", below.edges.size()}}};
    for (const auto& a : below.edges)
      if (!seen.count(a)) {
        cr.status = Status::Fail;
        cr.detail["witness"] = multiset_to_string(a);
        break;
      }
    cr.seconds = cclock.seconds();
    rep.add(cr);

    Stopwatch bclock;
    std::mt19937_64 rng(seed);
    auto verts = vertices(e);
    std::size_t largest = 0;
    Record br{"closure-bound", Status::Pass, params};
    for (int t = 0; t < opts.closure_samples && !verts.empty(); ++t) {
      std::vector<Element> x;
      for (int i = 0; i < opts.k - 1; ++i) x.push_back(verts[rng() % verts.size()]);
      auto c = index.closure(x);
      largest = std::max(largest, c.size());
      if (static_cast<int>(c.size()) > opts.k * opts.k && br.status == Status::Pass) {
        br.status = Status::Fail;
        br.detail["witness"] = x;
      }
    }
    br.detail["largest"] = largest;
    br.detail["bound"] = opts.k * opts.k;
    br.seconds = bclock.seconds();
    rep.add(br);
    made.push_back(std::move(e));
  }
  if (made.size() >= 2) {
    rep.append(envelope_agreement(made[0], made[1], h, opts.k, opts.agreement));
  } else if (opts.seeds.size() >= 2) {
    rep.add({"pebble-equiv", Status::Fail, {{"k", opts.k}}, {{"reason", "fewer than two envelopes generated"}}});
  }
  return rep;
}

}  // namespace forge
