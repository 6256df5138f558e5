#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "forge/constructions.hpp"
#include "forge/enumerate.hpp"
#include "forge/envelopes.hpp"
#include "forge/error.hpp"
#include "forge/eval.hpp"
#include "forge/games.hpp"
#include "forge/report.hpp"

using namespace forge;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A path when the file exists, otherwise the text itself.
std::string file_or_text(const std::string& arg) {
  std::error_code ec;
  return std::filesystem::is_regular_file(arg, ec) ? read_file(arg) : arg;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

int default_cap() {
  if (const char* env = std::getenv("FMT_FORGE_CAP")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw UsageError("FMT_FORGE_CAP must be a positive integer");
  }
  return kDefaultUniverseCap;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw UsageError("bad integer list: " + text);
    } catch (const std::logic_error&) {
      throw UsageError("bad integer list: " + text);
    }
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

PartialMap parse_init(const std::string& text) {
  PartialMap m;
  if (text.empty()) return m;
  std::stringstream ss(text);
  std::string item;
  int pebble = 1;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("--init expects a:b pairs separated by commas");
    auto a = parse_int_list(item.substr(0, colon)), b = parse_int_list(item.substr(colon + 1));
    m.pairs.push_back({pebble++, a[0], b[0]});
  }
  return m;
}

Vocabulary graph_vocabulary() {
  Vocabulary v;
  v.add_relation("E", 2);
  return v;
}

int emit(const Report& rep, const std::string& out, bool timing) {
  std::string text = rep.json_lines(timing);
  std::cout << text;
  if (!out.empty()) write_file(out, text);
  return rep.exit_code();
}

std::string tuple_text(const Tuple& t) {
  std::string s;
  for (Element e : t) s += (s.empty() ? "" : " ") + std::to_string(e);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-model-theory workbench: fixed-point logic, pebble games, clique and envelope constructions"};
  app.require_subcommand(1);

  std::string formula_arg, structure_path, structure_b, out_path, delta_arg, formulas_arg, depth_formula_arg;
  std::string init_arg, j_arg, policy = "lean", hypergraph_path, envelope_a, envelope_b, seeds_arg;
  int k = 2, j = 2, cap_rank = 2, retries = 10, samples = 20, sentences = 10, nice_samples = 0, pool = 0, cliques = 2;
  int cap_universe = 0;
  std::uint64_t seed = 1;
  bool witness = false, dump_ast_flag = false, no_timing = false, no_substructure = false;

  auto* eval = app.add_subcommand("eval", "Evaluate a formula on a structure");
  eval->add_option("--formula", formula_arg, "Formula file or text")->required();
  eval->add_option("--structure", structure_path, "Structure file")->required();
  eval->add_flag("--dump-ast", dump_ast_flag, "Print the parsed AST first");

  auto* depth = app.add_subcommand("depth", "Inductive depth of an LFP formula");
  depth->add_option("--formula", formula_arg, "Formula file or text")->required();
  depth->add_option("--structure", structure_path, "Structure file")->required();

  auto* game = app.add_subcommand("game", "k-pebble game");
  auto* cgame = app.add_subcommand("cgame", "k-pebble counting game");
  for (auto* g : {game, cgame}) {
    g->add_option("a", structure_path, "First structure")->required();
    g->add_option("b", structure_b, "Second structure")->required();
    g->add_option("--k", k, "Pebbles")->check(CLI::PositiveNumber);
    g->add_flag("--witness", witness, "Print Spoiler's witness position");
  }
  game->add_option("--init", init_arg, "Initial pebble pairs a:b,a:b");

  auto* build_d = app.add_subcommand("build-d", "Segment labeled by a formula list");
  build_d->add_option("--delta", delta_arg, "Formula list file or text")->required();
  auto* build_h = app.add_subcommand("build-h", "One-variable clique construction");
  auto* build_g = app.add_subcommand("build-g", "General-arity gadget construction");
  for (auto* b : {build_h, build_g}) b->add_option("--formulas", formulas_arg, "Formula list file or text")->required();
  build_g->add_option("--policy", policy, "lean or faithful")->check(CLI::IsMember({"lean", "faithful"}));
  for (auto* b : {build_d, build_h, build_g}) {
    b->add_option("--j", j, "Segment length")->check(CLI::PositiveNumber);
    b->add_option("--out", out_path, "Write the structure here");
    b->add_option("--cap-universe", cap_universe, "Largest universe")->check(CLI::PositiveNumber);
  }

  auto* envelope = app.add_subcommand("envelope", "Random envelopes");
  envelope->require_subcommand(1);
  auto* gen = envelope->add_subcommand("gen", "Generate a k-good envelope");
  gen->add_option("hypergraph", hypergraph_path, "Hypergraph file")->required();
  gen->add_option("--pool", pool, "Plebeian vertices per node (0: 2k)");
  gen->add_option("--cliques", cliques, "Planted cliques per hyperedge")->check(CLI::PositiveNumber);
  auto* check = envelope->add_subcommand("check", "Validate an envelope and check k-goodness");
  check->add_option("envelope", envelope_a, "Envelope file")->required();
  check->add_option("hypergraph", hypergraph_path, "Hypergraph file")->required();
  auto* agree = envelope->add_subcommand("agree", "Pebble game and sentence agreement of two envelopes");
  agree->add_option("e1", envelope_a, "First envelope")->required();
  agree->add_option("e2", envelope_b, "Second envelope")->required();
  agree->add_option("--hypergraph", hypergraph_path, "Hypergraph (enables the k-nice replay)");
  agree->add_option("--nice-samples", nice_samples, "Replayed pebble positions");

  auto* verify = app.add_subcommand("verify", "End-to-end checks");
  verify->require_subcommand(1);
  auto* mccolm = verify->add_subcommand("mccolm", "Clique construction: decoders and depth growth");
  mccolm->add_option("--formulas", formulas_arg, "Formula list file or text")->required();
  mccolm->add_option("--j", j_arg, "Largest j (range 2..j) or a comma list")->required();
  mccolm->add_option("--depth-formula", depth_formula_arg, "LFP formula whose depth must grow");
  mccolm->add_option("--samples", samples, "Sampled tuples per stage");
  mccolm->add_flag("--no-substructure", no_substructure, "Skip the stage comparison");
  mccolm->add_option("--cap-universe", cap_universe, "Largest universe")->check(CLI::PositiveNumber);
  auto* pipeline = verify->add_subcommand("envelope-pipeline", "Generate, check and compare envelopes");
  pipeline->add_option("hypergraph", hypergraph_path, "Hypergraph file")->required();
  pipeline->add_option("--seeds", seeds_arg, "Comma list of seeds (default: seed, seed+1)");
  pipeline->add_option("--nice-samples", nice_samples, "Replayed pebble positions");

  for (auto* c : {gen, check, agree, pipeline}) c->add_option("--k", k, "Envelope parameter k")->check(CLI::Range(3, 8));
  for (auto* c : {gen, pipeline}) {
    c->add_option("--retries", retries, "Generation retries")->check(CLI::NonNegativeNumber);
  }
  for (auto* c : {gen, mccolm, pipeline}) c->add_option("--seed", seed, "Random seed");
  for (auto* c : {agree, pipeline}) {
    c->add_option("--sentences", sentences, "Enumerated sentences")->check(CLI::PositiveNumber);
    c->add_option("--cap-rank", cap_rank, "Sentence quantifier rank")->check(CLI::Range(1, kMaxEnumRank));
  }
  for (auto* c : {check, agree, mccolm, pipeline}) {
    c->add_option("--out", out_path, "Also write the report here");
    c->add_flag("--no-timing", no_timing, "Omit timing fields");
  }
  gen->add_option("--out", out_path, "Write the envelope here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cap_universe == 0) cap_universe = default_cap();

    if (*eval) {
      Structure m = parse_structure(read_file(structure_path));
      Formula f = parse_formula(file_or_text(formula_arg), m.vocabulary());
      if (dump_ast_flag) std::cout << dump_ast(f) << "\n";
      auto vars = free_var_order(f);
      if (vars.empty()) {
        std::cout << (evaluate(m, f) ? "true" : "false") << "\n";
      } else {
        for (const auto& t : evaluate_table(m, f).tuples()) std::cout << tuple_text(t) << "\n";
      }
      return 0;
    }
    if (*depth) {
      Structure m = parse_structure(read_file(structure_path));
      Formula f = parse_formula(file_or_text(formula_arg), m.vocabulary());
      auto l = first_lfp(f);
      if (!l) throw UsageError("formula has no lfp operator");
      std::cout << inductive_depth(m, *l) << "\n";
      return 0;
    }
    if (*game || *cgame) {
      Structure a = parse_structure(read_file(structure_path));
      Structure b = parse_structure(read_file(structure_b));
      GameResult g = *game ? pebble_game(a, b, k, parse_init(init_arg)) : counting_game(a, b, k);
      std::cout << (g.duplicator ? "DUPLICATOR" : "SPOILER") << "\n";
      if (witness && !g.duplicator) std::cout << g.witness << "\n";
      return 0;
    }
    if (*build_d || *build_h || *build_g) {
      Vocabulary v = graph_vocabulary();
      BuildResult r;
      if (*build_d) {
        r = build_labeled_D(j, parse_delta_list(file_or_text(delta_arg)));
      } else if (*build_h) {
        r = build_H(j, parse_formula_list(file_or_text(formulas_arg), v));
      } else {
        r = build_G(j, parse_formula_list(file_or_text(formulas_arg), v),
                    policy == "lean" ? GadgetPolicy::Lean : GadgetPolicy::Faithful, cap_universe);
      }
      const auto& s = r.result.structure;
      Report rep;
      Record rec{"build", Status::Pass, {{"j", j}}, {{"universe", s.size()}, {"stages", r.trace.stages.size()}}};
      if (s.size() > cap_universe) {
        rec.status = Status::Indeterminate;
        rec.detail["reason"] = "universe exceeds cap " + std::to_string(cap_universe);
      } else {
        rec.detail["audit"] = audit_index(r.result);
        if (!audit_index(r.result).empty()) rec.status = Status::Fail;
        if (!out_path.empty()) write_file(out_path, print_structure(s));
      }
      rep.add(rec);
      std::cout << rep.json_lines(false);
      return rep.exit_code();
    }
    if (*gen) {
      Hypergraph h = parse_hypergraph(read_file(hypergraph_path));
      GenerationOptions opts;
      opts.pool = pool;
      opts.cliques = cliques;
      opts.retries = retries;
      GenerationStats stats;
      Report rep;
      Record rec{"generate", Status::Pass, {{"seed", seed}, {"k", k}}};
      try {
        Envelope e = generate_envelope(h, k, seed, opts, &stats);
        rec.detail = {{"universe", e.structure.size()}, {"attempts", stats.attempts}, {"pool", stats.pool},
                      {"cliques", stats.cliques}};
        if (!out_path.empty()) write_file(out_path, print_envelope(e));
        else std::cout << print_envelope(e);
      } catch (const GenerationFailure& f) {
        rec.status = Status::Fail;
        rec.detail = {{"reason", f.what()}, {"attempts", stats.attempts}};
      }
      rep.add(rec);
      (out_path.empty() ? std::cerr : std::cout) << rep.json_lines(false);
      return rep.exit_code();
    }
    if (*check) {
      Envelope e = parse_envelope(read_file(envelope_a));
      Hypergraph h = parse_hypergraph(read_file(hypergraph_path));
      Report rep;
      Stopwatch vclock;
      auto v = validate_envelope(e);
      Record vr{"validate", v.pass ? Status::Pass : Status::Fail, {{"k", k}}};
      for (const auto& c : v.conditions) {
        vr.detail[c.name] = c.pass;
        if (!c.pass) vr.detail["witness"] = c.witness;
      }
      vr.seconds = vclock.seconds();
      rep.add(vr);
      if (v.pass) {
        Stopwatch clock;
        auto g = check_k_good(e, h, k);
        Record gr{"k-good", status_of(g.overall()), {{"k", k}},
                  {{"G0", to_string(g.g0)}, {"G1", to_string(g.g1)}, {"G2", to_string(g.g2)},
                   {"sets", g.sets_checked}, {"k_cliques", g.cliques}}};
        if (!g.witness.empty()) gr.detail["witness"] = g.witness;
        gr.seconds = clock.seconds();
        rep.add(gr);
      }
      return emit(rep, out_path, !no_timing);
    }
    if (*agree) {
      Envelope e1 = parse_envelope(read_file(envelope_a));
      Envelope e2 = parse_envelope(read_file(envelope_b));
      Hypergraph h;
      h.nodes = static_cast<int>(e1.nodes.size());
      AgreementOptions opts;
      opts.sentences = sentences;
      opts.rank = cap_rank;
      if (!hypergraph_path.empty()) {
        h = parse_hypergraph(read_file(hypergraph_path));
        opts.nice_samples = nice_samples;
      } else if (nice_samples > 0) {
        throw UsageError("--nice-samples needs --hypergraph");
      }
      return emit(envelope_agreement(e1, e2, h, k, opts), out_path, !no_timing);
    }
    if (*mccolm) {
      Vocabulary v = graph_vocabulary();
      MccolmOptions opts;
      auto js = parse_int_list(j_arg);
      if (js.size() == 1) {
        int top = js[0];
        js.clear();
        for (int x = std::min(2, top); x <= top; ++x) js.push_back(x);
      }
      opts.js = js;
      if (!depth_formula_arg.empty()) opts.depth_formula = parse_formula(file_or_text(depth_formula_arg), v);
      if (opts.depth_formula && !first_lfp(*opts.depth_formula)) throw UsageError("depth formula has no lfp operator");
      if (opts.depth_formula) opts.depth_formula = first_lfp(*opts.depth_formula);
      opts.samples = samples;
      opts.seed = seed;
      opts.universe_cap = cap_universe;
      opts.substructure = !no_substructure;
      return emit(verify_mccolm(parse_formula_list(file_or_text(formulas_arg), v), opts), out_path, !no_timing);
    }
    if (*pipeline) {
      Hypergraph h = parse_hypergraph(read_file(hypergraph_path));
      PipelineOptions opts;
      opts.k = k;
      opts.seeds = {seed, seed + 1};
      if (!seeds_arg.empty()) {
        opts.seeds.clear();
        for (int s : parse_int_list(seeds_arg)) opts.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      opts.generation.retries = retries;
      opts.agreement.sentences = sentences;
      opts.agreement.rank = cap_rank;
      opts.agreement.nice_samples = nice_samples;
      opts.agreement.seed = seed;
      return emit(verify_envelope_pipeline(h, opts), out_path, !no_timing);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const ArityError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const InvalidParameter& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const ResourceError& e) {
    std::cout << Json{{"check", "resource"}, {"status", "INDETERMINATE"}, {"detail", {{"reason", e.what()}}}}.dump()
              << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
