#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/constructions.hpp"
#include "forge/envelopes.hpp"

namespace forge {

using Json = nlohmann::ordered_json;

enum class Status { Pass, Fail, Indeterminate };
std::string to_string(Status s);
Status status_of(Verdict v);

struct Record {
  std::string check;
  Status status = Status::Pass;
  Json params = Json::object();
  // Values, witnesses and reasons.
  Json detail = Json::object();
  double seconds = 0;
};

class Report {
 public:
  void add(Record r);
  void append(const Report& other);
  const std::vector<Record>& records() const { return records_; }

  bool any(Status s) const;
  // 0 when everything passed, 1 on any FAIL, 3 when the only non-passing records are
  // INDETERMINATE.
  int exit_code() const;
  // One JSON object per line, sorted by check name then parameters.
  std::string json_lines(bool timing = true) const;

 private:
  std::vector<Record> records_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// First LFP node of f in pre-order, if any.
std::optional<Formula> first_lfp(const Formula& f);

struct MccolmOptions {
  std::vector<int> js = {2, 3, 4};
  // Formula whose inductive depth must grow with j; defaults to the first LFP inside the list.
  std::optional<Formula> depth_formula;
  int samples = 20;
  std::uint64_t seed = 1;
  int universe_cap = kDefaultUniverseCap;
  bool substructure = true;
  Corruption corrupt;
};

// Builds H_j for every j and reports: decoder agreement with direct evaluation ("decoder"),
// stage i-1 against the final stage on sampled tuples ("elementary-substructure"), the
// inductive depths ("depth"), then the two halves of the claim ("first-order-on-class",
// "unbounded-depth").
Report verify_mccolm(const FormulaList& theta, const MccolmOptions& opts = {});

constexpr std::uint64_t kSentencePool = 400'000;

// `count` sentences of rank exactly q over x1..xk, spread evenly over those of the largest AST
// size whose enumeration has at most kSentencePool formulas. Sentences with the same value on
// every structure of one or two elements are skipped.
std::vector<Formula> select_sentences(const Vocabulary& vocab, int count, int k, int q);

struct AgreementOptions {
  int sentences = 10;
  int rank = 2;
  // Random pebble positions replayed inside k-nice maps; 0 skips the replay.
  int nice_samples = 0;
  std::uint64_t seed = 1;
};

// Pebble game and sentence agreement between two envelopes of the same hypergraph.
Report envelope_agreement(const Envelope& e1, const Envelope& e2, const Hypergraph& h, int k,
                          const AgreementOptions& opts = {});

struct PipelineOptions {
  int k = 3;
  std::vector<std::uint64_t> seeds = {1, 2};
  GenerationOptions generation;
  AgreementOptions agreement;
  // Random sets X for the closure bound.
  int closure_samples = 500;
};

// Generates one envelope per seed, validates and checks each, then compares the first two.
Report verify_envelope_pipeline(const Hypergraph& h, const PipelineOptions& opts = {});

}  // namespace forge
