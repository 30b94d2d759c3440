#pragma once

// Greedy and beam-search decoding with optional boosting, voting and a
// control token. Nothing here is random.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailorsum/model.hpp"
#include "tailorsum/tailoring.hpp"

namespace tailorsum {

struct DecodeState {
  LstmState lstm;
  Vec coverage;
};

struct StepResult {
  Vec dist;       // over the extended vocabulary
  Vec attention;  // empty for models without a source
  double p_gen = 1.0;
  DecodeState next;
};

// Next-token distributions for one source. `prefix` is every token emitted
// so far; the previous token is its last element, or START.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual DecodeState initial() const = 0;
  virtual StepResult step(const DecodeState& state, std::span<const TokenId> prefix) const = 0;
};

// The pointer-generator on one encoded source.
class PointerGeneratorStep final : public StepModel {
 public:
  // `boost` may be empty; otherwise it has one entry per source position.
  PointerGeneratorStep(const ModelParams& params, std::span<const TokenId> source, Vec boost = {});

  DecodeState initial() const override;
  StepResult step(const DecodeState& state, std::span<const TokenId> prefix) const override;
  const EncoderStates& encoder() const { return enc_; }

 private:
  const ModelParams* params_;
  EncoderStates enc_;
  Vec boost_;
};

struct VotingConfig {
  std::vector<VotingPair> pairs;
  double lambda = 0.0;
};

struct DecodeConfig {
  std::size_t beam_width = 1;
  std::size_t max_length = 100;
  std::size_t min_length = 0;
  // One weight per article token (before any control token is prepended).
  std::optional<Vec> boost;
  std::optional<VotingConfig> voting;
  std::optional<ControlToken> control;
};

// Throws std::invalid_argument naming the field.
void validate(const DecodeConfig& config);

struct Hypothesis {
  std::vector<TokenId> tokens;  // extended ids, STOP included when finished
  double log_prob = 0.0;
  DecodeState state;
  std::vector<Vec> attention_trace;  // one row per token
  std::vector<double> p_gen_trace;
  bool finished = false;

  // log_prob / token count (0 for an empty hypothesis).
  double normalized_score() const;
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> n_best;  // finished hypotheses, best first
  // Set when nothing finished within max_length; `best` is then a partial.
  bool warning = false;
};

// Step distribution after voting, with `banned` ids and (before min_length
// tokens) STOP masked out for selection.
Hypothesis greedy_decode(const StepModel& model, const DecodeConfig& config,
                         std::span<const TokenId> banned = {});

// Width-W search over the extended vocabulary. Finished hypotheses rank by
// normalized_score, ties to the lower first differing token id.
BeamResult beam_search(const StepModel& model, const DecodeConfig& config,
                       std::span<const TokenId> banned = {});

struct DecodeResult {
  std::vector<std::string> source;  // as encoded, control token included
  std::vector<TokenId> tokens;      // emitted ids without STOP
  std::vector<std::string> words;   // surface forms; copied OOVs keep their article form
  double score = 0.0;
  std::vector<Vec> attention_trace;
  std::vector<double> p_gen_trace;
  bool warning = false;

  std::string text() const;
};

// Truncates the article, prepends the configured control token (boost 1 at
// its position), encodes against `vocab` and runs greedy or beam search.
DecodeResult decode_article(const ModelParams& params, const Vocabulary& vocab,
                            std::span<const std::string> article, const DecodeConfig& config);

// One JSON object: {"id", "text", "score", "warning"} plus "attention" when
// requested and "metrics" when non-empty.
std::string decode_record_json(const std::string& id, const DecodeResult& result,
                               bool include_attention,
                               const std::map<std::string, double>& metrics = {});

}  // namespace tailorsum
