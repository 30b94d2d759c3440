#include "tailorsum/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tailorsum/training.hpp"

namespace tailorsum {
namespace {

// Lexicographic on ids; a proper prefix counts as lower.
bool tokens_less(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

Vec adjusted(const StepResult& r, const DecodeConfig& config) {
  if (!config.voting || config.voting->pairs.empty()) return r.dist;
  return voting_adjust(r.dist, config.voting->pairs, config.voting->lambda);
}

std::vector<char> selection_mask(std::size_t size, std::span<const TokenId> banned, bool allow_stop) {
  std::vector<char> allowed(size, 1);
  for (TokenId id : banned) {
    if (id < size) allowed[id] = 0;
  }
  if (!allow_stop && kStopId < size) allowed[kStopId] = 0;
  return allowed;
}

double log_of(double p) { return std::log(std::max(p, kLogFloor)); }

Hypothesis extend(const Hypothesis& h, TokenId id, double p, const StepResult& r) {
  Hypothesis out;
  out.tokens = h.tokens;
  out.tokens.push_back(id);
  out.log_prob = h.log_prob + log_of(p);
  out.state = r.next;
  out.attention_trace = h.attention_trace;
  out.attention_trace.push_back(r.attention);
  out.p_gen_trace = h.p_gen_trace;
  out.p_gen_trace.push_back(r.p_gen);
  out.finished = id == kStopId;
  return out;
}

// Ranks by cumulative log-probability, ties to the lower token sequence.
bool expansion_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return tokens_less(a.tokens, b.tokens);
}

bool final_before(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.normalized_score();
  const double sb = b.normalized_score();
  if (sa != sb) return sa > sb;
  return tokens_less(a.tokens, b.tokens);
}

}  // namespace

PointerGeneratorStep::PointerGeneratorStep(const ModelParams& params,
                                           std::span<const TokenId> source, Vec boost)
    : params_(&params), enc_(encode(params, source)), boost_(std::move(boost)) {
  if (!boost_.empty() && boost_.size() != source.size()) {
    throw std::invalid_argument("boost length " + std::to_string(boost_.size()) +
                                " does not match source length " + std::to_string(source.size()));
  }
}

DecodeState PointerGeneratorStep::initial() const {
  return {enc_.final_state, Vec(enc_.size(), 0.0)};
}

StepResult PointerGeneratorStep::step(const DecodeState& state,
                                      std::span<const TokenId> prefix) const {
  const TokenId prev = prefix.empty() ? kStartId : prefix.back();
  DecoderStepOut out = decoder_step(*params_, enc_, state.lstm, prev, boost_, state.coverage);
  StepResult r;
  r.dist = std::move(out.final_dist);
  r.attention = std::move(out.attn.attention);
  r.p_gen = out.p_gen;
  r.next = {std::move(out.state), std::move(out.coverage)};
  return r;
}

void validate(const DecodeConfig& config) {
  if (config.beam_width == 0) throw std::invalid_argument("beam_width must be >= 1");
  if (config.max_length == 0) throw std::invalid_argument("max_length must be >= 1");
  if (config.min_length > config.max_length) {
    throw std::invalid_argument("min_length must not exceed max_length");
  }
  if (config.voting) {
    const double l = config.voting->lambda;
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("voting lambda must lie in [0, 1]");
  }
  if (config.boost) {
    for (double b : *config.boost) {
      if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("boost values must be positive");
    }
  }
  if (config.control && !is_control_surface(config.control->surface)) {
    throw std::invalid_argument("control token must look like <...>");
  }
}

double Hypothesis::normalized_score() const {
  return tokens.empty() ? 0.0 : log_prob / static_cast<double>(tokens.size());
}

Hypothesis greedy_decode(const StepModel& model, const DecodeConfig& config,
                         std::span<const TokenId> banned) {
  validate(config);
  Hypothesis h;
  h.state = model.initial();
  while (h.tokens.size() < config.max_length) {
    const StepResult r = model.step(h.state, h.tokens);
    const Vec dist = adjusted(r, config);
    const auto allowed = selection_mask(dist.size(), banned, h.tokens.size() >= config.min_length);
    std::optional<TokenId> best;
    for (TokenId id = 0; id < dist.size(); ++id) {
      if (allowed[id] && (!best || dist[id] > dist[*best])) best = id;
    }
    if (!best) throw std::runtime_error("greedy_decode: every token is masked");
    h = extend(h, *best, dist[*best], r);
    if (h.finished) break;
  }
  return h;
}

BeamResult beam_search(const StepModel& model, const DecodeConfig& config,
                       std::span<const TokenId> banned) {
  validate(config);
  const std::size_t width = config.beam_width;
  std::vector<Hypothesis> beams(1);
  beams[0].state = model.initial();
  std::vector<Hypothesis> finished;

  for (std::size_t len = 0; len < config.max_length && !beams.empty() && finished.size() < width;
       ++len) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : beams) {
      const StepResult r = model.step(h.state, h.tokens);
      const Vec dist = adjusted(r, config);
      const auto allowed = selection_mask(dist.size(), banned, h.tokens.size() >= config.min_length);
      std::vector<TokenId> ids;
      for (TokenId id = 0; id < dist.size(); ++id) {
        if (allowed[id]) ids.push_back(id);
      }
      // A beam's W best continuations are the only ones that can survive.
      const std::size_t keep = std::min(width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                        [&](TokenId a, TokenId b) {
                          if (dist[a] != dist[b]) return dist[a] > dist[b];
                          return a < b;
                        });
      for (std::size_t j = 0; j < keep; ++j) candidates.push_back(extend(h, ids[j], dist[ids[j]], r));
    }
    std::sort(candidates.begin(), candidates.end(), expansion_before);
    std::vector<Hypothesis> next;
    for (auto& c : candidates) {
      if (next.size() + finished.size() >= width) break;
      if (c.finished) {
        finished.push_back(std::move(c));
      } else {
        next.push_back(std::move(c));
      }
    }
    beams = std::move(next);
  }

  BeamResult result;
  std::sort(finished.begin(), finished.end(), final_before);
  if (!finished.empty()) {
    result.best = finished.front();
    result.n_best = std::move(finished);
  } else {
    std::sort(beams.begin(), beams.end(), final_before);
    if (!beams.empty()) result.best = beams.front();
    result.warning = true;
  }
  return result;
}

std::string DecodeResult::text() const { return detokenize(words); }

DecodeResult decode_article(const ModelParams& params, const Vocabulary& vocab,
                            std::span<const std::string> article, const DecodeConfig& config) {
  validate(config);
  if (article.empty()) throw std::invalid_argument("decode_article: empty article");
  if (config.boost && config.boost->size() != article.size()) {
    throw std::invalid_argument("boost length " + std::to_string(config.boost->size()) +
                                " does not match article length " + std::to_string(article.size()));
  }
  const std::size_t n = std::min(article.size(), kMaxArticleTokens);
  std::vector<std::string> source;
  Vec boost;
  if (config.control) {
    if (!vocab.find(config.control->surface)) {
      throw std::invalid_argument("control token not in vocabulary: " + config.control->surface);
    }
    source.push_back(config.control->surface);
    boost.push_back(1.0);
  }
  source.insert(source.end(), article.begin(), article.begin() + static_cast<std::ptrdiff_t>(n));
  if (config.boost) {
    boost.insert(boost.end(), config.boost->begin(), config.boost->begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    boost.clear();
  }

  const ExtendedVocab ext(vocab, source);
  std::vector<TokenId> ids;
  ids.reserve(source.size());
  for (const auto& tok : source) ids.push_back(*ext.find(tok));

  const PointerGeneratorStep model(params, ids, std::move(boost));
  const auto banned = banned_ids(vocab);
  Hypothesis best;
  bool warning = false;
  if (config.beam_width == 1) {
    best = greedy_decode(model, config, banned);
  } else {
    BeamResult br = beam_search(model, config, banned);
    best = std::move(br.best);
    warning = br.warning;
  }

  DecodeResult result;
  result.source = std::move(source);
  result.score = best.normalized_score();
  result.attention_trace = std::move(best.attention_trace);
  result.p_gen_trace = std::move(best.p_gen_trace);
  result.warning = warning;
  for (TokenId id : best.tokens) {
    if (id == kStopId) break;
    result.tokens.push_back(id);
    result.words.push_back(ext.token(id));
  }
  return result;
}

std::string decode_record_json(const std::string& id, const DecodeResult& result,
                               bool include_attention, const std::map<std::string, double>& metrics) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["text"] = result.text();
  j["score"] = result.score;
  j["warning"] = result.warning;
  if (include_attention) {
    j["source"] = result.source;
    j["attention"] = result.attention_trace;
  }
  if (!metrics.empty()) {
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    j["metrics"] = m;
  }
  return j.dump();
}

}  // namespace tailorsum
