#include "tailorsum/tailoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tailorsum {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<std::string_view>> tab_lines(std::string_view text, std::size_t fields,
                                                     std::string_view what) {
  std::vector<std::vector<std::string_view>> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      parts.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const bool blank = std::any_of(parts.begin(), parts.end(),
                                   [](std::string_view p) { return p.empty(); });
    if (parts.size() != fields || blank) {
      throw std::runtime_error(std::string(what) + " line " + std::to_string(line_no) + ": expected " +
                               std::to_string(fields) + " tab-separated fields");
    }
    out.push_back(std::move(parts));
  }
  return out;
}

bool is_lowercase(std::string_view word) {
  return std::none_of(word.begin(), word.end(),
                      [](char c) { return c >= 'A' && c <= 'Z'; });
}

}  // namespace

void TopicLexicon::add(const std::string& topic, const std::string& word, double weight) {
  if (topic.empty() || word.empty()) throw std::invalid_argument("lexicon topic and word must be non-empty");
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("lexicon weight must be positive: " + topic + "/" + word);
  }
  if (!is_lowercase(word)) throw std::invalid_argument("lexicon word must be lowercase: " + word);
  entries_[topic][word] = weight;
}

bool TopicLexicon::has_topic(std::string_view topic) const {
  return entries_.find(topic) != entries_.end();
}

std::vector<std::string> TopicLexicon::topics() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [t, _] : entries_) out.push_back(t);
  return out;
}

double TopicLexicon::weight(std::string_view topic, std::string_view word) const {
  auto t = entries_.find(topic);
  if (t == entries_.end()) return 0.0;
  auto w = t->second.find(word);
  return w == t->second.end() ? 0.0 : w->second;
}

const std::map<std::string, double, std::less<>>& TopicLexicon::words(std::string_view topic) const {
  auto t = entries_.find(topic);
  if (t == entries_.end()) throw std::invalid_argument("unknown topic: " + std::string(topic));
  return t->second;
}

TopicLexicon TopicLexicon::parse(std::string_view text) {
  TopicLexicon lex;
  std::size_t row = 0;
  for (const auto& parts : tab_lines(text, 3, "lexicon")) {
    ++row;
    double weight = 0.0;
    const std::string_view num = parts[2];
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), weight);
    if (ec != std::errc() || ptr != num.data() + num.size()) {
      throw std::runtime_error("lexicon entry " + std::to_string(row) + ": bad weight '" +
                               std::string(num) + "'");
    }
    try {
      lex.add(std::string(parts[0]), std::string(parts[1]), weight);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("lexicon entry " + std::to_string(row) + ": " + e.what());
    }
  }
  return lex;
}

TopicLexicon TopicLexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string TopicLexicon::serialize() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& [topic, words] : entries_) {
    for (const auto& [word, weight] : words) out << topic << '\t' << word << '\t' << weight << '\n';
  }
  return out.str();
}

TopicScores topic_scores(std::span<const std::string> tokens, const TopicLexicon& lexicon) {
  if (lexicon.empty()) throw std::invalid_argument("topic_scores: empty lexicon");
  TopicScores scores;
  const double denom = static_cast<double>(std::max<std::size_t>(1, tokens.size()));
  for (const auto& topic : lexicon.topics()) {
    const auto& words = lexicon.words(topic);
    double total = 0.0;
    for (const auto& tok : tokens) {
      if (auto it = words.find(tok); it != words.end()) total += it->second;
    }
    scores[topic] = total / denom;
  }
  return scores;
}

std::vector<std::string> rank_topics(const TopicScores& scores) {
  std::vector<std::pair<std::string, double>> items(scores.begin(), scores.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [t, _] : items) out.push_back(std::move(t));
  return out;
}

Vec select_boost_vector(std::span<const std::string> article, std::string_view topic,
                        const TopicLexicon& lexicon, std::size_t k, double gamma) {
  if (k == 0) throw std::invalid_argument("select_boost_vector: k must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("select_boost_vector: gamma must be >= 0");
  }
  if (!lexicon.has_topic(topic)) {
    throw std::invalid_argument("select_boost_vector: unknown topic " + std::string(topic));
  }
  const auto sentences = split_sentences(article);
  std::vector<double> score(sentences.size());
  std::vector<std::size_t> offset(sentences.size());
  std::size_t pos = 0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    offset[s] = pos;
    pos += sentences[s].size();
    score[s] = topic_scores(sentences[s], lexicon).at(std::string(topic));
  }
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  Vec boost(article.size(), 1.0);
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    const std::size_t s = order[r];
    const double beta = 1.0 + gamma * score[s];
    for (std::size_t i = 0; i < sentences[s].size(); ++i) boost[offset[s] + i] = beta;
  }
  return boost;
}

ControlToken topic_token(std::string_view topic) {
  if (topic.empty()) throw std::invalid_argument("topic_token: empty topic");
  return {"<topic:" + std::string(topic) + ">", ControlKind::topic};
}

ControlToken readability_token(bool readable) {
  return {readable ? "<readable>" : "<not-readable>", ControlKind::readability};
}

ControlToken simplicity_token(bool simple) {
  return {simple ? "<simple>" : "<not-simple>", ControlKind::simplicity};
}

std::vector<std::string> style_control_surfaces() {
  return {readability_token(true).surface, readability_token(false).surface,
          simplicity_token(true).surface, simplicity_token(false).surface};
}

std::vector<std::string> topic_control_surfaces(std::span<const std::string> topics) {
  std::vector<std::string> out;
  out.reserve(topics.size());
  for (const auto& t : topics) out.push_back(topic_token(t).surface);
  return out;
}

Example prepend_control_token(Example example, const ControlToken& token) {
  if (!is_control_surface(token.surface)) {
    throw std::invalid_argument("not a control token: " + token.surface);
  }
  example.article.insert(example.article.begin(), token.surface);
  return example;
}

Example strip_control_token(Example example) {
  if (example.article.empty() || !is_control_surface(example.article.front())) {
    throw std::invalid_argument("article does not start with a control token");
  }
  example.article.erase(example.article.begin());
  return example;
}

const ControlToken& MedianBins::label(double value) const {
  return value >= threshold ? positive : negative;
}

MedianBins median_bins(std::span<const double> values, ControlKind kind) {
  if (values.empty()) throw std::invalid_argument("median_bins: no values");
  if (kind == ControlKind::topic) throw std::invalid_argument("median_bins: topic is not a style");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  MedianBins bins;
  bins.threshold = n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
  if (kind == ControlKind::readability) {
    bins.positive = readability_token(true);
    bins.negative = readability_token(false);
  } else {
    bins.positive = simplicity_token(true);
    bins.negative = simplicity_token(false);
  }
  return bins;
}

SynonymTable SynonymTable::parse(std::string_view text) {
  SynonymTable table;
  for (const auto& parts : tab_lines(text, 2, "synonym table")) {
    table.pairs.emplace_back(std::string(parts[0]), std::string(parts[1]));
  }
  return table;
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string SynonymTable::serialize() const {
  std::string out;
  for (const auto& [w, s] : pairs) out += w + '\t' + s + '\n';
  return out;
}

SimplerFn fewer_syllables() {
  return [](std::string_view candidate, std::string_view original) {
    return count_syllables(candidate) < count_syllables(original);
  };
}

SimplerFn higher_frequency(const FrequencyTable& table) {
  return [table](std::string_view candidate, std::string_view original) {
    return table.frequency(candidate) > table.frequency(original);
  };
}

std::vector<VotingPair> voting_pairs(const SynonymTable& table, const Vocabulary& vocab,
                                     const SimplerFn& simpler) {
  std::vector<VotingPair> out;
  std::unordered_set<TokenId> sources;
  for (const auto& [word, synonym] : table.pairs) {
    const auto from = vocab.find(word);
    const auto to = vocab.find(synonym);
    if (!from || !to || *from == *to) continue;
    if (!simpler(synonym, word)) continue;
    if (!sources.insert(*from).second) continue;
    out.push_back({*from, *to});
  }
  return out;
}

Vec voting_adjust(std::span<const double> dist, std::span<const VotingPair> pairs, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("voting_adjust: lambda must lie in [0, 1]");
  }
  Vec out(dist.begin(), dist.end());
  std::unordered_set<TokenId> seen;
  for (const auto& p : pairs) {
    if (p.from >= dist.size() || p.to >= dist.size()) {
      throw std::invalid_argument("voting_adjust: synonym id " +
                                  std::to_string(std::max(p.from, p.to)) + " outside distribution of size " +
                                  std::to_string(dist.size()));
    }
    if (p.from == p.to || !seen.insert(p.from).second) continue;
    const double moved = lambda * dist[p.from];
    out[p.from] -= moved;
    out[p.to] += moved;
  }
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

RewardFn make_reward(RewardKind kind, const FrequencyTable* frequencies) {
  if (kind == RewardKind::readability) {
    return {"readability", [](std::span<const std::string> tokens) {
              const ReadabilityCounts c = readability_counts(tokens);
              return c.words == 0 ? 0.0 : flesch_score(tokens);
            }};
  }
  if (frequencies == nullptr) {
    throw std::invalid_argument("simplicity reward requires a frequency table");
  }
  return {"simplicity", [table = *frequencies](std::span<const std::string> tokens) {
            return tokens.empty() ? 0.0 : simplicity_score(tokens, table);
          }};
}

SequenceReward bind_reward(RewardFn reward, const Vocabulary& vocab) {
  return [reward = std::move(reward), &vocab](const EncodedExample& example,
                                              std::span<const TokenId> ids) {
    std::vector<std::string> words;
    words.reserve(ids.size());
    for (TokenId id : ids) {
      if (id < kReservedCount) continue;
      words.push_back(surface(vocab, example, id));
    }
    return reward.evaluate(words);
  };
}

TopicLexicon synthetic_lexicon() {
  TopicLexicon lex;
  for (const auto& topic : synthetic_topics()) {
    for (const auto w : topic.words) lex.add(std::string(topic.name), std::string(w), 1.0);
  }
  return lex;
}

FrequencyTable synthetic_frequency_table() {
  FrequencyTable table;
  for (const auto& [w, f] : synthetic_frequencies()) table.set(std::string(w), f);
  return table;
}

SynonymTable synthetic_synonym_table() {
  SynonymTable table;
  for (const auto& [w, s] : synthetic_synonyms()) table.pairs.emplace_back(w, s);
  return table;
}

}  // namespace tailorsum
