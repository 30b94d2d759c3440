#pragma once

// Control tokens, topic-driven attention boosting, median binning of style
// metrics, decoder-probability voting, and reward construction.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tailorsum/data.hpp"
#include "tailorsum/metrics.hpp"
#include "tailorsum/numerics.hpp"
#include "tailorsum/training.hpp"

namespace tailorsum {

class TopicLexicon {
 public:
  TopicLexicon() = default;

  // Weights must be positive and words lowercase. Re-adding a word replaces
  // its weight.
  void add(const std::string& topic, const std::string& word, double weight);

  bool empty() const { return entries_.empty(); }
  bool has_topic(std::string_view topic) const;
  std::vector<std::string> topics() const;  // sorted
  // 0 when the word is not listed under the topic.
  double weight(std::string_view topic, std::string_view word) const;
  const std::map<std::string, double, std::less<>>& words(std::string_view topic) const;

  // "topic<TAB>word<TAB>weight" lines.
  static TopicLexicon parse(std::string_view text);
  static TopicLexicon load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  std::map<std::string, std::map<std::string, double, std::less<>>, std::less<>> entries_;
};

using TopicScores = std::map<std::string, double>;

// score(topic) = sum of matching weights / max(1, token count). Every topic
// appears in the result. Throws std::invalid_argument on an empty lexicon.
TopicScores topic_scores(std::span<const std::string> tokens, const TopicLexicon& lexicon);

// Topics by descending score, ties by name.
std::vector<std::string> rank_topics(const TopicScores& scores);

// One weight per article token: 1 + gamma * score inside the k sentences
// scoring highest for `topic` (ties to the earlier sentence), 1 elsewhere.
// An article without terminators is one sentence.
Vec select_boost_vector(std::span<const std::string> article, std::string_view topic,
                        const TopicLexicon& lexicon, std::size_t k = 5, double gamma = 1.0);

enum class ControlKind { topic, readability, simplicity };

struct ControlToken {
  std::string surface;
  ControlKind kind = ControlKind::topic;

  bool operator==(const ControlToken&) const = default;
};

ControlToken topic_token(std::string_view topic);  // "<topic:NAME>"
ControlToken readability_token(bool readable);     // "<readable>" / "<not-readable>"
ControlToken simplicity_token(bool simple);        // "<simple>" / "<not-simple>"

// Every control token a style or topic setup can register.
std::vector<std::string> style_control_surfaces();
std::vector<std::string> topic_control_surfaces(std::span<const std::string> topics);

Example prepend_control_token(Example example, const ControlToken& token);
// Inverse of prepend_control_token. Throws when position 0 is not a control token.
Example strip_control_token(Example example);

struct MedianBins {
  double threshold = 0.0;
  ControlToken positive;
  ControlToken negative;

  // value >= threshold -> positive.
  const ControlToken& label(double value) const;
};

// Median (mean of the central pair for even counts). `kind` must be
// readability or simplicity. Throws std::invalid_argument on no values.
MedianBins median_bins(std::span<const double> values, ControlKind kind);

// Complex -> simpler word pairs; "word<TAB>synonym" lines.
struct SynonymTable {
  std::vector<std::pair<std::string, std::string>> pairs;

  static SynonymTable parse(std::string_view text);
  static SynonymTable load(const std::filesystem::path& path);
  std::string serialize() const;
};

// simpler(candidate, original): true when `candidate` is the simpler word.
using SimplerFn = std::function<bool(std::string_view candidate, std::string_view original)>;
SimplerFn fewer_syllables();
SimplerFn higher_frequency(const FrequencyTable& table);

struct VotingPair {
  TokenId from = 0;
  TokenId to = 0;
};

// Id pairs (w -> w') for table entries where both words are in `vocab` and
// simpler(w', w) holds. Only the first pair per source word is kept.
std::vector<VotingPair> voting_pairs(const SynonymTable& table, const Vocabulary& vocab,
                                     const SimplerFn& simpler);

// Moves lambda * p(w) from w to w' for each pair, using the input masses.
// Throws std::invalid_argument on an id outside `dist` or lambda outside [0, 1].
Vec voting_adjust(std::span<const double> dist, std::span<const VotingPair> pairs, double lambda);

enum class RewardKind { readability, simplicity };

struct RewardFn {
  std::string name;
  std::function<double(std::span<const std::string>)> evaluate;
};

// readability: Flesch reading ease of the text; simplicity: mean frequency
// score. A sequence without scoreable words earns 0. Simplicity throws
// std::invalid_argument without a frequency table.
RewardFn make_reward(RewardKind kind, const FrequencyTable* frequencies = nullptr);

// Adapts a text reward to decoded ids. Reserved ids are dropped and copied
// OOV ids become their article surface form.
SequenceReward bind_reward(RewardFn reward, const Vocabulary& vocab);

// Resources matching gen_synthetic's word lists.
TopicLexicon synthetic_lexicon();
FrequencyTable synthetic_frequency_table();
SynonymTable synthetic_synonym_table();

}  // namespace tailorsum
