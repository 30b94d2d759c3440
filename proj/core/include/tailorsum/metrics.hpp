#pragma once

// Style and quality evaluators. All functions are pure.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tailorsum {

class TopicLexicon;

// Word -> corpus frequency (per million words). Missing words count as 0.
class FrequencyTable {
 public:
  FrequencyTable() = default;

  void set(std::string word, double frequency);
  double frequency(std::string_view word) const;
  bool empty() const { return table_.empty(); }
  std::size_t size() const { return table_.size(); }

  // "word<TAB>frequency" lines.
  static FrequencyTable parse(std::string_view text);
  static FrequencyTable load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  std::unordered_map<std::string, double> table_;
};

// Vowel groups over a,e,i,o,u,y, less one for a silent final 'e' when
// another group exists (a consonant + "le" ending keeps its 'e'). At least 1.
// Throws std::invalid_argument on an empty word.
int count_syllables(std::string_view word);

// A word is a token made only of ASCII letters.
bool is_word_token(std::string_view token);

struct ReadabilityCounts {
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t syllables = 0;
};

// Counts over whitespace-separated, pre-tokenized text. Sentences are the
// '.', '!' and '?' tokens, with a minimum of one.
ReadabilityCounts readability_counts(std::span<const std::string> tokens);

// 206.835 - 1.015 (words / sentences) - 84.6 (syllables / words).
// Throws std::invalid_argument when the text has no words.
double flesch_score(std::span<const std::string> tokens);
double flesch_score(std::string_view text);

// (1/m) sum_i f(s_i) / 1000 over all m tokens. Throws on an empty list.
double simplicity_score(std::span<const std::string> tokens, const FrequencyTable& frequencies);

// F1 of clipped n-gram overlap, n in {1, 2}. Empty inputs score 0.
double rouge_n_f1(std::span<const std::string> candidate, std::span<const std::string> reference,
                  int n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
double rouge_l_f1(std::span<const std::string> candidate, std::span<const std::string> reference);

// Fraction of summaries whose target topic ranks among the k best by
// topic_scores (ties broken by topic name). Throws on a target topic the
// lexicon does not know or on mismatched list lengths.
double topk_topic_accuracy(std::span<const std::vector<std::string>> summaries,
                           std::span<const std::string> targets, const TopicLexicon& lexicon,
                           std::size_t k);

struct MetricReport {
  std::string name;
  std::vector<double> values;
  double mean = 0.0;
  std::size_t count = 0;

  static MetricReport from_values(std::string name, std::vector<double> values);
};

// Delimited report: one row per example with a column per metric, then a
// "mean" row. All reports must have the same count.
std::string format_report(std::span<const MetricReport> reports);

}  // namespace tailorsum
