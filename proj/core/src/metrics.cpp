#include "tailorsum/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tailorsum/data.hpp"
#include "tailorsum/tailoring.hpp"

namespace tailorsum {
namespace {

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(std::span<const std::string> tokens,
                                                             std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double f1(double overlap, double candidate_total, double reference_total) {
  if (overlap <= 0.0 || candidate_total <= 0.0 || reference_total <= 0.0) return 0.0;
  const double p = overlap / candidate_total;
  const double r = overlap / reference_total;
  return 2.0 * p * r / (p + r);
}

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

void FrequencyTable::set(std::string word, double frequency) {
  if (!(frequency >= 0.0)) throw std::invalid_argument("frequency must be nonnegative: " + word);
  table_[std::move(word)] = frequency;
}

double FrequencyTable::frequency(std::string_view word) const {
  auto it = table_.find(std::string(word));
  return it == table_.end() ? 0.0 : it->second;
}

FrequencyTable FrequencyTable::parse(std::string_view text) {
  FrequencyTable table;
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
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw std::runtime_error("frequency table line " + std::to_string(line_no) +
                               ": expected word<TAB>frequency");
    }
    const std::string_view num = line.substr(tab + 1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
    if (ec != std::errc() || ptr != num.data() + num.size() || !(value >= 0.0)) {
      throw std::runtime_error("frequency table line " + std::to_string(line_no) +
                               ": frequency must be a nonnegative number");
    }
    table.set(std::string(line.substr(0, tab)), value);
  }
  return table;
}

FrequencyTable FrequencyTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string FrequencyTable::serialize() const {
  std::map<std::string, double> sorted(table_.begin(), table_.end());
  std::ostringstream out;
  out.precision(17);
  for (const auto& [w, f] : sorted) out << w << '\t' << f << '\n';
  return out.str();
}

int count_syllables(std::string_view word) {
  if (word.empty()) throw std::invalid_argument("count_syllables: empty word");
  int groups = 0;
  bool in_group = false;
  for (char raw : word) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const std::size_t n = word.size();
  const auto lower = [&](std::size_t i) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(word[i])));
  };
  if (groups > 1 && lower(n - 1) == 'e') {
    const bool consonant_le = n >= 3 && lower(n - 2) == 'l' && !is_vowel(lower(n - 3));
    if (!consonant_le) --groups;
  }
  return std::max(groups, 1);
}

bool is_word_token(std::string_view token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::isalpha(u) != 0;
  });
}

ReadabilityCounts readability_counts(std::span<const std::string> tokens) {
  ReadabilityCounts counts;
  for (const auto& tok : tokens) {
    if (is_sentence_terminator(tok)) {
      ++counts.sentences;
    } else if (is_word_token(tok)) {
      ++counts.words;
      counts.syllables += static_cast<std::size_t>(count_syllables(tok));
    }
  }
  counts.sentences = std::max<std::size_t>(counts.sentences, 1);
  return counts;
}

double flesch_score(std::span<const std::string> tokens) {
  const ReadabilityCounts c = readability_counts(tokens);
  if (c.words == 0) throw std::invalid_argument("flesch_score: text has no words");
  const double words = static_cast<double>(c.words);
  return 206.835 - 1.015 * (words / static_cast<double>(c.sentences)) -
         84.6 * (static_cast<double>(c.syllables) / words);
}

double flesch_score(std::string_view text) {
  const auto tokens = split_ws(text);
  return flesch_score(std::span<const std::string>(tokens));
}

double simplicity_score(std::span<const std::string> tokens, const FrequencyTable& frequencies) {
  if (tokens.empty()) throw std::invalid_argument("simplicity_score: empty token list");
  double total = 0.0;
  for (const auto& t : tokens) total += frequencies.frequency(t) / 1000.0;
  return total / static_cast<double>(tokens.size());
}

double rouge_n_f1(std::span<const std::string> candidate, std::span<const std::string> reference,
                  int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n_f1: n must be 1 or 2");
  const auto nn = static_cast<std::size_t>(n);
  const auto cand = ngram_counts(candidate, nn);
  const auto ref = ngram_counts(reference, nn);
  std::size_t overlap = 0;
  std::size_t cand_total = 0;
  std::size_t ref_total = 0;
  for (const auto& [gram, count] : cand) {
    cand_total += count;
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [gram, count] : ref) ref_total += count;
  return f1(static_cast<double>(overlap), static_cast<double>(cand_total),
            static_cast<double>(ref_total));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return f1(static_cast<double>(lcs_length(candidate, reference)),
            static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
}

double topk_topic_accuracy(std::span<const std::vector<std::string>> summaries,
                           std::span<const std::string> targets, const TopicLexicon& lexicon,
                           std::size_t k) {
  if (k == 0) throw std::invalid_argument("topk_topic_accuracy: k must be >= 1");
  if (summaries.size() != targets.size()) {
    throw std::invalid_argument("topk_topic_accuracy: summaries and targets differ in length");
  }
  for (const auto& t : targets) {
    if (!lexicon.has_topic(t)) throw std::invalid_argument("unknown target topic: " + t);
  }
  if (summaries.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < summaries.size(); ++s) {
    const auto ranked = rank_topics(topic_scores(summaries[s], lexicon));
    const std::size_t limit = std::min(k, ranked.size());
    if (std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(limit), targets[s]) !=
        ranked.begin() + static_cast<std::ptrdiff_t>(limit)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(summaries.size());
}

MetricReport MetricReport::from_values(std::string name, std::vector<double> values) {
  MetricReport r;
  r.name = std::move(name);
  r.count = values.size();
  double total = 0.0;
  for (double v : values) total += v;
  r.mean = values.empty() ? 0.0 : total / static_cast<double>(values.size());
  r.values = std::move(values);
  return r;
}

std::string format_report(std::span<const MetricReport> reports) {
  std::ostringstream out;
  out.precision(17);
  out << "example";
  for (const auto& r : reports) out << '\t' << r.name;
  out << '\n';
  const std::size_t count = reports.empty() ? 0 : reports.front().count;
  for (const auto& r : reports) {
    if (r.count != count) throw std::invalid_argument("format_report: reports differ in count");
  }
  for (std::size_t i = 0; i < count; ++i) {
    out << i;
    for (const auto& r : reports) out << '\t' << r.values[i];
    out << '\n';
  }
  out << "mean";
  for (const auto& r : reports) out << '\t' << r.mean;
  out << '\n';
  return out.str();
}

}  // namespace tailorsum
