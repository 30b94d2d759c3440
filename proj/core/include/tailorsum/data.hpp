#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tailorsum/numerics.hpp"
#include "tailorsum/vocabulary.hpp"

namespace tailorsum {

inline constexpr std::size_t kMaxArticleTokens = 400;
inline constexpr std::size_t kMaxSummaryTokens = 100;

struct Example {
  std::vector<std::string> article;
  std::vector<std::string> summary;
  std::optional<std::string> topic;

  bool operator==(const Example&) const = default;
};

enum class Provenance { real, mixed, synthetic };

struct Corpus {
  std::vector<Example> examples;
  Provenance provenance = Provenance::real;
};

// Lowercases ASCII, splits on whitespace, and splits leading and trailing
// punctuation into one-character tokens. Punctuation between alphanumerics
// ("work-study", "3.5") stays inside the word, and "<...>" control tokens
// are kept whole.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> tokens);

bool is_sentence_terminator(std::string_view token);
// Sentences end at (and include) '.', '!' or '?'. Trailing tokens without a
// terminator form a final sentence.
std::vector<std::vector<std::string>> split_sentences(std::span<const std::string> tokens);

// One JSON object per line: {"article": ..., "summary": ..., "topic": ...}.
// Throws std::runtime_error with the line number on malformed input or on a
// record with an empty article or summary.
Corpus parse_corpus(std::string_view text, Provenance provenance = Provenance::real);
Corpus load_corpus(const std::filesystem::path& path, Provenance provenance = Provenance::real);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Keeps the most frequent tokens (ties broken lexicographically) after the
// reserved ids and the control tokens, up to `max_size` entries in total.
// Control tokens are every "<...>" token in the corpus plus `control_tokens`.
Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size,
                       std::span<const std::string> control_tokens = {});

struct TopicPair {
  std::string first;
  std::string second;
};

// Pairs articles from distinct topics and interleaves their sentences in
// blocks of two, starting from a seeded side. Every pair yields two tuples
// sharing the mixed article: one per source summary and topic. When
// `allowed` is non-empty only those (unordered) topic pairs are formed.
Corpus mix_corpus(const Corpus& corpus, std::uint64_t seed, std::span<const TopicPair> allowed = {});

enum class SynthKind { copy, two_topic };

struct SynthOptions {
  // Fraction of copy-task tokens drawn from a large pool of rare words that
  // never make it into a capped vocabulary.
  double oov_fraction = 0.0;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
};

// copy: `size` examples whose summary equals the article.
// two_topic: `size` articles, each "segment_a . segment_b ." built from two
// topics' word lists, yielding two examples (one per segment and topic).
Corpus gen_synthetic(SynthKind kind, std::size_t size, std::uint64_t seed,
                     const SynthOptions& options = {});

std::span<const std::string_view> synthetic_copy_words();

struct SyntheticTopic {
  std::string_view name;
  std::span<const std::string_view> words;
};
std::span<const SyntheticTopic> synthetic_topics();

// Complex -> simpler pairs drawn from the copy vocabulary.
std::span<const std::pair<std::string_view, std::string_view>> synthetic_synonyms();
// Per-million style frequencies for the copy vocabulary.
std::span<const std::pair<std::string_view, double>> synthetic_frequencies();

struct EncodedExample {
  std::vector<TokenId> source;  // extended ids
  std::vector<TokenId> target;  // extended ids, STOP-terminated
  std::vector<std::string> oov_words;
  std::optional<std::string> topic;
  // Attention boost per source position; empty means none.
  Vec boost;
};

// Truncates, numbers article OOV words after the base vocabulary, and maps
// summary words to base ids, copied OOV ids, or UNK.
EncodedExample encode_example(const Vocabulary& vocab, const Example& example,
                              std::size_t max_article = kMaxArticleTokens,
                              std::size_t max_summary = kMaxSummaryTokens);

// Surface form of an extended id for a given example.
const std::string& surface(const Vocabulary& vocab, const EncodedExample& example, TokenId id);

}  // namespace tailorsum
