#include "tailorsum/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tailorsum/random.hpp"

namespace tailorsum {
namespace {

using json = nlohmann::json;

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

constexpr std::array<std::string_view, 30> kCopyWords = {
    "injured", "hurt",   "purchase", "buy",    "assist",      "help",  "commence", "start",
    "sufficient", "enough", "major", "big",   "demonstrate", "show",  "residence", "home",
    "inquire", "ask",    "terminate", "end",   "cat",         "dog",   "sun",      "tree",
    "water",   "river",  "table",    "garden", "paper",       "window"};

constexpr std::array<std::pair<std::string_view, std::string_view>, 10> kSynonyms = {{
    {"injured", "hurt"},
    {"purchase", "buy"},
    {"assist", "help"},
    {"commence", "start"},
    {"sufficient", "enough"},
    {"major", "big"},
    {"demonstrate", "show"},
    {"residence", "home"},
    {"inquire", "ask"},
    {"terminate", "end"},
}};

constexpr std::array<std::pair<std::string_view, double>, 30> kFrequencies = {{
    {"injured", 20},   {"hurt", 120},    {"purchase", 15}, {"buy", 300},
    {"assist", 10},    {"help", 900},    {"commence", 2},  {"start", 400},
    {"sufficient", 8}, {"enough", 500},  {"major", 60},    {"big", 600},
    {"demonstrate", 9}, {"show", 700},   {"residence", 6}, {"home", 1100},
    {"inquire", 3},    {"ask", 450},     {"terminate", 4}, {"end", 800},
    {"cat", 50},       {"dog", 90},      {"sun", 70},      {"tree", 60},
    {"water", 200},    {"river", 40},    {"table", 80},    {"garden", 30},
    {"paper", 100},    {"window", 55},
}};

constexpr std::array<std::string_view, 8> kPolitics = {"election", "vote",     "senate",   "party",
                                                       "minister", "campaign", "ballot",   "congress"};
constexpr std::array<std::string_view, 8> kSports = {"football", "goal",   "match", "team",
                                                     "coach",    "league", "score", "player"};
constexpr std::array<std::string_view, 8> kHealth = {"doctor",  "hospital", "patient", "disease",
                                                     "vaccine", "nurse",    "therapy", "clinic"};
constexpr std::array<std::string_view, 8> kMilitary = {"army", "soldier", "troops", "weapon",
                                                       "navy", "general", "battle", "defense"};

const std::array<SyntheticTopic, 4> kTopics = {{
    {"health", kHealth},
    {"military", kMilitary},
    {"politics", kPolitics},
    {"sports", kSports},
}};

std::string rare_word(Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::string word;
  for (int s = 0; s < 3; ++s) {
    word += consonants[uniform_index(rng, consonants.size())];
    word += vowels[uniform_index(rng, vowels.size())];
  }
  word += consonants[uniform_index(rng, consonants.size())];
  return word;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    if (end == pos) break;
    std::string chunk(text.substr(pos, end - pos));
    pos = end;
    for (char& c : chunk) {
      if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (is_control_surface(chunk) && chunk.find('<', 1) == std::string::npos) {
      tokens.push_back(std::move(chunk));
      continue;
    }
    std::size_t lo = 0;
    std::size_t hi = chunk.size();
    std::vector<std::string> trailing;
    while (lo < hi && is_punct(static_cast<unsigned char>(chunk[lo]))) {
      tokens.emplace_back(1, chunk[lo]);
      ++lo;
    }
    while (hi > lo && is_punct(static_cast<unsigned char>(chunk[hi - 1]))) {
      trailing.emplace_back(1, chunk[hi - 1]);
      --hi;
    }
    if (hi > lo) tokens.push_back(chunk.substr(lo, hi - lo));
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
  }
  return tokens;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool is_sentence_terminator(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

std::vector<std::vector<std::string>> split_sentences(std::span<const std::string> tokens) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  for (const auto& tok : tokens) {
    current.push_back(tok);
    if (is_sentence_terminator(tok)) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

Corpus parse_corpus(std::string_view text, Provenance provenance) {
  Corpus corpus;
  corpus.provenance = provenance;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "corpus line " + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("article") || !record.contains("summary") ||
        !record["article"].is_string() || !record["summary"].is_string()) {
      throw std::runtime_error(where + ": expected string fields article and summary");
    }
    Example ex;
    ex.article = tokenize(record["article"].get<std::string>());
    ex.summary = tokenize(record["summary"].get<std::string>());
    if (ex.article.empty() || ex.summary.empty()) {
      throw std::runtime_error(where + ": empty article or summary");
    }
    if (record.contains("topic") && !record["topic"].is_null()) {
      if (!record["topic"].is_string()) throw std::runtime_error(where + ": topic must be a string");
      ex.topic = record["topic"].get<std::string>();
    }
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Provenance provenance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), provenance);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus.examples) {
    json record;
    record["article"] = detokenize(ex.article);
    record["summary"] = detokenize(ex.summary);
    if (ex.topic) record["topic"] = *ex.topic;
    out += record.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_corpus(corpus);
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size,
                       std::span<const std::string> control_tokens) {
  if (corpus.examples.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::set<std::string> controls(control_tokens.begin(), control_tokens.end());
  std::map<std::string, std::size_t> counts;
  auto count = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      if (is_control_surface(t)) {
        controls.insert(t);
      } else {
        ++counts[t];
      }
    }
  };
  for (const auto& ex : corpus.examples) {
    count(ex.article);
    count(ex.summary);
  }
  for (std::string_view reserved : {kPadToken, kUnkToken, kStartToken, kStopToken}) {
    controls.erase(std::string(reserved));
    counts.erase(std::string(reserved));
  }
  if (max_size <= kReservedCount + controls.size()) {
    throw std::invalid_argument("build_vocab: max_size " + std::to_string(max_size) +
                                " leaves no room after reserved and control tokens");
  }
  Vocabulary vocab;
  for (const auto& c : controls) vocab.add(c);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [word, n] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.add(word);
  }
  return vocab;
}

Corpus mix_corpus(const Corpus& corpus, std::uint64_t seed, std::span<const TopicPair> allowed) {
  std::set<std::string> topics;
  for (const auto& ex : corpus.examples) {
    if (!ex.topic) throw std::invalid_argument("mix_corpus: every example needs a topic label");
    topics.insert(*ex.topic);
  }
  if (topics.size() < 2) throw std::invalid_argument("mix_corpus: fewer than 2 topics present");

  auto pair_allowed = [&allowed](const std::string& a, const std::string& b) {
    if (a == b) return false;
    if (allowed.empty()) return true;
    return std::any_of(allowed.begin(), allowed.end(), [&](const TopicPair& p) {
      return (p.first == a && p.second == b) || (p.first == b && p.second == a);
    });
  };

  Rng rng = make_stream(seed, "mixing");
  std::vector<std::size_t> order(corpus.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order.begin(), order.end(), rng);

  Corpus mixed;
  mixed.provenance = Provenance::mixed;
  std::vector<bool> used(order.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (used[i]) continue;
    const Example& a = corpus.examples[order[i]];
    std::size_t j = i + 1;
    while (j < order.size() && (used[j] || !pair_allowed(*a.topic, *corpus.examples[order[j]].topic))) ++j;
    if (j == order.size()) continue;
    used[i] = used[j] = true;
    const Example& b = corpus.examples[order[j]];

    const auto sa = split_sentences(a.article);
    const auto sb = split_sentences(b.article);
    constexpr std::size_t kBlock = 2;
    bool from_a = uniform01(rng) < 0.5;
    std::size_t ia = 0;
    std::size_t ib = 0;
    std::vector<std::string> article;
    while (ia < sa.size() || ib < sb.size()) {
      const auto& src = from_a ? sa : sb;
      std::size_t& k = from_a ? ia : ib;
      for (std::size_t n = 0; n < kBlock && k < src.size(); ++n, ++k) {
        article.insert(article.end(), src[k].begin(), src[k].end());
      }
      from_a = !from_a;
    }
    mixed.examples.push_back({article, a.summary, a.topic});
    mixed.examples.push_back({std::move(article), b.summary, b.topic});
  }
  return mixed;
}

Corpus gen_synthetic(SynthKind kind, std::size_t size, std::uint64_t seed,
                     const SynthOptions& options) {
  if (size == 0) throw std::invalid_argument("gen_synthetic: size must be >= 1");
  if (options.min_length == 0 || options.min_length > options.max_length) {
    throw std::invalid_argument("gen_synthetic: need 1 <= min_length <= max_length");
  }
  Rng rng = make_stream(seed, "synthetic");
  Corpus corpus;
  corpus.provenance = Provenance::synthetic;
  auto length = [&](std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); };

  if (kind == SynthKind::copy) {
    for (std::size_t e = 0; e < size; ++e) {
      std::vector<std::string> tokens(length(options.min_length, options.max_length));
      for (auto& tok : tokens) {
        if (options.oov_fraction > 0.0 && uniform01(rng) < options.oov_fraction) {
          tok = rare_word(rng);
        } else {
          tok = std::string(kCopyWords[uniform_index(rng, kCopyWords.size())]);
        }
      }
      corpus.examples.push_back({tokens, tokens, std::nullopt});
    }
    return corpus;
  }

  for (std::size_t e = 0; e < size; ++e) {
    const std::size_t t1 = uniform_index(rng, kTopics.size());
    std::size_t t2 = uniform_index(rng, kTopics.size() - 1);
    if (t2 >= t1) ++t2;
    auto segment = [&](const SyntheticTopic& topic) {
      std::vector<std::string> seg(length(3, 5));
      for (auto& tok : seg) tok = std::string(topic.words[uniform_index(rng, topic.words.size())]);
      seg.emplace_back(".");
      return seg;
    };
    auto seg_a = segment(kTopics[t1]);
    auto seg_b = segment(kTopics[t2]);
    std::vector<std::string> article = seg_a;
    article.insert(article.end(), seg_b.begin(), seg_b.end());
    corpus.examples.push_back({article, std::move(seg_a), std::string(kTopics[t1].name)});
    corpus.examples.push_back({std::move(article), std::move(seg_b), std::string(kTopics[t2].name)});
  }
  return corpus;
}

std::span<const std::string_view> synthetic_copy_words() { return kCopyWords; }
std::span<const SyntheticTopic> synthetic_topics() { return kTopics; }
std::span<const std::pair<std::string_view, std::string_view>> synthetic_synonyms() {
  return kSynonyms;
}
std::span<const std::pair<std::string_view, double>> synthetic_frequencies() {
  return kFrequencies;
}

EncodedExample encode_example(const Vocabulary& vocab, const Example& example,
                              std::size_t max_article, std::size_t max_summary) {
  if (example.article.empty()) throw std::invalid_argument("encode_example: empty article");
  const std::size_t n = std::min(max_article, example.article.size());
  const std::span<const std::string> article(example.article.data(), n);
  const ExtendedVocab ext(vocab, article);

  EncodedExample out;
  out.topic = example.topic;
  out.oov_words = ext.oov_words();
  out.source.reserve(n);
  for (const auto& w : article) out.source.push_back(*ext.find(w));
  const std::size_t m = std::min(max_summary, example.summary.size());
  for (std::size_t i = 0; i < m; ++i) {
    out.target.push_back(ext.find(example.summary[i]).value_or(kUnkId));
  }
  out.target.push_back(kStopId);
  return out;
}

const std::string& surface(const Vocabulary& vocab, const EncodedExample& example, TokenId id) {
  if (id < vocab.size()) return vocab.token(id);
  const std::size_t k = id - vocab.size();
  if (k >= example.oov_words.size()) {
    throw std::out_of_range("surface: extended id " + std::to_string(id) + " out of range");
  }
  return example.oov_words[k];
}

}  // namespace tailorsum
