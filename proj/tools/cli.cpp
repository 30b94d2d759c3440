#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "tailorsum/checkpoint.hpp"
#include "tailorsum/data.hpp"
#include "tailorsum/decode.hpp"
#include "tailorsum/gradcheck.hpp"
#include "tailorsum/metrics.hpp"
#include "tailorsum/tailoring.hpp"
#include "tailorsum/training.hpp"

namespace fs = std::filesystem;

namespace tailorsum::cli {
namespace {

struct Failure : std::runtime_error {
  Failure(std::string kind_, std::string field_, const std::string& message)
      : std::runtime_error(message), kind(std::move(kind_)), field(std::move(field_)) {}
  std::string kind;
  std::string field;
};

[[noreturn]] void config_error(const std::string& field, const std::string& message) {
  throw Failure("config", field, message);
}

[[noreturn]] void io_error(const std::string& field, const std::string& message) {
  throw Failure("io", field, message);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Flat "key = value" lines; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("config", "cannot read config file " + path);
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty()) {
      config_error("config", path + " line " + std::to_string(line_no) + ": expected key=value");
    }
    values[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return values;
}

void require_file(const std::string& field, const std::string& path) {
  if (path.empty()) config_error(field, "a path is required");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) config_error(field, "file not found: " + path);
}

template <class F>
auto load_or_fail(const std::string& field, F&& load) -> decltype(load()) {
  try {
    return load();
  } catch (const Failure&) {
    throw;
  } catch (const std::exception& e) {
    io_error(field, e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("out", "cannot write " + path.string());
  out << text;
  if (!out) io_error("out", "write failed for " + path.string());
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

struct Context {
  CLI::App* app = nullptr;
  std::string name;
  fs::path out_dir;
  std::ostream* out = nullptr;

  // Every option of the command with its effective value.
  std::string resolved_config() const {
    std::string text;
    for (const CLI::Option* opt : app->get_options()) {
      const std::string key = opt->get_single_name();
      if (key.empty() || key == "help" || key == "config") continue;
      std::string value;
      if (key == "out") {
        value = out_dir.string();
      } else if (opt->get_expected_max() == 0) {
        const bool on = opt->count() > 0 && opt->results().back() != "false" && opt->results().back() != "0";
        value = on ? "true" : "false";
      } else if (opt->count() > 0) {
        value = opt->results().back();
      } else {
        value = opt->get_default_str();
      }
      text += key + "=" + value + "\n";
    }
    return text;
  }

  // Creates the output directory and records the resolved config.
  void open_outputs() const {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) io_error("out", "cannot create " + out_dir.string() + ": " + ec.message());
    write_text(out_dir / (name + ".cfg"), resolved_config());
  }
};

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string kind;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  double oov_fraction = 0.0;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
};

int run_synth(const SynthArgs& a, Context& ctx) {
  SynthKind kind;
  if (a.kind == "copy") {
    kind = SynthKind::copy;
  } else if (a.kind == "two_topic") {
    kind = SynthKind::two_topic;
  } else {
    config_error("kind", "expected copy or two_topic, got '" + a.kind + "'");
  }
  if (a.size == 0) config_error("size", "must be >= 1");
  if (!(a.oov_fraction >= 0.0 && a.oov_fraction < 1.0)) config_error("oov-fraction", "must lie in [0, 1)");
  if (a.min_length == 0 || a.min_length > a.max_length) {
    config_error("min-length", "need 1 <= min-length <= max-length");
  }
  SynthOptions opts;
  opts.oov_fraction = a.oov_fraction;
  opts.min_length = a.min_length;
  opts.max_length = a.max_length;
  const Corpus corpus = gen_synthetic(kind, a.size, a.seed, opts);

  ctx.open_outputs();
  save_corpus(ctx.out_dir / "corpus.jsonl", corpus);
  write_text(ctx.out_dir / "lexicon.tsv", synthetic_lexicon().serialize());
  write_text(ctx.out_dir / "frequencies.tsv", synthetic_frequency_table().serialize());
  write_text(ctx.out_dir / "synonyms.tsv", synthetic_synonym_table().serialize());
  *ctx.out << "wrote " << corpus.examples.size() << " examples to "
           << (ctx.out_dir / "corpus.jsonl").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- build-vocab

struct VocabArgs {
  std::string corpus;
  std::size_t max_size = 50000;
  std::string controls;
  bool topic_controls = false;
  bool style_controls = false;
};

std::vector<std::string> corpus_topics(const Corpus& corpus) {
  std::vector<std::string> topics;
  for (const auto& ex : corpus.examples) {
    if (ex.topic && std::find(topics.begin(), topics.end(), *ex.topic) == topics.end()) {
      topics.push_back(*ex.topic);
    }
  }
  std::sort(topics.begin(), topics.end());
  return topics;
}

int run_build_vocab(const VocabArgs& a, Context& ctx) {
  require_file("corpus", a.corpus);
  const Corpus corpus = load_or_fail("corpus", [&] { return load_corpus(a.corpus); });
  std::vector<std::string> controls = split_list(a.controls);
  for (const auto& c : controls) {
    if (!is_control_surface(c)) config_error("controls", "'" + c + "' is not of the form <...>");
  }
  if (a.topic_controls) {
    const auto topics = corpus_topics(corpus);
    if (topics.empty()) config_error("topic-controls", "corpus has no topic labels");
    for (auto& s : topic_control_surfaces(topics)) controls.push_back(std::move(s));
  }
  if (a.style_controls) {
    for (auto& s : style_control_surfaces()) controls.push_back(std::move(s));
  }
  Vocabulary vocab;
  try {
    vocab = build_vocab(corpus, a.max_size, controls);
  } catch (const std::invalid_argument& e) {
    config_error("max-size", e.what());
  }
  ctx.open_outputs();
  vocab.save(ctx.out_dir / "vocab.tsv");
  *ctx.out << "vocabulary size " << vocab.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------- mix

struct MixArgs {
  std::string corpus;
  std::uint64_t seed = 0;
  std::string pairs;
};

int run_mix(const MixArgs& a, Context& ctx) {
  require_file("corpus", a.corpus);
  std::vector<TopicPair> pairs;
  for (const auto& p : split_list(a.pairs)) {
    const auto colon = p.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == p.size()) {
      config_error("pairs", "expected topic:topic, got '" + p + "'");
    }
    pairs.push_back({p.substr(0, colon), p.substr(colon + 1)});
  }
  const Corpus corpus = load_or_fail("corpus", [&] { return load_corpus(a.corpus); });
  Corpus mixed;
  try {
    mixed = mix_corpus(corpus, a.seed, pairs);
  } catch (const std::invalid_argument& e) {
    config_error("corpus", e.what());
  }
  ctx.open_outputs();
  save_corpus(ctx.out_dir / "mixed.jsonl", mixed);
  *ctx.out << "wrote " << mixed.examples.size() << " mixed examples\n";
  return 0;
}

// ---------------------------------------------------------------- shared model setup

Vocabulary load_vocab(const std::string& path) {
  require_file("vocab", path);
  return load_or_fail("vocab", [&] { return Vocabulary::load(path); });
}

TopicLexicon load_lexicon(const std::string& path) {
  require_file("lexicon", path);
  return load_or_fail("lexicon", [&] { return TopicLexicon::load(path); });
}

FrequencyTable load_frequencies(const std::string& path) {
  require_file("frequencies", path);
  return load_or_fail("frequencies", [&] { return FrequencyTable::load(path); });
}

void require_control(const Vocabulary& vocab, const std::string& surface) {
  if (!vocab.find(surface)) {
    config_error("vocab", "control token " + surface + " is not in the vocabulary");
  }
}

// Boost over the (possibly control-prefixed) truncated source.
Vec source_boost(const Example& original, bool has_control, const std::string& topic,
                 const TopicLexicon& lexicon, std::size_t k, double gamma) {
  Vec boost = select_boost_vector(original.article, topic, lexicon, k, gamma);
  if (has_control) boost.insert(boost.begin(), 1.0);
  boost.resize(std::min(boost.size(), kMaxArticleTokens));
  return boost;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus;
  std::string vocab;
  std::uint64_t seed = 0;
  std::size_t embed = 16;
  std::size_t hidden = 32;
  std::size_t attention = 32;
  std::size_t pretrain_iterations = 1000;
  std::size_t rl_iterations = 0;
  double alpha = 0.9;
  double learning_rate = 0.15;
  double initial_accumulator = 0.1;
  double coverage_weight = 1.0;
  std::size_t max_decode_length = 100;
  std::size_t checkpoint_every = 0;
  std::string reward;
  std::string frequencies;
  std::string lexicon;
  std::string control = "none";
  bool boost = false;
  std::size_t boost_k = 5;
  double boost_gamma = 1.0;
  std::string init;
};

int run_train(const TrainArgs& a, Context& ctx) {
  require_file("corpus", a.corpus);
  TrainConfig config;
  config.alpha = a.alpha;
  config.learning_rate = a.learning_rate;
  config.initial_accumulator = a.initial_accumulator;
  config.pretrain_iterations = a.pretrain_iterations;
  config.rl_iterations = a.rl_iterations;
  config.seed = a.seed;
  config.coverage_weight = a.coverage_weight;
  config.max_decode_length = a.max_decode_length;
  config.checkpoint_every = a.checkpoint_every;
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    config_error(msg.substr(0, msg.find(':')), msg);
  }
  if (a.embed == 0 || a.hidden == 0 || a.attention == 0) config_error("embed", "dimensions must be >= 1");
  const bool needs_reward = a.rl_iterations > 0 && a.alpha > 0.0;
  if (needs_reward && a.reward.empty()) config_error("reward", "an SCST phase needs --reward");
  if (!a.reward.empty() && a.reward != "readability" && a.reward != "simplicity") {
    config_error("reward", "expected readability or simplicity");
  }
  if (a.control != "none" && a.control != "topic" && a.control != "readability" &&
      a.control != "simplicity") {
    config_error("control", "expected none, topic, readability or simplicity");
  }
  if (a.boost && a.lexicon.empty()) config_error("lexicon", "--boost needs a topic lexicon");

  const Vocabulary vocab = load_vocab(a.vocab);
  const Corpus corpus = load_or_fail("corpus", [&] { return load_corpus(a.corpus); });
  if (corpus.examples.empty()) config_error("corpus", "corpus is empty");
  std::optional<TopicLexicon> lexicon;
  if (!a.lexicon.empty()) lexicon = load_lexicon(a.lexicon);
  std::optional<FrequencyTable> frequencies;
  if (!a.frequencies.empty()) frequencies = load_frequencies(a.frequencies);
  if ((a.reward == "simplicity" || a.control == "simplicity") && !frequencies) {
    config_error("frequencies", "simplicity needs a frequency table");
  }

  // Style labels come from the median of the training summaries.
  std::optional<MedianBins> bins;
  std::vector<double> style_values;
  if (a.control == "readability" || a.control == "simplicity") {
    const RewardFn metric = make_reward(
        a.control == "readability" ? RewardKind::readability : RewardKind::simplicity,
        frequencies ? &*frequencies : nullptr);
    for (const auto& ex : corpus.examples) style_values.push_back(metric.evaluate(ex.summary));
    bins = median_bins(style_values, a.control == "readability" ? ControlKind::readability
                                                                : ControlKind::simplicity);
  }

  std::vector<EncodedExample> examples;
  examples.reserve(corpus.examples.size());
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const Example& ex = corpus.examples[i];
    Example prepared = ex;
    if (a.control == "topic") {
      if (!ex.topic) config_error("corpus", "example " + std::to_string(i) + " has no topic");
      const ControlToken token = topic_token(*ex.topic);
      require_control(vocab, token.surface);
      prepared = prepend_control_token(ex, token);
    } else if (bins) {
      const ControlToken& token = bins->label(style_values[i]);
      require_control(vocab, token.surface);
      prepared = prepend_control_token(ex, token);
    }
    EncodedExample enc = encode_example(vocab, prepared);
    if (a.boost) {
      if (!ex.topic) config_error("corpus", "example " + std::to_string(i) + " has no topic to boost");
      if (!lexicon->has_topic(*ex.topic)) config_error("lexicon", "no entries for topic " + *ex.topic);
      enc.boost = source_boost(ex, a.control != "none", *ex.topic, *lexicon, a.boost_k, a.boost_gamma);
    }
    examples.push_back(std::move(enc));
  }

  const ModelDims dims{vocab.size(), a.embed, a.hidden, a.attention};
  TrainState state;
  if (!a.init.empty()) {
    require_file("init", a.init);
    Checkpoint ck = load_or_fail("init", [&] { return load_checkpoint(a.init); });
    if (!(ck.params.dims == dims)) config_error("init", "checkpoint dims do not match the vocabulary and --embed/--hidden/--attention");
    state.params = std::move(ck.params);
    if (ck.optimizer) state.optimizer = std::move(*ck.optimizer);
    state.optimizer.learning_rate = a.learning_rate;
  } else {
    Rng init = make_stream(a.seed, "init");
    state.params = ModelParams::initialize(dims, init);
  }

  SequenceReward reward;
  if (!a.reward.empty()) {
    reward = bind_reward(make_reward(a.reward == "readability" ? RewardKind::readability
                                                                : RewardKind::simplicity,
                                     frequencies ? &*frequencies : nullptr),
                         vocab);
  }

  ctx.open_outputs();
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t it, const TrainState& s) {
    save_checkpoint(ctx.out_dir / ("checkpoint-" + std::to_string(it) + ".txt"), s.params, &s.optimizer);
  };
  const TrainResult result = train(std::move(state), examples, config, reward, banned_ids(vocab), hooks);
  save_checkpoint(ctx.out_dir / "checkpoint.txt", result.state.params, &result.state.optimizer);
  write_text(ctx.out_dir / "loss_curve.tsv", format_loss_curve(result.curve));
  if (result.diverged) throw Failure("runtime", "train", result.message + "; wrote last good checkpoint");
  *ctx.out << "iterations " << result.iterations_run << " mean_token_nll "
           << format_double(mean_token_nll(result.state.params, examples)) << "\n";
  return 0;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
  std::string checkpoint;
  std::string vocab;
  std::string corpus;
  std::size_t beam = 4;
  std::size_t max_length = 100;
  std::size_t min_length = 0;
  std::string control_token;
  bool topic_token = false;
  std::string target_topic;
  bool boost = false;
  std::string lexicon;
  std::size_t boost_k = 5;
  double boost_gamma = 1.0;
  double voting_lambda = 0.0;
  std::string synonyms;
  std::string simpler = "frequency";
  std::string frequencies;
  bool attention = false;
  std::size_t limit = 0;
};

int run_decode(const DecodeArgs& a, Context& ctx) {
  require_file("checkpoint", a.checkpoint);
  require_file("corpus", a.corpus);
  if (a.topic_token && !a.control_token.empty()) {
    config_error("control-token", "use either --control-token or --topic-token");
  }
  if (a.boost && a.lexicon.empty()) config_error("lexicon", "--boost needs a topic lexicon");
  if (!(a.voting_lambda >= 0.0 && a.voting_lambda <= 1.0)) config_error("voting-lambda", "must lie in [0, 1]");
  if (a.voting_lambda > 0.0 && a.synonyms.empty()) config_error("synonyms", "voting needs a synonym table");
  if (a.simpler != "frequency" && a.simpler != "syllables") {
    config_error("simpler", "expected frequency or syllables");
  }
  if (a.voting_lambda > 0.0 && a.simpler == "frequency" && a.frequencies.empty()) {
    config_error("frequencies", "--simpler frequency needs a frequency table");
  }
  DecodeConfig base;
  base.beam_width = a.beam;
  base.max_length = a.max_length;
  base.min_length = a.min_length;
  try {
    validate(base);
  } catch (const std::invalid_argument& e) {
    config_error("beam", e.what());
  }

  const Vocabulary vocab = load_vocab(a.vocab);
  const Checkpoint ck = load_or_fail("checkpoint", [&] { return load_checkpoint(a.checkpoint); });
  if (ck.params.dims.vocab != vocab.size()) {
    config_error("checkpoint", "checkpoint vocabulary size " + std::to_string(ck.params.dims.vocab) +
                                   " does not match vocab size " + std::to_string(vocab.size()));
  }
  const Corpus corpus = load_or_fail("corpus", [&] { return load_corpus(a.corpus); });
  std::optional<TopicLexicon> lexicon;
  if (!a.lexicon.empty()) lexicon = load_lexicon(a.lexicon);
  std::optional<FrequencyTable> frequencies;
  if (!a.frequencies.empty()) frequencies = load_frequencies(a.frequencies);
  if (a.voting_lambda > 0.0) {
    require_file("synonyms", a.synonyms);
    const SynonymTable table = load_or_fail("synonyms", [&] { return SynonymTable::load(a.synonyms); });
    const SimplerFn simpler =
        a.simpler == "syllables" ? fewer_syllables() : higher_frequency(*frequencies);
    base.voting = VotingConfig{voting_pairs(table, vocab, simpler), a.voting_lambda};
  }
  if (!a.control_token.empty()) {
    if (!is_control_surface(a.control_token)) config_error("control-token", "expected <...>");
    require_control(vocab, a.control_token);
  }

  const std::size_t count =
      a.limit == 0 ? corpus.examples.size() : std::min(a.limit, corpus.examples.size());
  std::vector<DecodeConfig> configs(count, base);
  for (std::size_t i = 0; i < count; ++i) {
    const Example& ex = corpus.examples[i];
    const std::string topic = a.target_topic.empty() ? ex.topic.value_or("") : a.target_topic;
    if ((a.topic_token || a.boost) && topic.empty()) {
      config_error("target-topic", "example " + std::to_string(i) + " has no topic");
    }
    if (a.topic_token) {
      configs[i].control = topic_token(topic);
      require_control(vocab, configs[i].control->surface);
    } else if (!a.control_token.empty()) {
      configs[i].control = ControlToken{a.control_token, ControlKind::topic};
    }
    if (a.boost) {
      if (!lexicon->has_topic(topic)) config_error("lexicon", "no entries for topic " + topic);
      configs[i].boost = select_boost_vector(ex.article, topic, *lexicon, a.boost_k, a.boost_gamma);
    }
  }

  ctx.open_outputs();
  const RewardFn readability = make_reward(RewardKind::readability);
  std::string lines;
  for (std::size_t i = 0; i < count; ++i) {
    const DecodeResult r = decode_article(ck.params, vocab, corpus.examples[i].article, configs[i]);
    std::map<std::string, double> metrics;
    metrics["flesch"] = readability.evaluate(r.words);
    if (frequencies && !r.words.empty()) metrics["simplicity"] = simplicity_score(r.words, *frequencies);
    lines += decode_record_json(std::to_string(i), r, a.attention, metrics) + "\n";
  }
  write_text(ctx.out_dir / "decoded.jsonl", lines);
  *ctx.out << "decoded " << count << " articles\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string metric;
  std::string text;
  std::string decoded;
  std::string corpus;
  std::string frequencies;
  std::string lexicon;
  std::string target_topic;
};

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::vector<std::string>> read_decoded(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_error("decoded", "cannot read " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(split_ws(j.at("text").get<std::string>()));
    } catch (const std::exception& e) {
      io_error("decoded", path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

int run_eval(const EvalArgs& a, Context& ctx) {
  static const std::vector<std::string> known = {"flesch", "simplicity", "rouge-1", "rouge-2",
                                                 "rouge-l", "top-1", "top-3"};
  const auto metrics = split_list(a.metric);
  if (metrics.empty()) config_error("metric", "at least one metric is required");
  bool needs_refs = false;
  bool needs_topics = false;
  for (const auto& m : metrics) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      config_error("metric", "unknown metric '" + m + "'");
    }
    needs_refs |= m.rfind("rouge", 0) == 0;
    needs_topics |= m.rfind("top", 0) == 0;
  }
  if (a.text.empty() == a.decoded.empty()) config_error("text", "give exactly one of --text or --decoded");
  const bool needs_freq = std::find(metrics.begin(), metrics.end(), "simplicity") != metrics.end();
  std::optional<FrequencyTable> frequencies;
  if (needs_freq) {
    if (a.frequencies.empty()) config_error("frequencies", "simplicity needs a frequency table");
    frequencies = load_frequencies(a.frequencies);
  }
  std::optional<TopicLexicon> lexicon;
  if (needs_topics) {
    if (a.lexicon.empty()) config_error("lexicon", "topic accuracy needs a lexicon");
    lexicon = load_lexicon(a.lexicon);
  }

  std::vector<std::vector<std::string>> candidates;
  if (!a.text.empty()) {
    candidates.push_back(split_ws(a.text));
  } else {
    require_file("decoded", a.decoded);
    candidates = read_decoded(a.decoded);
  }
  std::optional<Corpus> corpus;
  if (needs_refs || (needs_topics && a.target_topic.empty())) {
    require_file("corpus", a.corpus);
    corpus = load_or_fail("corpus", [&] { return load_corpus(a.corpus); });
    if (corpus->examples.size() < candidates.size()) {
      config_error("corpus", "corpus has fewer examples than there are candidates");
    }
  }
  std::vector<std::string> targets;
  if (needs_topics) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const std::string t = a.target_topic.empty() ? corpus->examples[i].topic.value_or("")
                                                   : a.target_topic;
      if (!lexicon->has_topic(t)) config_error("target-topic", "unknown target topic '" + t + "'");
      targets.push_back(t);
    }
  }

  std::vector<MetricReport> reports;
  for (const auto& m : metrics) {
    std::vector<double> values;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& c = candidates[i];
      double v = 0.0;
      if (m == "flesch") {
        v = make_reward(RewardKind::readability).evaluate(c);
      } else if (m == "simplicity") {
        v = c.empty() ? 0.0 : simplicity_score(c, *frequencies);
      } else if (m == "rouge-1" || m == "rouge-2") {
        v = rouge_n_f1(c, corpus->examples[i].summary, m == "rouge-1" ? 1 : 2);
      } else if (m == "rouge-l") {
        v = rouge_l_f1(c, corpus->examples[i].summary);
      } else {
        const std::vector<std::vector<std::string>> one{c};
        const std::vector<std::string> target{targets[i]};
        v = topk_topic_accuracy(one, target, *lexicon, m == "top-1" ? 1 : 3);
      }
      values.push_back(v);
    }
    reports.push_back(MetricReport::from_values(m, std::move(values)));
  }

  ctx.open_outputs();
  write_text(ctx.out_dir / "report.tsv", format_report(reports));
  for (const auto& r : reports) *ctx.out << r.name << "\t" << format_double(r.mean) << "\n";
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string dims = "tiny";
  double epsilon = 1e-5;
  double tolerance = 1e-4;
};

int run_gradcheck_command(const GradcheckArgs& a, Context& ctx) {
  ModelDims dims;
  if (a.dims == "tiny") {
    dims = {20, 8, 8, 8};
  } else if (a.dims == "small") {
    dims = {40, 16, 16, 16};
  } else {
    config_error("dims", "expected tiny or small");
  }
  if (!(a.epsilon > 0.0)) config_error("epsilon", "must be positive");
  if (!(a.tolerance > 0.0)) config_error("tolerance", "must be positive");
  const auto start = std::chrono::steady_clock::now();
  const ModelGradCheck check = run_gradcheck(dims, a.seed, a.epsilon, a.tolerance);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  *ctx.out << describe(check.report) << " params=" << check.analytic.size()
           << " seconds=" << format_double(seconds) << "\n";
  return check.report.pass ? 0 : 1;
}

// ---------------------------------------------------------------- dispatch

std::string option_from_message(const std::string& what) {
  const auto pos = what.find("--");
  if (pos == std::string::npos) return "-";
  auto end = what.find_first_of(" =:", pos);
  return what.substr(pos + 2, end == std::string::npos ? std::string::npos : end - pos - 2);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tailored pointer-generator summarization", "tailorsum"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  std::string config_path;
  std::string out_flag;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat key=value config file");
    sub->add_option("--out", out_flag, "Output directory");
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus");
  common(s);
  s->add_option("--kind", synth.kind, "copy or two_topic")->required();
  s->add_option("--size", synth.size, "Examples (copy) or articles (two_topic)")->required();
  s->add_option("--seed", synth.seed)->required();
  s->add_option("--oov-fraction", synth.oov_fraction);
  s->add_option("--min-length", synth.min_length);
  s->add_option("--max-length", synth.max_length);

  VocabArgs vocab;
  auto* v = app.add_subcommand("build-vocab", "Build a vocabulary from a corpus");
  common(v);
  v->add_option("--corpus", vocab.corpus)->required();
  v->add_option("--max-size", vocab.max_size);
  v->add_option("--controls", vocab.controls, "Comma-separated control tokens");
  v->add_flag("--topic-controls", vocab.topic_controls, "Register <topic:NAME> for every corpus topic");
  v->add_flag("--style-controls", vocab.style_controls, "Register readability and simplicity tokens");

  MixArgs mix;
  auto* m = app.add_subcommand("mix", "Interleave articles from different topics");
  common(m);
  m->add_option("--corpus", mix.corpus)->required();
  m->add_option("--seed", mix.seed)->required();
  m->add_option("--pairs", mix.pairs, "Allowed topic pairs, e.g. politics:sports,health:military");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train, then optionally fine-tune with SCST");
  common(t);
  t->add_option("--corpus", tr.corpus)->required();
  t->add_option("--vocab", tr.vocab)->required();
  t->add_option("--seed", tr.seed)->required();
  t->add_option("--embed", tr.embed);
  t->add_option("--hidden", tr.hidden);
  t->add_option("--attention", tr.attention);
  t->add_option("--pretrain-iterations", tr.pretrain_iterations);
  t->add_option("--rl-iterations", tr.rl_iterations);
  t->add_option("--alpha", tr.alpha);
  t->add_option("--learning-rate", tr.learning_rate);
  t->add_option("--initial-accumulator", tr.initial_accumulator);
  t->add_option("--coverage-weight", tr.coverage_weight);
  t->add_option("--max-decode-length", tr.max_decode_length);
  t->add_option("--checkpoint-every", tr.checkpoint_every);
  t->add_option("--reward", tr.reward, "readability or simplicity");
  t->add_option("--frequencies", tr.frequencies);
  t->add_option("--lexicon", tr.lexicon);
  t->add_option("--control", tr.control, "none, topic, readability or simplicity");
  t->add_flag("--boost", tr.boost, "Train with topic attention boosting");
  t->add_option("--boost-k", tr.boost_k);
  t->add_option("--boost-gamma", tr.boost_gamma);
  t->add_option("--init", tr.init, "Checkpoint to continue from");

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Decode every article of a corpus");
  common(d);
  d->add_option("--checkpoint", dec.checkpoint)->required();
  d->add_option("--vocab", dec.vocab)->required();
  d->add_option("--corpus", dec.corpus)->required();
  d->add_option("--beam", dec.beam);
  d->add_option("--max-length", dec.max_length);
  d->add_option("--min-length", dec.min_length);
  d->add_option("--control-token", dec.control_token, "Fixed control token to prepend");
  d->add_flag("--topic-token", dec.topic_token, "Prepend <topic:TARGET>");
  d->add_option("--target-topic", dec.target_topic, "Defaults to each example's topic");
  d->add_flag("--boost", dec.boost, "Boost attention toward the target topic");
  d->add_option("--lexicon", dec.lexicon);
  d->add_option("--boost-k", dec.boost_k);
  d->add_option("--boost-gamma", dec.boost_gamma);
  d->add_option("--voting-lambda", dec.voting_lambda);
  d->add_option("--synonyms", dec.synonyms);
  d->add_option("--simpler", dec.simpler, "frequency or syllables");
  d->add_option("--frequencies", dec.frequencies);
  d->add_flag("--attention", dec.attention, "Include the attention trace");
  d->add_option("--limit", dec.limit, "Decode only the first N articles");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score text or decoded summaries");
  common(e);
  e->add_option("--metric", ev.metric, "flesch,simplicity,rouge-1,rouge-2,rouge-l,top-1,top-3")->required();
  e->add_option("--text", ev.text);
  e->add_option("--decoded", ev.decoded);
  e->add_option("--corpus", ev.corpus);
  e->add_option("--frequencies", ev.frequencies);
  e->add_option("--lexicon", ev.lexicon);
  e->add_option("--target-topic", ev.target_topic);

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  common(g);
  g->add_option("--seed", gc.seed)->required();
  g->add_option("--dims", gc.dims, "tiny or small");
  g->add_option("--epsilon", gc.epsilon);
  g->add_option("--tolerance", gc.tolerance);

  const std::map<std::string, std::function<int(Context&)>> commands = {
      {"synth", [&](Context& c) { return run_synth(synth, c); }},
      {"build-vocab", [&](Context& c) { return run_build_vocab(vocab, c); }},
      {"mix", [&](Context& c) { return run_mix(mix, c); }},
      {"train", [&](Context& c) { return run_train(tr, c); }},
      {"decode", [&](Context& c) { return run_decode(dec, c); }},
      {"eval", [&](Context& c) { return run_eval(ev, c); }},
      {"gradcheck", [&](Context& c) { return run_gradcheck_command(gc, c); }},
  };

  try {
    // Config file values go in front of the explicit flags so the flags win.
    std::vector<std::string> effective = args;
    std::optional<std::string> config_out;
    const bool out_given = std::any_of(args.begin(), args.end(), [](const std::string& a) {
      return a == "--out" || a.rfind("--out=", 0) == 0;
    });
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::optional<std::string> path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (!path) continue;
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_config_file(*path)) {
        if (key == "out") {
          config_out = value;
        } else {
          injected.push_back("--" + key + "=" + value);
        }
      }
      const auto sub = std::find_if(args.begin(), args.end(),
                                    [&](const std::string& a) { return commands.count(a) > 0; });
      if (sub == args.end()) throw Failure("usage", "command", "no command given");
      effective = std::vector<std::string>(args.begin(), sub + 1);
      effective.insert(effective.end(), injected.begin(), injected.end());
      effective.insert(effective.end(), sub + 1, args.end());
      break;
    }

    std::vector<std::string> reversed(effective.rbegin(), effective.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& pe) {
      for (CLI::App* sub : app.get_subcommands()) {
        if (sub->get_help_ptr() != nullptr && sub->get_help_ptr()->count() > 0) {
          out << sub->help();
          return 0;
        }
      }
      throw Failure("usage", option_from_message(pe.what()), pe.what());
    }

    CLI::App* chosen = app.get_subcommands().front();
    Context ctx;
    ctx.app = chosen;
    ctx.name = chosen->get_name();
    ctx.out = &out;
    if (out_given) {
      ctx.out_dir = out_flag;
    } else if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') {
      ctx.out_dir = env;
    } else if (config_out) {
      ctx.out_dir = *config_out;
    } else {
      ctx.out_dir = "out";
    }
    return commands.at(ctx.name)(ctx);
  } catch (const Failure& f) {
    err << "error: " << f.kind << ": " << (f.field.empty() ? "-" : f.field) << ": "
        << one_line(f.what()) << "\n";
    return f.kind == "runtime" ? 1 : 2;
  } catch (const std::exception& ex) {
    err << "error: runtime: -: " << one_line(ex.what()) << "\n";
    return 1;
  }
}

}  // namespace tailorsum::cli
