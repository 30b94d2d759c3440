// Acceptance runner: one line per criterion. With no arguments every
// criterion runs; otherwise only the numbers given.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "tailorsum/decode.hpp"
#include "tailorsum/gradcheck.hpp"
#include "tailorsum/metrics.hpp"
#include "tailorsum/training.hpp"

using namespace tailorsum;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

struct Trained {
  Vocabulary vocab;
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> test;
  std::vector<Example> test_examples;
  ModelParams params;
  TrainState state;
};

Trained train_copy(std::size_t n_train, double oov_fraction, std::size_t vocab_cap,
                   std::size_t iterations) {
  SynthOptions opt;
  opt.oov_fraction = oov_fraction;
  const Corpus c = gen_synthetic(SynthKind::copy, 500, 1, opt);
  Corpus train_c;
  train_c.examples.assign(c.examples.begin(), c.examples.begin() + static_cast<std::ptrdiff_t>(n_train));
  Trained t;
  t.vocab = build_vocab(train_c, vocab_cap);
  for (std::size_t i = 0; i < c.examples.size(); ++i) {
    if (i < n_train) {
      t.train.push_back(encode_example(t.vocab, c.examples[i]));
    } else {
      t.test.push_back(encode_example(t.vocab, c.examples[i]));
      t.test_examples.push_back(c.examples[i]);
    }
  }
  Rng init = make_stream(1, "init");
  TrainConfig cfg;
  cfg.pretrain_iterations = iterations;
  cfg.seed = 1;
  TrainResult r = train(TrainState{ModelParams::initialize({t.vocab.size(), 16, 32, 32}, init), {}},
                        t.train, cfg, {}, banned_ids(t.vocab));
  t.state = r.state;
  t.params = r.state.params;
  return t;
}

Hypothesis greedy(const ModelParams& p, const EncodedExample& ex, const Vocabulary& v, std::size_t max_length) {
  const PointerGeneratorStep m(p, ex.source);
  DecodeConfig dc;
  dc.max_length = max_length;
  return greedy_decode(m, dc, banned_ids(v));
}

// ---------------------------------------------------------------- 1

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelGradCheck g = run_gradcheck({20, 8, 8, 8}, 7, 1e-5, 1e-4);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {g.report.pass && secs <= 300.0,
          "max_rel_error=" + fmt(g.report.max_error) + " params=" + std::to_string(g.analytic.size()) +
              " seconds=" + fmt(secs)};
}

// ---------------------------------------------------------------- 2, 3

Verdict copy_task() {
  const Trained t = train_copy(450, 0.0, 1000, 20000);
  const double nll = mean_token_nll(t.params, t.train);
  std::size_t exact = 0;
  for (const auto& ex : t.test) exact += greedy(t.params, ex, t.vocab, ex.source.size() + 5).tokens == ex.target;
  const double rate = static_cast<double>(exact) / static_cast<double>(t.test.size());
  return {nll < 0.1 && rate >= 0.95,
          "train_nll=" + fmt(nll) + " exact=" + std::to_string(exact) + "/" + std::to_string(t.test.size())};
}

Verdict pointer() {
  // Cap the vocabulary so every out-of-vocabulary word is only reachable by copying.
  const Trained t = train_copy(450, 0.3, 34, 20000);
  std::size_t exact = 0;
  std::size_t copies = 0;
  double p_gen = 0.0;
  for (const auto& ex : t.test) {
    const Hypothesis h = greedy(t.params, ex, t.vocab, ex.source.size() + 5);
    exact += h.tokens == ex.target;
    for (std::size_t i = 0; i < std::min(h.tokens.size(), ex.target.size()); ++i) {
      if (ex.target[i] >= t.vocab.size()) {
        p_gen += h.p_gen_trace[i];
        ++copies;
      }
    }
  }
  const double rate = static_cast<double>(exact) / static_cast<double>(t.test.size());
  const double mean_p_gen = copies ? p_gen / static_cast<double>(copies) : 1.0;
  return {rate >= 0.9 && copies > 0 && mean_p_gen < 0.3,
          "exact=" + std::to_string(exact) + "/" + std::to_string(t.test.size()) +
              " copy_positions=" + std::to_string(copies) + " mean_p_gen=" + fmt(mean_p_gen)};
}

// ---------------------------------------------------------------- 4, 5

constexpr const char* kNeutral = "<neutral>";

struct TopicSetup {
  Corpus corpus;
  std::vector<Example> train;
  std::vector<Example> test;
  TopicLexicon lexicon = synthetic_lexicon();
};

TopicSetup topic_setup() {
  TopicSetup s;
  s.corpus = gen_synthetic(SynthKind::two_topic, 500, 1);
  for (std::size_t i = 0; i < s.corpus.examples.size(); ++i) {
    (i < 800 ? s.train : s.test).push_back(s.corpus.examples[i]);
  }
  return s;
}

std::pair<ModelParams, Vocabulary> train_topic_model(const TopicSetup& s, bool tokens, bool boost) {
  Corpus c;
  for (const auto& ex : s.train) c.examples.push_back(tokens ? prepend_control_token(ex, topic_token(*ex.topic)) : ex);
  std::vector<std::string> controls;
  if (tokens) {
    controls = topic_control_surfaces(s.lexicon.topics());
    controls.push_back(kNeutral);
  }
  Vocabulary v = build_vocab(c, 1000, controls);
  std::vector<EncodedExample> enc;
  for (std::size_t i = 0; i < c.examples.size(); ++i) {
    EncodedExample x = encode_example(v, c.examples[i]);
    if (boost) x.boost = select_boost_vector(s.train[i].article, *s.train[i].topic, s.lexicon, 1, 1.0);
    enc.push_back(std::move(x));
  }
  Rng init = make_stream(1, "init");
  TrainConfig cfg;
  cfg.pretrain_iterations = 20000;
  cfg.seed = 1;
  TrainResult r = train(TrainState{ModelParams::initialize({v.size(), 16, 32, 32}, init), {}}, enc, cfg, {},
                        banned_ids(v));
  return {std::move(r.state.params), std::move(v)};
}

bool top1(const DecodeResult& r, const std::string& topic, const TopicLexicon& lex) {
  return rank_topics(topic_scores(r.words, lex)).front() == topic;
}

// Neutral-token Top-1 of the token-trained model, shared by 4 and 5.
struct TokenRun {
  double token_top1 = 0;
  double neutral_top1 = 0;
  double decode_only_mass_wins = 0;
};

// Attention mass on boosted article positions, summed over decode steps.
double boosted_mass(const DecodeResult& r, const Vec& boost, std::size_t offset) {
  double m = 0;
  for (const auto& row : r.attention_trace) {
    for (std::size_t i = 0; i < boost.size(); ++i) {
      if (boost[i] > 1.0) m += row[i + offset];
    }
  }
  return m;
}

TokenRun token_run(const TopicSetup& s) {
  const auto [params, vocab] = train_topic_model(s, true, false);
  TokenRun out;
  for (const auto& ex : s.test) {
    DecodeConfig dc;
    dc.max_length = 12;
    dc.control = topic_token(*ex.topic);
    out.token_top1 += top1(decode_article(params, vocab, ex.article, dc), *ex.topic, s.lexicon);
    dc.control = ControlToken{kNeutral, ControlKind::topic};
    const DecodeResult neutral = decode_article(params, vocab, ex.article, dc);
    out.neutral_top1 += top1(neutral, *ex.topic, s.lexicon);
    dc.boost = select_boost_vector(ex.article, *ex.topic, s.lexicon, 1, 1.0);
    const DecodeResult boosted = decode_article(params, vocab, ex.article, dc);
    out.decode_only_mass_wins += boosted_mass(boosted, *dc.boost, 1) > boosted_mass(neutral, *dc.boost, 1);
  }
  const double n = static_cast<double>(s.test.size());
  out.token_top1 /= n;
  out.neutral_top1 /= n;
  out.decode_only_mass_wins /= n;
  return out;
}

Verdict token_control() {
  const TopicSetup s = topic_setup();
  const TokenRun r = token_run(s);
  return {r.token_top1 >= 0.9 && r.neutral_top1 <= 0.6,
          "top1_token=" + fmt(r.token_top1) + " top1_neutral=" + fmt(r.neutral_top1) +
              " test_articles=" + std::to_string(s.test.size())};
}

Verdict attention_boost() {
  const TopicSetup s = topic_setup();
  const TokenRun baseline = token_run(s);
  const auto [params, vocab] = train_topic_model(s, false, true);
  double wins = 0, boost_top1 = 0, plain_top1 = 0;
  for (const auto& ex : s.test) {
    DecodeConfig dc;
    dc.max_length = 12;
    const DecodeResult plain = decode_article(params, vocab, ex.article, dc);
    dc.boost = select_boost_vector(ex.article, *ex.topic, s.lexicon, 1, 1.0);
    const DecodeResult boosted = decode_article(params, vocab, ex.article, dc);
    wins += boosted_mass(boosted, *dc.boost, 0) > boosted_mass(plain, *dc.boost, 0);
    boost_top1 += top1(boosted, *ex.topic, s.lexicon);
    plain_top1 += top1(plain, *ex.topic, s.lexicon);
  }
  const double n = static_cast<double>(s.test.size());
  wins /= n;
  boost_top1 /= n;
  plain_top1 /= n;
  return {wins >= 0.9 && boost_top1 >= baseline.neutral_top1,
          "mass_wins=" + fmt(wins) + " top1_boost=" + fmt(boost_top1) + " top1_neutral_token=" +
              fmt(baseline.neutral_top1) + " (info: unboosted=" + fmt(plain_top1) +
              " decode_only_boost_mass_wins_on_token_model=" + fmt(baseline.decode_only_mass_wins) + ")"};
}

// ---------------------------------------------------------------- 6

Verdict scst() {
  Trained t = train_copy(400, 0.0, 1000, 20000);
  const SequenceReward reward = bind_reward(make_reward(RewardKind::readability), t.vocab);
  auto flesch = [&](const ModelParams& p) {
    std::vector<double> out;
    for (const auto& ex : t.test) out.push_back(reward(ex, greedy(p, ex, t.vocab, 20).tokens));
    return out;
  };
  const std::vector<double> before = flesch(t.params);
  const double nll_before = mean_token_nll(t.params, t.test);
  TrainConfig cfg;
  cfg.rl_iterations = 2000;
  cfg.alpha = 0.9;
  cfg.max_decode_length = 20;
  cfg.seed = 1;
  const TrainResult r = train(t.state, t.train, cfg, reward, banned_ids(t.vocab));
  const std::vector<double> after = flesch(r.state.params);
  const double nll_after = mean_token_nll(r.state.params, t.test);
  double diff = 0, mb = 0, ma = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    diff += after[i] - before[i];
    mb += before[i];
    ma += after[i];
  }
  const double n = static_cast<double>(before.size());
  const double ratio = nll_after / nll_before;
  return {!r.diverged && n >= 50 && diff / n > 0 && nll_after <= 1.5 * nll_before,
          "articles=" + std::to_string(before.size()) + " flesch " + fmt(mb / n) + " -> " + fmt(ma / n) +
              " paired_diff=" + fmt(diff / n) + " nll " + fmt(nll_before) + " -> " + fmt(nll_after) +
              " ratio=" + fmt(ratio) + (r.diverged ? " diverged" : "")};
}

// ---------------------------------------------------------------- 7

Verdict voting() {
  const Trained t = train_copy(400, 0.0, 1000, 20000);
  const FrequencyTable freq = synthetic_frequency_table();
  const auto pairs = voting_pairs(synthetic_synonym_table(), t.vocab, higher_frequency(freq));
  double s0 = 0, s1 = 0;
  for (const auto& ex : t.test_examples) {
    DecodeConfig dc;
    dc.max_length = 20;
    dc.voting = VotingConfig{pairs, 0.0};
    const DecodeResult r0 = decode_article(t.params, t.vocab, ex.article, dc);
    dc.voting->lambda = 0.5;
    const DecodeResult r1 = decode_article(t.params, t.vocab, ex.article, dc);
    s0 += r0.words.empty() ? 0.0 : simplicity_score(r0.words, freq);
    s1 += r1.words.empty() ? 0.0 : simplicity_score(r1.words, freq);
  }
  const double n = static_cast<double>(t.test_examples.size());
  return {s1 > s0, "pairs=" + std::to_string(pairs.size()) + " simplicity lambda0=" + fmt(s0 / n) +
                       " lambda0.5=" + fmt(s1 / n)};
}

// ---------------------------------------------------------------- 8

std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << a.size()); ++mask) {
    std::size_t j = 0, len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) {
        ok = false;
      } else {
        ++j;
        ++len;
      }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

Verdict metric_oracles() {
  const double hand = flesch_score(std::string_view("the cat sat on the mat ."));
  // The worked example is given to three decimals.
  const bool hand_ok = std::llround(hand * 1000.0) == 116145;

  const std::string pgen =
      "wayne community college , north carolina , may have been a hate crime , authorities say . "
      "investigators are looking into the possibility , said goldsboro police sgt. jeremy sutton . "
      "investigators are looking into the possibility , said goldsboro police sgt. jeremy sutton .";
  const std::string rl =
      "the killing of an employee at wayne community college may have been a hate crime . "
      "the suspect , kenneth morgan stancil iii , worked with lane as part of a work-study program . "
      "he has no previous criminal record , authorities say .";
  const double pgen_score = flesch_score(split_ws(pgen));
  const double rl_score = flesch_score(split_ws(rl));
  const bool pgen_ok = std::abs(pgen_score - 8.23) <= 3.0;
  const bool rl_ok = std::abs(rl_score - 50.12) <= 3.0;

  std::vector<std::vector<std::string>> seqs{{}};
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    if (seqs[k].size() == 6) continue;
    for (const char* s : {"a", "b", "c"}) {
      auto next = seqs[k];
      next.push_back(s);
      seqs.push_back(std::move(next));
    }
  }
  std::size_t lcs_bad = 0;
  for (const auto& a : seqs) {
    for (const auto& b : seqs) {
      const double l = static_cast<double>(brute_lcs(a, b));
      double expect = 0;
      if (l > 0) {
        const double p = l / static_cast<double>(a.size());
        const double r = l / static_cast<double>(b.size());
        expect = 2 * p * r / (p + r);
      }
      lcs_bad += std::abs(rouge_l_f1(a, b) - expect) > 1e-12;
    }
  }

  Rng rng = make_stream(8, "simplicity");
  FrequencyTable table;
  std::vector<std::string> words;
  for (int i = 0; i < 50; ++i) {
    words.push_back("w" + std::to_string(i));
    if (i % 5 != 0) table.set(words.back(), uniform(rng, 0.0, 100000.0));
  }
  double simp_err = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> toks(1 + uniform_index(rng, 30));
    for (auto& w : toks) w = words[uniform_index(rng, words.size())];
    double sum = 0;
    for (const auto& w : toks) sum += table.frequency(w) / 1000.0;
    simp_err = std::max(simp_err, std::abs(simplicity_score(toks, table) - sum / static_cast<double>(toks.size())));
  }
  const bool simp_ok = simp_err <= 1e-12;

  return {hand_ok && pgen_ok && rl_ok && lcs_bad == 0 && simp_ok,
          "hand=" + std::to_string(hand) + (hand_ok ? " ok" : " BAD") + " pgen=" + fmt(pgen_score) +
              (pgen_ok ? " ok" : " BAD(8.23+-3)") + " rl=" + fmt(rl_score) + (rl_ok ? " ok" : " BAD(50.12+-3)") +
              " lcs_pairs=" + std::to_string(seqs.size() * seqs.size()) + " mismatches=" + std::to_string(lcs_bad) +
              " simplicity_max_err=" + fmt(simp_err)};
}

// ---------------------------------------------------------------- 9

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code == 0;
}

bool pipeline(const fs::path& dir) {
  const std::string d = dir.string();
  return run_cli({"synth", "--kind", "two_topic", "--size", "20", "--seed", "3", "--out", d + "/synth"}) &&
         run_cli({"build-vocab", "--corpus", d + "/synth/corpus.jsonl", "--topic-controls", "--out", d + "/vocab"}) &&
         run_cli({"train", "--corpus", d + "/synth/corpus.jsonl", "--vocab", d + "/vocab/vocab.tsv", "--seed", "3",
                  "--embed", "8", "--hidden", "12", "--attention", "12", "--pretrain-iterations", "200",
                  "--rl-iterations", "20", "--reward", "readability", "--max-decode-length", "12", "--control", "topic", "--out",
                  d + "/train"}) &&
         run_cli({"decode", "--checkpoint", d + "/train/checkpoint.txt", "--vocab", d + "/vocab/vocab.tsv",
                  "--corpus", d + "/synth/corpus.jsonl", "--beam", "3", "--max-length", "12", "--topic-token",
                  "--out", d + "/decode"}) &&
         run_cli({"eval", "--metric", "flesch,rouge-1,rouge-l,top-1", "--decoded", d + "/decode/decoded.jsonl",
                  "--corpus", d + "/synth/corpus.jsonl", "--lexicon", d + "/synth/lexicon.tsv", "--out",
                  d + "/eval"});
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "tailorsum_acceptance_determinism";
  fs::remove_all(root);
  const bool ran = pipeline(root / "a") && pipeline(root / "b");
  if (!ran) return {false, "pipeline failed"};
  std::vector<std::string> differing;
  for (const char* f : {"synth/corpus.jsonl", "train/checkpoint.txt", "train/loss_curve.tsv",
                        "decode/decoded.jsonl", "eval/report.tsv"}) {
    const std::string a = slurp(root / "a" / f);
    if (a.empty() || a != slurp(root / "b" / f)) differing.emplace_back(f);
  }
  fs::remove_all(root);
  std::string detail = differing.empty() ? "checkpoint and report byte-identical" : "differ:";
  for (const auto& f : differing) detail += " " + f;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, gradients}, {2, copy_task}, {3, pointer},        {4, token_control}, {5, attention_boost},
      {6, scst},      {7, voting},    {8, metric_oracles}, {9, determinism}};
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " " << v.detail << " ["
              << fmt(secs) << "s]" << std::endl;
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
