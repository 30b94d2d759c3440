#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "tailorsum/random.hpp"
#include "tailorsum/tailoring.hpp"

namespace tailorsum {
namespace {

using Tokens = std::vector<std::string>;

TopicLexicon politics_lexicon() {
  TopicLexicon lex;
  lex.add("politics", "election", 1.0);
  lex.add("politics", "vote", 1.0);
  lex.add("sports", "goal", 2.0);
  return lex;
}

TEST(Lexicon, AddParseSerialize) {
  TopicLexicon lex = politics_lexicon();
  EXPECT_TRUE(lex.has_topic("sports"));
  EXPECT_FALSE(lex.has_topic("health"));
  EXPECT_EQ(lex.topics(), (Tokens{"politics", "sports"}));
  EXPECT_DOUBLE_EQ(lex.weight("sports", "goal"), 2.0);
  EXPECT_DOUBLE_EQ(lex.weight("sports", "vote"), 0.0);
  EXPECT_THROW(lex.add("x", "word", 0.0), std::invalid_argument);
  EXPECT_THROW(lex.add("x", "Word", 1.0), std::invalid_argument);
  const TopicLexicon back = TopicLexicon::parse(lex.serialize());
  EXPECT_EQ(back.serialize(), lex.serialize());
  EXPECT_THROW(TopicLexicon::parse("politics\telection\n"), std::runtime_error);
  EXPECT_THROW(TopicLexicon::parse("politics\telection\t-1\n"), std::runtime_error);
}

TEST(TopicScores, Examples) {
  const TopicLexicon lex = politics_lexicon();
  const TopicScores none = topic_scores(Tokens{"the", "cat"}, lex);
  EXPECT_EQ(none.size(), 2u);
  for (const auto& [t, s] : none) EXPECT_EQ(s, 0.0) << t;
  const TopicScores pol = topic_scores(Tokens{"election", "vote"}, lex);
  EXPECT_DOUBLE_EQ(pol.at("politics"), 1.0);
  EXPECT_DOUBLE_EQ(pol.at("sports"), 0.0);
  EXPECT_DOUBLE_EQ(topic_scores(Tokens{}, lex).at("politics"), 0.0);
  EXPECT_THROW(topic_scores(Tokens{"a"}, TopicLexicon{}), std::invalid_argument);
}

TEST(TopicScores, InvariantUnderDuplication) {
  const TopicLexicon lex = synthetic_lexicon();
  const auto topics = synthetic_topics();
  Rng rng = make_stream(3, "dup");
  for (int trial = 0; trial < 100; ++trial) {
    Tokens toks(1 + uniform_index(rng, 10));
    for (auto& w : toks) {
      const auto& t = topics[uniform_index(rng, topics.size())];
      w = uniform01(rng) < 0.2 ? "filler" : std::string(t.words[uniform_index(rng, t.words.size())]);
    }
    Tokens twice = toks;
    twice.insert(twice.end(), toks.begin(), toks.end());
    const TopicScores a = topic_scores(toks, lex);
    const TopicScores b = topic_scores(twice, lex);
    for (const auto& [t, s] : a) EXPECT_NEAR(s, b.at(t), 1e-15);
  }
}

TEST(TopicScores, RankingTiesByName) {
  const TopicScores s{{"b", 0.5}, {"a", 0.5}, {"c", 0.9}};
  EXPECT_EQ(rank_topics(s), (Tokens{"c", "a", "b"}));
}

TEST(Boost, GammaZeroIsIdentity) {
  const Tokens art{"election", "vote", ".", "goal", "."};
  const Vec b = select_boost_vector(art, "politics", politics_lexicon(), 5, 0.0);
  EXPECT_EQ(b, Vec(art.size(), 1.0));
}

TEST(Boost, OnlyTheTopicSentenceIsBoosted) {
  const Tokens art{"the", "goal", ".", "an", "election", "vote", "."};
  const Vec b = select_boost_vector(art, "politics", politics_lexicon(), 1, 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b[i], 1.0);
  for (std::size_t i = 3; i < 7; ++i) EXPECT_DOUBLE_EQ(b[i], 1.0 + 2.0 / 4.0);
}

TEST(Boost, SaturatedKAndNoTerminator) {
  const Tokens art{"vote", ".", "goal", ".", "x", "."};
  const Vec b = select_boost_vector(art, "politics", politics_lexicon(), 10, 1.0);
  for (double v : b) EXPECT_GE(v, 1.0);
  EXPECT_DOUBLE_EQ(b[0], 1.5);
  const Tokens flat{"vote", "x", "y", "election"};
  EXPECT_EQ(select_boost_vector(flat, "politics", politics_lexicon(), 1, 2.0), Vec(4, 2.0));
  EXPECT_THROW(select_boost_vector(flat, "politics", politics_lexicon(), 0, 1.0), std::invalid_argument);
  EXPECT_THROW(select_boost_vector(flat, "politics", politics_lexicon(), 1, -1.0), std::invalid_argument);
  EXPECT_THROW(select_boost_vector(flat, "cooking", politics_lexicon(), 1, 1.0), std::invalid_argument);
}

TEST(Boost, AtLeastOneAndOnlyInsideSelectedSentences) {
  const TopicLexicon lex = synthetic_lexicon();
  const Corpus c = gen_synthetic(SynthKind::two_topic, 50, 8);
  for (const auto& ex : c.examples) {
    const Vec b = select_boost_vector(ex.article, *ex.topic, lex, 1, 1.0);
    ASSERT_EQ(b.size(), ex.article.size());
    const auto sentences = split_sentences(ex.article);
    std::size_t pos = 0;
    std::size_t boosted_sentences = 0;
    for (const auto& s : sentences) {
      const bool any = std::any_of(b.begin() + pos, b.begin() + pos + s.size(), [](double v) { return v > 1.0; });
      const bool all_equal = std::all_of(b.begin() + pos, b.begin() + pos + s.size(),
                                         [&](double v) { return v == b[pos]; });
      EXPECT_TRUE(all_equal);
      boosted_sentences += any;
      pos += s.size();
    }
    EXPECT_LE(boosted_sentences, 1u);
    for (double v : b) EXPECT_GE(v, 1.0);
  }
}

TEST(ControlTokens, PrependAndStrip) {
  const Example e{{"a", "b", "c"}, {"a"}, "military"};
  const ControlToken t = topic_token("military");
  EXPECT_EQ(t.surface, "<topic:military>");
  const Example tagged = prepend_control_token(e, t);
  EXPECT_EQ(tagged.article.size(), 4u);
  EXPECT_EQ(tagged.article[0], "<topic:military>");
  EXPECT_EQ(tagged.summary, e.summary);
  EXPECT_EQ(strip_control_token(tagged), e);
  EXPECT_THROW(strip_control_token(e), std::invalid_argument);
  EXPECT_EQ(readability_token(true).surface, "<readable>");
  EXPECT_EQ(readability_token(false).surface, "<not-readable>");
  EXPECT_EQ(simplicity_token(true).surface, "<simple>");
  EXPECT_EQ(simplicity_token(false).surface, "<not-simple>");
  EXPECT_EQ(style_control_surfaces().size(), 4u);
  const Tokens topics{"a", "b"};
  EXPECT_EQ(topic_control_surfaces(topics), (Tokens{"<topic:a>", "<topic:b>"}));
}

TEST(MedianBins, Examples) {
  const MedianBins odd = median_bins(Vec{3, 1, 2}, ControlKind::readability);
  EXPECT_DOUBLE_EQ(odd.threshold, 2.0);
  EXPECT_EQ(odd.label(2.0).surface, "<readable>");
  EXPECT_EQ(odd.label(1.9).surface, "<not-readable>");
  EXPECT_DOUBLE_EQ(median_bins(Vec{1, 3}, ControlKind::simplicity).threshold, 2.0);
  EXPECT_EQ(median_bins(Vec{1, 3}, ControlKind::simplicity).label(3).surface, "<simple>");
  EXPECT_THROW(median_bins(Vec{}, ControlKind::readability), std::invalid_argument);
  EXPECT_THROW(median_bins(Vec{1}, ControlKind::topic), std::invalid_argument);
}

TEST(MedianBins, BalancedOnDistinctValues) {
  Rng rng = make_stream(5, "median");
  for (std::size_t n = 1; n <= 60; ++n) {
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) + uniform01(rng) * 0.5;
    shuffle(v.begin(), v.end(), rng);
    const MedianBins bins = median_bins(v, ControlKind::readability);
    const auto pos = static_cast<std::size_t>(std::count_if(
        v.begin(), v.end(), [&](double x) { return bins.label(x) == bins.positive; }));
    EXPECT_TRUE(pos == n / 2 || pos == (n + 1) / 2) << n << " " << pos;
  }
}

TEST(Voting, Examples) {
  // ids: 4 = injured, 5 = hurt
  const Vec dist{0.0, 0.1, 0.0, 0.4, 0.4, 0.1};
  const std::vector<VotingPair> pairs{{4, 5}};
  const Vec out = voting_adjust(dist, pairs, 0.5);
  EXPECT_NEAR(out[4], 0.2, 1e-15);
  EXPECT_NEAR(out[5], 0.3, 1e-15);
  EXPECT_EQ(voting_adjust(dist, pairs, 0.0), dist);
  EXPECT_EQ(voting_adjust(dist, {}, 0.7), dist);
  const std::vector<VotingPair> bad{{4, 9}};
  EXPECT_THROW(voting_adjust(dist, bad, 0.5), std::invalid_argument);
  EXPECT_THROW(voting_adjust(dist, pairs, 1.5), std::invalid_argument);
}

TEST(Voting, ConservesMassAndStaysNonNegative) {
  Rng rng = make_stream(6, "voting");
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 20);
    Vec raw(n);
    for (double& x : raw) x = uniform(rng, -4, 4);
    const Vec dist = softmax(raw);
    std::vector<VotingPair> pairs(uniform_index(rng, 2 * n));
    for (auto& p : pairs) p = {uniform_index(rng, n), uniform_index(rng, n)};
    const double lambda = uniform01(rng);
    const Vec out = voting_adjust(dist, pairs, lambda);
    EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), 1.0, 1e-9);
    for (double x : out) EXPECT_GE(x, 0.0);
  }
}

TEST(Voting, PairsFromTable) {
  Vocabulary v;
  v.add("injured");
  v.add("hurt");
  v.add("purchase");
  v.add("buy");
  v.add("big");
  SynonymTable table = SynonymTable::parse("injured\thurt\npurchase\tbuy\nbig\tenormous\nhurt\tinjured\n");
  EXPECT_EQ(table.pairs.size(), 4u);
  const auto pairs = voting_pairs(table, v, fewer_syllables());
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].from, *v.find("injured"));
  EXPECT_EQ(pairs[0].to, *v.find("hurt"));
  EXPECT_EQ(pairs[1].from, *v.find("purchase"));

  FrequencyTable freq;
  freq.set("injured", 10);
  freq.set("hurt", 50);
  const SimplerFn by_freq = higher_frequency(freq);
  EXPECT_TRUE(by_freq("hurt", "injured"));
  EXPECT_FALSE(by_freq("injured", "hurt"));
  EXPECT_EQ(SynonymTable::parse(table.serialize()).pairs, table.pairs);
}

TEST(Reward, ReadabilityDelegatesToFlesch) {
  const RewardFn r = make_reward(RewardKind::readability);
  const Tokens t{"the", "cat", "sat", "on", "the", "mat", "."};
  EXPECT_DOUBLE_EQ(r.evaluate(t), flesch_score(t));
  EXPECT_DOUBLE_EQ(r.evaluate(Tokens{".", ","}), 0.0);
}

TEST(Reward, SimplicityWithUniformTable) {
  FrequencyTable t;
  for (const char* w : {"a", "b", "c"}) t.set(w, 1000);
  const RewardFn r = make_reward(RewardKind::simplicity, &t);
  EXPECT_DOUBLE_EQ(r.evaluate(Tokens{"a", "c", "b", "a"}), 1.0);
  EXPECT_THROW(make_reward(RewardKind::simplicity), std::invalid_argument);
}

TEST(Reward, BoundToIdsUsesSurfaceForms) {
  Vocabulary v;
  v.add("the");
  v.add("cat");
  EncodedExample ex;
  ex.oov_words = {"sat"};
  const SequenceReward r = bind_reward(make_reward(RewardKind::readability), v);
  const std::vector<TokenId> ids{*v.find("the"), *v.find("cat"), v.size(), kStopId};
  EXPECT_DOUBLE_EQ(r(ex, ids), flesch_score(Tokens{"the", "cat", "sat"}));
}

TEST(SyntheticResources, CoverTheGenerators) {
  const TopicLexicon lex = synthetic_lexicon();
  for (const auto& t : synthetic_topics()) {
    ASSERT_TRUE(lex.has_topic(t.name));
    for (auto w : t.words) EXPECT_GT(lex.weight(t.name, w), 0.0);
  }
  const FrequencyTable f = synthetic_frequency_table();
  for (auto w : synthetic_copy_words()) EXPECT_GT(f.frequency(w), 0.0) << w;
  EXPECT_FALSE(synthetic_synonym_table().pairs.empty());
}

}  // namespace
}  // namespace tailorsum
