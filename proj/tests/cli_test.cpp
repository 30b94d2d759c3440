#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace tailorsum {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("tailorsum_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv(cli::kOutEnv);
  }
  void TearDown() override {
    unsetenv(cli::kOutEnv);
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, SynthIsDeterministic) {
  ASSERT_EQ(run({"synth", "--kind", "two_topic", "--size", "6", "--seed", "3", "--out", path("a")}).code, 0);
  ASSERT_EQ(run({"synth", "--kind", "two_topic", "--size", "6", "--seed", "3", "--out", path("b")}).code, 0);
  ASSERT_EQ(run({"synth", "--kind", "two_topic", "--size", "6", "--seed", "4", "--out", path("c")}).code, 0);
  const std::string a = slurp(path("a/corpus.jsonl"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("b/corpus.jsonl")));
  EXPECT_NE(a, slurp(path("c/corpus.jsonl")));
  EXPECT_TRUE(fs::exists(path("a/lexicon.tsv")));
  EXPECT_TRUE(fs::exists(path("a/synth.cfg")));
}

TEST_F(CliTest, MissingSeedIsAUsageError) {
  const Outcome r = run({"synth", "--kind", "copy", "--size", "3", "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: usage: seed: ", 0), 0u) << r.err;
  EXPECT_FALSE(fs::exists(path("o")));
}

TEST_F(CliTest, InvalidValueWritesNothing) {
  const Outcome r = run({"synth", "--kind", "bogus", "--size", "3", "--seed", "1", "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kind"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("o")));
}

TEST_F(CliTest, MissingInputFileIsReported) {
  const Outcome r = run({"build-vocab", "--corpus", path("nope.jsonl"), "--out", path("o")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("corpus"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("o")));
}

TEST_F(CliTest, ConfigFileValuesYieldToFlags) {
  std::ofstream(path("run.cfg")) << "# settings\nkind=copy\nsize=5\nseed=2\nout=" << path("from_cfg") << "\n";
  ASSERT_EQ(run({"synth", "--config", path("run.cfg")}).code, 0);
  EXPECT_TRUE(fs::exists(path("from_cfg/corpus.jsonl")));

  ASSERT_EQ(run({"synth", "--config", path("run.cfg"), "--size", "7", "--out", path("flag")}).code, 0);
  const std::string cfg = slurp(path("flag/synth.cfg"));
  EXPECT_NE(cfg.find("\nsize=7\n"), std::string::npos) << cfg;
  EXPECT_NE(cfg.find("\nseed=2\n"), std::string::npos) << cfg;
  const std::string corpus = slurp(path("flag/corpus.jsonl"));
  EXPECT_EQ(std::count(corpus.begin(), corpus.end(), '\n'), 7);
}

TEST_F(CliTest, OutputDirectoryPrecedence) {
  std::ofstream(path("run.cfg")) << "kind=copy\nsize=2\nseed=2\nout=" << path("cfg_out") << "\n";
  setenv(cli::kOutEnv, path("env_out").c_str(), 1);
  ASSERT_EQ(run({"synth", "--config", path("run.cfg")}).code, 0);
  EXPECT_TRUE(fs::exists(path("env_out/corpus.jsonl")));
  EXPECT_FALSE(fs::exists(path("cfg_out")));
  ASSERT_EQ(run({"synth", "--config", path("run.cfg"), "--out", path("flag_out")}).code, 0);
  EXPECT_TRUE(fs::exists(path("flag_out/corpus.jsonl")));
}

TEST_F(CliTest, GradcheckPassesOnTinyDims) {
  const Outcome r = run({"gradcheck", "--seed", "7", "--dims", "tiny", "--out", path("g")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.rfind("PASS", 0), 0u) << r.out;
}

TEST_F(CliTest, EvalScoresText) {
  const Outcome r = run({"eval", "--metric", "flesch", "--text", "the cat sat on the mat .", "--out", path("e")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "flesch\t116.145\n");
  EXPECT_TRUE(fs::exists(path("e/report.tsv")));
  EXPECT_EQ(run({"eval", "--metric", "nonsense", "--text", "a", "--out", path("x")}).code, 2);
  EXPECT_EQ(run({"eval", "--metric", "flesch", "--out", path("x")}).code, 2);
  EXPECT_FALSE(fs::exists(path("x")));
}

TEST_F(CliTest, SmallPipelineRuns) {
  ASSERT_EQ(run({"synth", "--kind", "two_topic", "--size", "10", "--seed", "5", "--out", path("d")}).code, 0);
  ASSERT_EQ(run({"build-vocab", "--corpus", path("d/corpus.jsonl"), "--topic-controls", "--out", path("v")}).code, 0);
  const Outcome t = run({"train", "--corpus", path("d/corpus.jsonl"), "--vocab", path("v/vocab.tsv"), "--seed", "5",
                     "--embed", "6", "--hidden", "8", "--attention", "8", "--pretrain-iterations", "30",
                     "--control", "topic", "--out", path("t")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(path("t/checkpoint.txt")));
  EXPECT_TRUE(fs::exists(path("t/loss_curve.tsv")));
  const Outcome d = run({"decode", "--checkpoint", path("t/checkpoint.txt"), "--vocab", path("v/vocab.tsv"),
                     "--corpus", path("d/corpus.jsonl"), "--beam", "2", "--max-length", "8",
                     "--topic-token", "--limit", "4", "--out", path("dec")});
  ASSERT_EQ(d.code, 0) << d.err;
  const std::string decoded = slurp(path("dec/decoded.jsonl"));
  EXPECT_EQ(std::count(decoded.begin(), decoded.end(), '\n'), 4);
  const Outcome e = run({"eval", "--metric", "rouge-1,top-1", "--decoded", path("dec/decoded.jsonl"),
                     "--corpus", path("d/corpus.jsonl"), "--lexicon", path("d/lexicon.tsv"),
                     "--out", path("ev")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(e.out.rfind("rouge-1\t", 0), 0u) << e.out;
}

}  // namespace
}  // namespace tailorsum
