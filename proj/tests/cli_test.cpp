#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "protonet/cli.hpp"
#include "protonet/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "protonet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = protonet::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "protonet_cli_test";
    fs::remove_all(dir_);
    const auto r = cli({"synth", "--out-dir", dir_.string(), "--dim", "8", "--samples", "20"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static std::vector<std::string> data_flags() {
    return {"--embeddings", (dir_ / "embeddings.csv").string(), "--hierarchy", (dir_ / "hierarchy.tsv").string(),
            "--splits", (dir_ / "splits.json").string()};
  }

  static std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  const auto r = cli({"eval", "--bogus", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("usage"), std::string::npos) << r.err;
  EXPECT_EQ(cli(with({"eval", "--k", "x"}, data_flags())).code, 1);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(cli({"--help"}).code, 0); }

TEST_F(CliTest, ValidationErrorsExitTwo) {
  const auto missing = cli({"eval", "--embeddings", "/nope.csv", "--hierarchy", "/nope.tsv", "--splits", "/nope.json"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("validation"), std::string::npos) << missing.err;
  EXPECT_NE(missing.err.find("/nope.csv"), std::string::npos) << missing.err;

  const auto overlap = dir_ / "overlap.json";
  std::ofstream(overlap) << R"({"base": ["s00_l00"], "val": [], "novel": ["s00_l00"]})";
  const auto r = cli({"eval", "--embeddings", (dir_ / "embeddings.csv").string(), "--hierarchy",
                      (dir_ / "hierarchy.tsv").string(), "--splits", overlap.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("overlap-error"), std::string::npos) << r.err;

  const auto bad_c = cli(with({"eval", "--metric", "hyperbolic", "--c", "-1"}, data_flags()));
  EXPECT_EQ(bad_c.code, 1);
  EXPECT_NE(bad_c.err.find("invalid-value"), std::string::npos) << bad_c.err;
}

TEST_F(CliTest, NumericFailureExitsThree) {
  const auto r = cli({"gradcheck", "--fd-step", "0.5", "--k", "3", "--n", "2", "--n-query", "2"});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
  EXPECT_NE(r.out.find("\"passed\": false"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalIsDeterministicAndReproducibleFromReport) {
  const auto args = with({"eval", "--episodes", "50", "--seed", "3", "--metric", "hierarchical"}, data_flags());
  const auto a = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(cli(args).out, a.out);
  EXPECT_EQ(cli(with(args, {"--threads", "4"})).out, a.out);

  const auto report = dir_ / "report.json";
  std::ofstream(report) << a.out;
  const auto again = cli({"eval", "--config", report.string()});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(again.out, a.out);

  const auto doc = protonet::Json::parse(a.out);
  EXPECT_EQ(doc["definitions"]["ci_definition"], "1.96*std/sqrt(M)");
  EXPECT_EQ(doc["config"]["metric"], "hierarchical");
  EXPECT_EQ(doc["episodes"], 50);
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  const auto args = with({"eval", "--episodes", "30"}, data_flags());
  const auto base = cli(args);
  ::setenv("PROTONET_THREADS", "3", 1);
  const auto env = cli(args);
  ::unsetenv("PROTONET_THREADS");
  ASSERT_EQ(env.code, 0) << env.err;
  EXPECT_EQ(env.out, base.out);
}

TEST_F(CliTest, TrainThenEvalWithCheckpoint) {
  const auto ckpt = dir_ / "model.json";
  const auto t = cli(with({"train", "--epochs", "2", "--episodes-per-epoch", "10", "--val-episodes", "10", "--episodes",
                           "10", "--k", "3", "--n", "2", "--n-query", "3", "--out-dim", "4", "--checkpoint-out",
                           ckpt.string()},
                          data_flags()));
  ASSERT_EQ(t.code, 0) << t.err;
  const auto doc = protonet::Json::parse(t.out);
  EXPECT_EQ(doc["curve"].size(), 2u);
  ASSERT_TRUE(fs::exists(ckpt));
  const auto e = cli(with({"eval", "--episodes", "10", "--k", "3", "--model", ckpt.string()}, data_flags()));
  EXPECT_EQ(e.code, 0) << e.err;
}

TEST_F(CliTest, GradcheckAndSelftestPass) {
  for (const char* m : {"euclidean", "cosine", "hierarchical", "hyperbolic"}) {
    const auto r = cli(with({"gradcheck", "--metric", m, "--k", "3", "--n", "2", "--n-query", "2"}, data_flags()));
    EXPECT_EQ(r.code, 0) << m << "\n" << r.out << r.err;
  }
  const auto s = cli({"selftest"});
  EXPECT_EQ(s.code, 0) << s.out << s.err;
}
