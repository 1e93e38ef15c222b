#include <gtest/gtest.h>

#include "arcade/pipeline.hpp"
#include "test_support.hpp"

using namespace arcade;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.scale_target = 5;
  c.validation.beta = 1.2;
  c.train.epochs = 5;
  c.train.hidden = {16};
  c.eval.trials = 2;
  return c;
}

const std::vector<std::string> kOutputs{"scaled.txt",        "outcomes.tsv",       "autovalidate.json",
                                        "policy_scaled.txt", "policy_seed.txt",    "train_scaled.json",
                                        "train_seed.json",   "eval.json",          "pipeline.json",
                                        "candidates.txt",    "accepted.txt",       "decisions.jsonl"};

}  // namespace

TEST(Pipeline, MissingArtifactNamesFileAndProducer) {
  support::TempDir dir("pipe");
  const Workspace ws{dir.path()};
  try {
    run_detect_keyposes(small_config(), ws);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("seed_demo.txt"), std::string::npos) << msg;
    EXPECT_NE(msg.find("record"), std::string::npos) << msg;
  }
  run_record(small_config(), ws);
  EXPECT_THROW(run_autovalidate(small_config(), ws), MissingArtifactError);
  EXPECT_THROW(run_eval(small_config(), ws, {"scaled"}), MissingArtifactError);
  EXPECT_THROW(run_train(small_config(), ws, "scaled"), MissingArtifactError);
  EXPECT_THROW(run_train(small_config(), ws, "everything"), ConfigError);
}

TEST(Pipeline, ManualModeNeedsAcceptedSet) {
  support::TempDir dir("pipe");
  EXPECT_THROW(run_pipeline(small_config(), Workspace{dir.path()}, false), MissingArtifactError);
}

TEST(Pipeline, RecordWritesReplayableSeed) {
  support::TempDir dir("pipe");
  const auto s = run_record(small_config(), Workspace{dir.path()});
  EXPECT_LE(s["replay_tce"].get<double>(), 1e-3);
  const auto data = read_demonstrations(dir.path() / "seed_demo.txt");
  EXPECT_EQ(data.role, DatasetRole::seed);
  ASSERT_EQ(data.demos.size(), 1u);
}

TEST(Pipeline, AutoRunsAreByteIdentical) {
  support::TempDir a("pipe"), b("pipe");
  const auto sa = run_pipeline(small_config(), Workspace{a.path()}, true);
  const auto sb = run_pipeline(small_config(), Workspace{b.path()}, true);
  EXPECT_EQ(sa, sb);
  for (const auto& f : kOutputs) {
    ASSERT_TRUE(std::filesystem::exists(a.path() / f)) << f;
    EXPECT_EQ(support::slurp(a.path() / f), support::slurp(b.path() / f)) << f;
  }
  EXPECT_EQ(read_demonstrations(a.path() / "scaled.txt").demos.size(), 5u);
  EXPECT_EQ(sa["stages"].size(), 8u);
}

TEST(Pipeline, RerunningAStageIsByteIdentical) {
  support::TempDir dir("pipe");
  const Workspace ws{dir.path()};
  const auto c = small_config();
  run_pipeline(c, ws, true);
  const auto scaled = support::slurp(ws.scaled());
  const auto outcomes = support::slurp(ws.outcomes());
  const auto policy = support::slurp(ws.policy("scaled"));
  run_autovalidate(c, ws);
  run_train(c, ws, "scaled");
  EXPECT_EQ(support::slurp(ws.scaled()), scaled);
  EXPECT_EQ(support::slurp(ws.outcomes()), outcomes);
  EXPECT_EQ(support::slurp(ws.policy("scaled")), policy);
}

TEST(Pipeline, ReviewedSubsetFeedsValidation) {
  support::TempDir dir("pipe");
  const Workspace ws{dir.path()};
  const auto c = small_config();
  run_record(c, ws);
  run_generate(c, ws);
  {
    auto board = open_review_board(ws);
    const auto& demos = board.candidates().demos;
    ASSERT_EQ(demos.size(), 15u);
    for (std::size_t i = 0; i < demos.size(); ++i) {
      board.decide(demos[i].id, i < 10 ? Verdict::accept : Verdict::reject,
                   i < 10 ? std::nullopt : std::optional(RejectReason::preference));
    }
    board.finalize();
  }
  const auto accepted = support::slurp(ws.accepted());
  const auto candidates = support::slurp(ws.candidates());
  const auto s = run_autovalidate(c, ws);
  EXPECT_EQ(s["accepted_set_size"], 10);
  EXPECT_EQ(support::slurp(ws.accepted()), accepted);
  EXPECT_EQ(support::slurp(ws.candidates()), candidates);
  const auto summary = run_pipeline(c, ws, false);
  EXPECT_EQ(summary["stages"].size(), 6u);
  EXPECT_EQ(support::slurp(ws.accepted()), accepted);
}
