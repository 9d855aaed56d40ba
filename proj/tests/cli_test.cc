#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "test_util.h"

namespace probe {
namespace {

using testing::TempDir;

int run(const std::string& args) {
  const auto status = std::system((std::string(PROBE_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const TempDir& dir, nlohmann::json extra) {
  nlohmann::json j = {{"datasets", {(dir / "fx.jsonl").string()}},
                      {"cache_dir", (dir / "cache").string()},
                      {"output_dir", (dir / "out").string()}};
  j.update(extra);
  const auto path = dir / "cfg.json";
  testing::write_file(path, j.dump());
  return path.string();
}

TEST(Cli, FixtureValidateFilter) {
  TempDir dir;
  testing::write_file(dir / "spec.json", R"({"lexicon":"builtin","per_cell":2})");
  EXPECT_EQ(run("fixture --spec " + (dir / "spec.json").string() + " --seed 7 --out " + (dir / "fx.jsonl").string()), 0);
  EXPECT_EQ(load_dataset((dir / "fx.jsonl").string()).items.size(), 16u);
  EXPECT_EQ(run("validate " + (dir / "fx.jsonl").string()), 0);
  testing::write_file(dir / "vocab.txt", "alto\nalta\n");
  EXPECT_EQ(run("filter " + (dir / "fx.jsonl").string() + " --vocab " + (dir / "vocab.txt").string() + " --out " +
                (dir / "small.jsonl").string()),
            0);
  for (const auto& it : load_dataset((dir / "small.jsonl").string()).items) EXPECT_EQ(it.correct_form.substr(0, 3), "alt");
  testing::write_file(dir / "bad.jsonl", "{oops\n");
  EXPECT_EQ(run("validate " + (dir / "bad.jsonl").string()), 1);
  EXPECT_NE(run("nonsense"), 0);
}

TEST(Cli, ScoreAndReport) {
  TempDir dir;
  testing::write_file(dir / "fx.jsonl", serialize_dataset(testing::fixture8()));
  const auto cfg = config(dir, {{"scorers", {testing::table_scorer("oracle", 0.9, 0.1).to_json()}}});
  EXPECT_EQ(run("score --config " + cfg), 0);
  EXPECT_EQ(run("report --results " + (dir / "out").string()), 0);
  for (const auto* f : {"overall__both.csv", "by_condition__both.csv", "metric_comparison__both.csv",
                        "attraction__both.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "reports" / f)) << f;
  }
  EXPECT_EQ(run("report --results " + (dir / "out").string() + " --kind overall --format svg --metric pd"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "reports" / "overall__pd.svg"));
  EXPECT_EQ(run("report --results " + (dir / "out").string() + " --kind learning_curve"), 1);
}

TEST(Cli, PartialSweepExitCode) {
  TempDir dir;
  const auto d = testing::fixture8();
  testing::write_file(dir / "fx.jsonl", serialize_dataset(d));
  std::string table;
  for (const auto& it : d.items) table += nlohmann::json{{"id", it.id}, {"p_correct", 0.6}, {"p_wrong", 0.2}}.dump() + "\n";
  testing::write_file(dir / "ck_25000.jsonl", table);
  const nlohmann::json family = {
      {"base", {{"scorer_id", "b"}, {"kind", "table"}, {"params", {{"file", (dir / "ck_{steps}.jsonl").string()}}}}},
      {"steps", {25000, 50000}}};
  EXPECT_EQ(run("sweep --config " + config(dir, {{"checkpoint_family", family}})), 3);
  EXPECT_EQ(run("report --results " + (dir / "out").string() + " --kind learning_curve --baseline chance=0.5"), 0);
}

TEST(Cli, BackendFaultExitCode) {
  TempDir dir;
  testing::write_file(dir / "fx.jsonl", serialize_dataset(testing::fixture8()));
  ScorerDescriptor ext;
  ext.scorer_id = "ext";
  ext.kind = ScorerKind::kExternal;
  ext.command = std::string(FAKE_SCORER_PATH) + " --malformed";
  EXPECT_EQ(run("score --config " + config(dir, {{"scorers", {ext.to_json()}}})), 2);
}

}  // namespace
}  // namespace probe
