#include <gtest/gtest.h>

#include "probe/error.h"
#include "probe/runner.h"
#include "test_util.h"

namespace probe {
namespace {

using testing::CallLog;
using testing::TempDir;

std::vector<std::string> result_files() {
  return {"rows.csv", "summaries.csv", "manifest.json"};
}

ExperimentConfig base_config(const TempDir& dir, const Dataset& d) {
  ExperimentConfig cfg;
  cfg.datasets = {testing::write_dataset(dir.path(), d)};
  cfg.cache_dir = dir / "cache";
  cfg.output_dir = dir / "out";
  return cfg;
}

// Writes one table file per step; item i at step index k gets
// p_correct = 0.2 + 0.02 k + 0.004 i, p_wrong = 0.35.
CheckpointFamily improving_family(const TempDir& dir, const Dataset& d, std::vector<std::uint64_t> steps,
                                  std::uint64_t skip = 0) {
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k] == skip) continue;
    std::string text;
    for (std::size_t i = 0; i < d.items.size(); ++i) {
      text += nlohmann::json{{"id", d.items[i].id}, {"p_correct", 0.2 + 0.02 * k + 0.004 * i}, {"p_wrong", 0.35}}
                  .dump() +
              "\n";
    }
    testing::write_file(dir / ("ck_" + std::to_string(steps[k]) + ".jsonl"), text);
  }
  CheckpointFamily f;
  f.base.scorer_id = "bertinho";
  f.base.kind = ScorerKind::kTable;
  f.base.params = {{"file", (dir / "ck_{steps}.jsonl").string()}};
  f.steps = std::move(steps);
  return f;
}

TEST(StepRange, Inclusive) {
  const auto s = step_range(25000, 425000, 25000);
  ASSERT_EQ(s.size(), 17u);
  EXPECT_EQ(s.front(), 25000u);
  EXPECT_EQ(s.back(), 425000u);
  EXPECT_EQ(step_range(50000, 50000, 25000), (std::vector<std::uint64_t>{50000}));
  EXPECT_THROW(step_range(1, 10, 0), ConfigError);
}

TEST(Instantiate, SubstitutesSteps) {
  CheckpointFamily f;
  f.base.scorer_id = "bertinho";
  f.base.kind = ScorerKind::kExternal;
  f.base.command = "score --ckpt ckpt-{steps}";
  f.base.params = {{"path", "/m/{steps}/w.bin"}, {"n", 3}};
  const auto d = instantiate(f, 75000);
  EXPECT_EQ(d.scorer_id, "bertinho@75000");
  EXPECT_EQ(*d.command, "score --ckpt ckpt-75000");
  EXPECT_EQ(d.params.at("path"), "/m/75000/w.bin");
  EXPECT_EQ(d.params.at("n"), 3);
}

TEST(RunExperiment, OracleTable) {
  TempDir dir;
  auto cfg = base_config(dir, testing::fixture8());
  cfg.scorers = {testing::table_scorer("oracle", 0.9, 0.1)};
  const auto rs = run_experiment(cfg);
  ASSERT_EQ(rs.rows.size(), 8u);
  for (const auto& r : rs.rows) {
    EXPECT_EQ(r.binary, 1);
    EXPECT_DOUBLE_EQ(r.pd, 0.8);
  }
  ASSERT_EQ(rs.summaries.size(), 8u);
  for (const auto& s : rs.summaries) {
    EXPECT_EQ(s.mean_binary, 1.0);
    EXPECT_DOUBLE_EQ(s.mean_pd, 0.8);
    EXPECT_EQ(s.n, 1u);
  }
  for (const auto& d : attraction_effect(rs.summaries)) {
    EXPECT_EQ(d.delta_binary, 0.0);
    EXPECT_EQ(d.delta_pd, 0.0);
  }
  for (const auto& f : result_files()) EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / f)) << f;
  EXPECT_FALSE(std::filesystem::exists(cfg.output_dir / "learning_curve.csv"));
  const auto m = nlohmann::json::parse(testing::read_file(cfg.output_dir / "manifest.json"));
  EXPECT_EQ(m.at("row_count"), 8);
  EXPECT_EQ(m.at("datasets")[0].at("items"), 8);
  EXPECT_EQ(m.at("config_digest"), cfg.digest(RunKind::kExperiment));
}

TEST(RunExperiment, ZeroItems) {
  TempDir dir;
  auto cfg = base_config(dir, Dataset::from_items("empty", {}));
  cfg.scorers = {testing::table_scorer("oracle", 0.9, 0.1)};
  const auto rs = run_experiment(cfg);
  EXPECT_TRUE(rs.rows.empty());
  EXPECT_TRUE(rs.summaries.empty());
  const auto m = nlohmann::json::parse(testing::read_file(cfg.output_dir / "manifest.json"));
  EXPECT_EQ(m.at("row_count"), 0);
  EXPECT_EQ(m.at("format"), "probe-resultset/1");
}

TEST(RunExperiment, WarmCacheIsByteIdenticalWithNoCalls) {
  TempDir dir;
  auto cfg = base_config(dir, generate_fixture(FixtureSpec::builtin(4), 2));
  cfg.scorers = {testing::table_scorer("oracle", 0.9, 0.1), frequency_scorer_from_counts(
      {{"alto", 3}, {"alta", 1}, {"novo", 2}, {"nova", 2}, {"cansado", 1}, {"cansada", 4}, {"aparece", 5},
       {"aparecen", 2}, {"ten", 1}, {"teñen", 1}, {"canta", 2}, {"cantan", 3}})};
  CallLog cold;
  run_experiment(cfg, testing::counting_factory(&cold));
  EXPECT_GT(cold.items.load(), 0u);
  std::map<std::string, std::string> before;
  for (const auto& f : result_files()) before[f] = testing::read_file(cfg.output_dir / f);

  CallLog warm;
  const auto rs = run_experiment(cfg, testing::counting_factory(&warm));
  EXPECT_EQ(warm.items.load(), 0u);
  EXPECT_EQ(rs.stats.backend_requests, 0u);
  for (const auto& f : result_files()) EXPECT_EQ(testing::read_file(cfg.output_dir / f), before[f]) << f;
}

// Passes calls through until `budget` score() calls have been made, then
// fails every call with a transport error.
class DyingBackend : public Backend {
 public:
  DyingBackend(std::unique_ptr<Backend> inner, int* budget) : inner_(std::move(inner)), budget_(budget) {}
  const std::string& scorer_id() const override { return inner_->scorer_id(); }
  Handshake handshake() override { return inner_->handshake(); }
  std::vector<ScoreOutcome> score(std::span<const StimulusItem* const> items) override {
    if ((*budget_)-- <= 0) throw ScorerError(ScoreErrorKind::kTransport, "scorer died");
    count_requests(items.size());
    return inner_->score(items);
  }

 private:
  std::unique_ptr<Backend> inner_;
  int* budget_;
};

TEST(RunExperiment, ResumeAfterCrash) {
  const auto d = generate_fixture(FixtureSpec::builtin(20), 4);  // 160 items, 3 chunks
  TempDir fresh_dir;
  auto fresh = base_config(fresh_dir, d);
  fresh.scorers = {testing::table_scorer("oracle", 0.7, 0.2)};
  run_experiment(fresh);

  TempDir dir;
  auto cfg = base_config(dir, d);
  cfg.scorers = fresh.scorers;
  int budget = 1;
  BackendFactory dying = [&](const ScorerDescriptor& s, const BackendOptions& o) -> std::unique_ptr<Backend> {
    return std::make_unique<DyingBackend>(make_backend(s, o), &budget);
  };
  EXPECT_THROW(run_experiment(cfg, dying), ScorerError);
  EXPECT_FALSE(std::filesystem::exists(cfg.output_dir / "manifest.json"));

  CallLog log;
  run_experiment(cfg, testing::counting_factory(&log));
  EXPECT_EQ(log.items.load(), d.items.size() - 64);
  for (const auto& f : {"rows.csv", "summaries.csv"}) {
    EXPECT_EQ(testing::read_file(cfg.output_dir / f), testing::read_file(fresh.output_dir / f)) << f;
  }
}

TEST(RunExperiment, RefusesForeignResults) {
  TempDir dir;
  auto cfg = base_config(dir, testing::fixture8());
  cfg.scorers = {testing::table_scorer("a", 0.9, 0.1)};
  run_experiment(cfg);
  auto other = cfg;
  other.scorers = {testing::table_scorer("b", 0.9, 0.1)};
  EXPECT_THROW(run_experiment(other), ConfigError);
  // Execution-only fields do not change the digest.
  auto same = cfg;
  same.concurrency = 1;
  same.cache_dir = dir / "elsewhere";
  EXPECT_EQ(same.digest(RunKind::kExperiment), cfg.digest(RunKind::kExperiment));
  EXPECT_NO_THROW(run_experiment(same));
  EXPECT_NE(cfg.digest(RunKind::kSweep), cfg.digest(RunKind::kExperiment));
}

TEST(RunExperiment, OovItemsRejectedNotFatal) {
  TempDir dir;
  auto cfg = base_config(dir, testing::fixture8());
  cfg.scorers = {frequency_scorer_from_counts({{"alto", 3}, {"alta", 1}, {"novo", 1}, {"nova", 1}})};
  const auto rs = run_experiment(cfg);
  ASSERT_EQ(rs.attempts.size(), 1u);
  EXPECT_TRUE(rs.attempts[0].ok);
  EXPECT_EQ(rs.rows.size() + rs.attempts[0].rejected_items.size(), 8u);
}

TEST(RunExperiment, BackendFaultAborts) {
  TempDir dir;
  auto cfg = base_config(dir, testing::fixture8());
  ScorerDescriptor ext;
  ext.scorer_id = "ext";
  ext.kind = ScorerKind::kExternal;
  ext.command = std::string(FAKE_SCORER_PATH) + " --malformed";
  cfg.scorers = {ext};
  EXPECT_THROW(run_experiment(cfg), ScorerError);
}

TEST(ExperimentConfig, Validation) {
  TempDir dir;
  auto cfg = base_config(dir, testing::fixture8());
  EXPECT_THROW(cfg.validate(RunKind::kExperiment), ConfigError);  // no scorers
  cfg.scorers = {testing::table_scorer("a", 0.9, 0.1), testing::table_scorer("a", 0.9, 0.1)};
  EXPECT_THROW(cfg.validate(RunKind::kExperiment), ConfigError);  // duplicate id
  cfg.scorers.pop_back();
  EXPECT_NO_THROW(cfg.validate(RunKind::kExperiment));
  EXPECT_THROW(cfg.validate(RunKind::kSweep), ConfigError);  // no families
}

TEST(ExperimentConfig, FromJson) {
  TempDir dir;
  testing::write_file(dir / "d.jsonl", "");
  const nlohmann::json j = {
      {"datasets", {"d.jsonl"}},
      {"scorers", {{{"scorer_id", "u"}, {"kind", "uniform"}, {"params", {{"vocab_size", 10}}}}}},
      {"checkpoint_family",
       {{"base", {{"scorer_id", "b"}, {"kind", "table"}, {"params", {{"file", "ck_{steps}.jsonl"}}}}},
        {"steps", {{"start", 25000}, {"stop", 100000}, {"every", 25000}}}}},
      {"dims", {"scorer", "dependency"}},
      {"cache_dir", "c"},
      {"output_dir", "o"},
      {"timeout_ms", 500}};
  testing::write_file(dir / "cfg.json", j.dump());
  ::unsetenv("PROBE_CACHE_DIR");
  const auto cfg = ExperimentConfig::load(dir / "cfg.json");
  EXPECT_EQ(cfg.datasets[0], (dir / "d.jsonl").string());
  EXPECT_EQ(cfg.families.at(0).steps.size(), 4u);
  EXPECT_EQ(cfg.families[0].base.params.at("file"), (dir / "ck_{steps}.jsonl").string());
  EXPECT_EQ(cfg.dims, (std::vector<Dim>{Dim::kScorer, Dim::kDependency}));
  EXPECT_EQ(cfg.cache_dir, dir / "c");
  EXPECT_EQ(cfg.timeout.count(), 500);
  ::setenv("PROBE_CACHE_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(ExperimentConfig::load(dir / "cfg.json").cache_dir, "/tmp/elsewhere");
  ::unsetenv("PROBE_CACHE_DIR");
}

TEST(ExperimentConfig, NonIncreasingStepsRejected) {
  TempDir dir;
  auto cfg = base_config(dir, testing::fixture8());
  CheckpointFamily f;
  f.base = testing::table_scorer("b", 0.9, 0.1);
  f.steps = {50000, 25000};
  cfg.families = {f};
  EXPECT_THROW(cfg.validate(RunKind::kSweep), ConfigError);
  cfg.families[0].steps = {25000, 25000};
  EXPECT_THROW(cfg.validate(RunKind::kSweep), ConfigError);
  cfg.families[0].steps = {};
  EXPECT_THROW(cfg.validate(RunKind::kSweep), ConfigError);
}

TEST(Sweep, SeventeenSteps) {
  TempDir dir;
  const auto d = testing::fixture8();
  auto cfg = base_config(dir, d);
  cfg.families = {improving_family(dir, d, step_range(25000, 425000, 25000))};
  const auto rs = sweep_checkpoints(cfg);
  EXPECT_FALSE(rs.has_failures());
  EXPECT_EQ(rs.attempts.size(), 17u);
  EXPECT_EQ(rs.rows.size(), 17u * 8);
  EXPECT_EQ(rs.dims, (std::vector<Dim>{Dim::kScorer, Dim::kCheckpoint, Dim::kDependency, Dim::kLength,
                                       Dim::kAttractor}));
  for (const auto& r : rs.rows) EXPECT_EQ(r.scorer_id, "bertinho");
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "learning_curve.csv"));
  std::map<std::tuple<std::string, int, int, int, std::string>, std::vector<CurvePoint>> series;
  for (const auto& p : rs.curve) {
    series[{p.scorer_id, static_cast<int>(p.dependency), p.length ? static_cast<int>(*p.length) : -1,
            p.attractor ? static_cast<int>(*p.attractor) : -1, p.metric}]
        .push_back(p);
  }
  EXPECT_EQ(series.size(), 8u * 2);
  for (const auto& [key, pts] : series) {
    ASSERT_EQ(pts.size(), 17u);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_LT(pts[i - 1].steps, pts[i].steps);
      EXPECT_LE(*pts[i - 1].value, *pts[i].value);
    }
  }
}

TEST(Sweep, SingleStepMatchesExperiment) {
  TempDir dir;
  const auto d = testing::fixture8();
  auto cfg = base_config(dir, d);
  cfg.families = {improving_family(dir, d, {50000})};
  const auto rs = sweep_checkpoints(cfg);

  TempDir dir2;
  auto plain = base_config(dir2, d);
  auto s = instantiate(cfg.families[0], 50000);
  plain.scorers = {s};
  const auto ex = run_experiment(plain);
  ASSERT_EQ(rs.rows.size(), ex.rows.size());
  for (std::size_t i = 0; i < rs.rows.size(); ++i) {
    EXPECT_EQ(rs.rows[i].checkpoint_steps, 50000u);
    EXPECT_EQ(rs.rows[i].pd, ex.rows[i].pd);
    EXPECT_EQ(rs.rows[i].binary, ex.rows[i].binary);
    EXPECT_EQ(rs.rows[i].item_id, ex.rows[i].item_id);
  }
}

TEST(Sweep, FailingStepIsRecordedAndCurveHasNull) {
  TempDir dir;
  const auto d = testing::fixture8();
  auto cfg = base_config(dir, d);
  cfg.families = {improving_family(dir, d, {25000, 50000, 75000}, /*skip=*/50000)};
  const auto rs = sweep_checkpoints(cfg);
  EXPECT_TRUE(rs.has_failures());
  ASSERT_EQ(rs.attempts.size(), 3u);
  EXPECT_FALSE(rs.attempts[1].ok);
  EXPECT_FALSE(rs.attempts[1].error.empty());
  EXPECT_EQ(rs.rows.size(), 16u);
  std::size_t nulls = 0;
  for (const auto& p : rs.curve) {
    if (p.steps == 50000) {
      EXPECT_FALSE(p.value.has_value());
      ++nulls;
    }
  }
  EXPECT_GT(nulls, 0u);
  const auto csv = testing::read_file(cfg.output_dir / "learning_curve.csv");
  EXPECT_NE(csv.find(",50000,noun_adj,short,absent,binary,\n"), std::string::npos) << csv;
}

TEST(ResultSet, LoadRoundTrip) {
  TempDir dir;
  const auto d = testing::fixture8();
  auto cfg = base_config(dir, d);
  cfg.families = {improving_family(dir, d, {25000, 50000})};
  const auto rs = sweep_checkpoints(cfg);
  const auto back = load_result_set(cfg.output_dir);
  EXPECT_EQ(back.kind, RunKind::kSweep);
  EXPECT_EQ(back.dims, rs.dims);
  EXPECT_EQ(back.rows, rs.rows);
  EXPECT_EQ(back.summaries, rs.summaries);
  EXPECT_EQ(back.curve, rs.curve);
  EXPECT_EQ(back.attempts.size(), rs.attempts.size());
  EXPECT_THROW(load_result_set(dir / "nowhere"), ConfigError);
}

TEST(ResultSet, CsvShapes) {
  MetricRow r;
  r.dataset = "d";
  r.item_id = "a,b";
  r.scorer_id = "m";
  r.binary = 1;
  r.pd = 0.1;
  const auto csv = rows_csv(std::vector<MetricRow>{r});
  EXPECT_EQ(csv,
            "dataset,item_id,scorer,checkpoint,dependency,length,attractor,feature,value,binary,pd\n"
            "d,\"a,b\",m,,noun_adj,short,absent,gender,masculine,1,0.1\n");
}

}  // namespace
}  // namespace probe
