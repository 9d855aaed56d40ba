// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "oracle.h"
#include "probe/csv.h"
#include "probe/metrics.h"
#include "probe/report.h"
#include "probe/runner.h"
#include "test_util.h"

namespace {

using namespace probe;
using testing::TempDir;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(std::string why) {
    if (pass) detail = std::move(why);
    pass = false;
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.fail(std::string("exception: ") + e.what());
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("{} {:<34} {:>8.1f} ms  {}\n", o.pass ? "PASS" : "FAIL", name, ms, o.detail);
  std::fflush(stdout);
  failures += !o.pass;
}

Outcome pd_formula() {
  Outcome o;
  const double pd = pd_accuracy(0.1856, 0.0030);
  o.detail = fmt::format("pd={:.6f} target 0.9682 +-5e-4, shown {:.3f}", pd, pd);
  if (std::abs(pd - 0.9682) > 5e-4) o.fail(o.detail);
  if (fmt::format("{:.3f}", pd) != "0.968") o.fail(o.detail);
  return o;
}

Outcome pd_binary_relationship() {
  Outcome o;
  std::mt19937_64 rng(10000);
  double worst_scale = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto [pc, pw] = oracle::random_pair(rng);
    const ScoreRecord rec{"r" + std::to_string(i), "s", pc, pw, nullptr};
    if (!record_violation(rec).empty()) {
      o.fail("generator produced invalid record");
      break;
    }
    const double pd = pd_accuracy(rec);
    const int b = binary_accuracy(rec);
    const auto where = fmt::format("record ({:.17g}, {:.17g})", pc, pw);
    if (!(pd >= -1.0 && pd <= 1.0)) o.fail("range: " + where);
    if ((b == 1) != (pd > 0.0)) o.fail("sign coupling: " + where);
    if (pd_accuracy(pw, pc) != -pd) o.fail("antisymmetry: " + where);
    if (pd > static_cast<double>(b)) o.fail("pd > binary: " + where);
    for (double k : {1e-6, 1.0, 1e3}) {
      const double scaled = pd_accuracy(k * pc, k * pw);
      worst_scale = std::max(worst_scale, std::abs(scaled - pd));
      if (std::abs(scaled - pd) > 1e-12) o.fail(fmt::format("scale k={}: {}", k, where));
      if (binary_accuracy(k * pc, k * pw) != b) o.fail(fmt::format("binary scale k={}: {}", k, where));
    }
  }
  if (o.pass) o.detail = fmt::format("10000 records, max scale drift {:.2e}", worst_scale);
  return o;
}

// Random per-item scores for a fixture, as records from one or more scorers.
std::vector<MetricRow> random_fixture_rows(std::mt19937_64& rng, const Dataset& d) {
  static const char* scorers[] = {"bertinho-small", "bertinho-base", "mbert"};
  std::vector<MetricRow> rows;
  for (int s = 0; s < 3; ++s) {
    std::vector<ScoreRecord> recs;
    for (const auto& it : d.items) {
      const auto [pc, pw] = oracle::random_pair(rng);
      recs.push_back({it.id, scorers[s], pc, pw, nullptr});
    }
    const std::optional<std::uint64_t> steps =
        rng() % 2 ? std::optional<std::uint64_t>((1 + rng() % 17) * 25000) : std::nullopt;
    auto mr = metric_rows(recs, d, steps).rows;
    rows.insert(rows.end(), mr.begin(), mr.end());
  }
  return rows;
}

Outcome dominance() {
  Outcome o;
  std::mt19937_64 rng(1);
  std::size_t groups = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = generate_fixture(FixtureSpec::builtin(1 + rng() % 8), rng());
    const auto rows = random_fixture_rows(rng, d);
    for (const auto& dims : oracle::all_dim_subsets()) {
      for (const auto& s : aggregate(rows, dims)) {
        ++groups;
        if (s.mean_pd > s.mean_binary) {
          o.fail(fmt::format("trial {}: mean_pd {:.17g} > mean_binary {:.17g}", trial, s.mean_pd, s.mean_binary));
        }
      }
    }
  }
  if (o.pass) o.detail = fmt::format("{} groups over 40 fixtures x 128 dim sets", groups);
  return o;
}

Outcome aggregation_oracle() {
  Outcome o;
  std::mt19937_64 rng(64);
  std::size_t checks = 0;
  for (std::size_t per_cell = 1; per_cell <= 8; ++per_cell) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto d = generate_fixture(FixtureSpec::builtin(per_cell), rng());
      if (d.items.size() > 64) o.fail("fixture larger than 64 items");
      // One scorer per row keeps the row count at the item count.
      auto rows = random_fixture_rows(rng, d);
      rows.resize(d.items.size());
      for (auto& r : rows) {
        r.scorer_id = rng() % 2 ? "a" : "b";
        if (rng() % 3 == 0) r.checkpoint_steps.reset();
      }
      for (const auto& dims : oracle::all_dim_subsets()) {
        const auto got = aggregate(rows, dims);
        const auto want = oracle::brute_force(rows, dims);
        if (got.size() != want.size()) {
          o.fail(fmt::format("group count {} vs {}", got.size(), want.size()));
          continue;
        }
        for (const auto& s : got) {
          std::vector<std::string> labels;
          for (const auto& p : s.key) labels.push_back(p.text);
          const auto it = want.find(labels);
          ++checks;
          if (it == want.end() || it->second.n != s.n ||
              std::memcmp(&it->second.mean_binary, &s.mean_binary, sizeof(double)) != 0 ||
              std::memcmp(&it->second.mean_pd, &s.mean_pd, sizeof(double)) != 0) {
            o.fail("mismatch for group " + fmt::format("{}", fmt::join(labels, "/")));
          }
        }
      }
    }
  }
  if (o.pass) o.detail = fmt::format("{} groups bit-identical, 24 fixtures x 128 dim sets", checks);
  return o;
}

ExperimentConfig config_for(const TempDir& dir, const Dataset& d) {
  ExperimentConfig cfg;
  cfg.datasets = {testing::write_dataset(dir.path(), d)};
  cfg.cache_dir = dir / "cache";
  cfg.output_dir = dir / "out";
  return cfg;
}

Outcome end_to_end_oracle() {
  Outcome o;
  TempDir dir;
  auto cfg = config_for(dir, testing::fixture8());
  cfg.scorers = {testing::table_scorer("oracle", 0.9, 0.1)};
  const auto rs = run_experiment(cfg);
  if (rs.summaries.size() != 8) o.fail(fmt::format("{} cells, expected 8", rs.summaries.size()));
  for (const auto& s : rs.summaries) {
    if (s.mean_binary != 1.0 || std::abs(s.mean_pd - 0.8) > 1e-12) {
      o.fail(fmt::format("cell {}/{}/{} = ({}, {})", *s.value(Dim::kDependency), *s.value(Dim::kLength),
                         *s.value(Dim::kAttractor), s.mean_binary, s.mean_pd));
    }
  }
  const auto deltas = attraction_effect(rs.summaries);
  if (deltas.size() != 4) o.fail(fmt::format("{} attraction pairs, expected 4", deltas.size()));
  for (const auto& d : deltas) {
    if (d.delta_binary != 0.0 || d.delta_pd != 0.0) o.fail("nonzero attraction delta");
  }
  ReportSpec spec;
  spec.kind = ReportKind::kByCondition;
  const auto text = emit_report(rs, spec).content;
  const std::string want_b = "oracle,noun_adj,binary,1.0000,1.0000,1.0000,1.0000\n";
  const std::string want_p = "oracle,subj_verb,pd,0.8000,0.8000,0.8000,0.8000\n";
  if (text.find(want_b) == std::string::npos || text.find(want_p) == std::string::npos) {
    o.fail("condition report does not show (1.0000, 0.8000)");
  }
  if (o.pass) o.detail = "8 cells at (1.0, 0.8), 4 deltas at 0";
  return o;
}

Outcome sweep_shape() {
  Outcome o;
  TempDir dir;
  const auto d = generate_fixture(FixtureSpec::builtin(2), 17);
  auto cfg = config_for(dir, d);
  const auto steps = step_range(25000, 425000, 25000);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    std::string text;
    for (std::size_t i = 0; i < d.items.size(); ++i) {
      // Item i crosses p_wrong at a step that depends on i; pd rises with k.
      const double pc = 0.05 + 0.025 * static_cast<double>(k) + 0.01 * static_cast<double>(i % 7);
      text += nlohmann::json{{"id", d.items[i].id}, {"p_correct", pc}, {"p_wrong", 0.3}}.dump() + "\n";
    }
    testing::write_file(dir / ("step_" + std::to_string(steps[k]) + ".jsonl"), text);
  }
  CheckpointFamily f;
  f.base.scorer_id = "bertinho";
  f.base.kind = ScorerKind::kTable;
  f.base.params = {{"file", (dir / "step_{steps}.jsonl").string()}};
  f.steps = steps;
  cfg.families = {f};
  const auto rs = sweep_checkpoints(cfg);
  if (rs.has_failures()) o.fail("sweep recorded failures");

  std::istringstream in(testing::read_file(cfg.output_dir / "learning_curve.csv"));
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::vector<std::pair<std::uint64_t, double>>> series;
  while (std::getline(in, line)) {
    const auto f = csv::split(line);
    series[f[0] + "|" + f[2] + "|" + f[3] + "|" + f[4] + "|" + f[5]].push_back(
        {std::stoull(f[1]), f[6].empty() ? NAN : csv::parse_double(f[6])});
  }
  if (series.size() != 16) o.fail(fmt::format("{} series, expected 16", series.size()));
  for (const auto& [name, pts] : series) {
    if (pts.size() != 17) o.fail(fmt::format("{}: {} points", name, pts.size()));
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].first <= pts[i - 1].first) o.fail(name + ": steps not ascending");
      if (!(pts[i].second >= pts[i - 1].second)) o.fail(fmt::format("{}: mean drops at {}", name, pts[i].first));
    }
  }
  if (o.pass) o.detail = fmt::format("{} series x 17 points, ascending and nondecreasing", series.size());
  return o;
}

// Raises a transport fault once `budget` calls have been used.
class Killable : public Backend {
 public:
  Killable(std::unique_ptr<Backend> inner, int* budget, std::size_t* calls)
      : inner_(std::move(inner)), budget_(budget), calls_(calls) {}
  const std::string& scorer_id() const override { return inner_->scorer_id(); }
  Handshake handshake() override { return inner_->handshake(); }
  std::vector<ScoreOutcome> score(std::span<const StimulusItem* const> items) override {
    ++*calls_;
    if ((*budget_)-- <= 0) throw ScorerError(ScoreErrorKind::kTransport, "killed");
    count_requests(items.size());
    return inner_->score(items);
  }

 private:
  std::unique_ptr<Backend> inner_;
  int* budget_;
  std::size_t* calls_;
};

Outcome resume_determinism() {
  Outcome o;
  const auto d = generate_fixture(FixtureSpec::builtin(24), 3);  // 192 items, 3 chunks
  const std::vector<std::string> files = {"rows.csv", "summaries.csv", "manifest.json"};

  TempDir dir;
  auto cfg = config_for(dir, d);
  cfg.scorers = {testing::table_scorer("bertinho", 0.42, 0.31),
                 frequency_scorer_from_counts({{"alto", 5}, {"alta", 2}, {"novo", 3}, {"nova", 3},
                                               {"cansado", 1}, {"cansada", 2}, {"aparece", 4}, {"aparecen", 4},
                                               {"ten", 2}, {"teñen", 1}, {"canta", 3}, {"cantan", 5}})};
  int budget = 0;
  std::size_t calls = 0;
  BackendFactory factory = [&](const ScorerDescriptor& s, const BackendOptions& opt) -> std::unique_ptr<Backend> {
    return std::make_unique<Killable>(make_backend(s, opt), &budget, &calls);
  };

  // Uninterrupted reference run in a separate cache.
  budget = 1 << 20;
  auto ref_cfg = cfg;
  ref_cfg.cache_dir = dir / "ref-cache";
  ref_cfg.output_dir = dir / "ref-out";
  run_experiment(ref_cfg, factory);

  // Killed after the first chunk, then rerun to completion.
  budget = 1;
  bool killed = false;
  try {
    run_experiment(cfg, factory);
  } catch (const ScorerError&) {
    killed = true;
  }
  if (!killed) o.fail("interrupted run did not stop");
  budget = 1 << 20;
  calls = 0;
  run_experiment(cfg, factory);
  const auto resumed_calls = calls;

  // Warm rerun: any backend call fails the run.
  budget = 0;
  calls = 0;
  std::map<std::string, std::string> before;
  for (const auto& f : files) before[f] = testing::read_file(cfg.output_dir / f);
  const auto rs = run_experiment(cfg, factory);
  if (calls != 0 || rs.stats.backend_requests != 0) o.fail(fmt::format("warm rerun made {} calls", calls));
  for (const auto& f : files) {
    const auto now = testing::read_file(cfg.output_dir / f);
    if (now != before[f]) o.fail(f + " changed on warm rerun");
    if (now != testing::read_file(ref_cfg.output_dir / f)) o.fail(f + " differs from uninterrupted run");
  }
  if (o.pass) {
    o.detail = fmt::format("resume scored {} chunks, warm rerun 0 calls, {} files identical", resumed_calls,
                           files.size());
  }
  return o;
}

Outcome dataset_validation() {
  Outcome o;
  const auto d = generate_fixture(FixtureSpec::builtin(4), 2024);
  const auto r = validate_dataset(d);
  if (!r.ok()) o.fail(fmt::format("{} violations", r.violations.size()));
  if (r.item_count != 32) o.fail(fmt::format("{} items", r.item_count));
  for (std::size_t c = 0; c < kCellCount; ++c) {
    if (r.cell_counts[c] != 4) o.fail(fmt::format("{} has {}", cell_label(cell_at(c)), r.cell_counts[c]));
  }
  if (r.gender.marked_ratio() != 0.5) o.fail("gender ratio not 0.5");
  if (r.number.marked_ratio() != 0.5) o.fail("number ratio not 0.5");
  if (o.pass) o.detail = "32 items, 8 cells x 4, gender 0.5, number 0.5";
  return o;
}

}  // namespace

int main() {
  criterion("pd-formula", pd_formula);
  criterion("pd-binary-relationship", pd_binary_relationship);
  criterion("metric-comparison-dominance", dominance);
  criterion("aggregation-oracle-equivalence", aggregation_oracle);
  criterion("end-to-end-oracle-run", end_to_end_oracle);
  criterion("sweep-shape", sweep_shape);
  criterion("resume-determinism", resume_determinism);
  criterion("dataset-validation", dataset_validation);
  fmt::print("{} of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
