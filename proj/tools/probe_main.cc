// probe: targeted syntactic evaluation harness.
//
//   probe validate <dataset.jsonl> [--vocab words.txt]
//   probe fixture --spec <spec.json> --seed <n> [--out file]
//   probe filter <dataset.jsonl> --vocab words.txt [--out file]
//   probe score --config <config.json>
//   probe sweep --config <config.json>
//   probe report --results <dir> [--kind K] [--metric M] [--format F] ...
//
// Exit codes: 0 success, 1 validation/config error, 2 backend error,
// 3 partial sweep.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>

#include "probe/csv.h"
#include "probe/dataset.h"
#include "probe/error.h"
#include "probe/report.h"
#include "probe/runner.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitBackend = 2;
constexpr int kExitPartial = 3;

int cmd_validate(const std::string& path, const std::string& vocab_path) {
  auto d = probe::load_dataset(path);
  if (!vocab_path.empty()) {
    std::ifstream in(vocab_path);
    if (!in) throw probe::ConfigError("cannot open vocabulary '" + vocab_path + "'");
    const auto before = d.items.size();
    d = probe::filter_by_vocabulary(d, probe::load_vocabulary(in));
    fmt::print("vocabulary filter kept {} of {} items\n", d.items.size(), before);
  }
  const auto r = probe::validate_dataset(d);
  fmt::print("dataset {} ({} items, sha256 {})\n", d.name, r.item_count, d.source_hash);
  for (std::size_t c = 0; c < probe::kCellCount; ++c) {
    fmt::print("  {:<28} {}\n", probe::cell_label(probe::cell_at(c)), r.cell_counts[c]);
  }
  auto balance = [](const char* name, const probe::FeatureBalance& b, const char* a, const char* m) {
    const auto ratio = b.marked_ratio();
    fmt::print("  {:<8} {} {} / {} {}  ratio {}\n", name, b.unmarked, a, b.marked, m,
               ratio ? fmt::format("{:.4f}", *ratio) : "n/a");
  };
  balance("gender", r.gender, "masculine", "feminine");
  balance("number", r.number, "singular", "plural");
  for (const auto& v : r.violations) fmt::print("  violation {}: {}\n", v.item_id, v.rule);
  return r.ok() ? kExitOk : kExitInvalid;
}

int cmd_fixture(const std::string& spec_path, std::uint64_t seed, const std::string& out_path) {
  std::ifstream in(spec_path);
  if (!in) throw probe::ConfigError("cannot open fixture spec '" + spec_path + "'");
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw probe::ConfigError("fixture spec is not valid JSON");
  const auto d = probe::generate_fixture(probe::FixtureSpec::from_json(j), seed);
  const auto text = probe::serialize_dataset(d);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw probe::Error("cannot write '" + out_path + "'");
    fmt::print(stderr, "wrote {} items to {}\n", d.items.size(), out_path);
  }
  return kExitOk;
}

int cmd_filter(const std::string& path, const std::string& vocab_path, const std::string& out_path) {
  std::ifstream vin(vocab_path);
  if (!vin) throw probe::ConfigError("cannot open vocabulary '" + vocab_path + "'");
  const auto d = probe::filter_by_vocabulary(probe::load_dataset(path), probe::load_vocabulary(vin));
  const auto text = probe::serialize_dataset(d);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << text;
  }
  return kExitOk;
}

void print_summary(const probe::ResultSet& rs, const std::filesystem::path& dir) {
  std::size_t rejects = 0;
  for (const auto& a : rs.attempts) rejects += a.rejected_items.size();
  fmt::print("{} rows, {} rejects, {} groups -> {}\n", rs.rows.size(), rejects, rs.summaries.size(),
             dir.string());
  fmt::print("cache hits {}, backend requests {}\n", rs.stats.cache_hits, rs.stats.backend_requests);
  for (const auto& a : rs.attempts) {
    if (!a.ok) fmt::print("  FAILED {} on {}: {}\n", a.instance_id, a.dataset, a.error);
  }
}

struct ReportArgs {
  std::string results;
  std::string kind = "all";
  std::string metric = "both";
  std::string format = "csv";
  std::vector<std::string> baselines;
  bool with_conditions = false;
  std::int64_t steps = -1;
  std::vector<std::string> group;
  std::vector<std::string> filters;
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
};

int cmd_report(const ReportArgs& args) {
  const auto rs = probe::load_result_set(args.results);
  probe::ReportSpec base;
  base.metric = probe::parse_report_metric(args.metric);
  base.format = probe::parse_report_format(args.format);
  base.with_conditions = args.with_conditions;
  if (args.steps >= 0) base.steps = static_cast<std::uint64_t>(args.steps);
  if (!args.group.empty()) base.group_dims = probe::parse_dims(args.group);
  for (const auto& f : args.filters) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw probe::ConfigError("filter must be dim=value: '" + f + "'");
    base.filters[probe::parse_dim(f.substr(0, eq))] = f.substr(eq + 1);
  }
  for (const auto& b : args.baselines) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw probe::ConfigError("baseline must be name=value: '" + b + "'");
    base.baselines.push_back({b.substr(0, eq), probe::csv::parse_double(b.substr(eq + 1))});
  }
  base.bootstrap = args.bootstrap;
  base.seed = args.seed;

  std::vector<probe::ReportKind> kinds;
  if (args.kind == "all") {
    kinds = {probe::ReportKind::kOverall, probe::ReportKind::kByCondition,
             probe::ReportKind::kMetricComparison, probe::ReportKind::kAttraction};
    if (rs.kind == probe::RunKind::kSweep) kinds.push_back(probe::ReportKind::kLearningCurve);
  } else {
    kinds.push_back(probe::parse_report_kind(args.kind));
  }
  for (auto kind : kinds) {
    auto spec = base;
    spec.kind = kind;
    if (args.kind == "all") {
      // Options that only one kind accepts are applied to that kind alone.
      if (kind != probe::ReportKind::kLearningCurve) {
        spec.baselines.clear();
        spec.with_conditions = false;
      } else {
        spec.steps.reset();
      }
      if (kind == probe::ReportKind::kMetricComparison) spec.metric = probe::ReportMetric::kBoth;
      if (kind != probe::ReportKind::kOverall || spec.format != probe::ReportFormat::kCsv) spec.bootstrap = 0;
    }
    const auto path = probe::write_report(probe::emit_report(rs, spec), args.results);
    fmt::print("{}\n", path.string());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted syntactic evaluation harness for minimal-pair agreement probes"};
  app.require_subcommand(1);

  std::string dataset_path, vocab_path, out_path, spec_path, config_path;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate", "Parse a stimulus file and report cell counts");
  validate->add_option("dataset", dataset_path, "JSON-lines stimulus file")->required();
  validate->add_option("--vocab", vocab_path, "Filter to pairs in this word list first");

  auto* fixture = app.add_subcommand("fixture", "Generate a counterbalanced synthetic dataset");
  fixture->add_option("--spec", spec_path, "Fixture lexicon spec (JSON)")->required();
  fixture->add_option("--seed", seed, "Random seed")->required();
  fixture->add_option("--out", out_path, "Output file (default stdout)");

  auto* filter = app.add_subcommand("filter", "Keep items whose forms are both in a vocabulary");
  filter->add_option("dataset", dataset_path, "JSON-lines stimulus file")->required();
  filter->add_option("--vocab", vocab_path, "One word per line")->required();
  filter->add_option("--out", out_path, "Output file (default stdout)");

  auto* score = app.add_subcommand("score", "Score datasets against every configured scorer");
  score->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* sweep = app.add_subcommand("sweep", "Score every checkpoint of the configured families");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();

  ReportArgs rargs;
  auto* report = app.add_subcommand("report", "Render CSV/SVG reports from a results directory");
  report->add_option("--results", rargs.results, "Results directory")->required();
  report->add_option("--kind", rargs.kind,
                     "overall|by_condition|learning_curve|metric_comparison|attraction|all");
  report->add_option("--metric", rargs.metric, "binary|pd|both");
  report->add_option("--format", rargs.format, "csv|svg");
  report->add_option("--baseline", rargs.baselines, "Reference line name=value (learning_curve)");
  report->add_flag("--with-conditions", rargs.with_conditions, "Split curves by length/attractor");
  report->add_option("--steps", rargs.steps, "Only rows from this checkpoint");
  report->add_option("--group", rargs.group, "Grouping dims for metric_comparison")->delimiter(',');
  report->add_option("--filter", rargs.filters, "Row filter dim=value (repeatable)");
  report->add_option("--bootstrap", rargs.bootstrap, "Bootstrap resamples for overall CSV");
  report->add_option("--seed", rargs.seed, "Bootstrap seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(dataset_path, vocab_path);
    if (*fixture) return cmd_fixture(spec_path, seed, out_path);
    if (*filter) return cmd_filter(dataset_path, vocab_path, out_path);
    if (*score) {
      const auto cfg = probe::ExperimentConfig::load(config_path);
      const auto rs = probe::run_experiment(cfg);
      print_summary(rs, cfg.output_dir);
      return kExitOk;
    }
    if (*sweep) {
      const auto cfg = probe::ExperimentConfig::load(config_path);
      const auto rs = probe::sweep_checkpoints(cfg);
      print_summary(rs, cfg.output_dir);
      return rs.has_failures() ? kExitPartial : kExitOk;
    }
    if (*report) return cmd_report(rargs);
  } catch (const probe::ScorerError& e) {
    fmt::print(stderr, "backend error ({}): {}\n", probe::to_string(e.kind()), e.what());
    return kExitBackend;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInvalid;
  }
  return kExitOk;
}
