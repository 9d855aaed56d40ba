#include "probe/report.h"

#include <fstream>
#include <set>

#include "probe/csv.h"
#include "probe/error.h"
#include "svg.h"

namespace probe {

namespace fs = std::filesystem;

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::kOverall: return "overall";
    case ReportKind::kByCondition: return "by_condition";
    case ReportKind::kLearningCurve: return "learning_curve";
    case ReportKind::kMetricComparison: return "metric_comparison";
    case ReportKind::kAttraction: return "attraction";
  }
  return "?";
}

std::string_view to_string(ReportMetric m) {
  switch (m) {
    case ReportMetric::kBinary: return "binary";
    case ReportMetric::kPd: return "pd";
    case ReportMetric::kBoth: return "both";
  }
  return "?";
}

ReportKind parse_report_kind(std::string_view s) {
  for (auto k : {ReportKind::kOverall, ReportKind::kByCondition, ReportKind::kLearningCurve,
                 ReportKind::kMetricComparison, ReportKind::kAttraction}) {
    if (to_string(k) == s) return k;
  }
  throw ReportError("unknown report kind '" + std::string(s) + "'");
}

ReportMetric parse_report_metric(std::string_view s) {
  for (auto m : {ReportMetric::kBinary, ReportMetric::kPd, ReportMetric::kBoth}) {
    if (to_string(m) == s) return m;
  }
  throw ReportError("unknown report metric '" + std::string(s) + "'");
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "svg") return ReportFormat::kSvg;
  throw ReportError("unknown report format '" + std::string(s) + "'");
}

void ReportSpec::validate() const {
  if (!baselines.empty() && kind != ReportKind::kLearningCurve) {
    throw ReportError("baselines are only valid for learning_curve reports");
  }
  if (with_conditions && kind != ReportKind::kLearningCurve) {
    throw ReportError("condition-split series are only valid for learning_curve reports");
  }
  if (steps && kind == ReportKind::kLearningCurve) {
    throw ReportError("a learning curve spans every checkpoint; drop the steps filter");
  }
  if (kind == ReportKind::kMetricComparison && metric != ReportMetric::kBoth) {
    throw ReportError("metric_comparison always reports both metrics");
  }
  if (bootstrap > 0 && (kind != ReportKind::kOverall || format != ReportFormat::kCsv)) {
    throw ReportError("bootstrap intervals are only available for the overall CSV report");
  }
}

std::string ReportSpec::filename() const {
  return std::string(to_string(kind)) + "__" + std::string(to_string(metric)) +
         (format == ReportFormat::kCsv ? ".csv" : ".svg");
}

namespace {

std::vector<std::string> metric_names(ReportMetric m) {
  switch (m) {
    case ReportMetric::kBinary: return {"binary"};
    case ReportMetric::kPd: return {"pd"};
    case ReportMetric::kBoth: return {"binary", "pd"};
  }
  return {};
}

double mean_of(const GroupSummary& s, const std::string& metric) {
  return metric == "binary" ? s.mean_binary : s.mean_pd;
}

std::string cell(double v) { return csv::fixed(v, 4); }

std::vector<MetricRow> select_rows(const ResultSet& rs, const ReportSpec& spec) {
  std::vector<MetricRow> out;
  for (const auto& r : rs.rows) {
    if (spec.steps && r.checkpoint_steps != spec.steps) continue;
    bool keep = true;
    for (const auto& [dim, label] : spec.filters) {
      if (key_part(r, dim).text != label) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(r);
  }
  return out;
}

std::string key_label(const GroupKey& key) {
  std::string out;
  for (const auto& part : key) {
    if (!out.empty()) out += " / ";
    out += part.text.empty() ? "-" : part.text;
  }
  return out;
}

}  // namespace

ReportFile emit_overall(const ResultSet& rs, const ReportSpec& spec) {
  spec.validate();
  const auto rows = select_rows(rs, spec);
  if (rows.empty()) throw ReportError("empty ResultSet: nothing to report");
  const std::vector<Dim> dims = {Dim::kScorer, Dim::kDependency};
  const auto summaries = aggregate(rows, dims);
  const auto metrics = metric_names(spec.metric);

  if (spec.format == ReportFormat::kSvg) {
    svg::BarChart chart{"Mean accuracy by scorer and dependency", {}, {}};
    for (const auto& m : metrics) chart.series.push_back({m, {}});
    for (const auto& s : summaries) {
      chart.categories.push_back(key_label(s.key));
      for (std::size_t i = 0; i < metrics.size(); ++i) chart.series[i].values.push_back(mean_of(s, metrics[i]));
    }
    return {spec.filename(), svg::render(std::vector{chart})};
  }

  std::vector<BootstrapInterval> ci;
  if (spec.bootstrap > 0) ci = bootstrap_intervals(rows, dims, spec.bootstrap, spec.seed);
  std::string out = "scorer,dependency,metric,mean,n";
  if (!ci.empty()) out += ",ci_low,ci_high";
  out += "\n";
  for (std::size_t g = 0; g < summaries.size(); ++g) {
    const auto& s = summaries[g];
    for (const auto& m : metrics) {
      std::vector<std::string> f = {s.key[0].text, s.key[1].text, m, cell(mean_of(s, m)),
                                    std::to_string(s.n)};
      if (!ci.empty()) {
        f.push_back(cell(m == "binary" ? ci[g].binary_low : ci[g].pd_low));
        f.push_back(cell(m == "binary" ? ci[g].binary_high : ci[g].pd_high));
      }
      out += csv::join(f) + "\n";
    }
  }
  return {spec.filename(), out};
}

ReportFile emit_condition_breakdown(const ResultSet& rs, const ReportSpec& spec) {
  spec.validate();
  const auto rows = select_rows(rs, spec);
  const std::vector<Dim> dims = {Dim::kScorer, Dim::kDependency, Dim::kLength, Dim::kAttractor};
  const auto summaries = aggregate(rows, dims);
  if (summaries.empty()) throw ReportError("empty group set: nothing to report");

  // (scorer, dependency) -> four condition slots in display order.
  using Slots = std::array<const GroupSummary*, 4>;
  std::map<std::pair<KeyPart, KeyPart>, Slots> table;
  for (const auto& s : summaries) {
    auto& slots = table.try_emplace({s.key[0], s.key[1]}, Slots{}).first->second;
    slots[static_cast<std::size_t>(s.key[2].ordinal) * 2 + static_cast<std::size_t>(s.key[3].ordinal)] = &s;
  }
  static constexpr std::array<const char*, 4> kColumns = {"short_no_attr", "short_attr",
                                                          "long_no_attr", "long_attr"};
  const auto metrics = metric_names(spec.metric);

  if (spec.format == ReportFormat::kSvg) {
    std::vector<svg::BarChart> panels;
    for (const auto& m : metrics) {
      svg::BarChart chart{"Mean " + m + " accuracy by dependency and condition", {}, {}};
      for (auto* c : kColumns) chart.series.push_back({c, {}});
      for (const auto& [key, slots] : table) {
        chart.categories.push_back(key.first.text + " / " + key.second.text);
        for (std::size_t i = 0; i < 4; ++i) {
          chart.series[i].values.push_back(slots[i] ? std::optional(mean_of(*slots[i], m)) : std::nullopt);
        }
      }
      panels.push_back(std::move(chart));
    }
    return {spec.filename(), svg::render(panels)};
  }

  std::string out = "scorer,dependency,metric,short_no_attr,short_attr,long_no_attr,long_attr\n";
  for (const auto& [key, slots] : table) {
    for (const auto& m : metrics) {
      std::vector<std::string> f = {key.first.text, key.second.text, m};
      for (const auto* s : slots) f.push_back(s ? cell(mean_of(*s, m)) : "");
      out += csv::join(f) + "\n";
    }
  }
  return {spec.filename(), out};
}

ReportFile emit_learning_curve(const ResultSet& rs, const ReportSpec& spec) {
  spec.validate();
  const auto rows = select_rows(rs, spec);
  const bool stepped_rows = std::any_of(rows.begin(), rows.end(),
                                        [](const MetricRow& r) { return r.checkpoint_steps.has_value(); });
  const bool stepped_attempts = std::any_of(rs.attempts.begin(), rs.attempts.end(),
                                            [](const Attempt& a) { return a.steps.has_value(); });
  if (!stepped_rows && !stepped_attempts) {
    throw ReportError("no checkpoint dimension in rows: learning curves need a sweep ResultSet");
  }
  const auto curve = build_learning_curve(rows, rs.attempts, spec.with_conditions);
  const auto metrics = metric_names(spec.metric);
  std::set<std::uint64_t> steps;
  for (const auto& p : curve) steps.insert(p.steps);
  for (const auto& a : rs.attempts) {
    if (a.steps) steps.insert(*a.steps);
  }

  auto series_name = [&](const CurvePoint& p) {
    std::string name = p.scorer_id + " " + std::string(to_string(p.dependency));
    if (p.length) name += " " + std::string(to_string(*p.length));
    if (p.attractor) name += " " + std::string(to_string(*p.attractor));
    return name;
  };

  if (spec.format == ReportFormat::kSvg) {
    std::vector<svg::LineChart> panels;
    const std::vector<double> xs(steps.begin(), steps.end());
    for (const auto& m : metrics) {
      svg::LineChart chart{"Mean " + m + " accuracy by checkpoint", xs, "training steps", {}, {}};
      std::map<std::string, std::size_t> index;
      for (const auto& p : curve) {
        if (p.metric != m) continue;
        const auto name = series_name(p);
        auto [it, fresh] = index.try_emplace(name, chart.series.size());
        if (fresh) chart.series.push_back({name, std::vector<std::optional<double>>(xs.size())});
        const auto x = static_cast<std::size_t>(std::distance(steps.begin(), steps.find(p.steps)));
        chart.series[it->second].values[x] = p.value;
      }
      for (const auto& b : spec.baselines) chart.references.push_back({b.name, b.value});
      panels.push_back(std::move(chart));
    }
    return {spec.filename(), svg::render(panels)};
  }

  std::string out = spec.with_conditions ? "scorer,steps,dependency,length,attractor,metric,value\n"
                                         : "scorer,steps,dependency,metric,value\n";
  for (const auto& p : curve) {
    if (std::find(metrics.begin(), metrics.end(), p.metric) == metrics.end()) continue;
    std::vector<std::string> f = {p.scorer_id, std::to_string(p.steps), std::string(to_string(p.dependency))};
    if (spec.with_conditions) {
      f.push_back(p.length ? std::string(to_string(*p.length)) : "");
      f.push_back(p.attractor ? std::string(to_string(*p.attractor)) : "");
    }
    f.push_back(p.metric);
    f.push_back(p.value ? cell(*p.value) : "");
    out += csv::join(f) + "\n";
  }
  for (const auto& b : spec.baselines) {
    for (auto step : steps) {
      for (const auto& m : metrics) {
        std::vector<std::string> f = {"baseline:" + b.name, std::to_string(step), ""};
        if (spec.with_conditions) f.insert(f.end(), {"", ""});
        f.push_back(m);
        f.push_back(cell(b.value));
        out += csv::join(f) + "\n";
      }
    }
  }
  return {spec.filename(), out};
}

ReportFile emit_metric_comparison(const ResultSet& rs, const ReportSpec& spec) {
  spec.validate();
  const auto rows = select_rows(rs, spec);
  if (rows.empty()) throw ReportError("empty selection: no rows match the filters");
  const auto summaries = aggregate(rows, spec.group_dims);

  if (spec.format == ReportFormat::kSvg) {
    svg::BarChart chart{"0/1 vs PD accuracy", {}, {{"binary", {}}, {"pd", {}}}};
    for (const auto& s : summaries) {
      chart.categories.push_back(key_label(s.key));
      chart.series[0].values.push_back(s.mean_binary);
      chart.series[1].values.push_back(s.mean_pd);
    }
    return {spec.filename(), svg::render(std::vector{chart})};
  }

  std::vector<std::string> header;
  for (auto d : spec.group_dims) header.emplace_back(to_string(d));
  header.insert(header.end(), {"n", "mean_binary", "mean_pd", "gap"});
  std::string out = csv::join(header) + "\n";
  for (const auto& s : summaries) {
    std::vector<std::string> f;
    for (const auto& part : s.key) f.push_back(part.text);
    f.push_back(std::to_string(s.n));
    f.push_back(cell(s.mean_binary));
    f.push_back(cell(s.mean_pd));
    f.push_back(cell(s.mean_binary - s.mean_pd));
    out += csv::join(f) + "\n";
  }
  return {spec.filename(), out};
}

ReportFile emit_attraction(const ResultSet& rs, const ReportSpec& spec) {
  spec.validate();
  const auto rows = select_rows(rs, spec);
  if (rows.empty()) throw ReportError("empty ResultSet: nothing to report");
  std::vector<Dim> dims = {Dim::kScorer};
  const bool stepped = std::any_of(rows.begin(), rows.end(),
                                   [](const MetricRow& r) { return r.checkpoint_steps.has_value(); });
  if (stepped) dims.push_back(Dim::kCheckpoint);
  dims.insert(dims.end(), {Dim::kDependency, Dim::kLength, Dim::kAttractor});
  const auto summaries = aggregate(rows, dims);
  std::vector<AttractionDelta> deltas;
  try {
    deltas = attraction_effect(summaries);
  } catch (const MetricError& e) {
    throw ReportError(e.what());
  }
  const auto metrics = metric_names(spec.metric);

  if (spec.format == ReportFormat::kSvg) {
    svg::BarChart chart{"Attraction effect (no attractor - attractor)", {}, {}};
    for (const auto& m : metrics) chart.series.push_back({m, {}});
    for (const auto& d : deltas) {
      chart.categories.push_back(key_label(d.context) + " / " + std::string(to_string(d.dependency)) +
                                 " / " + std::string(to_string(d.length)));
      for (std::size_t i = 0; i < metrics.size(); ++i) {
        chart.series[i].values.push_back(metrics[i] == "binary" ? d.delta_binary : d.delta_pd);
      }
    }
    return {spec.filename(), svg::render(std::vector{chart})};
  }

  std::string out = stepped ? "scorer,checkpoint,dependency,length,metric,delta\n"
                            : "scorer,dependency,length,metric,delta\n";
  for (const auto& d : deltas) {
    for (const auto& m : metrics) {
      std::vector<std::string> f;
      for (const auto& part : d.context) f.push_back(part.text);
      f.insert(f.end(), {std::string(to_string(d.dependency)), std::string(to_string(d.length)), m,
                         cell(m == "binary" ? d.delta_binary : d.delta_pd)});
      out += csv::join(f) + "\n";
    }
  }
  return {spec.filename(), out};
}

ReportFile emit_report(const ResultSet& rs, const ReportSpec& spec) {
  switch (spec.kind) {
    case ReportKind::kOverall: return emit_overall(rs, spec);
    case ReportKind::kByCondition: return emit_condition_breakdown(rs, spec);
    case ReportKind::kLearningCurve: return emit_learning_curve(rs, spec);
    case ReportKind::kMetricComparison: return emit_metric_comparison(rs, spec);
    case ReportKind::kAttraction: return emit_attraction(rs, spec);
  }
  throw ReportError("unsupported report kind");
}

fs::path write_report(const ReportFile& file, const fs::path& dir) {
  const auto out_dir = dir / "reports";
  fs::create_directories(out_dir);
  const auto path = out_dir / file.filename;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << file.content;
  if (!out) throw ReportError("cannot write '" + path.string() + "'");
  return path;
}

}  // namespace probe
