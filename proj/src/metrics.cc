#include "probe/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "probe/error.h"

namespace probe {

namespace {

void check_pair(double p_correct, double p_wrong) {
  if (!std::isfinite(p_correct) || !std::isfinite(p_wrong) || p_correct < 0.0 || p_wrong < 0.0) {
    throw MetricError("probabilities must be finite and nonnegative");
  }
  if (p_correct == 0.0 && p_wrong == 0.0) {
    throw MetricError("degenerate score: both probabilities are zero");
  }
}

}  // namespace

int binary_accuracy(double p_correct, double p_wrong) {
  check_pair(p_correct, p_wrong);
  return p_correct > p_wrong ? 1 : 0;
}

double pd_accuracy(double p_correct, double p_wrong) {
  check_pair(p_correct, p_wrong);
  const double sum = p_correct + p_wrong;
  if (!std::isfinite(sum)) throw MetricError("probability sum overflows");
  double pd = (p_correct - p_wrong) / sum;
  // Rounding can reach +/-1 when one side is tiny but nonzero; the exact
  // value is strictly inside, so step back by one ulp.
  if (pd >= 1.0) pd = p_wrong > 0.0 ? std::nextafter(1.0, 0.0) : 1.0;
  if (pd <= -1.0) pd = p_correct > 0.0 ? std::nextafter(-1.0, 0.0) : -1.0;
  return pd;
}

int binary_accuracy(const ScoreRecord& r) {
  if (auto v = record_violation(r); !v.empty()) throw MetricError(v);
  return binary_accuracy(r.p_correct, r.p_wrong);
}

double pd_accuracy(const ScoreRecord& r) {
  if (auto v = record_violation(r); !v.empty()) throw MetricError(v);
  return pd_accuracy(r.p_correct, r.p_wrong);
}

std::string_view to_string(Dim d) {
  switch (d) {
    case Dim::kScorer: return "scorer";
    case Dim::kCheckpoint: return "checkpoint";
    case Dim::kDependency: return "dependency";
    case Dim::kLength: return "length";
    case Dim::kAttractor: return "attractor";
    case Dim::kFeature: return "feature";
    case Dim::kValue: return "value";
  }
  return "?";
}

Dim parse_dim(std::string_view s) {
  for (auto d : {Dim::kScorer, Dim::kCheckpoint, Dim::kDependency, Dim::kLength, Dim::kAttractor,
                 Dim::kFeature, Dim::kValue}) {
    if (to_string(d) == s) return d;
  }
  throw MetricError("unknown grouping dimension '" + std::string(s) + "'");
}

std::vector<Dim> parse_dims(std::span<const std::string> names) {
  std::vector<Dim> dims;
  for (const auto& name : names) {
    const auto d = parse_dim(name);
    if (std::find(dims.begin(), dims.end(), d) != dims.end()) {
      throw MetricError("grouping dimension '" + name + "' repeated");
    }
    dims.push_back(d);
  }
  return dims;
}

KeyPart key_part(const MetricRow& row, Dim dim) {
  const auto& c = row.condition;
  switch (dim) {
    case Dim::kScorer: return {dim, 0, row.scorer_id};
    case Dim::kCheckpoint:
      if (!row.checkpoint_steps) return {dim, -1, ""};
      return {dim, static_cast<std::int64_t>(*row.checkpoint_steps),
              std::to_string(*row.checkpoint_steps)};
    case Dim::kDependency:
      return {dim, static_cast<std::int64_t>(c.dependency), std::string(to_string(c.dependency))};
    case Dim::kLength:
      return {dim, static_cast<std::int64_t>(c.length), std::string(to_string(c.length))};
    case Dim::kAttractor:
      return {dim, static_cast<std::int64_t>(c.attractor), std::string(to_string(c.attractor))};
    case Dim::kFeature:
      return {dim, static_cast<std::int64_t>(c.feature), std::string(to_string(c.feature))};
    case Dim::kValue:
      return {dim, static_cast<std::int64_t>(c.value), std::string(to_string(c.value))};
  }
  throw MetricError("bad dimension");
}

GroupKey group_key(const MetricRow& row, std::span<const Dim> dims) {
  GroupKey key;
  key.reserve(dims.size());
  for (auto d : dims) key.push_back(key_part(row, d));
  return key;
}

std::optional<std::string> GroupSummary::value(Dim dim) const {
  for (const auto& part : key) {
    if (part.dim == dim) return part.text;
  }
  return std::nullopt;
}

std::vector<AttractionDelta> attraction_effect(std::span<const GroupSummary> summaries) {
  struct Levels {
    const GroupSummary* absent = nullptr;
    const GroupSummary* present = nullptr;
    Dependency dependency{};
    Length length{};
  };
  // Keyed by (context, dependency, length) so the output stays sorted.
  std::map<std::pair<GroupKey, std::pair<int, int>>, Levels> pairs;
  for (const auto& s : summaries) {
    GroupKey context;
    std::optional<std::string> dep, len, attr;
    for (const auto& part : s.key) {
      switch (part.dim) {
        case Dim::kDependency: dep = part.text; break;
        case Dim::kLength: len = part.text; break;
        case Dim::kAttractor: attr = part.text; break;
        default: context.push_back(part); break;
      }
    }
    if (!dep || !len || !attr) {
      throw MetricError("attraction effect needs summaries keyed by dependency, length, attractor");
    }
    const auto d = parse_dependency(*dep);
    const auto l = parse_length(*len);
    auto& levels = pairs[{std::move(context), {static_cast<int>(d), static_cast<int>(l)}}];
    levels.dependency = d;
    levels.length = l;
    (parse_attractor(*attr) == Attractor::kAbsent ? levels.absent : levels.present) = &s;
  }
  std::vector<AttractionDelta> out;
  for (const auto& [key, levels] : pairs) {
    if (!levels.absent || !levels.present) {
      std::string where = std::string(to_string(levels.dependency)) + "/" +
                          std::string(to_string(levels.length));
      for (const auto& part : key.first) where += " " + std::string(to_string(part.dim)) + "=" + part.text;
      throw MetricError("missing attractor=" + std::string(levels.absent ? "present" : "absent") +
                        " level for " + where);
    }
    out.push_back({key.first, levels.dependency, levels.length,
                   levels.absent->mean_binary - levels.present->mean_binary,
                   levels.absent->mean_pd - levels.present->mean_pd});
  }
  return out;
}

std::vector<BootstrapInterval> bootstrap_intervals(std::span<const MetricRow> rows,
                                                   std::span<const Dim> dims,
                                                   std::size_t resamples, std::uint64_t seed) {
  if (resamples == 0) throw MetricError("bootstrap needs at least one resample");
  std::map<GroupKey, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < rows.size(); ++i) members[group_key(rows[i], dims)].push_back(i);

  std::vector<std::pair<const GroupKey*, const std::vector<std::size_t>*>> groups;
  for (const auto& [key, idx] : members) groups.emplace_back(&key, &idx);
  std::vector<BootstrapInterval> out(groups.size());

  const auto n_groups = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t g = 0; g < n_groups; ++g) {
    const auto& idx = *groups[g].second;
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(g + 1)));
    std::vector<double> bin(resamples), pd(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
      double sb = 0.0, sp = 0.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& row = rows[idx[rng() % idx.size()]];
        sb += row.binary;
        sp += row.pd;
      }
      bin[r] = sb / static_cast<double>(idx.size());
      pd[r] = sp / static_cast<double>(idx.size());
    }
    std::sort(bin.begin(), bin.end());
    std::sort(pd.begin(), pd.end());
    const auto lo = static_cast<std::size_t>(std::floor(0.025 * static_cast<double>(resamples - 1)));
    const auto hi = static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(resamples - 1)));
    out[g] = {*groups[g].first, bin[lo], bin[hi], pd[lo], pd[hi]};
  }
  return out;
}

}  // namespace probe
