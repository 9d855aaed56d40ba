#pragma once

// Per-item accuracy metrics and their aggregation over the factorial design.
//
// 0/1 accuracy is 1 iff p_correct > p_wrong (ties score 0).
// Probability-Distance (PD) accuracy renormalizes the pair to the two
// candidates and takes the difference of their shares:
//
//     pd = (p_correct - p_wrong) / (p_correct + p_wrong)   in [-1, 1]
//
// which is invariant to any common scaling of the two probabilities.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probe/dataset.h"
#include "probe/scorer.h"

namespace probe {

// Both throw MetricError when p_correct = p_wrong = 0 or an input is
// negative or non-finite.
int binary_accuracy(double p_correct, double p_wrong);
double pd_accuracy(double p_correct, double p_wrong);
int binary_accuracy(const ScoreRecord& r);
double pd_accuracy(const ScoreRecord& r);

struct MetricRow {
  std::string dataset;
  std::string item_id;
  std::string scorer_id;
  std::optional<std::uint64_t> checkpoint_steps;
  Condition condition;
  int binary = 0;
  double pd = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct RowReject {
  std::string item_id;
  std::string scorer_id;
  std::string reason;

  friend bool operator==(const RowReject&, const RowReject&) = default;
};

struct MetricRows {
  std::vector<MetricRow> rows;
  std::vector<RowReject> rejects;  // degenerate scores, excluded from rows
};

// Joins records to their items' conditions. Row order follows record order.
// Throws MetricError when a record names an item absent from `d`.
MetricRows metric_rows(std::span<const ScoreRecord> records, const Dataset& d,
                       std::optional<std::uint64_t> checkpoint = std::nullopt);

enum class Dim : std::uint8_t { kScorer, kCheckpoint, kDependency, kLength, kAttractor, kFeature, kValue };

std::string_view to_string(Dim d);
// Throws MetricError on unknown names.
Dim parse_dim(std::string_view s);
// Throws MetricError on unknown or repeated names.
std::vector<Dim> parse_dims(std::span<const std::string> names);

// One coordinate of a group key. Parts order by (ordinal, text): enum
// dimensions use their declaration order, checkpoints their step count
// (absent = -1), scorers their id.
struct KeyPart {
  Dim dim = Dim::kScorer;
  std::int64_t ordinal = 0;
  std::string text;

  friend bool operator==(const KeyPart&, const KeyPart&) = default;
  friend auto operator<=>(const KeyPart& a, const KeyPart& b) {
    if (auto c = a.ordinal <=> b.ordinal; c != 0) return c;
    return a.text <=> b.text;
  }
};
using GroupKey = std::vector<KeyPart>;

KeyPart key_part(const MetricRow& row, Dim dim);
GroupKey group_key(const MetricRow& row, std::span<const Dim> dims);

struct GroupSummary {
  GroupKey key;
  std::size_t n = 0;
  double mean_binary = 0.0;
  double mean_pd = 0.0;

  // Text of the given dimension, or nullopt when the key lacks it.
  std::optional<std::string> value(Dim dim) const;
  friend bool operator==(const GroupSummary&, const GroupSummary&) = default;
};

// One summary per distinct key, sorted by key. Means are sums in row order
// divided by n; the OpenMP kernel reduces each group serially so results do
// not depend on the thread count.
std::vector<GroupSummary> aggregate(std::span<const MetricRow> rows, std::span<const Dim> dims);

struct AttractionDelta {
  GroupKey context;  // key parts other than dependency/length/attractor
  Dependency dependency = Dependency::kNounAdj;
  Length length = Length::kShort;
  double delta_binary = 0.0;  // mean(absent) - mean(present)
  double delta_pd = 0.0;

  friend bool operator==(const AttractionDelta&, const AttractionDelta&) = default;
};

// `summaries` must be keyed by at least dependency, length and attractor;
// any other dimensions (scorer, checkpoint, ...) become the context. Throws
// MetricError when an attractor level is missing for a pair.
std::vector<AttractionDelta> attraction_effect(std::span<const GroupSummary> summaries);

struct BootstrapInterval {
  GroupKey key;
  double binary_low = 0.0;
  double binary_high = 0.0;
  double pd_low = 0.0;
  double pd_high = 0.0;
};

// Percentile bootstrap (2.5% / 97.5%) of the group means, resampling rows
// within each group. Deterministic for a given seed.
std::vector<BootstrapInterval> bootstrap_intervals(std::span<const MetricRow> rows,
                                                   std::span<const Dim> dims,
                                                   std::size_t resamples, std::uint64_t seed);

}  // namespace probe
