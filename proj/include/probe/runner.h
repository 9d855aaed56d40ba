#pragma once

// End-to-end experiment orchestration: datasets x scorers (or checkpoint
// families x steps) -> cached scores -> metric rows -> summaries, persisted
// as a ResultSet directory:
//
//   rows.csv            one line per scored item
//   summaries.csv       aggregate() over the configured dims
//   learning_curve.csv  sweeps only; long format, empty value = failed step
//   manifest.json       config digest, datasets, handshakes, attempt statuses
//   run_stats.json      timestamps, cache hits, backend calls (not part of
//                       the deterministic result)

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/metrics.h"
#include "probe/scorer.h"

namespace probe {

struct CheckpointFamily {
  ScorerDescriptor base;
  std::vector<std::uint64_t> steps;
};

// Steps every `every` from `start` to `stop` inclusive.
std::vector<std::uint64_t> step_range(std::uint64_t start, std::uint64_t stop, std::uint64_t every);

// Copy of the family's base with "{steps}" substituted in the transport and in
// every string param; the scorer id becomes "<base id>@<steps>".
ScorerDescriptor instantiate(const CheckpointFamily& family, std::uint64_t steps);

enum class RunKind : std::uint8_t { kExperiment, kSweep };

struct ExperimentConfig {
  std::vector<std::string> datasets;
  std::optional<std::string> vocab;  // filter datasets to in-vocabulary pairs
  std::vector<ScorerDescriptor> scorers;
  std::vector<CheckpointFamily> families;
  std::vector<Dim> dims = {Dim::kScorer, Dim::kDependency, Dim::kLength, Dim::kAttractor};
  std::filesystem::path cache_dir = "probe-cache";
  std::filesystem::path output_dir = "results";
  std::size_t concurrency = 8;
  std::uint64_t seed = 0;
  std::chrono::milliseconds timeout{120000};

  // Relative paths resolve against `base_dir`. PROBE_CACHE_DIR, when set,
  // overrides cache_dir.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  // Throws ConfigError.
  void validate(RunKind kind) const;
  // Only the fields that change results; paths for cache/output and
  // execution knobs are left out.
  nlohmann::json canonical_json() const;
  std::string digest(RunKind kind) const;
};

struct Attempt {
  std::string scorer_id;  // family id for sweeps
  std::string instance_id;
  std::string dataset;
  std::optional<std::uint64_t> steps;
  bool ok = true;
  std::string error;
  std::size_t items = 0;
  std::size_t rows = 0;
  std::vector<std::string> rejected_items;  // OOV, backend-internal, degenerate

  nlohmann::json to_json() const;
  static Attempt from_json(const nlohmann::json& j);
};

struct CurvePoint {
  std::string scorer_id;
  std::uint64_t steps = 0;
  Dependency dependency = Dependency::kNounAdj;
  std::optional<Length> length;
  std::optional<Attractor> attractor;
  std::string metric;  // "binary" | "pd"
  std::optional<double> value;  // nullopt: step failed or cell missing
  std::size_t n = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// Long-format learning curve over every step attempted for each family.
// `with_conditions` splits series by length and attractor as well.
std::vector<CurvePoint> build_learning_curve(std::span<const MetricRow> rows,
                                             std::span<const Attempt> attempts,
                                             bool with_conditions);

struct RunStats {
  std::size_t cache_hits = 0;
  std::size_t backend_requests = 0;
  std::string started_at;
  std::string finished_at;
};

struct ResultSet {
  RunKind kind = RunKind::kExperiment;
  std::vector<Dim> dims;
  std::vector<MetricRow> rows;
  std::vector<GroupSummary> summaries;
  std::vector<CurvePoint> curve;
  std::vector<Attempt> attempts;
  nlohmann::json manifest;
  RunStats stats;

  bool has_failures() const;
};

using BackendFactory =
    std::function<std::unique_ptr<Backend>(const ScorerDescriptor&, const BackendOptions&)>;

// Scores every (scorer x dataset); a backend fault aborts with ScorerError.
ResultSet run_experiment(const ExperimentConfig& cfg, const BackendFactory& factory = {});
// Scores every (family x step x dataset); a failing step is recorded in the
// manifest and the sweep carries on.
ResultSet sweep_checkpoints(const ExperimentConfig& cfg, const BackendFactory& factory = {});

// Writes the ResultSet files (temp-then-rename). Run functions call this.
void persist_result_set(const ResultSet& rs, const std::filesystem::path& dir);
ResultSet load_result_set(const std::filesystem::path& dir);

// CSV renderings used by persist_result_set.
std::string rows_csv(std::span<const MetricRow> rows);
std::string summaries_csv(std::span<const GroupSummary> summaries, std::span<const Dim> dims);
std::string curve_csv(std::span<const CurvePoint> curve);

}  // namespace probe
