#pragma once

// Single-threaded reference versions of the OpenMP metric kernels. They are
// kept for equivalence tests and for the benchmark baseline.

#include "probe/metrics.h"

namespace probe::reference {

MetricRows metric_rows_serial(std::span<const ScoreRecord> records, const Dataset& d,
                              std::optional<std::uint64_t> checkpoint = std::nullopt);

std::vector<GroupSummary> aggregate_serial(std::span<const MetricRow> rows,
                                           std::span<const Dim> dims);

}  // namespace probe::reference
