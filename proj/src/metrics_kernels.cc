// OpenMP kernels for the row-wise metric join and grouped aggregation.
// Serial equivalents live in metrics_reference.cc.

#include <map>
#include <unordered_map>

#include "probe/error.h"
#include "probe/metrics.h"

namespace probe {

MetricRows metric_rows(std::span<const ScoreRecord> records, const Dataset& d,
                       std::optional<std::uint64_t> checkpoint) {
  std::unordered_map<std::string_view, const StimulusItem*> by_id;
  by_id.reserve(d.items.size());
  for (const auto& item : d.items) by_id.emplace(item.id, &item);

  enum class Status : std::uint8_t { kOk, kUnknown, kReject };
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  std::vector<MetricRow> slots(records.size());
  std::vector<Status> status(records.size(), Status::kOk);
  std::vector<std::string> reasons(records.size());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& rec = records[i];
    auto it = by_id.find(rec.item_id);
    if (it == by_id.end()) {
      status[i] = Status::kUnknown;
      continue;
    }
    try {
      auto& row = slots[i];
      row.binary = binary_accuracy(rec);
      row.pd = pd_accuracy(rec);
      row.dataset = d.name;
      row.item_id = rec.item_id;
      row.scorer_id = rec.scorer_id;
      row.checkpoint_steps = checkpoint;
      row.condition = it->second->condition;
    } catch (const MetricError& e) {
      status[i] = Status::kReject;
      reasons[i] = e.what();
    }
  }

  MetricRows out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (status[i] == Status::kUnknown) {
      throw MetricError("score record for unknown item '" + records[i].item_id + "' in dataset '" +
                        d.name + "'");
    }
  }
  out.rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (status[i] == Status::kOk) {
      out.rows.push_back(std::move(slots[i]));
    } else {
      out.rejects.push_back({records[i].item_id, records[i].scorer_id, std::move(reasons[i])});
    }
  }
  return out;
}

std::vector<GroupSummary> aggregate(std::span<const MetricRow> rows, std::span<const Dim> dims) {
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  std::vector<GroupKey> keys(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) keys[i] = group_key(rows[i], dims);

  // Group membership in row order; the map keeps groups sorted by key.
  std::map<GroupKey, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < rows.size(); ++i) members[std::move(keys[i])].push_back(i);

  std::vector<GroupSummary> out(members.size());
  std::vector<const std::vector<std::size_t>*> index(members.size());
  std::size_t g = 0;
  for (auto& [key, idx] : members) {
    out[g].key = key;
    index[g] = &idx;
    ++g;
  }

  const auto n_groups = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n_groups; ++k) {
    double sum_binary = 0.0;
    double sum_pd = 0.0;
    for (auto i : *index[k]) {
      sum_binary += rows[i].binary;
      sum_pd += rows[i].pd;
    }
    const auto count = index[k]->size();
    out[k].n = count;
    out[k].mean_binary = sum_binary / static_cast<double>(count);
    out[k].mean_pd = sum_pd / static_cast<double>(count);
  }
  return out;
}

}  // namespace probe
