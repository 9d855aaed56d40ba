#include "probe/metrics_reference.h"

#include <map>

#include "probe/error.h"

namespace probe::reference {

MetricRows metric_rows_serial(std::span<const ScoreRecord> records, const Dataset& d,
                              std::optional<std::uint64_t> checkpoint) {
  std::map<std::string, const StimulusItem*, std::less<>> by_id;
  for (const auto& item : d.items) by_id.emplace(item.id, &item);

  MetricRows out;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.item_id);
    if (it == by_id.end()) {
      throw MetricError("score record for unknown item '" + rec.item_id + "' in dataset '" +
                        d.name + "'");
    }
    try {
      MetricRow row;
      row.binary = binary_accuracy(rec);
      row.pd = pd_accuracy(rec);
      row.dataset = d.name;
      row.item_id = rec.item_id;
      row.scorer_id = rec.scorer_id;
      row.checkpoint_steps = checkpoint;
      row.condition = it->second->condition;
      out.rows.push_back(std::move(row));
    } catch (const MetricError& e) {
      out.rejects.push_back({rec.item_id, rec.scorer_id, e.what()});
    }
  }
  return out;
}

std::vector<GroupSummary> aggregate_serial(std::span<const MetricRow> rows,
                                           std::span<const Dim> dims) {
  struct Acc {
    std::size_t n = 0;
    double binary = 0.0;
    double pd = 0.0;
  };
  std::map<GroupKey, Acc> acc;
  for (const auto& row : rows) {
    auto& a = acc[group_key(row, dims)];
    ++a.n;
    a.binary += row.binary;
    a.pd += row.pd;
  }
  std::vector<GroupSummary> out;
  out.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    out.push_back({key, a.n, a.binary / static_cast<double>(a.n), a.pd / static_cast<double>(a.n)});
  }
  return out;
}

}  // namespace probe::reference
