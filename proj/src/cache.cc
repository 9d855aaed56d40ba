#include "probe/cache.h"

#include <fstream>
#include <sstream>

#include "probe/digest.h"

namespace probe {

namespace fs = std::filesystem;
using nlohmann::json;

ScoreCache::ScoreCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ScoreCache::scorer_dir(const std::string& scorer_id) const {
  std::string slug;
  for (char ch : scorer_id) {
    const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                      (ch >= '0' && ch <= '9') || ch == '-' || ch == '_' || ch == '.';
    slug.push_back(keep ? ch : '_');
    if (slug.size() >= 48) break;
  }
  return dir_ / (slug + "-" + sha256_hex(scorer_id).substr(0, 16));
}

fs::path ScoreCache::shard_path(const std::string& scorer_id, const std::string& source_hash) const {
  return scorer_dir(scorer_id) / (source_hash + ".jsonl");
}

ScoreCache::Shard& ScoreCache::shard_locked(const std::string& scorer_id,
                                            const std::string& source_hash) {
  auto key = ShardKey{scorer_id, source_hash};
  if (auto it = shards_.find(key); it != shards_.end()) return it->second;
  Shard shard;
  if (!dir_.empty()) {
    const auto path = shard_path(scorer_id, source_hash);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    // Drop a torn tail so later appends start on a fresh line.
    const auto complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (complete < text.size()) fs::resize_file(path, complete);
    std::istringstream lines(text.substr(0, complete));
    std::string line;
    while (std::getline(lines, line)) {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;
      try {
        auto rec = record_from_json(j);
        if (rec.scorer_id != scorer_id) continue;
        shard.try_emplace(rec.item_id, std::move(rec));
      } catch (const json::exception&) {
        continue;
      }
    }
  }
  return shards_.emplace(std::move(key), std::move(shard)).first->second;
}

std::optional<ScoreRecord> ScoreCache::load(const std::string& scorer_id,
                                            const std::string& source_hash,
                                            const std::string& item_id) {
  {
    std::shared_lock lock(mu_);
    if (auto it = shards_.find({scorer_id, source_hash}); it != shards_.end()) {
      auto rec = it->second.find(item_id);
      if (rec == it->second.end()) return std::nullopt;
      return rec->second;
    }
  }
  std::unique_lock lock(mu_);
  auto& shard = shard_locked(scorer_id, source_hash);
  auto rec = shard.find(item_id);
  if (rec == shard.end()) return std::nullopt;
  return rec->second;
}

void ScoreCache::store(const std::string& source_hash, std::span<const ScoreRecord> records) {
  if (records.empty()) return;
  std::unique_lock lock(mu_);
  std::map<std::string, std::string> appends;  // scorer_id -> lines
  for (const auto& rec : records) {
    auto& shard = shard_locked(rec.scorer_id, source_hash);
    if (!shard.try_emplace(rec.item_id, rec).second) continue;
    appends[rec.scorer_id] += record_to_json(rec).dump() + "\n";
  }
  if (dir_.empty()) return;
  for (const auto& [scorer_id, lines] : appends) {
    fs::create_directories(scorer_dir(scorer_id));
    std::ofstream out(shard_path(scorer_id, source_hash), std::ios::app | std::ios::binary);
    out << lines;
    out.flush();
    if (!out) throw Error("cannot write score cache shard for '" + scorer_id + "'");
  }
}

std::size_t ScoreCache::size(const std::string& scorer_id, const std::string& source_hash) {
  std::unique_lock lock(mu_);
  return shard_locked(scorer_id, source_hash).size();
}

std::optional<Handshake> ScoreCache::load_handshake(const std::string& scorer_id) {
  std::unique_lock lock(mu_);
  if (auto it = handshakes_.find(scorer_id); it != handshakes_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;
  std::ifstream in(scorer_dir(scorer_id) / "handshake.json");
  if (!in) return std::nullopt;
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  try {
    auto h = Handshake::from_json(j);
    handshakes_[scorer_id] = h;
    return h;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void ScoreCache::store_handshake(const std::string& scorer_id, const Handshake& h) {
  std::unique_lock lock(mu_);
  handshakes_[scorer_id] = h;
  if (dir_.empty()) return;
  const auto dir = scorer_dir(scorer_id);
  fs::create_directories(dir);
  const auto tmp = dir / "handshake.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << h.to_json().dump() << "\n";
  }
  fs::rename(tmp, dir / "handshake.json");
}

BatchResult score_batch(Backend& backend, std::span<const StimulusItem> items,
                        const std::string& source_hash, ScoreCache& cache,
                        const BatchOptions& opts) {
  BatchResult result;
  result.records.resize(items.size());
  const auto& scorer_id = backend.scorer_id();

  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (auto rec = cache.load(scorer_id, source_hash, items[i].id)) {
      result.records[i] = std::move(rec);
      ++result.cache_hits;
    } else {
      misses.push_back(i);
    }
  }

  const auto chunk = std::max<std::size_t>(1, opts.chunk_size);
  for (std::size_t start = 0; start < misses.size(); start += chunk) {
    const auto stop = std::min(misses.size(), start + chunk);
    std::vector<const StimulusItem*> batch;
    for (auto k = start; k < stop; ++k) batch.push_back(&items[misses[k]]);

    std::vector<ScoreOutcome> outcomes;
    for (int attempt = 0;; ++attempt) {
      try {
        outcomes = backend.score(batch);
        break;
      } catch (const ScorerError& e) {
        if (e.kind() != ScoreErrorKind::kTimeout || attempt >= opts.timeout_retries) throw;
        backend.reset();
      }
    }
    if (outcomes.size() != batch.size()) {
      throw ScorerError(ScoreErrorKind::kMalformed, "backend returned " +
                                                        std::to_string(outcomes.size()) +
                                                        " outcomes for " +
                                                        std::to_string(batch.size()) + " items");
    }
    result.requested += batch.size();

    std::vector<ScoreRecord> fresh;
    for (auto k = start; k < stop; ++k) {
      auto& outcome = outcomes[k - start];
      const auto index = misses[k];
      if (auto* failure = std::get_if<ScoreFailure>(&outcome)) {
        result.rejects.push_back({index, std::move(*failure)});
        continue;
      }
      auto& rec = std::get<ScoreRecord>(outcome);
      if (auto v = record_violation(rec); !v.empty()) {
        throw ScorerError(ScoreErrorKind::kMalformed,
                          "backend '" + scorer_id + "' item '" + rec.item_id + "': " + v);
      }
      fresh.push_back(rec);
      result.records[index] = std::move(rec);
    }
    cache.store(source_hash, fresh);
  }
  return result;
}

}  // namespace probe
