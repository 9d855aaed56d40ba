#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "probe/scorer.h"

namespace probe {

// Content-addressed score cache. Layout:
//
//   <dir>/<scorer-slug>-<sha256(scorer_id)[:16]>/<dataset source_hash>.jsonl
//   <dir>/<scorer-slug>-<sha256(scorer_id)[:16]>/handshake.json
//
// Shards are append-only JSON lines; a torn trailing line (interrupted
// write) is ignored on load. Readers share a lock, writers are serialized.
class ScoreCache {
 public:
  // An empty path gives a memory-only cache.
  explicit ScoreCache(std::filesystem::path dir = {});

  std::optional<ScoreRecord> load(const std::string& scorer_id, const std::string& source_hash,
                                  const std::string& item_id);
  void store(const std::string& source_hash, std::span<const ScoreRecord> records);
  std::size_t size(const std::string& scorer_id, const std::string& source_hash);

  std::optional<Handshake> load_handshake(const std::string& scorer_id);
  void store_handshake(const std::string& scorer_id, const Handshake& h);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path shard_path(const std::string& scorer_id,
                                   const std::string& source_hash) const;

 private:
  using Shard = std::unordered_map<std::string, ScoreRecord>;
  using ShardKey = std::pair<std::string, std::string>;

  std::filesystem::path scorer_dir(const std::string& scorer_id) const;
  // Caller holds mu_ exclusively.
  Shard& shard_locked(const std::string& scorer_id, const std::string& source_hash);

  std::filesystem::path dir_;
  std::shared_mutex mu_;
  std::map<ShardKey, Shard> shards_;
  std::map<std::string, Handshake> handshakes_;
};

struct BatchOptions {
  // Items handed to the backend per call; each chunk is persisted before the
  // next starts so a failure keeps earlier work.
  std::size_t chunk_size = 64;
  // A timed-out chunk is retried this many times after a backend reset.
  int timeout_retries = 1;
};

struct BatchReject {
  std::size_t index = 0;  // position in the input list
  ScoreFailure failure;
};

struct BatchResult {
  // One slot per input item; empty where the backend rejected the item.
  std::vector<std::optional<ScoreRecord>> records;
  std::vector<BatchReject> rejects;
  std::size_t cache_hits = 0;
  std::size_t requested = 0;
};

// Scores `items` (all from the dataset with `source_hash`) in input order.
// Cached records are returned without contacting the backend. Per-item
// failures (OOV, internal) are returned as rejects and never cached; the first
// transport/malformed/timeout fault is thrown after earlier chunks have been
// persisted.
BatchResult score_batch(Backend& backend, std::span<const StimulusItem> items,
                        const std::string& source_hash, ScoreCache& cache,
                        const BatchOptions& opts = {});

}  // namespace probe
