#pragma once

// Probability scoring over minimal pairs. A Backend turns stimulus items into
// (p_correct, p_wrong) pairs; built-in kinds are computed in process, external
// kinds speak the JSON-lines wire protocol over a subprocess or HTTP.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/dataset.h"
#include "probe/error.h"

namespace probe {

enum class ScorerKind : std::uint8_t { kUniform, kTable, kFrequency, kExternal };

std::string_view to_string(ScorerKind k);
ScorerKind parse_scorer_kind(std::string_view s);

struct ScorerDescriptor {
  std::string scorer_id;
  ScorerKind kind = ScorerKind::kUniform;
  // External transports; exactly one is set for kExternal, none otherwise.
  std::optional<std::string> command;
  std::optional<std::string> endpoint;
  nlohmann::json params = nlohmann::json::object();

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
  nlohmann::json to_json() const;
  static ScorerDescriptor from_json(const nlohmann::json& j);

  friend bool operator==(const ScorerDescriptor&, const ScorerDescriptor&) = default;
};

// Uniform tolerance on p_correct + p_wrong <= 1.
inline constexpr double kMassEpsilon = 1e-9;

struct ScoreRecord {
  std::string item_id;
  std::string scorer_id;
  double p_correct = 0.0;
  double p_wrong = 0.0;
  nlohmann::json meta;  // null when absent

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

// Empty when the record satisfies the probability invariants.
std::string record_violation(const ScoreRecord& r);
nlohmann::json record_to_json(const ScoreRecord& r);
ScoreRecord record_from_json(const nlohmann::json& j);

enum class ScoreErrorKind : std::uint8_t { kOov, kInternal, kTransport, kMalformed, kTimeout };
std::string_view to_string(ScoreErrorKind k);

class ScorerError : public Error {
 public:
  ScorerError(ScoreErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  ScoreErrorKind kind() const { return kind_; }

 private:
  ScoreErrorKind kind_;
};

// Per-item failure reported by a backend without breaking the batch.
struct ScoreFailure {
  ScoreErrorKind kind = ScoreErrorKind::kInternal;
  std::string detail;

  friend bool operator==(const ScoreFailure&, const ScoreFailure&) = default;
};

using ScoreOutcome = std::variant<ScoreRecord, ScoreFailure>;

struct Handshake {
  std::string name;
  bool deterministic = true;
  std::string mask_token;

  nlohmann::json to_json() const;
  static Handshake from_json(const nlohmann::json& j);
  friend bool operator==(const Handshake&, const Handshake&) = default;
};

struct BackendOptions {
  std::size_t max_in_flight = 8;
  std::chrono::milliseconds timeout{120000};
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual const std::string& scorer_id() const = 0;
  virtual Handshake handshake() = 0;
  // One outcome per item, in input order. Transport-level faults throw
  // ScorerError; per-item problems (OOV etc.) come back as ScoreFailure.
  virtual std::vector<ScoreOutcome> score(std::span<const StimulusItem* const> items) = 0;
  // Drops any connection or process state; the next call starts fresh.
  virtual void reset() {}

  // Number of items sent to score() so far.
  std::size_t requests() const { return requests_.load(); }

 protected:
  void count_requests(std::size_t n) { requests_ += n; }

 private:
  std::atomic<std::size_t> requests_{0};
};

std::unique_ptr<Backend> make_backend(const ScorerDescriptor& d, const BackendOptions& opts = {});

// Scores a single item. A per-item failure is raised as ScorerError; an
// OOV failure names the offending form.
ScoreRecord score_item(Backend& backend, const StimulusItem& item);
ScoreRecord score_item(const ScorerDescriptor& d, const StimulusItem& item);

// Context-free unigram scorer: p(w) = count(w) / sum of counts.
ScorerDescriptor frequency_scorer_from_counts(const std::map<std::string, std::uint64_t>& counts,
                                              std::string scorer_id = "frequency");

}  // namespace probe
