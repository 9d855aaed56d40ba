#include "probe/scorer.h"

#include <cmath>

namespace probe {

using nlohmann::json;

std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::kUniform: return "uniform";
    case ScorerKind::kTable: return "table";
    case ScorerKind::kFrequency: return "frequency";
    case ScorerKind::kExternal: return "external";
  }
  return "?";
}

ScorerKind parse_scorer_kind(std::string_view s) {
  if (s == "uniform") return ScorerKind::kUniform;
  if (s == "table") return ScorerKind::kTable;
  if (s == "frequency") return ScorerKind::kFrequency;
  if (s == "external") return ScorerKind::kExternal;
  throw ConfigError("unknown scorer kind '" + std::string(s) + "'");
}

std::string_view to_string(ScoreErrorKind k) {
  switch (k) {
    case ScoreErrorKind::kOov: return "oov";
    case ScoreErrorKind::kInternal: return "internal";
    case ScoreErrorKind::kTransport: return "transport";
    case ScoreErrorKind::kMalformed: return "malformed";
    case ScoreErrorKind::kTimeout: return "timeout";
  }
  return "?";
}

void ScorerDescriptor::validate() const {
  if (scorer_id.empty()) throw ConfigError("scorer_id must be non-empty");
  const int transports = (command ? 1 : 0) + (endpoint ? 1 : 0);
  if (kind == ScorerKind::kExternal && transports != 1) {
    throw ConfigError("external scorer '" + scorer_id +
                      "' needs exactly one of command or endpoint");
  }
  if (kind != ScorerKind::kExternal && transports != 0) {
    throw ConfigError("built-in scorer '" + scorer_id + "' cannot carry a transport");
  }
  if (!params.is_object()) throw ConfigError("scorer '" + scorer_id + "' params must be an object");
}

json ScorerDescriptor::to_json() const {
  json j = {{"scorer_id", scorer_id}, {"kind", to_string(kind)}, {"params", params}};
  if (command) j["command"] = *command;
  if (endpoint) j["endpoint"] = *endpoint;
  return j;
}

ScorerDescriptor ScorerDescriptor::from_json(const json& j) {
  ScorerDescriptor d;
  try {
    d.scorer_id = j.at("scorer_id").get<std::string>();
    d.kind = parse_scorer_kind(j.at("kind").get<std::string>());
    if (j.contains("command")) d.command = j.at("command").get<std::string>();
    if (j.contains("endpoint")) d.endpoint = j.at("endpoint").get<std::string>();
    d.params = j.value("params", json::object());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scorer descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

std::string record_violation(const ScoreRecord& r) {
  auto in_unit = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!in_unit(r.p_correct)) return "p_correct outside [0,1]";
  if (!in_unit(r.p_wrong)) return "p_wrong outside [0,1]";
  if (r.p_correct + r.p_wrong > 1.0 + kMassEpsilon) return "p_correct + p_wrong exceeds 1";
  return {};
}

json record_to_json(const ScoreRecord& r) {
  json j = {{"item_id", r.item_id},
            {"scorer_id", r.scorer_id},
            {"p_correct", r.p_correct},
            {"p_wrong", r.p_wrong}};
  if (!r.meta.is_null()) j["meta"] = r.meta;
  return j;
}

ScoreRecord record_from_json(const json& j) {
  ScoreRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.scorer_id = j.at("scorer_id").get<std::string>();
  r.p_correct = j.at("p_correct").get<double>();
  r.p_wrong = j.at("p_wrong").get<double>();
  if (auto it = j.find("meta"); it != j.end()) r.meta = *it;
  return r;
}

json Handshake::to_json() const {
  return {{"name", name}, {"deterministic", deterministic}, {"mask_token", mask_token}};
}

Handshake Handshake::from_json(const json& j) {
  return {j.at("name").get<std::string>(), j.at("deterministic").get<bool>(),
          j.at("mask_token").get<std::string>()};
}

ScoreRecord score_item(Backend& backend, const StimulusItem& item) {
  const StimulusItem* one[] = {&item};
  auto outcomes = backend.score(one);
  if (outcomes.size() != 1) {
    throw ScorerError(ScoreErrorKind::kMalformed, "backend returned wrong number of outcomes");
  }
  if (auto* failure = std::get_if<ScoreFailure>(&outcomes.front())) {
    if (failure->kind == ScoreErrorKind::kOov) {
      throw ScorerError(ScoreErrorKind::kOov,
                        "out-of-vocabulary candidate for item '" + item.id + "': " + failure->detail);
    }
    throw ScorerError(failure->kind, "item '" + item.id + "': " + failure->detail);
  }
  return std::get<ScoreRecord>(std::move(outcomes.front()));
}

ScoreRecord score_item(const ScorerDescriptor& d, const StimulusItem& item) {
  auto backend = make_backend(d);
  return score_item(*backend, item);
}

ScorerDescriptor frequency_scorer_from_counts(const std::map<std::string, std::uint64_t>& counts,
                                              std::string scorer_id) {
  if (counts.empty()) throw ConfigError("frequency scorer needs at least one count");
  std::uint64_t total = 0;
  for (const auto& [word, n] : counts) total += n;
  if (total == 0) throw ConfigError("frequency scorer counts are all zero");
  ScorerDescriptor d;
  d.scorer_id = std::move(scorer_id);
  d.kind = ScorerKind::kFrequency;
  d.params = {{"counts", counts}};
  return d;
}

}  // namespace probe
