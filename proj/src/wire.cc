#include "probe/wire.h"

#include <cmath>

namespace probe::wire {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw ScorerError(ScoreErrorKind::kMalformed, "malformed backend response: " + why);
}

json parse_line(std::string_view line) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) malformed("not a JSON object");
  return j;
}

}  // namespace

std::string encode_request(const StimulusItem& item) {
  json j = {{"id", item.id},
            {"text", item.sentence_template},
            {"candidates", {item.correct_form, item.wrong_form}}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string encode_hello() { return R"({"op":"hello"})"; }

std::string response_id(std::string_view line) {
  auto j = parse_line(line);
  auto it = j.find("id");
  if (it == j.end() || !it->is_string()) malformed("missing id");
  return it->get<std::string>();
}

Response decode_response(std::string_view line, const StimulusItem& item,
                         const std::string& scorer_id) {
  auto j = parse_line(line);
  Response r;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) malformed("missing id");
  r.id = id->get<std::string>();

  if (auto err = j.find("error"); err != j.end()) {
    if (!err->is_object()) malformed("error is not an object");
    const auto kind = err->value("kind", std::string());
    ScoreFailure f;
    if (kind == "oov") {
      f.kind = ScoreErrorKind::kOov;
    } else if (kind == "internal") {
      f.kind = ScoreErrorKind::kInternal;
    } else {
      malformed("unknown error kind '" + kind + "'");
    }
    f.detail = err->value("detail", std::string());
    r.outcome = std::move(f);
    return r;
  }

  auto lp = j.find("logprobs");
  if (lp == j.end() || !lp->is_array() || lp->size() != 2 || !(*lp)[0].is_number() ||
      !(*lp)[1].is_number()) {
    malformed("logprobs must be an array of two numbers");
  }
  const double lp_correct = (*lp)[0].get<double>();
  const double lp_wrong = (*lp)[1].get<double>();
  if (!std::isfinite(lp_correct) || !std::isfinite(lp_wrong) || lp_correct > 0.0 ||
      lp_wrong > 0.0) {
    // -inf is a legitimate log(0) but JSON cannot carry it; finite only.
    malformed("logprobs must be finite and <= 0");
  }
  ScoreRecord rec;
  rec.item_id = item.id;
  rec.scorer_id = scorer_id;
  rec.p_correct = std::exp(lp_correct);
  rec.p_wrong = std::exp(lp_wrong);
  rec.meta = {{"logprobs", {lp_correct, lp_wrong}}};
  if (auto v = record_violation(rec); !v.empty()) malformed(v);
  r.outcome = std::move(rec);
  return r;
}

Handshake decode_handshake(std::string_view line) {
  auto j = parse_line(line);
  try {
    return Handshake::from_json(j);
  } catch (const json::exception& e) {
    malformed(std::string("bad handshake: ") + e.what());
  }
}

}  // namespace probe::wire
