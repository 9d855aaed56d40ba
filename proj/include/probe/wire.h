#pragma once

// JSON-lines wire protocol shared by the stdio and HTTP transports.
//
//   request:   {"id": "...", "text": "...{MASK}...", "candidates": ["<correct>", "<wrong>"]}
//   response:  {"id": "...", "logprobs": [lp_correct, lp_wrong]}
//           |  {"id": "...", "error": {"kind": "oov"|"internal", "detail": "..."}}
//   handshake: {"op": "hello"} -> {"name": "...", "deterministic": bool, "mask_token": "..."}

#include <string>
#include <string_view>

#include "probe/dataset.h"
#include "probe/scorer.h"

namespace probe::wire {

std::string encode_request(const StimulusItem& item);
std::string encode_hello();

struct Response {
  std::string id;
  ScoreOutcome outcome;
};

// Converts logprobs to probabilities and checks them. Throws ScorerError
// (kMalformed) on anything that is not a well-formed response line.
Response decode_response(std::string_view line, const StimulusItem& item,
                         const std::string& scorer_id);
// Only extracts the id; used to match out-of-order responses.
std::string response_id(std::string_view line);
Handshake decode_handshake(std::string_view line);

}  // namespace probe::wire
