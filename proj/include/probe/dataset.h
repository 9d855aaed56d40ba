#pragma once

// Minimal-pair stimulus datasets: a closed 2x2x2 factorial condition model
// (dependency x length x attractor) plus the agreement feature under test.

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace probe {

enum class Dependency : std::uint8_t { kNounAdj, kSubjVerb };
enum class Length : std::uint8_t { kShort, kLong };
enum class Attractor : std::uint8_t { kAbsent, kPresent };
enum class Feature : std::uint8_t { kGender, kNumber };
enum class TargetValue : std::uint8_t { kMasculine, kFeminine, kSingular, kPlural };

std::string_view to_string(Dependency v);
std::string_view to_string(Length v);
std::string_view to_string(Attractor v);
std::string_view to_string(Feature v);
std::string_view to_string(TargetValue v);

// Throw DatasetError on labels outside the closed vocabulary.
Dependency parse_dependency(std::string_view s);
Length parse_length(std::string_view s);
Attractor parse_attractor(std::string_view s);
Feature parse_feature(std::string_view s);
TargetValue parse_target_value(std::string_view s);

// The two values an agreement feature ranges over, unmarked value first.
std::array<TargetValue, 2> values_of(Feature f);
Feature feature_of(TargetValue v);
// Feature the dependency is instantiated with (noun_adj: gender, subj_verb: number).
Feature feature_for(Dependency d);

struct Condition {
  Dependency dependency = Dependency::kNounAdj;
  Length length = Length::kShort;
  Attractor attractor = Attractor::kAbsent;
  Feature feature = Feature::kGender;
  TargetValue value = TargetValue::kMasculine;

  friend bool operator==(const Condition&, const Condition&) = default;
};

// Empty string when the condition is consistent; otherwise the violated rule.
std::string condition_violation(const Condition& c);

// One of the eight design cells, indexed dependency-major.
struct Cell {
  Dependency dependency;
  Length length;
  Attractor attractor;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};
inline constexpr std::size_t kCellCount = 8;
std::size_t cell_index(const Cell& c);
Cell cell_at(std::size_t index);
std::string cell_label(const Cell& c);

inline constexpr std::string_view kMask = "{MASK}";

struct StimulusItem {
  std::string id;
  std::string sentence_template;
  std::string correct_form;
  std::string wrong_form;
  Condition condition;
  // Unknown record keys, kept verbatim for round-tripping.
  nlohmann::json extras = nlohmann::json::object();

  friend bool operator==(const StimulusItem&, const StimulusItem&) = default;
};

// Rules an item can break; empty when the item is well-formed.
std::vector<std::string> item_violations(const StimulusItem& item);

struct Dataset {
  std::string name;
  std::vector<StimulusItem> items;
  std::string source_hash;

  // Builds a dataset and computes its hash. Performs no validation.
  static Dataset from_items(std::string name, std::vector<StimulusItem> items);
};

// Parses the JSON-lines stimulus format. Throws DatasetError with the
// offending line number.
Dataset parse_dataset(std::istream& source, std::string name);
Dataset load_dataset(const std::string& path);

// Canonical form: one record per line, keys sorted, '\n' terminated.
nlohmann::json item_to_json(const StimulusItem& item);
std::string serialize_dataset(const Dataset& d);
std::string compute_source_hash(const std::vector<StimulusItem>& items);

struct Violation {
  std::string item_id;
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct FeatureBalance {
  std::size_t total = 0;
  std::size_t unmarked = 0;  // masculine / singular
  std::size_t marked = 0;    // feminine / plural
  // Share of the marked value; nullopt when the feature has no items.
  std::optional<double> marked_ratio() const;
};

struct ValidationReport {
  std::size_t item_count = 0;
  std::array<std::size_t, kCellCount> cell_counts{};
  FeatureBalance gender;
  FeatureBalance number;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(Dependency d, Length l, Attractor a) const {
    return cell_counts[cell_index({d, l, a})];
  }
};

ValidationReport validate_dataset(const Dataset& d);

Dataset filter_by_vocabulary(const Dataset& d, const std::set<std::string, std::less<>>& vocab);
// One word per line; blank lines ignored.
std::set<std::string, std::less<>> load_vocabulary(std::istream& in);

// Lexicon for the synthetic fixture generator. Sentence frames follow the
// Galician examples: "<head> <rel> <span>[ <attractor>] é {MASK}." for
// noun-adjective items and "<head> <rel> <span>[ <attractor>] {MASK} <tail>"
// for subject-verb items.
struct FixtureSpec {
  struct Head {
    std::string text;  // determiner + noun, e.g. "O neno"
    std::string rel;   // relative clause verb agreeing with the head
    TargetValue gender = TargetValue::kMasculine;
    TargetValue number = TargetValue::kSingular;
  };
  struct AttractorPhrase {
    std::string text;  // e.g. "coa nena"
    TargetValue gender = TargetValue::kFeminine;
    TargetValue number = TargetValue::kSingular;
  };
  struct AdjectivePair {
    std::string masculine;
    std::string feminine;
  };
  struct VerbPair {
    std::string singular;
    std::string plural;
    std::string tail;  // material after the verb, e.g. "na televisión."
  };

  std::vector<Head> heads;
  std::vector<AttractorPhrase> attractors;
  std::vector<std::string> short_spans;
  std::vector<std::string> long_spans;
  std::vector<AdjectivePair> adjectives;
  std::vector<VerbPair> verbs;
  std::string copula = "é";
  std::size_t per_cell = 1;
  // How many times one distinct sentence/target combination may recur.
  std::size_t max_reuse = 1;
  std::string name = "fixture";

  static FixtureSpec from_json(const nlohmann::json& j);
  // Small built-in Galician lexicon covering all eight cells.
  static FixtureSpec builtin(std::size_t per_cell);
};

Dataset generate_fixture(const FixtureSpec& spec, std::uint64_t seed);

}  // namespace probe
