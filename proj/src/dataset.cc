#include "probe/dataset.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "probe/digest.h"
#include "probe/error.h"

namespace probe {

using nlohmann::json;

std::string_view to_string(Dependency v) {
  return v == Dependency::kNounAdj ? "noun_adj" : "subj_verb";
}
std::string_view to_string(Length v) { return v == Length::kShort ? "short" : "long"; }
std::string_view to_string(Attractor v) {
  return v == Attractor::kAbsent ? "absent" : "present";
}
std::string_view to_string(Feature v) { return v == Feature::kGender ? "gender" : "number"; }
std::string_view to_string(TargetValue v) {
  switch (v) {
    case TargetValue::kMasculine: return "masculine";
    case TargetValue::kFeminine: return "feminine";
    case TargetValue::kSingular: return "singular";
    case TargetValue::kPlural: return "plural";
  }
  return "?";
}

namespace {

[[noreturn]] void unknown_label(std::string_view field, std::string_view s) {
  throw DatasetError("unknown " + std::string(field) + " value '" + std::string(s) + "'");
}

}  // namespace

Dependency parse_dependency(std::string_view s) {
  if (s == "noun_adj") return Dependency::kNounAdj;
  if (s == "subj_verb") return Dependency::kSubjVerb;
  unknown_label("dep", s);
}
Length parse_length(std::string_view s) {
  if (s == "short") return Length::kShort;
  if (s == "long") return Length::kLong;
  unknown_label("length", s);
}
Attractor parse_attractor(std::string_view s) {
  if (s == "absent") return Attractor::kAbsent;
  if (s == "present") return Attractor::kPresent;
  unknown_label("attr", s);
}
Feature parse_feature(std::string_view s) {
  if (s == "gender") return Feature::kGender;
  if (s == "number") return Feature::kNumber;
  unknown_label("feature", s);
}
TargetValue parse_target_value(std::string_view s) {
  if (s == "masculine") return TargetValue::kMasculine;
  if (s == "feminine") return TargetValue::kFeminine;
  if (s == "singular") return TargetValue::kSingular;
  if (s == "plural") return TargetValue::kPlural;
  unknown_label("value", s);
}

std::array<TargetValue, 2> values_of(Feature f) {
  if (f == Feature::kGender) return {TargetValue::kMasculine, TargetValue::kFeminine};
  return {TargetValue::kSingular, TargetValue::kPlural};
}

Feature feature_of(TargetValue v) {
  return (v == TargetValue::kMasculine || v == TargetValue::kFeminine) ? Feature::kGender
                                                                       : Feature::kNumber;
}

Feature feature_for(Dependency d) {
  return d == Dependency::kNounAdj ? Feature::kGender : Feature::kNumber;
}

std::string condition_violation(const Condition& c) {
  if (c.feature != feature_for(c.dependency)) {
    return std::string(to_string(c.dependency)) + " requires feature " +
           std::string(to_string(feature_for(c.dependency)));
  }
  if (feature_of(c.value) != c.feature) {
    return "value " + std::string(to_string(c.value)) + " does not belong to feature " +
           std::string(to_string(c.feature));
  }
  return {};
}

std::size_t cell_index(const Cell& c) {
  return static_cast<std::size_t>(c.dependency) * 4 + static_cast<std::size_t>(c.length) * 2 +
         static_cast<std::size_t>(c.attractor);
}

Cell cell_at(std::size_t index) {
  return Cell{static_cast<Dependency>(index / 4), static_cast<Length>((index / 2) % 2),
              static_cast<Attractor>(index % 2)};
}

std::string cell_label(const Cell& c) {
  return std::string(to_string(c.dependency)) + "/" + std::string(to_string(c.length)) + "/" +
         std::string(to_string(c.attractor));
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool is_word(std::string_view w) {
  return !w.empty() && std::none_of(w.begin(), w.end(), [](unsigned char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\v' || ch == '\f';
  });
}

constexpr std::array<std::string_view, 9> kRequiredKeys = {
    "id", "template", "correct", "wrong", "dep", "length", "attr", "feature", "value"};

}  // namespace

std::vector<std::string> item_violations(const StimulusItem& item) {
  std::vector<std::string> out;
  if (item.id.empty()) out.emplace_back("empty id");
  const auto masks = count_occurrences(item.sentence_template, kMask);
  if (masks == 0) out.emplace_back("template has no {MASK}");
  if (masks > 1) out.emplace_back("template has more than one {MASK}");
  if (!is_word(item.correct_form)) out.emplace_back("correct form empty or contains whitespace");
  if (!is_word(item.wrong_form)) out.emplace_back("wrong form empty or contains whitespace");
  if (item.correct_form == item.wrong_form) out.emplace_back("correct form equals wrong form");
  if (auto v = condition_violation(item.condition); !v.empty()) out.push_back(std::move(v));
  return out;
}

json item_to_json(const StimulusItem& item) {
  json j = item.extras.is_object() ? item.extras : json::object();
  j["id"] = item.id;
  j["template"] = item.sentence_template;
  j["correct"] = item.correct_form;
  j["wrong"] = item.wrong_form;
  j["dep"] = to_string(item.condition.dependency);
  j["length"] = to_string(item.condition.length);
  j["attr"] = to_string(item.condition.attractor);
  j["feature"] = to_string(item.condition.feature);
  j["value"] = to_string(item.condition.value);
  return j;
}

std::string serialize_dataset(const Dataset& d) {
  std::string out;
  for (const auto& item : d.items) {
    // nlohmann objects are std::map backed, so keys come out sorted.
    out += item_to_json(item).dump(-1, ' ', false, json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

std::string compute_source_hash(const std::vector<StimulusItem>& items) {
  Dataset tmp;
  tmp.items = items;
  return sha256_hex(serialize_dataset(tmp));
}

Dataset Dataset::from_items(std::string name, std::vector<StimulusItem> items) {
  Dataset d;
  d.name = std::move(name);
  d.items = std::move(items);
  d.source_hash = sha256_hex(serialize_dataset(d));
  return d;
}

namespace {

StimulusItem item_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError("record is not a JSON object");
  for (auto key : kRequiredKeys) {
    auto it = j.find(key);
    if (it == j.end()) throw DatasetError("missing key '" + std::string(key) + "'");
    if (!it->is_string()) throw DatasetError("key '" + std::string(key) + "' is not a string");
  }
  StimulusItem item;
  item.id = j.at("id").get<std::string>();
  item.sentence_template = j.at("template").get<std::string>();
  item.correct_form = j.at("correct").get<std::string>();
  item.wrong_form = j.at("wrong").get<std::string>();
  item.condition.dependency = parse_dependency(j.at("dep").get<std::string>());
  item.condition.length = parse_length(j.at("length").get<std::string>());
  item.condition.attractor = parse_attractor(j.at("attr").get<std::string>());
  item.condition.feature = parse_feature(j.at("feature").get<std::string>());
  item.condition.value = parse_target_value(j.at("value").get<std::string>());
  for (const auto& [key, value] : j.items()) {
    if (std::find(kRequiredKeys.begin(), kRequiredKeys.end(), key) == kRequiredKeys.end()) {
      item.extras[key] = value;
    }
  }
  return item;
}

}  // namespace

Dataset parse_dataset(std::istream& source, std::string name) {
  std::vector<StimulusItem> items;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = name + ":" + std::to_string(line_no) + ": ";
    StimulusItem item;
    try {
      item = item_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DatasetError(where + "malformed record: " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError(where + e.what());
    }
    if (auto v = item_violations(item); !v.empty()) {
      throw DatasetError(where + "item '" + item.id + "': " + v.front());
    }
    if (!seen.insert(item.id).second) {
      throw DatasetError(where + "duplicate id '" + item.id + "'");
    }
    items.push_back(std::move(item));
  }
  return Dataset::from_items(std::move(name), std::move(items));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  auto name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name.erase(0, slash + 1);
  if (auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name.erase(dot);
  return parse_dataset(in, name);
}

std::optional<double> FeatureBalance::marked_ratio() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(marked) / static_cast<double>(total);
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport r;
  r.item_count = d.items.size();
  std::unordered_set<std::string> seen;
  for (const auto& item : d.items) {
    const auto& c = item.condition;
    ++r.cell_counts[cell_index({c.dependency, c.length, c.attractor})];
    auto& balance = feature_of(c.value) == Feature::kGender ? r.gender : r.number;
    ++balance.total;
    if (c.value == values_of(feature_of(c.value))[0]) {
      ++balance.unmarked;
    } else {
      ++balance.marked;
    }
    for (auto& rule : item_violations(item)) r.violations.push_back({item.id, std::move(rule)});
    if (!seen.insert(item.id).second) r.violations.push_back({item.id, "duplicate id"});
  }
  return r;
}

Dataset filter_by_vocabulary(const Dataset& d, const std::set<std::string, std::less<>>& vocab) {
  std::vector<StimulusItem> kept;
  for (const auto& item : d.items) {
    if (vocab.contains(item.correct_form) && vocab.contains(item.wrong_form)) {
      kept.push_back(item);
    }
  }
  return Dataset::from_items(d.name, std::move(kept));
}

std::set<std::string, std::less<>> load_vocabulary(std::istream& in) {
  std::set<std::string, std::less<>> vocab;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    vocab.insert(line.substr(first, line.find_last_not_of(" \t\r") - first + 1));
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Fixture generation
// ---------------------------------------------------------------------------

FixtureSpec FixtureSpec::from_json(const json& j) {
  FixtureSpec s;
  if (j.value("lexicon", std::string()) == "builtin") {
    s = builtin(1);
  }
  auto value_field = [](const json& obj, const char* key, TargetValue fallback) {
    return obj.contains(key) ? parse_target_value(obj.at(key).get<std::string>()) : fallback;
  };
  try {
    if (j.contains("heads")) {
      s.heads.clear();
      for (const auto& h : j.at("heads")) {
        s.heads.push_back({h.at("text").get<std::string>(), h.at("rel").get<std::string>(),
                           value_field(h, "gender", TargetValue::kMasculine),
                           value_field(h, "number", TargetValue::kSingular)});
      }
    }
    if (j.contains("attractors")) {
      s.attractors.clear();
      for (const auto& a : j.at("attractors")) {
        s.attractors.push_back({a.at("text").get<std::string>(),
                                value_field(a, "gender", TargetValue::kFeminine),
                                value_field(a, "number", TargetValue::kSingular)});
      }
    }
    if (j.contains("short_spans")) s.short_spans = j.at("short_spans").get<std::vector<std::string>>();
    if (j.contains("long_spans")) s.long_spans = j.at("long_spans").get<std::vector<std::string>>();
    if (j.contains("adjectives")) {
      s.adjectives.clear();
      for (const auto& a : j.at("adjectives")) {
        s.adjectives.push_back(
            {a.at("masculine").get<std::string>(), a.at("feminine").get<std::string>()});
      }
    }
    if (j.contains("verbs")) {
      s.verbs.clear();
      for (const auto& v : j.at("verbs")) {
        s.verbs.push_back({v.at("singular").get<std::string>(), v.at("plural").get<std::string>(),
                           v.value("tail", std::string())});
      }
    }
    s.copula = j.value("copula", s.copula);
    s.per_cell = j.value("per_cell", s.per_cell);
    s.max_reuse = j.value("max_reuse", s.max_reuse);
    s.name = j.value("name", s.name);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("bad fixture spec: ") + e.what());
  }
  for (const auto& h : s.heads) {
    if (feature_of(h.gender) != Feature::kGender || feature_of(h.number) != Feature::kNumber) {
      throw DatasetError("fixture head '" + h.text + "' has mislabeled gender/number");
    }
  }
  for (const auto& a : s.attractors) {
    if (feature_of(a.gender) != Feature::kGender || feature_of(a.number) != Feature::kNumber) {
      throw DatasetError("fixture attractor '" + a.text + "' has mislabeled gender/number");
    }
  }
  return s;
}

FixtureSpec FixtureSpec::builtin(std::size_t per_cell) {
  using TV = TargetValue;
  FixtureSpec s;
  s.heads = {
      {"O neno", "que xogaba", TV::kMasculine, TV::kSingular},
      {"A nena", "que xogaba", TV::kFeminine, TV::kSingular},
      {"Os nenos", "que xogaban", TV::kMasculine, TV::kPlural},
      {"As nenas", "que xogaban", TV::kFeminine, TV::kPlural},
      {"O home", "que traballaba", TV::kMasculine, TV::kSingular},
      {"A muller", "que traballaba", TV::kFeminine, TV::kSingular},
      {"Os homes", "que traballaban", TV::kMasculine, TV::kPlural},
      {"As mulleres", "que traballaban", TV::kFeminine, TV::kPlural},
  };
  s.attractors = {
      {"coa nena", TV::kFeminine, TV::kSingular},
      {"co neno", TV::kMasculine, TV::kSingular},
      {"coa outra nena", TV::kFeminine, TV::kSingular},
      {"co outro neno", TV::kMasculine, TV::kSingular},
      {"cos outros nenos", TV::kMasculine, TV::kPlural},
      {"coas outras nenas", TV::kFeminine, TV::kPlural},
  };
  s.short_spans = {"onte alí", "onte á tarde"};
  s.long_spans = {"no parque inaugurado recentemente", "na praza restaurada o ano pasado"};
  s.adjectives = {{"alto", "alta"}, {"novo", "nova"}, {"cansado", "cansada"}};
  s.verbs = {{"aparece", "aparecen", "na televisión."},
             {"ten", "teñen", "fame."},
             {"canta", "cantan", "moi ben."}};
  s.per_cell = per_cell;
  return s;
}

namespace {

struct Draft {
  std::string sentence;
  std::string correct;
  std::string wrong;
};

TargetValue opposite(TargetValue v) {
  auto vals = values_of(feature_of(v));
  return vals[0] == v ? vals[1] : vals[0];
}

std::vector<Draft> enumerate_drafts(const FixtureSpec& s, const Cell& cell, TargetValue value) {
  std::vector<Draft> out;
  const auto& spans = cell.length == Length::kShort ? s.short_spans : s.long_spans;
  const bool gender = cell.dependency == Dependency::kNounAdj;

  std::vector<const FixtureSpec::AttractorPhrase*> attractors;
  if (cell.attractor == Attractor::kPresent) {
    for (const auto& a : s.attractors) {
      // The attractor mismatches the head on the tested feature.
      if ((gender ? a.gender : a.number) == opposite(value)) attractors.push_back(&a);
    }
  } else {
    attractors.push_back(nullptr);
  }

  for (const auto& head : s.heads) {
    // Noun-adjective frames use a singular copula, so only singular heads fit.
    if (gender && (head.gender != value || head.number != TargetValue::kSingular)) continue;
    if (!gender && head.number != value) continue;
    for (const auto& span : spans) {
      for (const auto* attr : attractors) {
        std::string prefix = head.text + " " + head.rel + " " + span;
        if (attr) prefix += " " + attr->text;
        if (gender) {
          for (const auto& adj : s.adjectives) {
            const bool masc = value == TargetValue::kMasculine;
            out.push_back({prefix + " " + s.copula + " " + std::string(kMask) + ".",
                           masc ? adj.masculine : adj.feminine, masc ? adj.feminine : adj.masculine});
          }
        } else {
          for (const auto& verb : s.verbs) {
            const bool sg = value == TargetValue::kSingular;
            std::string sentence = prefix + " " + std::string(kMask);
            if (!verb.tail.empty()) sentence += " " + verb.tail;
            out.push_back({std::move(sentence), sg ? verb.singular : verb.plural,
                           sg ? verb.plural : verb.singular});
          }
        }
      }
    }
  }
  return out;
}

// std::shuffle's use of the engine is implementation-defined; this keeps the
// permutation identical across standard libraries.
void portable_shuffle(std::vector<Draft>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng() % i]);
  }
}

}  // namespace

Dataset generate_fixture(const FixtureSpec& spec, std::uint64_t seed) {
  if (spec.max_reuse == 0 && spec.per_cell > 0) {
    throw DatasetError("fixture max_reuse must be at least 1");
  }
  // Alternate target values per feature so both halves stay balanced.
  std::array<std::size_t, 2> feature_counter{};
  std::vector<std::pair<std::size_t, TargetValue>> plan;  // (cell index, value)
  for (std::size_t c = 0; c < kCellCount; ++c) {
    const auto feature = feature_for(cell_at(c).dependency);
    for (std::size_t i = 0; i < spec.per_cell; ++i) {
      auto& counter = feature_counter[static_cast<std::size_t>(feature)];
      plan.emplace_back(c, values_of(feature)[counter++ % 2]);
    }
  }

  std::mt19937_64 rng(seed);
  std::map<std::pair<std::size_t, TargetValue>, std::vector<Draft>> pools;
  std::map<std::pair<std::size_t, TargetValue>, std::size_t> needed;
  for (const auto& key : plan) ++needed[key];
  for (const auto& [key, count] : needed) {
    auto pool = enumerate_drafts(spec, cell_at(key.first), key.second);
    if (count > pool.size() * spec.max_reuse) {
      throw DatasetError("fixture lexicon too small: cell " + cell_label(cell_at(key.first)) +
                         " value " + std::string(to_string(key.second)) + " needs " +
                         std::to_string(count) + " items but has " + std::to_string(pool.size()) +
                         " distinct combinations (max_reuse " + std::to_string(spec.max_reuse) +
                         ")");
    }
    portable_shuffle(pool, rng);
    pools.emplace(key, std::move(pool));
  }

  static constexpr std::array<std::string_view, 2> kDepTag = {"na", "sv"};
  std::map<std::pair<std::size_t, TargetValue>, std::size_t> used;
  std::vector<StimulusItem> items;
  items.reserve(plan.size());
  for (const auto& key : plan) {
    const auto cell = cell_at(key.first);
    const auto& pool = pools.at(key);
    const auto& draft = pool[used[key]++ % pool.size()];
    StimulusItem item;
    char id[32];
    std::snprintf(id, sizeof id, "%s_%c_%c_%04zu",
                  kDepTag[static_cast<std::size_t>(cell.dependency)].data(),
                  cell.length == Length::kShort ? 's' : 'l',
                  cell.attractor == Attractor::kAbsent ? 'n' : 'y', items.size() + 1);
    item.id = id;
    item.sentence_template = draft.sentence;
    item.correct_form = draft.correct;
    item.wrong_form = draft.wrong;
    item.condition = {cell.dependency, cell.length, cell.attractor, feature_for(cell.dependency),
                      key.second};
    items.push_back(std::move(item));
  }
  return Dataset::from_items(spec.name, std::move(items));
}

}  // namespace probe
