#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "backends_internal.h"

namespace probe::detail {

using nlohmann::json;

namespace {

class BuiltinBackend : public Backend {
 public:
  explicit BuiltinBackend(std::string scorer_id) : scorer_id_(std::move(scorer_id)) {}

  const std::string& scorer_id() const override { return scorer_id_; }
  Handshake handshake() override { return {scorer_id_, true, std::string(kMask)}; }

  std::vector<ScoreOutcome> score(std::span<const StimulusItem* const> items) override {
    count_requests(items.size());
    std::vector<ScoreOutcome> out;
    out.reserve(items.size());
    for (const auto* item : items) out.push_back(score_one(*item));
    return out;
  }

 protected:
  virtual ScoreOutcome score_one(const StimulusItem& item) const = 0;

  ScoreRecord make_record(const StimulusItem& item, double pc, double pw) const {
    return {item.id, scorer_id_, pc, pw, nullptr};
  }

 private:
  std::string scorer_id_;
};

std::set<std::string> read_word_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file '" + path + "'");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

class UniformBackend final : public BuiltinBackend {
 public:
  explicit UniformBackend(const ScorerDescriptor& d) : BuiltinBackend(d.scorer_id) {
    const auto& p = d.params;
    if (p.contains("vocab")) {
      vocab_ = p.at("vocab").get<std::set<std::string>>();
      size_ = vocab_.size();
    } else if (p.contains("vocab_file")) {
      vocab_ = read_word_file(p.at("vocab_file").get<std::string>());
      size_ = vocab_.size();
    } else if (p.contains("vocab_size")) {
      size_ = p.at("vocab_size").get<std::uint64_t>();
    } else {
      throw ConfigError("uniform scorer '" + d.scorer_id + "' needs vocab, vocab_file or vocab_size");
    }
    // With one word the pair would carry mass 2.
    if (size_ < 2) throw ConfigError("uniform scorer '" + d.scorer_id + "' needs a vocab of >= 2");
  }

 protected:
  ScoreOutcome score_one(const StimulusItem& item) const override {
    if (!vocab_.empty()) {
      for (const auto* form : {&item.correct_form, &item.wrong_form}) {
        if (!vocab_.contains(*form)) return ScoreFailure{ScoreErrorKind::kOov, *form};
      }
    }
    const double p = 1.0 / static_cast<double>(size_);
    return make_record(item, p, p);
  }

 private:
  std::set<std::string> vocab_;
  std::uint64_t size_ = 0;
};

using Pair = std::pair<double, double>;

Pair pair_from_json(const json& v, const std::string& what) {
  Pair p;
  if (v.is_array() && v.size() == 2) {
    p = {v[0].get<double>(), v[1].get<double>()};
  } else if (v.is_object() && v.contains("logprobs")) {
    const auto& lp = v.at("logprobs");
    p = {std::exp(lp.at(0).get<double>()), std::exp(lp.at(1).get<double>())};
  } else if (v.is_object()) {
    p = {v.at("p_correct").get<double>(), v.at("p_wrong").get<double>()};
  } else {
    throw ConfigError("table entry " + what + " must be [p_correct, p_wrong] or an object");
  }
  ScoreRecord probe_rec{what, "", p.first, p.second, nullptr};
  if (auto v2 = record_violation(probe_rec); !v2.empty()) {
    throw ConfigError("table entry " + what + ": " + v2);
  }
  return p;
}

class TableBackend final : public BuiltinBackend {
 public:
  explicit TableBackend(const ScorerDescriptor& d) : BuiltinBackend(d.scorer_id) {
    const auto& p = d.params;
    try {
      if (p.contains("file")) load_file(p.at("file").get<std::string>());
      if (p.contains("entries")) {
        for (const auto& [id, v] : p.at("entries").items()) by_id_[id] = pair_from_json(v, id);
      }
      if (p.contains("by_condition")) {
        for (const auto& [label, v] : p.at("by_condition").items()) {
          by_cell_[label] = pair_from_json(v, label);
        }
      }
      if (p.contains("default")) fallback_ = pair_from_json(p.at("default"), "default");
    } catch (const json::exception& e) {
      throw ConfigError("table scorer '" + d.scorer_id + "': " + e.what());
    }
  }

 protected:
  ScoreOutcome score_one(const StimulusItem& item) const override {
    if (auto it = by_id_.find(item.id); it != by_id_.end()) {
      return make_record(item, it->second.first, it->second.second);
    }
    const auto& c = item.condition;
    if (auto it = by_cell_.find(cell_label({c.dependency, c.length, c.attractor}));
        it != by_cell_.end()) {
      return make_record(item, it->second.first, it->second.second);
    }
    if (fallback_) return make_record(item, fallback_->first, fallback_->second);
    return ScoreFailure{ScoreErrorKind::kInternal, "no table entry for item '" + item.id + "'"};
  }

 private:
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open score table '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto j = json::parse(line);
      const auto id = j.at("id").get<std::string>();
      by_id_[id] = pair_from_json(j, id);
    }
  }

  std::unordered_map<std::string, Pair> by_id_;
  std::unordered_map<std::string, Pair> by_cell_;
  std::optional<Pair> fallback_;
};

class FrequencyBackend final : public BuiltinBackend {
 public:
  explicit FrequencyBackend(const ScorerDescriptor& d) : BuiltinBackend(d.scorer_id) {
    if (!d.params.contains("counts") || !d.params.at("counts").is_object() ||
        d.params.at("counts").empty()) {
      throw ConfigError("frequency scorer '" + d.scorer_id + "' needs a non-empty counts map");
    }
    for (const auto& [word, n] : d.params.at("counts").items()) {
      if (!n.is_number_unsigned() && !(n.is_number_integer() && n.get<std::int64_t>() >= 0)) {
        throw ConfigError("frequency count for '" + word + "' must be a nonnegative integer");
      }
      counts_[word] = n.get<std::uint64_t>();
      total_ += counts_[word];
    }
    if (total_ == 0) throw ConfigError("frequency scorer '" + d.scorer_id + "' counts are all zero");
  }

 protected:
  ScoreOutcome score_one(const StimulusItem& item) const override {
    auto c = counts_.find(item.correct_form);
    if (c == counts_.end()) return ScoreFailure{ScoreErrorKind::kOov, item.correct_form};
    auto w = counts_.find(item.wrong_form);
    if (w == counts_.end()) return ScoreFailure{ScoreErrorKind::kOov, item.wrong_form};
    const auto total = static_cast<double>(total_);
    return make_record(item, static_cast<double>(c->second) / total,
                       static_cast<double>(w->second) / total);
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace

std::unique_ptr<Backend> make_uniform_backend(const ScorerDescriptor& d) {
  return std::make_unique<UniformBackend>(d);
}
std::unique_ptr<Backend> make_table_backend(const ScorerDescriptor& d) {
  return std::make_unique<TableBackend>(d);
}
std::unique_ptr<Backend> make_frequency_backend(const ScorerDescriptor& d) {
  return std::make_unique<FrequencyBackend>(d);
}

}  // namespace probe::detail

namespace probe {

std::unique_ptr<Backend> make_backend(const ScorerDescriptor& d, const BackendOptions& opts) {
  d.validate();
  switch (d.kind) {
    case ScorerKind::kUniform: return detail::make_uniform_backend(d);
    case ScorerKind::kTable: return detail::make_table_backend(d);
    case ScorerKind::kFrequency: return detail::make_frequency_backend(d);
    case ScorerKind::kExternal:
      return d.command ? detail::make_process_backend(d, opts) : detail::make_http_backend(d, opts);
  }
  throw ConfigError("unsupported scorer kind");
}

}  // namespace probe
