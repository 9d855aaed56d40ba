#include "probe/runner.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "probe/cache.h"
#include "probe/csv.h"
#include "probe/digest.h"
#include "probe/error.h"

namespace probe {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::uint64_t> step_range(std::uint64_t start, std::uint64_t stop, std::uint64_t every) {
  if (every == 0 || start == 0 || stop < start) {
    throw ConfigError("step range needs 0 < start <= stop and every > 0");
  }
  std::vector<std::uint64_t> steps;
  for (auto s = start; s <= stop; s += every) steps.push_back(s);
  return steps;
}

namespace {

void substitute_steps(std::string& s, const std::string& steps) {
  static constexpr std::string_view kToken = "{steps}";
  for (auto pos = s.find(kToken); pos != std::string::npos; pos = s.find(kToken, pos + steps.size())) {
    s.replace(pos, kToken.size(), steps);
  }
}

void substitute_steps(json& j, const std::string& steps) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    substitute_steps(s, steps);
    j = s;
  } else if (j.is_array() || j.is_object()) {
    for (auto& v : j) substitute_steps(v, steps);
  }
}

}  // namespace

ScorerDescriptor instantiate(const CheckpointFamily& family, std::uint64_t steps) {
  auto d = family.base;
  const auto text = std::to_string(steps);
  if (d.command) substitute_steps(*d.command, text);
  if (d.endpoint) substitute_steps(*d.endpoint, text);
  substitute_steps(d.params, text);
  d.scorer_id = family.base.scorer_id + "@" + text;
  return d;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

void resolve_params(json& params, const fs::path& base) {
  for (const char* key : {"file", "vocab_file"}) {
    if (params.contains(key) && params[key].is_string()) {
      params[key] = resolve(base, params[key].get<std::string>());
    }
  }
}

std::vector<std::uint64_t> parse_steps(const json& j) {
  if (j.is_array()) return j.get<std::vector<std::uint64_t>>();
  if (j.is_object()) {
    return step_range(j.at("start").get<std::uint64_t>(), j.at("stop").get<std::uint64_t>(),
                      j.at("every").get<std::uint64_t>());
  }
  throw ConfigError("steps must be a list or {start, stop, every}");
}

CheckpointFamily parse_family(const json& j, const fs::path& base) {
  CheckpointFamily f;
  f.base = ScorerDescriptor::from_json(j.at("base"));
  resolve_params(f.base.params, base);
  f.steps = parse_steps(j.at("steps"));
  return f;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  try {
    for (const auto& p : j.at("datasets")) cfg.datasets.push_back(resolve(base_dir, p.get<std::string>()));
    if (j.contains("vocab")) cfg.vocab = resolve(base_dir, j.at("vocab").get<std::string>());
    for (const auto& s : j.value("scorers", json::array())) {
      auto d = ScorerDescriptor::from_json(s);
      resolve_params(d.params, base_dir);
      cfg.scorers.push_back(std::move(d));
    }
    if (j.contains("checkpoint_family")) {
      cfg.families.push_back(parse_family(j.at("checkpoint_family"), base_dir));
    }
    for (const auto& f : j.value("checkpoint_families", json::array())) {
      cfg.families.push_back(parse_family(f, base_dir));
    }
    if (j.contains("dims")) {
      cfg.dims = parse_dims(j.at("dims").get<std::vector<std::string>>());
    }
    if (j.contains("cache_dir")) cfg.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    cfg.concurrency = j.value("concurrency", cfg.concurrency);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", cfg.timeout.count()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  } catch (const MetricError& e) {
    throw ConfigError(e.what());
  }
  if (const char* env = std::getenv("PROBE_CACHE_DIR"); env && *env) cfg.cache_dir = env;
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
  return from_json(j, path.parent_path());
}

void ExperimentConfig::validate(RunKind kind) const {
  if (datasets.empty()) throw ConfigError("config needs at least one dataset");
  if (kind == RunKind::kExperiment && scorers.empty()) {
    throw ConfigError("config needs at least one scorer");
  }
  if (kind == RunKind::kSweep && families.empty()) {
    throw ConfigError("sweep needs a checkpoint family");
  }
  std::set<std::string> ids;
  for (const auto& s : scorers) {
    s.validate();
    if (!ids.insert(s.scorer_id).second) throw ConfigError("duplicate scorer_id '" + s.scorer_id + "'");
  }
  for (const auto& f : families) {
    f.base.validate();
    if (!ids.insert(f.base.scorer_id).second) {
      throw ConfigError("duplicate scorer_id '" + f.base.scorer_id + "'");
    }
    if (f.steps.empty()) throw ConfigError("family '" + f.base.scorer_id + "' has no steps");
    for (std::size_t i = 0; i < f.steps.size(); ++i) {
      if (f.steps[i] == 0 || (i > 0 && f.steps[i] <= f.steps[i - 1])) {
        throw ConfigError("family '" + f.base.scorer_id +
                          "' steps must be strictly increasing positive integers");
      }
    }
  }
  if (concurrency == 0) throw ConfigError("concurrency must be at least 1");
}

json ExperimentConfig::canonical_json() const {
  json j;
  j["datasets"] = datasets;
  j["vocab"] = vocab ? json(*vocab) : json(nullptr);
  j["scorers"] = json::array();
  for (const auto& s : scorers) j["scorers"].push_back(s.to_json());
  j["checkpoint_families"] = json::array();
  for (const auto& f : families) {
    j["checkpoint_families"].push_back({{"base", f.base.to_json()}, {"steps", f.steps}});
  }
  j["dims"] = json::array();
  for (auto d : dims) j["dims"].push_back(to_string(d));
  j["seed"] = seed;
  return j;
}

std::string ExperimentConfig::digest(RunKind kind) const {
  return sha256_hex(std::string(kind == RunKind::kSweep ? "sweep" : "experiment") + "\n" +
                    canonical_json().dump());
}

// ---------------------------------------------------------------------------
// Attempts and learning curves
// ---------------------------------------------------------------------------

json Attempt::to_json() const {
  json j = {{"scorer", scorer_id},
            {"instance", instance_id},
            {"dataset", dataset},
            {"steps", steps ? json(*steps) : json(nullptr)},
            {"status", ok ? "ok" : "failed"},
            {"items", items},
            {"rows", rows},
            {"rejected_items", rejected_items}};
  if (!ok) j["error"] = error;
  return j;
}

Attempt Attempt::from_json(const json& j) {
  Attempt a;
  a.scorer_id = j.at("scorer").get<std::string>();
  a.instance_id = j.at("instance").get<std::string>();
  a.dataset = j.at("dataset").get<std::string>();
  if (!j.at("steps").is_null()) a.steps = j.at("steps").get<std::uint64_t>();
  a.ok = j.at("status").get<std::string>() == "ok";
  a.error = j.value("error", std::string());
  a.items = j.at("items").get<std::size_t>();
  a.rows = j.at("rows").get<std::size_t>();
  a.rejected_items = j.at("rejected_items").get<std::vector<std::string>>();
  return a;
}

bool ResultSet::has_failures() const {
  return std::any_of(attempts.begin(), attempts.end(), [](const Attempt& a) { return !a.ok; });
}

std::vector<CurvePoint> build_learning_curve(std::span<const MetricRow> rows,
                                             std::span<const Attempt> attempts,
                                             bool with_conditions) {
  std::map<std::string, std::set<std::uint64_t>> steps_by_scorer;
  for (const auto& a : attempts) {
    if (a.steps) steps_by_scorer[a.scorer_id].insert(*a.steps);
  }
  for (const auto& r : rows) {
    if (r.checkpoint_steps) steps_by_scorer[r.scorer_id].insert(*r.checkpoint_steps);
  }

  std::vector<Dim> dims = {Dim::kScorer, Dim::kCheckpoint, Dim::kDependency};
  if (with_conditions) {
    dims.push_back(Dim::kLength);
    dims.push_back(Dim::kAttractor);
  }
  std::vector<MetricRow> stepped;
  for (const auto& r : rows) {
    if (r.checkpoint_steps) stepped.push_back(r);
  }
  const auto summaries = aggregate(stepped, dims);

  // (dependency, length, attractor) ordinals; -1 when not split.
  using Series = std::tuple<int, int, int>;
  std::map<std::string, std::set<Series>> series_by_scorer;
  std::map<std::tuple<std::string, std::uint64_t, Series>, const GroupSummary*> lookup;
  for (const auto& s : summaries) {
    const auto& scorer = s.key[0].text;
    const auto steps = static_cast<std::uint64_t>(s.key[1].ordinal);
    Series series{static_cast<int>(s.key[2].ordinal), with_conditions ? static_cast<int>(s.key[3].ordinal) : -1,
                  with_conditions ? static_cast<int>(s.key[4].ordinal) : -1};
    series_by_scorer[scorer].insert(series);
    lookup[{scorer, steps, series}] = &s;
  }

  std::vector<CurvePoint> out;
  for (const auto& [scorer, steps] : steps_by_scorer) {
    for (auto step : steps) {
      for (const auto& series : series_by_scorer[scorer]) {
        const auto* s = [&]() -> const GroupSummary* {
          auto it = lookup.find({scorer, step, series});
          return it == lookup.end() ? nullptr : it->second;
        }();
        for (const char* metric : {"binary", "pd"}) {
          CurvePoint p;
          p.scorer_id = scorer;
          p.steps = step;
          p.dependency = static_cast<Dependency>(std::get<0>(series));
          if (std::get<1>(series) >= 0) p.length = static_cast<Length>(std::get<1>(series));
          if (std::get<2>(series) >= 0) p.attractor = static_cast<Attractor>(std::get<2>(series));
          p.metric = metric;
          if (s) {
            p.value = std::string_view(metric) == "binary" ? s->mean_binary : s->mean_pd;
            p.n = s->n;
          }
          out.push_back(std::move(p));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Single-instance guard per output directory.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) {
    const auto path = dir / ".probe.lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw ConfigError("cannot create lock file '" + path.string() + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw ConfigError("output directory '" + dir.string() + "' is locked by another run");
    }
  }
  ~OutputLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  int fd_ = -1;
};

void refuse_foreign_results(const fs::path& dir, const std::string& digest,
                            const json& canonical) {
  std::ifstream in(dir / "manifest.json");
  if (!in) return;
  auto existing = json::parse(in, nullptr, false);
  if (existing.is_discarded() || !existing.is_object()) {
    throw ConfigError("output directory '" + dir.string() + "' holds an unreadable manifest");
  }
  const auto old_digest = existing.value("config_digest", std::string());
  if (old_digest != digest) {
    throw ConfigError("output directory '" + dir.string() +
                      "' holds results of a different config (digest " + old_digest +
                      "); refusing to overwrite");
  }
  if (existing.value("config", json()) != canonical) {
    throw ConfigError("config digest collision in '" + dir.string() + "'; refusing to overwrite");
  }
}

std::vector<Dataset> load_datasets(const ExperimentConfig& cfg) {
  std::optional<std::set<std::string, std::less<>>> vocab;
  if (cfg.vocab) {
    std::ifstream in(*cfg.vocab);
    if (!in) throw ConfigError("cannot open vocabulary '" + *cfg.vocab + "'");
    vocab = load_vocabulary(in);
  }
  std::vector<Dataset> out;
  std::set<std::string> names;
  for (const auto& path : cfg.datasets) {
    auto d = load_dataset(path);
    if (vocab) d = filter_by_vocabulary(d, *vocab);
    if (!names.insert(d.name).second) throw ConfigError("two datasets are named '" + d.name + "'");
    out.push_back(std::move(d));
  }
  return out;
}

struct Scoring {
  ExperimentConfig const* cfg;
  ScoreCache cache;
  BackendFactory factory;
  ResultSet rs;
  json handshakes = json::object();

  BackendOptions options() const { return {cfg->concurrency, cfg->timeout}; }

  std::unique_ptr<Backend> backend_for(const ScorerDescriptor& d) {
    return factory ? factory(d, options()) : make_backend(d, options());
  }

  // Scores one dataset. Rows are only appended when the whole attempt works.
  Attempt attempt(Backend& backend, const Dataset& ds, const std::string& scorer_id,
                  std::optional<std::uint64_t> steps) {
    Attempt a;
    a.scorer_id = scorer_id;
    a.instance_id = backend.scorer_id();
    a.dataset = ds.name;
    a.steps = steps;
    a.items = ds.items.size();

    auto batch = score_batch(backend, ds.items, ds.source_hash, cache);
    rs.stats.cache_hits += batch.cache_hits;
    std::vector<ScoreRecord> records;
    records.reserve(ds.items.size());
    for (auto& r : batch.records) {
      if (r) records.push_back(std::move(*r));
    }
    for (const auto& reject : batch.rejects) a.rejected_items.push_back(ds.items[reject.index].id);
    auto mr = metric_rows(records, ds, steps);
    for (const auto& reject : mr.rejects) a.rejected_items.push_back(reject.item_id);
    for (auto& row : mr.rows) row.scorer_id = scorer_id;
    a.rows = mr.rows.size();
    rs.rows.insert(rs.rows.end(), std::make_move_iterator(mr.rows.begin()),
                   std::make_move_iterator(mr.rows.end()));
    return a;
  }

  void record_handshake(Backend& backend) {
    const auto& id = backend.scorer_id();
    auto h = cache.load_handshake(id);
    if (!h) {
      try {
        h = backend.handshake();
        cache.store_handshake(id, *h);
      } catch (const ScorerError&) {
        // Unreachable but cache-complete backends have no handshake to show.
      }
    }
    handshakes[id] = h ? h->to_json() : json(nullptr);
    rs.stats.backend_requests += backend.requests();
  }
};

json make_manifest(const ExperimentConfig& cfg, RunKind kind, const std::vector<Dataset>& datasets,
                   const ResultSet& rs, const json& handshakes) {
  json m;
  m["format"] = "probe-resultset/1";
  m["kind"] = kind == RunKind::kSweep ? "sweep" : "experiment";
  m["config_digest"] = cfg.digest(kind);
  m["config"] = cfg.canonical_json();
  m["dims"] = json::array();
  for (auto d : rs.dims) m["dims"].push_back(to_string(d));
  m["datasets"] = json::array();
  for (const auto& d : datasets) {
    m["datasets"].push_back({{"name", d.name}, {"source_hash", d.source_hash}, {"items", d.items.size()}});
  }
  m["handshakes"] = handshakes;
  m["attempts"] = json::array();
  std::size_t rejects = 0;
  for (const auto& a : rs.attempts) {
    m["attempts"].push_back(a.to_json());
    rejects += a.rejected_items.size();
  }
  m["row_count"] = rs.rows.size();
  m["reject_count"] = rejects;
  return m;
}

template <typename Body>
ResultSet run(const ExperimentConfig& cfg, RunKind kind, const BackendFactory& factory, Body body) {
  cfg.validate(kind);
  fs::create_directories(cfg.output_dir);
  OutputLock lock(cfg.output_dir);
  refuse_foreign_results(cfg.output_dir, cfg.digest(kind), cfg.canonical_json());

  const auto datasets = load_datasets(cfg);
  Scoring s{&cfg, ScoreCache(cfg.cache_dir), factory, {}, json::object()};
  s.rs.kind = kind;
  s.rs.stats.started_at = utc_now();
  body(s, datasets);
  s.rs.stats.finished_at = utc_now();
  s.rs.manifest = make_manifest(cfg, kind, datasets, s.rs, s.handshakes);
  persist_result_set(s.rs, cfg.output_dir);
  return std::move(s.rs);
}

}  // namespace

ResultSet run_experiment(const ExperimentConfig& cfg, const BackendFactory& factory) {
  return run(cfg, RunKind::kExperiment, factory, [&](Scoring& s, const std::vector<Dataset>& datasets) {
    s.rs.dims = cfg.dims;
    for (const auto& scorer : cfg.scorers) {
      auto backend = s.backend_for(scorer);
      for (const auto& ds : datasets) {
        s.rs.attempts.push_back(s.attempt(*backend, ds, scorer.scorer_id, std::nullopt));
      }
      s.record_handshake(*backend);
    }
    s.rs.summaries = aggregate(s.rs.rows, s.rs.dims);
  });
}

ResultSet sweep_checkpoints(const ExperimentConfig& cfg, const BackendFactory& factory) {
  return run(cfg, RunKind::kSweep, factory, [&](Scoring& s, const std::vector<Dataset>& datasets) {
    s.rs.dims = cfg.dims;
    if (std::find(s.rs.dims.begin(), s.rs.dims.end(), Dim::kCheckpoint) == s.rs.dims.end()) {
      auto at = std::find(s.rs.dims.begin(), s.rs.dims.end(), Dim::kScorer);
      s.rs.dims.insert(at == s.rs.dims.end() ? s.rs.dims.begin() : at + 1, Dim::kCheckpoint);
    }
    for (const auto& family : cfg.families) {
      for (auto step : family.steps) {
        const auto inst = instantiate(family, step);
        std::unique_ptr<Backend> backend;
        std::string setup_error;
        try {
          backend = s.backend_for(inst);
        } catch (const Error& e) {
          setup_error = e.what();
        }
        for (const auto& ds : datasets) {
          if (!backend) {
            Attempt a{family.base.scorer_id, inst.scorer_id, ds.name, step, false, setup_error,
                      ds.items.size(), 0, {}};
            s.rs.attempts.push_back(std::move(a));
            continue;
          }
          try {
            s.rs.attempts.push_back(s.attempt(*backend, ds, family.base.scorer_id, step));
          } catch (const Error& e) {
            Attempt a{family.base.scorer_id, inst.scorer_id, ds.name, step, false, e.what(),
                      ds.items.size(), 0, {}};
            s.rs.attempts.push_back(std::move(a));
          }
        }
        if (backend) s.record_handshake(*backend);
      }
    }
    s.rs.summaries = aggregate(s.rs.rows, s.rs.dims);
    s.rs.curve = build_learning_curve(s.rs.rows, s.rs.attempts, /*with_conditions=*/true);
  });
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

std::string optional_steps(const std::optional<std::uint64_t>& s) {
  return s ? std::to_string(*s) : std::string();
}

void write_atomically(const fs::path& path, const std::string& content) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr std::string_view kRowsHeader =
    "dataset,item_id,scorer,checkpoint,dependency,length,attractor,feature,value,binary,pd";

}  // namespace

std::string rows_csv(std::span<const MetricRow> rows) {
  std::string out(kRowsHeader);
  out += '\n';
  for (const auto& r : rows) {
    const auto& c = r.condition;
    out += csv::join({r.dataset, r.item_id, r.scorer_id, optional_steps(r.checkpoint_steps),
                      std::string(to_string(c.dependency)), std::string(to_string(c.length)),
                      std::string(to_string(c.attractor)), std::string(to_string(c.feature)),
                      std::string(to_string(c.value)), std::to_string(r.binary), csv::exact(r.pd)});
    out += '\n';
  }
  return out;
}

std::string summaries_csv(std::span<const GroupSummary> summaries, std::span<const Dim> dims) {
  std::vector<std::string> header;
  for (auto d : dims) header.emplace_back(to_string(d));
  header.insert(header.end(), {"n", "mean_binary", "mean_pd"});
  std::string out = csv::join(header) + "\n";
  for (const auto& s : summaries) {
    std::vector<std::string> fields;
    for (const auto& part : s.key) fields.push_back(part.text);
    fields.push_back(std::to_string(s.n));
    fields.push_back(csv::exact(s.mean_binary));
    fields.push_back(csv::exact(s.mean_pd));
    out += csv::join(fields) + "\n";
  }
  return out;
}

std::string curve_csv(std::span<const CurvePoint> curve) {
  std::string out = "scorer,steps,dependency,length,attractor,metric,value\n";
  for (const auto& p : curve) {
    out += csv::join({p.scorer_id, std::to_string(p.steps), std::string(to_string(p.dependency)),
                      p.length ? std::string(to_string(*p.length)) : "",
                      p.attractor ? std::string(to_string(*p.attractor)) : "", p.metric,
                      p.value ? csv::exact(*p.value) : ""});
    out += '\n';
  }
  return out;
}

void persist_result_set(const ResultSet& rs, const fs::path& dir) {
  fs::create_directories(dir);
  write_atomically(dir / "rows.csv", rows_csv(rs.rows));
  write_atomically(dir / "summaries.csv", summaries_csv(rs.summaries, rs.dims));
  if (rs.kind == RunKind::kSweep) {
    write_atomically(dir / "learning_curve.csv", curve_csv(rs.curve));
  } else {
    fs::remove(dir / "learning_curve.csv");
  }
  json stats = {{"cache_hits", rs.stats.cache_hits},
                {"backend_requests", rs.stats.backend_requests},
                {"started_at", rs.stats.started_at},
                {"finished_at", rs.stats.finished_at}};
  write_atomically(dir / "run_stats.json", stats.dump(2) + "\n");
  // Written last: a manifest marks a complete ResultSet.
  write_atomically(dir / "manifest.json", rs.manifest.dump(2) + "\n");
}

ResultSet load_result_set(const fs::path& dir) {
  ResultSet rs;
  auto manifest = json::parse(read_file(dir / "manifest.json"), nullptr, false);
  if (manifest.is_discarded()) throw ConfigError("unreadable manifest in '" + dir.string() + "'");
  try {
    rs.kind = manifest.at("kind").get<std::string>() == "sweep" ? RunKind::kSweep : RunKind::kExperiment;
    rs.dims = parse_dims(manifest.at("dims").get<std::vector<std::string>>());
    for (const auto& a : manifest.at("attempts")) rs.attempts.push_back(Attempt::from_json(a));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
  rs.manifest = std::move(manifest);

  std::istringstream rows(read_file(dir / "rows.csv"));
  std::string line;
  std::getline(rows, line);
  if (line != kRowsHeader) throw ConfigError("rows.csv has an unexpected header");
  std::size_t line_no = 1;
  while (std::getline(rows, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 11) {
      throw ConfigError("rows.csv line " + std::to_string(line_no) + ": expected 11 fields");
    }
    try {
      MetricRow r;
      r.dataset = f[0];
      r.item_id = f[1];
      r.scorer_id = f[2];
      if (!f[3].empty()) r.checkpoint_steps = std::stoull(f[3]);
      r.condition = {parse_dependency(f[4]), parse_length(f[5]), parse_attractor(f[6]),
                     parse_feature(f[7]), parse_target_value(f[8])};
      r.binary = std::stoi(f[9]);
      r.pd = csv::parse_double(f[10]);
      rs.rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ConfigError("rows.csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  rs.summaries = aggregate(rs.rows, rs.dims);
  if (rs.kind == RunKind::kSweep) rs.curve = build_learning_curve(rs.rows, rs.attempts, true);

  std::ifstream stats_in(dir / "run_stats.json");
  if (stats_in) {
    auto stats = json::parse(stats_in, nullptr, false);
    if (stats.is_object()) {
      rs.stats.cache_hits = stats.value("cache_hits", std::size_t{0});
      rs.stats.backend_requests = stats.value("backend_requests", std::size_t{0});
      rs.stats.started_at = stats.value("started_at", std::string());
      rs.stats.finished_at = stats.value("finished_at", std::string());
    }
  }
  return rs;
}

}  // namespace probe
