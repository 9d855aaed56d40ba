// Scorer reached over HTTP: every wire-protocol line is one POST to /score.

#include <httplib.h>

#include <mutex>
#include <thread>

#include "backends_internal.h"
#include "probe/wire.h"

namespace probe::detail {

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  Endpoint e;
  e.scheme_host_port = url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  if (prefix.size() >= 6 && prefix.compare(prefix.size() - 6, 6, "/score") == 0) {
    prefix.erase(prefix.size() - 6);
  }
  e.path = prefix + "/score";
  return e;
}

class HttpBackend final : public Backend {
 public:
  HttpBackend(const ScorerDescriptor& d, const BackendOptions& opts)
      : scorer_id_(d.scorer_id), endpoint_(split_endpoint(*d.endpoint)), opts_(opts) {}

  const std::string& scorer_id() const override { return scorer_id_; }

  Handshake handshake() override {
    std::lock_guard lock(mu_);
    if (!handshake_) handshake_ = wire::decode_handshake(post(wire::encode_hello()));
    return *handshake_;
  }

  std::vector<ScoreOutcome> score(std::span<const StimulusItem* const> items) override {
    std::vector<ScoreOutcome> out(items.size());
    if (items.empty()) return out;
    count_requests(items.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
      while (!stop.load()) {
        const auto i = next.fetch_add(1);
        if (i >= items.size()) return;
        try {
          const auto body = post(wire::encode_request(*items[i]));
          auto response = wire::decode_response(body, *items[i], scorer_id_);
          if (response.id != items[i]->id) {
            throw ScorerError(ScoreErrorKind::kMalformed,
                              "malformed backend response: id mismatch '" + response.id + "'");
          }
          out[i] = std::move(response.outcome);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
        }
      }
    };
    const auto n_threads = std::min(std::max<std::size_t>(1, opts_.max_in_flight), items.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
  }

 private:
  std::string post(const std::string& body) const {
    httplib::Client client(endpoint_.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(endpoint_.path, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const auto kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                            ? ScoreErrorKind::kTimeout
                            : ScoreErrorKind::kTransport;
      throw ScorerError(kind, "HTTP scorer '" + scorer_id_ + "': " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw ScorerError(ScoreErrorKind::kTransport, "HTTP scorer '" + scorer_id_ + "' returned status " +
                                                        std::to_string(res->status));
    }
    auto line = res->body;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    return line;
  }

  std::string scorer_id_;
  Endpoint endpoint_;
  BackendOptions opts_;
  std::mutex mu_;
  std::optional<Handshake> handshake_;
};

}  // namespace

std::unique_ptr<Backend> make_http_backend(const ScorerDescriptor& d, const BackendOptions& opts) {
  return std::make_unique<HttpBackend>(d, opts);
}

}  // namespace probe::detail
