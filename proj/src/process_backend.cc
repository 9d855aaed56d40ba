// Scorer subprocess speaking the wire protocol over stdin/stdout.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <unordered_map>

#include "backends_internal.h"
#include "probe/wire.h"

namespace probe::detail {

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void transport_error(const std::string& what) {
  throw ScorerError(ScoreErrorKind::kTransport, what);
}

class ProcessBackend final : public Backend {
 public:
  ProcessBackend(const ScorerDescriptor& d, const BackendOptions& opts)
      : scorer_id_(d.scorer_id), command_(*d.command), opts_(opts) {}
  ~ProcessBackend() override { stop(); }

  ProcessBackend(const ProcessBackend&) = delete;
  ProcessBackend& operator=(const ProcessBackend&) = delete;

  const std::string& scorer_id() const override { return scorer_id_; }

  Handshake handshake() override {
    ensure_started();
    return *handshake_;
  }

  std::vector<ScoreOutcome> score(std::span<const StimulusItem* const> items) override {
    std::vector<ScoreOutcome> out(items.size());
    if (items.empty()) return out;
    ensure_started();
    count_requests(items.size());

    const auto deadline = Clock::now() + opts_.timeout;
    std::unordered_map<std::string, std::size_t> pending;
    std::size_t next = 0;
    std::size_t completed = 0;
    const std::size_t limit = std::max<std::size_t>(1, opts_.max_in_flight);
    try {
      while (completed < items.size()) {
        while (next < items.size() && pending.size() < limit) {
          pending.emplace(items[next]->id, next);
          write_line(wire::encode_request(*items[next]));
          ++next;
        }
        const auto line = read_line(deadline);
        const auto id = wire::response_id(line);
        auto it = pending.find(id);
        if (it == pending.end()) {
          throw ScorerError(ScoreErrorKind::kMalformed,
                            "malformed backend response: unexpected id '" + id + "'");
        }
        const auto index = it->second;
        pending.erase(it);
        out[index] = wire::decode_response(line, *items[index], scorer_id_).outcome;
        ++completed;
      }
    } catch (...) {
      // Outstanding requests are abandoned together with the process.
      stop();
      throw;
    }
    return out;
  }

  void reset() override { stop(); }

 private:
  void ensure_started() {
    if (pid_ > 0) return;
    start();
    try {
      write_line(wire::encode_hello());
      handshake_ = wire::decode_handshake(read_line(Clock::now() + opts_.timeout));
    } catch (...) {
      stop();
      throw;
    }
  }

  void start() {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) transport_error("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      transport_error("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      transport_error("fork failed");
    }
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    pid_ = pid;
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    buffer_.clear();
  }

  void stop() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      // Closing stdin asks a well-behaved scorer to exit; give it a moment.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          break;
        }
        ::usleep(2000);
      }
      if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
      }
    }
    buffer_.clear();
  }

  void write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::write(in_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_error("write to scorer '" + scorer_id_ + "' failed: " + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        return line;
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (remaining <= 0) {
        throw ScorerError(ScoreErrorKind::kTimeout, "scorer '" + scorer_id_ + "' timed out");
      }
      pollfd pfd{out_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        transport_error("poll failed");
      }
      if (rc == 0) continue;
      char chunk[4096];
      const auto n = ::read(out_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_error("read from scorer '" + scorer_id_ + "' failed");
      }
      if (n == 0) transport_error("scorer '" + scorer_id_ + "' exited unexpectedly");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string scorer_id_;
  std::string command_;
  BackendOptions opts_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  std::optional<Handshake> handshake_;
};

}  // namespace

std::unique_ptr<Backend> make_process_backend(const ScorerDescriptor& d, const BackendOptions& opts) {
  return std::make_unique<ProcessBackend>(d, opts);
}

}  // namespace probe::detail
