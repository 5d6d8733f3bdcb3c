#include "coalition_prune/external_game.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include <json.hpp>

#include "coalition_prune/error.hpp"

namespace cprune {

using nlohmann::json;

ExternalEvaluator::ExternalEvaluator(const std::string& command,
                                     std::chrono::milliseconds timeout)
    : command_(command), timeout_(timeout) {
  if (command.empty()) {
    throw Error(ErrorCode::argument, "external evaluator command is empty");
  }
  int sockets[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sockets) != 0) {
    throw Error(ErrorCode::external,
                std::string("socketpair failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sockets[0]);
    ::close(sockets[1]);
    throw Error(ErrorCode::external,
                std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Own process group, so a kill also reaches whatever the shell spawned.
    ::setpgid(0, 0);
    ::dup2(sockets[1], STDIN_FILENO);
    ::dup2(sockets[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(sockets[1]);
  pid_ = pid;
  fd_ = sockets[0];

  send(json{{"type", "init"}}.dump());
  const auto reply = receive(0);
  json message;
  try {
    message = json::parse(reply);
    if (message.at("type") != "init_ok") fail("expected init_ok, got " + reply, 0);
    const auto players = message.at("players").get<long long>();
    if (players < 1) fail("init_ok declares no players", 0);
    players_ = static_cast<std::size_t>(players);
    range_.min = message.value("metric_min", 0.0);
    range_.max = message.value("metric_max", 1.0);
  } catch (const json::exception& e) {
    fail(std::string("malformed init_ok: ") + e.what(), 0);
  }
  if (!(range_.min < range_.max)) fail("init_ok declares an empty metric range", 0);
}

ExternalEvaluator::~ExternalEvaluator() {
  try {
    close();
  } catch (...) {
    terminate_child();
  }
}

void ExternalEvaluator::fail(const std::string& what, std::uint64_t request_id) {
  terminate_child();
  throw Error(ErrorCode::external, "external evaluator (request id " +
                                       std::to_string(request_id) +
                                       "): " + what);
}

void ExternalEvaluator::terminate_child() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == 0) {
      if (::kill(-pid_, SIGKILL) != 0) ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  closed_ = true;
}

void ExternalEvaluator::send(const std::string& line) {
  const std::string payload = line + "\n";
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const ssize_t n = ::send(fd_, payload.data() + sent, payload.size() - sent,
                             MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(std::string("write failed: ") + std::strerror(errno), next_id_);
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string ExternalEvaluator::receive(std::uint64_t request_id) {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) fail("timed out waiting for a response", request_id);
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(std::string("poll failed: ") + std::strerror(errno), request_id);
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(std::string("read failed: ") + std::strerror(errno), request_id);
    }
    if (n == 0) fail("evaluator closed its output (process exited?)", request_id);
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double ExternalEvaluator::evaluate(const Coalition& coalition) {
  if (closed_) throw Error(ErrorCode::external, "external evaluator is closed");
  if (coalition.width() != players_) {
    throw Error(ErrorCode::argument, "mask width does not match evaluator");
  }
  const std::uint64_t id = next_id_++;
  json mask = json::array();
  for (std::size_t i = 0; i < players_; ++i) mask.push_back(coalition.contains(i) ? 1 : 0);
  send(json{{"type", "eval"}, {"id", id}, {"mask", mask}}.dump());
  const auto reply = receive(id);
  try {
    const auto message = json::parse(reply);
    if (message.at("type") != "eval_ok") fail("expected eval_ok, got " + reply, id);
    if (message.at("id").get<std::uint64_t>() != id) {
      fail("response id mismatch: " + reply, id);
    }
    return message.at("metric").get<double>();
  } catch (const json::exception& e) {
    fail(std::string("malformed response: ") + e.what(), id);
  }
}

void ExternalEvaluator::close() {
  if (closed_) return;
  send(json{{"type", "close"}}.dump());
  ::shutdown(fd_, SHUT_WR);
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) break;
    if (r < 0 && errno != EINTR) break;
    if (std::chrono::steady_clock::now() > deadline) {
      fail("evaluator did not exit after close", next_id_);
    }
    ::usleep(1000);
  }
  pid_ = -1;
  ::close(fd_);
  fd_ = -1;
  closed_ = true;
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorCode::external, "external evaluator exited with failure status");
  }
}

Game make_external_game(const ExternalGameSpec& spec) {
  auto timeout = std::chrono::milliseconds(
      static_cast<long long>(spec.timeout_seconds * 1000.0));
  auto evaluator = std::make_shared<ExternalEvaluator>(spec.command, timeout);
  GameOptions options;
  options.descriptor = json{{"family", "external"}, {"command", spec.command}}.dump();
  options.heads_per_layer = spec.heads_per_layer;
  options.cache_budget = spec.cache_budget;
  options.serial_only = true;
  const auto players = evaluator->players();
  const auto range = evaluator->range();
  return Game(
      players, [evaluator](const Coalition& s) { return evaluator->evaluate(s); },
      range, std::move(options));
}

}  // namespace cprune
