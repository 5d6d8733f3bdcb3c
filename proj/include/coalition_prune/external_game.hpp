#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coalition_prune/game.hpp"

namespace cprune {

// Line-delimited JSON session with one evaluator child process:
//   -> {"type":"init"}                 <- {"type":"init_ok","players":N,
//                                           "metric_min":a,"metric_max":b}
//   -> {"type":"eval","id":k,"mask":[..]}  <- {"type":"eval_ok","id":k,
//                                              "metric":x}
//   -> {"type":"close"}                (child exits 0)
// The child runs under /bin/sh -c; its stderr is inherited.
class ExternalEvaluator {
 public:
  ExternalEvaluator(const std::string& command, std::chrono::milliseconds timeout);
  ~ExternalEvaluator();
  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  std::size_t players() const { return players_; }
  MetricRange range() const { return range_; }

  // Not thread-safe; callers serialize.
  double evaluate(const Coalition& coalition);
  // Sends close and waits for a zero exit status.
  void close();

 private:
  void send(const std::string& line);
  std::string receive(std::uint64_t request_id);
  [[noreturn]] void fail(const std::string& what, std::uint64_t request_id);
  void terminate_child();

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
  std::size_t players_ = 0;
  MetricRange range_{};
  bool closed_ = false;
};

struct ExternalGameSpec {
  std::string command;
  double timeout_seconds = 60.0;
  std::size_t heads_per_layer = 0;
  std::size_t cache_budget = kDefaultCacheBudget;
};

// Game whose raw metric is served by an external evaluator process. The game
// is serial-only; the process is closed when the game is destroyed.
Game make_external_game(const ExternalGameSpec& spec);

}  // namespace cprune
