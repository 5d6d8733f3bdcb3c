#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "coalition_prune/coalition.hpp"

namespace cprune {

inline constexpr std::size_t kDefaultCacheBudget = std::size_t{1} << 20;

struct MetricRange {
  double min = 0.0;
  double max = 1.0;

  double width() const { return max - min; }
};

// Implemented by games whose players can be switched on fractionally (the
// toy transformer). Used by the gradient baseline only.
class FractionalGates {
 public:
  virtual ~FractionalGates() = default;
  virtual std::size_t n_examples() const = 0;
  // Cross-entropy of the true class for one example under real-valued gates.
  virtual double example_loss(std::size_t example,
                              std::span<const double> gates) const = 0;
};

struct GameOptions {
  // Canonical description (spec JSON for builtin games); feeds checkpoint
  // digests.
  std::string descriptor;
  std::size_t heads_per_layer = 0;  // 0: single layer
  std::size_t cache_budget = kDefaultCacheBudget;
  // The raw metric may only be called from one thread at a time.
  bool serial_only = false;
  std::shared_ptr<const FractionalGates> fractional;
  std::vector<std::string> warnings;
};

// A coalitional game over n players with characteristic function
//   V(S) = M(S) - M(empty)
// where M is the raw metric. M(empty) is evaluated once at construction.
// Evaluation is safe from concurrent threads; memoized values are shared.
class Game {
 public:
  using RawMetric = std::function<double(const Coalition&)>;

  Game(std::size_t n_players, RawMetric metric, MetricRange range,
       GameOptions options = {});
  ~Game();
  Game(Game&&) noexcept;
  Game& operator=(Game&&) noexcept;

  std::size_t n_players() const { return n_players_; }
  MetricRange metric_range() const { return range_; }
  double baseline() const { return baseline_; }
  const HeadLayout& layout() const { return layout_; }
  const std::string& descriptor() const { return options_.descriptor; }
  bool serial_only() const { return options_.serial_only; }
  const FractionalGates* fractional() const {
    return options_.fractional.get();
  }
  const std::vector<std::string>& warnings() const {
    return options_.warnings;
  }

  // M(S); range-checked and memoized.
  double raw_metric(const Coalition& coalition) const;
  // V(S) = M(S) - M(empty); exactly 0 for the empty coalition.
  double evaluate_adjusted(const Coalition& coalition) const;
  double grand_value() const;

  // Number of times the underlying metric actually ran (cache misses).
  std::size_t raw_evaluations() const;

 private:
  struct Cache;

  void check_width(const Coalition& coalition) const;
  double compute(const Coalition& coalition) const;

  std::size_t n_players_ = 0;
  RawMetric raw_;
  MetricRange range_;
  GameOptions options_;
  HeadLayout layout_;
  std::unique_ptr<Cache> cache_;
  double baseline_ = 0.0;
};

}  // namespace cprune
