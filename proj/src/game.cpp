#include "coalition_prune/game.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "coalition_prune/error.hpp"

namespace cprune {

struct Game::Cache {
  static constexpr std::size_t kShards = 16;

  struct Shard {
    std::mutex mutex;
    std::unordered_map<Coalition, double, CoalitionHash> values;
  };

  explicit Cache(std::size_t budget) : budget(budget) {}

  std::size_t budget;
  std::atomic<std::size_t> size{0};
  std::atomic<std::size_t> misses{0};
  std::mutex serial;
  std::array<Shard, kShards> shards;
};

Game::Game(std::size_t n_players, RawMetric metric, MetricRange range,
           GameOptions options)
    : n_players_(n_players),
      raw_(std::move(metric)),
      range_(range),
      options_(std::move(options)),
      layout_(n_players, options_.heads_per_layer),
      cache_(std::make_unique<Cache>(options_.cache_budget)) {
  if (n_players_ == 0) throw Error(ErrorCode::argument, "game needs at least one player");
  if (!raw_) throw Error(ErrorCode::argument, "game needs a raw metric");
  if (!(range_.min < range_.max) || !std::isfinite(range_.min) ||
      !std::isfinite(range_.max)) {
    throw Error(ErrorCode::argument, "metric range must satisfy min < max");
  }
  if (options_.heads_per_layer != 0 && n_players_ != 0 &&
      n_players_ % options_.heads_per_layer != 0) {
    throw Error(ErrorCode::argument,
                "player count is not a multiple of heads_per_layer");
  }
  baseline_ = raw_metric(Coalition::empty(n_players_));
}

Game::~Game() = default;
Game::Game(Game&&) noexcept = default;
Game& Game::operator=(Game&&) noexcept = default;

void Game::check_width(const Coalition& coalition) const {
  if (coalition.width() != n_players_) {
    throw Error(ErrorCode::argument,
                "coalition width " + std::to_string(coalition.width()) +
                    " does not match game with " +
                    std::to_string(n_players_) + " players");
  }
}

double Game::compute(const Coalition& coalition) const {
  double value;
  if (options_.serial_only) {
    std::lock_guard lock(cache_->serial);
    value = raw_(coalition);
  } else {
    value = raw_(coalition);
  }
  cache_->misses.fetch_add(1, std::memory_order_relaxed);
  if (!(value >= range_.min && value <= range_.max)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "raw metric " << value << " for coalition " << coalition.to_string()
        << " lies outside the declared range [" << range_.min << ", "
        << range_.max << "]";
    throw Error(ErrorCode::game_contract, msg.str());
  }
  return value;
}

double Game::raw_metric(const Coalition& coalition) const {
  check_width(coalition);
  if (cache_->budget == 0) return compute(coalition);

  auto& shard =
      cache_->shards[CoalitionHash{}(coalition) % Cache::kShards];
  {
    std::lock_guard lock(shard.mutex);
    auto it = shard.values.find(coalition);
    if (it != shard.values.end()) return it->second;
  }
  const double value = compute(coalition);
  if (cache_->size.load(std::memory_order_relaxed) < cache_->budget) {
    std::lock_guard lock(shard.mutex);
    if (shard.values.emplace(coalition, value).second) {
      cache_->size.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return value;
}

double Game::evaluate_adjusted(const Coalition& coalition) const {
  check_width(coalition);
  if (coalition.count() == 0) return 0.0;
  return raw_metric(coalition) - baseline_;
}

double Game::grand_value() const {
  return evaluate_adjusted(Coalition::grand(n_players_));
}

std::size_t Game::raw_evaluations() const {
  return cache_->misses.load(std::memory_order_relaxed);
}

}  // namespace cprune
