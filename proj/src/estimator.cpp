#include "coalition_prune/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "coalition_prune/error.hpp"
#include "coalition_prune/rng.hpp"

namespace cprune {

const char* to_string(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::plain_mc: return "plain_mc";
    case EstimatorMode::truncated_mc: return "truncated_mc";
    case EstimatorMode::tmab: return "tmab";
  }
  return "tmab";
}

EstimatorMode parse_estimator_mode(const std::string& text) {
  if (text == "plain_mc") return EstimatorMode::plain_mc;
  if (text == "truncated_mc") return EstimatorMode::truncated_mc;
  if (text == "tmab") return EstimatorMode::tmab;
  throw Error(ErrorCode::argument, "unknown estimator mode '" + text + "'");
}

const char* to_string(ConvergenceReason reason) {
  switch (reason) {
    case ConvergenceReason::none: return "none";
    case ConvergenceReason::lower_bound_positive: return "lower_bound_positive";
    case ConvergenceReason::upper_bound_negative: return "upper_bound_negative";
    case ConvergenceReason::budget_exhausted: return "budget_exhausted";
  }
  return "none";
}

ConvergenceReason parse_convergence_reason(const std::string& text) {
  for (auto r : {ConvergenceReason::none, ConvergenceReason::lower_bound_positive,
                 ConvergenceReason::upper_bound_negative,
                 ConvergenceReason::budget_exhausted}) {
    if (text == to_string(r)) return r;
  }
  throw Error(ErrorCode::parse, "unknown convergence reason '" + text + "'");
}

void EstimatorConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::argument, "delta must lie in (0, 1)");
  }
  if (!(range_R > 0.0) || !std::isfinite(range_R)) {
    throw Error(ErrorCode::argument, "range R must be positive");
  }
  if (!(truncation_fraction >= 0.0 && truncation_fraction <= 1.0)) {
    throw Error(ErrorCode::argument, "truncation fraction must lie in [0, 1]");
  }
  if (sync_interval == 0) throw Error(ErrorCode::argument, "sync interval must be >= 1");
  if (checkpoint_interval == 0) {
    throw Error(ErrorCode::argument, "checkpoint interval must be >= 1");
  }
  if (workers == 0) throw Error(ErrorCode::argument, "worker count must be >= 1");
}

PlayerStats update_stats(PlayerStats stats, double marginal) {
  stats.t += 1;
  const double d = marginal - stats.mean;
  stats.mean += d / static_cast<double>(stats.t);
  stats.m2 += d * (marginal - stats.mean);
  return stats;
}

double bernstein_width(double variance, std::uint64_t t, double delta, double range_R) {
  if (t == 0) {
    throw Error(ErrorCode::undefined, "Bernstein width is undefined before the first sample");
  }
  if (variance < 0.0) throw Error(ErrorCode::argument, "variance must be >= 0");
  const double log_term = std::log(3.0 / delta);
  const double samples = static_cast<double>(t);
  return std::sqrt(variance) * std::sqrt(2.0 * log_term / samples) +
         3.0 * range_R * log_term / samples;
}

ShapleyEstimate to_estimate(const PlayerStats& stats, double delta, double range_R) {
  ShapleyEstimate e;
  e.mean = stats.mean;
  e.variance = stats.variance();
  e.t = stats.t;
  e.converged = stats.converged;
  e.reason = stats.reason;
  if (stats.t == 0) {
    e.lower = -range_R;
    e.upper = range_R;
  } else {
    const double width = bernstein_width(e.variance, stats.t, delta, range_R);
    e.lower = e.mean - width;
    e.upper = e.mean + width;
  }
  return e;
}

std::size_t truncation_floor(std::size_t n_players, double truncation_fraction) {
  const double raw = std::ceil(truncation_fraction * static_cast<double>(n_players) - 1e-9);
  return std::min(n_players, static_cast<std::size_t>(std::max(raw, 0.0)));
}

ScanResult scan_permutation(const Game& game, std::span<const PlayerId> permutation,
                            double truncation_fraction) {
  const std::size_t n = game.n_players();
  const std::size_t floor = truncation_floor(n, truncation_fraction);
  Coalition coalition = Coalition::grand(n);
  std::size_t active = n;

  ScanResult result;
  double previous = 0.0;
  bool started = false;
  for (PlayerId player : permutation) {
    if (!coalition.contains(player)) {
      throw Error(ErrorCode::argument,
                  "permutation repeats player " + std::to_string(player));
    }
    if (active == 0 || active - 1 < floor) break;
    if (!started) {
      previous = game.evaluate_adjusted(coalition);
      ++result.evaluations;
      started = true;
    }
    coalition.erase(player);
    --active;
    const double current = game.evaluate_adjusted(coalition);
    ++result.evaluations;
    result.marginals.push_back({player, previous - current});
    previous = current;
  }
  return result;
}

std::string config_digest(const EstimatorConfig& config, const Game& game) {
  char head[256];
  std::snprintf(head, sizeof head,
                "delta=%.17g;R=%.17g;truncation=%.17g;min_samples=%llu;seed=%llu;mode=%s;"
                "sync=%llu;players=%zu;game=",
                config.delta, config.range_R, config.truncation_fraction,
                static_cast<unsigned long long>(config.min_samples_per_player),
                static_cast<unsigned long long>(config.seed), to_string(config.mode),
                static_cast<unsigned long long>(config.sync_interval), game.n_players());
  const std::uint64_t hash = fnv1a(std::string(head) + game.descriptor());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

namespace {

struct BatchOutcome {
  std::vector<ScanResult> scans;
  // Index of the first failed permutation within the batch, or scans.size().
  std::size_t completed = 0;
  std::exception_ptr error;
};

BatchOutcome run_batch(const Game& game, const EstimatorConfig& config,
                       const std::vector<PlayerId>& open_players, std::uint64_t first,
                       std::uint64_t count, double truncation, std::size_t workers) {
  BatchOutcome outcome;
  outcome.scans.resize(count);
  std::vector<std::exception_ptr> errors(count);

  auto work = [&](std::uint64_t offset, std::uint64_t stride) {
    for (std::uint64_t i = offset; i < count; i += stride) {
      const std::uint64_t index = first + i;
      try {
        auto rng = derive_stream(config.seed, "permutation", index);
        std::vector<PlayerId> permutation = open_players;
        shuffle(std::span<PlayerId>(permutation), rng);
        outcome.scans[i] = scan_permutation(game, permutation, truncation);
      } catch (const Error& e) {
        errors[i] = std::make_exception_ptr(
            Error(e.code(), "permutation " + std::to_string(index) + ": " + e.what()));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  workers = std::min<std::uint64_t>(workers, count);
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
    for (auto& t : threads) t.join();
  }

  outcome.completed = count;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (errors[i]) {
      outcome.completed = i;
      outcome.error = errors[i];
      break;
    }
  }
  return outcome;
}

}  // namespace

EstimateResult estimate(const Game& game, const EstimatorConfig& config,
                        const std::optional<Checkpoint>& resume, const CheckpointSink& sink) {
  config.validate();
  const std::size_t n = game.n_players();
  Checkpoint state;
  state.config_digest = config_digest(config, game);
  state.seed = config.seed;
  state.players.assign(n, PlayerStats{});

  if (resume) {
    if (resume->config_digest != state.config_digest) {
      throw Error(ErrorCode::checkpoint,
                  "checkpoint digest " + resume->config_digest +
                      " does not match the current configuration (" + state.config_digest +
                      "); refusing to resume");
    }
    if (resume->seed != config.seed || resume->players.size() != n) {
      throw Error(ErrorCode::checkpoint, "checkpoint seed or player count does not match");
    }
    if (resume->permutations_completed > config.max_permutations) {
      throw Error(ErrorCode::checkpoint,
                  "checkpoint has more permutations than the requested budget");
    }
    state = *resume;
  }

  const bool bandit = config.mode == EstimatorMode::tmab;
  const double truncation =
      config.mode == EstimatorMode::plain_mc ? 0.0 : config.truncation_fraction;
  const std::size_t workers = game.serial_only() ? 1 : config.workers;

  EstimateResult result;
  result.evaluations_used = 1;  // shared empty-coalition baseline

  auto merge = [&](const ScanResult& scan) {
    result.evaluations_used += scan.evaluations;
    for (const auto& m : scan.marginals) {
      double value = m.value;
      if (std::abs(value) > config.range_R) {
        value = std::clamp(value, -config.range_R, config.range_R);
        ++result.range_violations;
      }
      state.players[m.player] = update_stats(state.players[m.player], value);
    }
  };

  while (state.permutations_completed < config.max_permutations) {
    std::vector<PlayerId> open_players;
    for (PlayerId p = 0; p < n; ++p) {
      if (!state.players[p].converged) open_players.push_back(p);
    }
    if (open_players.empty()) break;

    const std::uint64_t first = state.permutations_completed;
    const std::uint64_t boundary = (first / config.sync_interval + 1) * config.sync_interval;
    const std::uint64_t last = std::min(boundary, config.max_permutations);
    auto outcome = run_batch(game, config, open_players, first, last - first, truncation, workers);

    for (std::size_t i = 0; i < outcome.completed; ++i) merge(outcome.scans[i]);
    state.permutations_completed = first + outcome.completed;
    if (outcome.error) {
      if (sink) sink(state);
      std::rethrow_exception(outcome.error);
    }

    if (bandit && state.permutations_completed % config.sync_interval == 0) {
      for (auto& stats : state.players) {
        if (stats.converged || stats.t < config.min_samples_per_player || stats.t == 0) continue;
        const double width =
            bernstein_width(stats.variance(), stats.t, config.delta, config.range_R);
        if (stats.mean - width > 0.0) {
          stats.converged = true;
          stats.reason = ConvergenceReason::lower_bound_positive;
        } else if (stats.mean + width < 0.0) {
          stats.converged = true;
          stats.reason = ConvergenceReason::upper_bound_negative;
        }
      }
    }

    if (sink && state.permutations_completed / config.checkpoint_interval >
                    first / config.checkpoint_interval) {
      sink(state);
    }
  }

  result.permutations_completed = state.permutations_completed;
  result.estimates.reserve(n);
  for (const auto& stats : state.players) {
    auto e = to_estimate(stats, config.delta, config.range_R);
    if (bandit && !e.converged) e.reason = ConvergenceReason::budget_exhausted;
    result.estimates.push_back(e);
  }
  result.final_state = state;
  return result;
}

}  // namespace cprune
