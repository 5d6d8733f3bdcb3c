#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coalition_prune/game.hpp"

namespace cprune {

enum class EstimatorMode { plain_mc, truncated_mc, tmab };

const char* to_string(EstimatorMode mode);
EstimatorMode parse_estimator_mode(const std::string& text);

struct EstimatorConfig {
  double delta = 0.1;
  double range_R = 1.0;
  double truncation_fraction = 0.5;
  std::uint64_t max_permutations = 10000;
  std::uint64_t min_samples_per_player = 5;
  std::uint64_t seed = 0;
  EstimatorMode mode = EstimatorMode::tmab;
  // Permutations per merge point. Convergence is only decided at merge
  // points, so this (not the worker count) fixes the trajectory.
  std::uint64_t sync_interval = 10;
  // Periodic checkpoint cadence in permutations; rounded up to a merge point.
  std::uint64_t checkpoint_interval = 50;
  std::size_t workers = 1;

  void validate() const;
};

enum class ConvergenceReason {
  none,
  lower_bound_positive,
  upper_bound_negative,
  budget_exhausted,
};

const char* to_string(ConvergenceReason reason);
ConvergenceReason parse_convergence_reason(const std::string& text);

struct PlayerStats {
  std::uint64_t t = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations from the running mean
  bool converged = false;
  ConvergenceReason reason = ConvergenceReason::none;

  // Population variance m2 / t; 0 before the first sample.
  double variance() const {
    return t == 0 ? 0.0 : m2 / static_cast<double>(t);
  }

  friend bool operator==(const PlayerStats&, const PlayerStats&) = default;
};

// Welford single-pass update.
PlayerStats update_stats(PlayerStats stats, double marginal);

// Empirical Bernstein half-width
//   sigma * sqrt(2 ln(3/delta) / t) + 3 R ln(3/delta) / t
// with sigma = sqrt(variance). Throws ErrorCode::undefined for t = 0.
double bernstein_width(double variance, std::uint64_t t, double delta,
                       double range_R);

struct ShapleyEstimate {
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t t = 0;
  double lower = 0.0;
  double upper = 0.0;
  bool converged = false;
  ConvergenceReason reason = ConvergenceReason::none;

  friend bool operator==(const ShapleyEstimate&, const ShapleyEstimate&) = default;
};

// Estimate with bounds from running statistics. Players without samples get
// the trivial interval [-R, R].
ShapleyEstimate to_estimate(const PlayerStats& stats, double delta,
                            double range_R);

struct Marginal {
  PlayerId player = 0;
  double value = 0.0;
};

struct ScanResult {
  std::vector<Marginal> marginals;
  std::uint64_t evaluations = 0;
};

// Walks `permutation` from the grand coalition, removing one player at a time
// and recording V(A + h) - V(A) for the removed player h, where A is the
// coalition after removal. Stops before any removal that would leave fewer
// than ceil(truncation_fraction * N) active players.
ScanResult scan_permutation(const Game& game,
                            std::span<const PlayerId> permutation,
                            double truncation_fraction);

// Smallest active-player count a scan may reach.
std::size_t truncation_floor(std::size_t n_players, double truncation_fraction);

struct Checkpoint {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::uint64_t permutations_completed = 0;
  std::vector<PlayerStats> players;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Hex digest over every configuration field that shapes the trajectory
// (max_permutations, workers and checkpoint cadence excluded) plus the game
// descriptor.
std::string config_digest(const EstimatorConfig& config, const Game& game);

std::string save_checkpoint(const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& json_text);

struct EstimateResult {
  std::vector<ShapleyEstimate> estimates;
  // Characteristic evaluations requested by scans, plus one for the shared
  // empty-coalition baseline.
  std::uint64_t evaluations_used = 0;
  std::uint64_t permutations_completed = 0;
  // Marginals that fell outside [-R, R] and were clamped.
  std::uint64_t range_violations = 0;
  Checkpoint final_state;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

// Monte Carlo permutation estimator. plain_mc scans whole permutations;
// truncated_mc applies the truncation floor; tmab additionally retires a
// player once its Bernstein interval excludes zero. Retired players are held
// active and no longer permuted. `sink` receives periodic checkpoints and,
// if an evaluation fails, the last consistent state before the error is
// rethrown.
EstimateResult estimate(const Game& game, const EstimatorConfig& config,
                        const std::optional<Checkpoint>& resume = std::nullopt,
                        const CheckpointSink& sink = {});

}  // namespace cprune
