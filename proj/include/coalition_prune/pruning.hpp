#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coalition_prune/estimator.hpp"
#include "coalition_prune/game.hpp"

namespace cprune {

enum class PruneRule {
  upper,  // prune when the Bernstein upper bound is negative
  point,  // prune when the point estimate is negative
};

PruneRule parse_prune_rule(const std::string& text);

enum class Decision { keep, prune };

struct PruneReport {
  std::vector<Decision> decisions;
  std::size_t k = 0;
  Coalition mask;
  // Raw metric M at the grand coalition and at the mask.
  double metric_before = 0.0;
  double metric_after = 0.0;
  double delta = 0.0;
};

PruneReport prune_negative_upper(std::span<const ShapleyEstimate> estimates,
                                 const Game& game,
                                 PruneRule rule = PruneRule::upper);

// Report for an arbitrary keep-mask on `game`.
PruneReport report_for_mask(const Coalition& mask, const Game& game);

// Applies the source mask (not the values) to another game.
PruneReport zero_shot_transfer(const PruneReport& source, const Game& target);

enum class RankingKind { shapley, gradient, random };

const char* to_string(RankingKind kind);

struct RankingSource {
  RankingKind kind = RankingKind::shapley;
  std::vector<double> values;
  std::optional<std::uint64_t> seed;
};

// Clears the k players with the smallest values; ties go to the lower index.
Coalition bottom_k_mask(const RankingSource& ranking, std::size_t k);

struct CurvePoint {
  std::size_t heads_removed = 0;
  double metric = 0.0;  // adjusted value V
};

struct PruningCurve {
  RankingKind kind = RankingKind::shapley;
  std::vector<CurvePoint> points;
};

// V at bottom_k_mask(ranking, k) for k = 0..N. The ranking is static. A
// random ranking instead averages n_draws fresh random k-subsets per k.
PruningCurve iterative_curve(const Game& game, const RankingSource& ranking,
                             std::size_t n_draws = 10);

// Mean raw metric over n_draws uniformly random removals of k players.
double random_prune_baseline(const Game& game, std::size_t k,
                             std::size_t n_draws, std::uint64_t seed);

double curve_mean(const PruningCurve& curve);

// importance_h = mean over examples of |dL/dG_h| at G = 1, by central
// differences with step epsilon on one gate.
RankingSource gradient_importance(const Game& game, double epsilon = 1e-3);

// Spearman rank correlation with average ranks for ties.
double spearman_rho(std::span<const double> a, std::span<const double> b);

// Average ranks (1-based).
std::vector<double> average_ranks(std::span<const double> values);

using LabeledValues = std::pair<std::string, std::vector<double>>;

// Symmetric matrix of pairwise spearman_rho with unit diagonal.
std::vector<std::vector<double>> correlation_matrix(
    std::span<const LabeledValues> by_language);

}  // namespace cprune
