#include "coalition_prune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coalition_prune/error.hpp"
#include "coalition_prune/rng.hpp"

namespace cprune {

PruneRule parse_prune_rule(const std::string& text) {
  if (text == "upper") return PruneRule::upper;
  if (text == "point") return PruneRule::point;
  throw Error(ErrorCode::argument, "unknown prune rule '" + text + "'");
}

const char* to_string(RankingKind kind) {
  switch (kind) {
    case RankingKind::shapley: return "shapley";
    case RankingKind::gradient: return "gradient";
    case RankingKind::random: return "random";
  }
  return "shapley";
}

PruneReport report_for_mask(const Coalition& mask, const Game& game) {
  if (mask.width() != game.n_players()) {
    throw Error(ErrorCode::argument, "mask width does not match the game's player count");
  }
  PruneReport report;
  report.mask = mask;
  report.decisions.resize(mask.width());
  for (std::size_t i = 0; i < mask.width(); ++i) {
    report.decisions[i] = mask.contains(i) ? Decision::keep : Decision::prune;
  }
  report.k = mask.width() - mask.count();
  report.metric_before = game.raw_metric(Coalition::grand(game.n_players()));
  report.metric_after = game.raw_metric(mask);
  report.delta = report.metric_after - report.metric_before;
  return report;
}

PruneReport prune_negative_upper(std::span<const ShapleyEstimate> estimates, const Game& game,
                                 PruneRule rule) {
  if (estimates.size() != game.n_players()) {
    throw Error(ErrorCode::argument, "estimate count " + std::to_string(estimates.size()) +
                                         " does not match game with " +
                                         std::to_string(game.n_players()) + " players");
  }
  Coalition mask = Coalition::grand(game.n_players());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double score = rule == PruneRule::upper ? estimates[i].upper : estimates[i].mean;
    if (score < 0.0) mask.erase(i);
  }
  return report_for_mask(mask, game);
}

PruneReport zero_shot_transfer(const PruneReport& source, const Game& target) {
  if (source.mask.width() != target.n_players()) {
    throw Error(ErrorCode::argument, "source mask has " + std::to_string(source.mask.width()) +
                                         " players, target game has " +
                                         std::to_string(target.n_players()));
  }
  return report_for_mask(source.mask, target);
}

Coalition bottom_k_mask(const RankingSource& ranking, std::size_t k) {
  const std::size_t n = ranking.values.size();
  if (k > n) {
    throw Error(ErrorCode::argument,
                "k = " + std::to_string(k) + " exceeds player count " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranking.values[a] < ranking.values[b];
  });
  Coalition mask = Coalition::grand(n);
  for (std::size_t i = 0; i < k; ++i) mask.erase(order[i]);
  return mask;
}

namespace {

Coalition random_removal(std::size_t n, std::size_t k, SplitMix64& rng) {
  std::vector<std::size_t> players(n);
  std::iota(players.begin(), players.end(), 0);
  Coalition mask = Coalition::grand(n);
  // Partial Fisher-Yates: the first k slots form a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(players[i], players[j]);
    mask.erase(players[i]);
  }
  return mask;
}

template <typename Metric>
double mean_over_random_removals(const Game& game, std::size_t k, std::size_t n_draws,
                                 std::uint64_t seed, Metric metric) {
  if (k > game.n_players()) {
    throw Error(ErrorCode::argument, "k exceeds the player count");
  }
  if (n_draws == 0) throw Error(ErrorCode::argument, "n_draws must be >= 1");
  double total = 0.0;
  for (std::size_t d = 0; d < n_draws; ++d) {
    auto rng = derive_stream(seed, "random_prune", k * 1000003ULL + d);
    total += metric(random_removal(game.n_players(), k, rng));
  }
  return total / static_cast<double>(n_draws);
}

}  // namespace

double random_prune_baseline(const Game& game, std::size_t k, std::size_t n_draws,
                             std::uint64_t seed) {
  if (k == 0) {
    if (n_draws == 0) throw Error(ErrorCode::argument, "n_draws must be >= 1");
    return game.raw_metric(Coalition::grand(game.n_players()));
  }
  return mean_over_random_removals(game, k, n_draws, seed,
                                   [&](const Coalition& c) { return game.raw_metric(c); });
}

PruningCurve iterative_curve(const Game& game, const RankingSource& ranking,
                             std::size_t n_draws) {
  const std::size_t n = game.n_players();
  PruningCurve curve;
  curve.kind = ranking.kind;
  if (ranking.kind == RankingKind::random) {
    const std::uint64_t seed = ranking.seed.value_or(0);
    for (std::size_t k = 0; k <= n; ++k) {
      const double value =
          k == 0 ? game.grand_value()
                 : mean_over_random_removals(game, k, n_draws, seed, [&](const Coalition& c) {
                     return game.evaluate_adjusted(c);
                   });
      curve.points.push_back({k, value});
    }
    return curve;
  }
  if (ranking.values.size() != n) {
    throw Error(ErrorCode::argument, "ranking has " + std::to_string(ranking.values.size()) +
                                         " values for a game with " + std::to_string(n) +
                                         " players");
  }
  for (std::size_t k = 0; k <= n; ++k) {
    curve.points.push_back({k, game.evaluate_adjusted(bottom_k_mask(ranking, k))});
  }
  return curve;
}

double curve_mean(const PruningCurve& curve) {
  if (curve.points.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : curve.points) total += p.metric;
  return total / static_cast<double>(curve.points.size());
}

RankingSource gradient_importance(const Game& game, double epsilon) {
  const FractionalGates* model = game.fractional();
  if (model == nullptr) {
    throw Error(ErrorCode::unsupported,
                "gradient importance needs a game with fractional gates (transformer family)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::argument, "epsilon must be positive");
  const std::size_t n = game.n_players();
  RankingSource ranking;
  ranking.kind = RankingKind::gradient;
  ranking.values.assign(n, 0.0);
  std::vector<double> gates(n, 1.0);
  for (std::size_t h = 0; h < n; ++h) {
    double total = 0.0;
    for (std::size_t e = 0; e < model->n_examples(); ++e) {
      gates[h] = 1.0 + epsilon;
      const double up = model->example_loss(e, gates);
      gates[h] = 1.0 - epsilon;
      const double down = model->example_loss(e, gates);
      gates[h] = 1.0;
      total += std::abs((up - down) / (2.0 * epsilon));
    }
    ranking.values[h] = total / static_cast<double>(model->n_examples());
  }
  return ranking;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::argument, "spearman inputs differ in length");
  }
  if (a.size() < 2) throw Error(ErrorCode::argument, "spearman needs at least two values");
  for (double x : a) {
    if (std::isnan(x)) throw Error(ErrorCode::argument, "spearman input contains NaN");
  }
  for (double x : b) {
    if (std::isnan(x)) throw Error(ErrorCode::argument, "spearman input contains NaN");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorCode::undefined, "spearman correlation is undefined for a constant sequence");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<std::vector<double>> correlation_matrix(std::span<const LabeledValues> by_language) {
  const std::size_t m = by_language.size();
  if (m < 2) throw Error(ErrorCode::argument, "correlation matrix needs at least two languages");
  for (const auto& entry : by_language) {
    if (entry.second.size() != by_language[0].second.size()) {
      throw Error(ErrorCode::argument, "language '" + entry.first +
                                           "' has a different player count than '" +
                                           by_language[0].first + "'");
    }
  }
  std::vector<std::vector<double>> rho(m, std::vector<double>(m, 1.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      try {
        rho[i][j] = spearman_rho(by_language[i].second, by_language[j].second);
      } catch (const Error& e) {
        throw Error(e.code(), "languages '" + by_language[i].first + "' and '" +
                                  by_language[j].first + "': " + e.what());
      }
      rho[j][i] = rho[i][j];
    }
  }
  return rho;
}

}  // namespace cprune
