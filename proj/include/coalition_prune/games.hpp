#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "coalition_prune/game.hpp"

namespace cprune {

// V(S) = clamp(base + sum_{i in S} w_i). In the clamp-free regime the exact
// Shapley value of player i is w_i.
struct AdditiveGameSpec {
  double base = 0.0;
  std::vector<double> weights;
  MetricRange range{};
  std::size_t heads_per_layer = 0;
};

struct PairwiseTerm {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};

// Per-language additive games with optional pairwise interactions and
// coalition-deterministic noise. coeff is indexed [player][language].
struct PlantedMultilingualSpec {
  std::size_t n_players = 0;
  std::vector<std::string> languages;
  std::vector<double> base;
  std::vector<std::vector<double>> coeff;
  std::vector<PairwiseTerm> pairwise;
  double noise_scale = 0.0;
  std::uint64_t seed = 0;
  MetricRange range{};
  std::size_t heads_per_layer = 0;
};

Game make_additive_game(const AdditiveGameSpec& spec);

std::map<std::string, Game> make_planted_family(
    const PlantedMultilingualSpec& spec);
// Builds only the game for `language`.
Game make_planted_game(const PlantedMultilingualSpec& spec,
                       const std::string& language);

// Noise term of the planted family; pure function of its arguments, uniform
// in [-scale, +scale].
double planted_noise(const Coalition& coalition, std::uint64_t seed,
                     const std::string& language, double scale);

// V(S) = 1 iff S is the grand coalition.
Game make_unanimity_game(std::size_t n);
// Three players: V(S) = 1 iff S contains {0,1} or {0,2}.
Game make_glove_game();

}  // namespace cprune
