#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "coalition_prune/game.hpp"

namespace cprune {

inline constexpr std::size_t kExactPlayerCap = 20;
inline constexpr std::size_t kPermutationFormCap = 8;

struct ExactShapleyResult {
  std::vector<double> values;
  std::uint64_t evaluations_used = 0;
};

// Subset-weighted form
//   phi_h = sum_{S subset of N\{h}} |S|! (N-|S|-1)! / N! [V(S+h) - V(S)]
// over a table of all 2^N characteristic values. The table fill may use
// `workers` threads; the reduction order is fixed.
ExactShapleyResult exact_shapley(const Game& game,
                                 std::size_t player_cap = kExactPlayerCap,
                                 std::size_t workers = 1);

// Average of marginal contributions over all N! orderings.
ExactShapleyResult exact_shapley_permutation_form(const Game& game);

// |S|! (N-|S|-1)! / N! for |S| = 0..N-1. Exact integer arithmetic up to
// N = 12, log-gamma beyond.
std::vector<double> shapley_weights(std::size_t n_players);

}  // namespace cprune
