#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "coalition_prune/games.hpp"

namespace cprune::testing {

// Four-language planted family over 12 heads (3 layers x 4). Heads 1, 5 and
// 7 are harmful for en/de/zh; head 5 is helpful for sw only. Every
// coefficient has magnitude >= 0.02 and the family is clamp-free for noise
// up to 0.05.
inline PlantedMultilingualSpec multilingual_spec(double noise_scale = 0.0,
                                                 std::uint64_t seed = 17) {
  PlantedMultilingualSpec spec;
  spec.n_players = 12;
  spec.languages = {"en", "de", "zh", "sw"};
  spec.base = {0.50, 0.48, 0.45, 0.40};
  const std::vector<std::vector<double>> by_language = {
      {0.060, -0.030, 0.045, 0.020, 0.035, -0.040, 0.050, -0.025, 0.030, 0.055, 0.025, 0.040},
      {0.055, -0.035, 0.040, 0.025, 0.030, -0.045, 0.050, -0.020, 0.035, 0.060, 0.020, 0.045},
      {0.065, -0.025, 0.050, 0.020, 0.040, -0.035, 0.045, -0.030, 0.025, 0.050, 0.030, 0.035},
      {0.050, -0.030, 0.040, 0.030, 0.025, 0.050, 0.045, -0.020, 0.035, 0.055, 0.020, 0.040},
  };
  spec.coeff.assign(12, std::vector<double>(4));
  for (std::size_t l = 0; l < 4; ++l) {
    for (std::size_t i = 0; i < 12; ++i) spec.coeff[i][l] = by_language[l][i];
  }
  spec.noise_scale = noise_scale;
  spec.seed = seed;
  spec.heads_per_layer = 4;
  return spec;
}

inline std::vector<double> column(const PlantedMultilingualSpec& spec, std::size_t language) {
  std::vector<double> c(spec.n_players);
  for (std::size_t i = 0; i < spec.n_players; ++i) c[i] = spec.coeff[i][language];
  return c;
}

// Brute-force Shapley by enumerating every ordering of the players against
// the raw characteristic function. Independent of the library solvers.
template <typename Fn>
std::vector<double> shapley_by_orderings(std::size_t n, Fn value_of_bits) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    std::uint64_t bits = 0;
    double previous = value_of_bits(bits);
    for (std::size_t p : order) {
      bits |= std::uint64_t{1} << p;
      const double current = value_of_bits(bits);
      phi[p] += current - previous;
      previous = current;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : phi) v /= count;
  return phi;
}

}  // namespace cprune::testing
