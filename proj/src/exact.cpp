#include "coalition_prune/exact.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "coalition_prune/error.hpp"

namespace cprune {

std::vector<double> shapley_weights(std::size_t n) {
  std::vector<double> weights(n);
  if (n <= 12) {
    std::vector<std::uint64_t> factorial(n + 1, 1);
    for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * i;
    for (std::size_t s = 0; s < n; ++s) {
      weights[s] = static_cast<double>(factorial[s] * factorial[n - s - 1]) /
                   static_cast<double>(factorial[n]);
    }
  } else {
    const double log_total = std::lgamma(static_cast<double>(n) + 1.0);
    for (std::size_t s = 0; s < n; ++s) {
      weights[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                            std::lgamma(static_cast<double>(n - s)) - log_total);
    }
  }
  return weights;
}

namespace {

void check_cap(const Game& game, std::size_t cap, const char* form) {
  if (game.n_players() > cap) {
    throw Error(ErrorCode::capacity,
                std::string(form) + " exact Shapley supports at most " + std::to_string(cap) +
                    " players; game has " + std::to_string(game.n_players()));
  }
}

}  // namespace

ExactShapleyResult exact_shapley(const Game& game, std::size_t player_cap,
                                 std::size_t workers) {
  const std::size_t n = game.n_players();
  check_cap(game, std::min(player_cap, std::size_t{63}), "subset-form");

  const std::uint64_t subsets = std::uint64_t{1} << n;
  std::vector<double> table(subsets);
  auto fill = [&](std::uint64_t begin, std::uint64_t stride) {
    for (std::uint64_t mask = begin; mask < subsets; mask += stride) {
      table[mask] = game.evaluate_adjusted(Coalition::from_bits(n, mask));
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, 64);
  if (workers == 1 || game.serial_only()) {
    fill(0, 1);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          fill(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const auto weights = shapley_weights(n);
  ExactShapleyResult result;
  result.values.assign(n, 0.0);
  result.evaluations_used = subsets;
  for (std::size_t h = 0; h < n; ++h) {
    const std::uint64_t bit = std::uint64_t{1} << h;
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      total += weights[static_cast<std::size_t>(std::popcount(mask))] *
               (table[mask | bit] - table[mask]);
    }
    result.values[h] = total;
  }
  return result;
}

ExactShapleyResult exact_shapley_permutation_form(const Game& game) {
  const std::size_t n = game.n_players();
  check_cap(game, kPermutationFormCap, "permutation-form");

  std::vector<double> table(std::size_t{1} << n);
  for (std::uint64_t mask = 0; mask < table.size(); ++mask) {
    table[mask] = game.evaluate_adjusted(Coalition::from_bits(n, mask));
  }

  ExactShapleyResult result;
  result.values.assign(n, 0.0);
  result.evaluations_used = table.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t orderings = 0;
  do {
    std::uint64_t coalition = 0;
    for (std::size_t player : order) {
      const std::uint64_t grown = coalition | (std::uint64_t{1} << player);
      result.values[player] += table[grown] - table[coalition];
      coalition = grown;
    }
    ++orderings;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : result.values) v /= static_cast<double>(orderings);
  return result;
}

}  // namespace cprune
