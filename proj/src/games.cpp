#include "coalition_prune/games.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include <json.hpp>

#include "coalition_prune/error.hpp"
#include "coalition_prune/rng.hpp"

namespace cprune {
namespace {

double clamp_to(double value, MetricRange range) {
  return std::clamp(value, range.min, range.max);
}

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

// Extreme raw values reachable by an additive profile; used for the
// clamp-free check.
std::pair<double, double> additive_extremes(double base,
                                            const std::vector<double>& w) {
  double lo = base;
  double hi = base;
  for (double x : w) {
    lo += std::min(x, 0.0);
    hi += std::max(x, 0.0);
  }
  return {lo, hi};
}

}  // namespace

Game make_additive_game(const AdditiveGameSpec& spec) {
  const std::size_t n = spec.weights.size();
  if (n == 0) throw Error(ErrorCode::argument, "additive game needs at least one weight");
  if (!std::isfinite(spec.base) ||
      !std::all_of(spec.weights.begin(), spec.weights.end(),
                   [](double w) { return std::isfinite(w); })) {
    throw Error(ErrorCode::argument, "additive base and weights must be finite");
  }
  GameOptions options;
  options.heads_per_layer = spec.heads_per_layer;
  nlohmann::json descriptor = {{"family", "additive"},
                               {"base", spec.base},
                               {"weights", spec.weights},
                               {"metric_min", spec.range.min},
                               {"metric_max", spec.range.max}};
  options.descriptor = descriptor.dump();

  const auto [lo, hi] = additive_extremes(spec.base, spec.weights);
  if (lo < spec.range.min || hi > spec.range.max) {
    options.warnings.push_back(
        "additive game is not clamp-free: reachable metric range [" +
        format_real(lo) + ", " + format_real(hi) +
        "] exceeds the declared range; values are clamped and Shapley values "
        "no longer equal the weights");
  }

  auto metric = [base = spec.base, weights = spec.weights,
                 range = spec.range](const Coalition& s) {
    double value = base;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (s.contains(i)) value += weights[i];
    }
    return clamp_to(value, range);
  };
  return Game(n, std::move(metric), spec.range, std::move(options));
}

double planted_noise(const Coalition& coalition, std::uint64_t seed,
                     const std::string& language, double scale) {
  if (scale == 0.0) return 0.0;
  std::uint64_t h = mix64(seed ^ mix64(fnv1a(language)));
  h = mix64(h ^ coalition.width());
  for (auto word : coalition.words()) {
    h = mix64(h ^ (word + 0x9e3779b97f4a7c15ULL));
  }
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return scale * (2.0 * u - 1.0);
}

namespace {

void validate_planted(const PlantedMultilingualSpec& spec) {
  const std::size_t n = spec.n_players;
  const std::size_t n_lang = spec.languages.size();
  if (n_lang == 0) {
    throw Error(ErrorCode::argument, "planted family needs a language");
  }
  if (std::set<std::string>(spec.languages.begin(), spec.languages.end())
          .size() != n_lang) {
    throw Error(ErrorCode::argument, "planted family has duplicate languages");
  }
  if (spec.base.size() != n_lang) {
    throw Error(ErrorCode::argument,
                "planted base needs one value per language");
  }
  if (spec.coeff.size() != n) {
    throw Error(ErrorCode::argument,
                "planted coeff needs one row per player");
  }
  for (const auto& row : spec.coeff) {
    if (row.size() != n_lang) {
      throw Error(ErrorCode::argument,
                  "planted coeff rows need one value per language");
    }
  }
  if (!(spec.noise_scale >= 0.0)) {
    throw Error(ErrorCode::argument, "noise_scale must be >= 0");
  }
  std::map<std::pair<std::size_t, std::size_t>, double> seen;
  for (const auto& term : spec.pairwise) {
    if (term.i >= n || term.j >= n) {
      throw Error(ErrorCode::argument, "pairwise index out of range");
    }
    if (term.i == term.j) {
      throw Error(ErrorCode::argument,
                  "pairwise matrix must have a zero diagonal");
    }
    const auto key = std::minmax(term.i, term.j);
    auto [it, inserted] = seen.emplace(key, term.value);
    if (!inserted && it->second != term.value) {
      throw Error(ErrorCode::argument, "pairwise matrix must be symmetric");
    }
  }
}

}  // namespace

Game make_planted_game(const PlantedMultilingualSpec& spec,
                       const std::string& language) {
  validate_planted(spec);
  const auto it =
      std::find(spec.languages.begin(), spec.languages.end(), language);
  if (it == spec.languages.end()) {
    throw Error(ErrorCode::argument,
                "language '" + language + "' not in planted family");
  }
  const auto lang = static_cast<std::size_t>(it - spec.languages.begin());
  const std::size_t n = spec.n_players;

  std::vector<double> column(n);
  for (std::size_t i = 0; i < n; ++i) column[i] = spec.coeff[i][lang];

  // Deduplicate mirrored entries; each unordered pair contributes once.
  std::map<std::pair<std::size_t, std::size_t>, double> unique_pairs;
  for (const auto& term : spec.pairwise) {
    unique_pairs.emplace(std::minmax(term.i, term.j), term.value);
  }
  std::vector<PairwiseTerm> pairs;
  for (const auto& [key, value] : unique_pairs) {
    if (value != 0.0) pairs.push_back({key.first, key.second, value});
  }

  GameOptions options;
  options.heads_per_layer = spec.heads_per_layer;
  nlohmann::json pair_json = nlohmann::json::array();
  for (const auto& p : pairs) pair_json.push_back({p.i, p.j, p.value});
  nlohmann::json descriptor = {{"family", "planted"},
                               {"n_players", n},
                               {"language", language},
                               {"base", spec.base[lang]},
                               {"coeff", column},
                               {"pairwise", pair_json},
                               {"noise_scale", spec.noise_scale},
                               {"seed", spec.seed},
                               {"metric_min", spec.range.min},
                               {"metric_max", spec.range.max}};
  options.descriptor = descriptor.dump();

  std::vector<double> extremes = column;
  for (const auto& p : pairs) extremes.push_back(p.value);
  auto [lo, hi] = additive_extremes(spec.base[lang], extremes);
  lo -= spec.noise_scale;
  hi += spec.noise_scale;
  if (lo < spec.range.min || hi > spec.range.max) {
    options.warnings.push_back("planted game for language '" + language +
                               "' is not clamp-free; values are clamped");
  }

  auto metric = [base = spec.base[lang], column = std::move(column),
                 pairs = std::move(pairs), noise_scale = spec.noise_scale,
                 seed = spec.seed, language,
                 range = spec.range](const Coalition& s) {
    double value = base;
    for (std::size_t i = 0; i < column.size(); ++i) {
      if (s.contains(i)) value += column[i];
    }
    for (const auto& p : pairs) {
      if (s.contains(p.i) && s.contains(p.j)) value += p.value;
    }
    value += planted_noise(s, seed, language, noise_scale);
    return clamp_to(value, range);
  };
  return Game(n, std::move(metric), spec.range, std::move(options));
}

std::map<std::string, Game> make_planted_family(
    const PlantedMultilingualSpec& spec) {
  validate_planted(spec);
  std::map<std::string, Game> family;
  for (const auto& language : spec.languages) {
    family.emplace(language, make_planted_game(spec, language));
  }
  return family;
}

Game make_unanimity_game(std::size_t n) {
  if (n < 1) {
    throw Error(ErrorCode::argument, "unanimity game needs n >= 1");
  }
  GameOptions options;
  options.descriptor =
      nlohmann::json{{"family", "unanimity"}, {"n", n}}.dump();
  return Game(
      n, [](const Coalition& s) { return s.count() == s.width() ? 1.0 : 0.0; },
      MetricRange{0.0, 1.0}, std::move(options));
}

Game make_glove_game() {
  GameOptions options;
  options.descriptor = nlohmann::json{{"family", "glove"}}.dump();
  return Game(
      3,
      [](const Coalition& s) {
        return s.contains(0) && (s.contains(1) || s.contains(2)) ? 1.0 : 0.0;
      },
      MetricRange{0.0, 1.0}, std::move(options));
}

}  // namespace cprune
