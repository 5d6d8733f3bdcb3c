#include "coalition_prune/coalition_prune.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "coalition_prune/error.hpp"
#include "coalition_prune/estimator.hpp"
#include "coalition_prune/exact.hpp"
#include "coalition_prune/external_game.hpp"
#include "coalition_prune/game_spec.hpp"
#include "coalition_prune/pruning.hpp"
#include "coalition_prune/tables.hpp"

struct cp_game {
  cprune::Game game;
  bool external = false;
};

struct cp_estimates {
  std::vector<cprune::ShapleyEstimate> rows;
  std::uint64_t evaluations = 0;
  std::uint64_t permutations = 0;
  std::uint64_t range_violations = 0;
  std::optional<cprune::Checkpoint> state;
};

struct cp_prune_report {
  cprune::PruneReport report;
};

namespace {

thread_local std::string last_error;

int status_for(cprune::ErrorCode code) {
  using cprune::ErrorCode;
  switch (code) {
    case ErrorCode::argument: return CP_ERR_ARGUMENT;
    case ErrorCode::game_contract: return CP_ERR_GAME_CONTRACT;
    case ErrorCode::capacity: return CP_ERR_CAPACITY;
    case ErrorCode::undefined: return CP_ERR_UNDEFINED;
    case ErrorCode::checkpoint: return CP_ERR_CHECKPOINT;
    case ErrorCode::external: return CP_ERR_EXTERNAL;
    case ErrorCode::unsupported: return CP_ERR_UNSUPPORTED;
    case ErrorCode::parse: return CP_ERR_PARSE;
    case ErrorCode::io: return CP_ERR_IO;
  }
  return CP_ERR_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CP_OK;
  } catch (const cprune::Error& e) {
    last_error = e.what();
    return status_for(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return CP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return CP_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return CP_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw cprune::Error(cprune::ErrorCode::argument, what);
}

char* duplicate(const std::string& text) {
  char* copy = static_cast<char*>(std::malloc(text.size() + 1));
  if (copy == nullptr) throw std::bad_alloc();
  std::memcpy(copy, text.c_str(), text.size() + 1);
  return copy;
}

cprune::Coalition mask_of(const uint8_t* mask, size_t n) {
  require(mask != nullptr || n == 0, "mask is null");
  return cprune::Coalition::from_mask(std::span<const std::uint8_t>(mask, n));
}

cprune::EstimatorConfig to_config(const cp_estimator_config& c) {
  cprune::EstimatorConfig config;
  config.delta = c.delta;
  config.range_R = c.range_R;
  config.truncation_fraction = c.truncation_fraction;
  config.max_permutations = c.max_permutations;
  config.min_samples_per_player = c.min_samples_per_player;
  config.seed = c.seed;
  switch (c.mode) {
    case CP_MODE_PLAIN_MC: config.mode = cprune::EstimatorMode::plain_mc; break;
    case CP_MODE_TRUNCATED_MC: config.mode = cprune::EstimatorMode::truncated_mc; break;
    case CP_MODE_TMAB: config.mode = cprune::EstimatorMode::tmab; break;
    default: throw cprune::Error(cprune::ErrorCode::argument, "unknown estimator mode");
  }
  config.sync_interval = c.sync_interval;
  config.checkpoint_interval = c.checkpoint_interval;
  config.workers = c.workers;
  return config;
}

cprune::RankingKind ranking_of(int ranking) {
  switch (ranking) {
    case CP_RANKING_SHAPLEY: return cprune::RankingKind::shapley;
    case CP_RANKING_GRADIENT: return cprune::RankingKind::gradient;
    case CP_RANKING_RANDOM: return cprune::RankingKind::random;
  }
  throw cprune::Error(cprune::ErrorCode::argument, "unknown ranking kind");
}

}  // namespace

extern "C" {

const char* cp_last_error(void) { return last_error.c_str(); }

void cp_string_free(char* text) { std::free(text); }

int cp_game_from_json(const char* json, cp_game** out) {
  return guarded([&] {
    require(json != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto game = cprune::make_game_from_json(json);
    const bool external = game.serial_only();
    *out = new cp_game{std::move(game), external};
  });
}

int cp_game_from_file(const char* path, cp_game** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto game = cprune::make_game_from_file(path);
    const bool external = game.serial_only();
    *out = new cp_game{std::move(game), external};
  });
}

int cp_game_external(const char* command, double timeout_seconds, cp_game** out) {
  return guarded([&] {
    require(command != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    cprune::ExternalGameSpec spec;
    spec.command = command;
    spec.timeout_seconds = timeout_seconds;
    *out = new cp_game{cprune::make_external_game(spec), true};
  });
}

void cp_game_free(cp_game* game) { delete game; }

size_t cp_game_players(const cp_game* game) { return game ? game->game.n_players() : 0; }

size_t cp_game_heads_per_layer(const cp_game* game) {
  return game ? game->game.layout().heads_per_layer() : 0;
}

int cp_game_is_external(const cp_game* game) { return game && game->external ? 1 : 0; }

int cp_game_warnings(const cp_game* game, char** out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    std::string joined;
    for (const auto& w : game->game.warnings()) joined += w + "\n";
    *out = duplicate(joined);
  });
}

int cp_game_descriptor(const cp_game* game, char** out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    *out = duplicate(game->game.descriptor());
  });
}

int cp_game_raw_metric(const cp_game* game, const uint8_t* mask, size_t n, double* out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    *out = game->game.raw_metric(mask_of(mask, n));
  });
}

int cp_game_adjusted(const cp_game* game, const uint8_t* mask, size_t n, double* out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    *out = game->game.evaluate_adjusted(mask_of(mask, n));
  });
}

int cp_game_grand_value(const cp_game* game, double* out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    *out = game->game.grand_value();
  });
}

int cp_game_baseline(const cp_game* game, double* out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    *out = game->game.baseline();
  });
}

int cp_exact_shapley(const cp_game* game, size_t player_cap, size_t workers, double* values,
                     size_t n, uint64_t* evaluations) {
  return guarded([&] {
    require(game != nullptr && values != nullptr, "null argument");
    require(n == game->game.n_players(), "output length does not match player count");
    const auto result = cprune::exact_shapley(
        game->game, player_cap == 0 ? cprune::kExactPlayerCap : player_cap, workers);
    std::copy(result.values.begin(), result.values.end(), values);
    if (evaluations) *evaluations = result.evaluations_used;
  });
}

int cp_exact_shapley_permutations(const cp_game* game, double* values, size_t n) {
  return guarded([&] {
    require(game != nullptr && values != nullptr, "null argument");
    require(n == game->game.n_players(), "output length does not match player count");
    const auto result = cprune::exact_shapley_permutation_form(game->game);
    std::copy(result.values.begin(), result.values.end(), values);
  });
}

int cp_exact_csv(const cp_game* game, const double* values, size_t n, char** out) {
  return guarded([&] {
    require(game != nullptr && values != nullptr && out != nullptr, "null argument");
    require(n == game->game.n_players(), "value count does not match player count");
    *out = duplicate(cprune::exact_csv(std::span<const double>(values, n), game->game.layout()));
  });
}

void cp_estimator_config_default(cp_estimator_config* config) {
  if (config == nullptr) return;
  const cprune::EstimatorConfig d;
  config->delta = d.delta;
  config->range_R = d.range_R;
  config->truncation_fraction = d.truncation_fraction;
  config->max_permutations = d.max_permutations;
  config->min_samples_per_player = d.min_samples_per_player;
  config->seed = d.seed;
  config->mode = CP_MODE_TMAB;
  config->sync_interval = d.sync_interval;
  config->checkpoint_interval = d.checkpoint_interval;
  config->workers = d.workers;
}

int cp_parse_mode(const char* text, int* mode) {
  return guarded([&] {
    require(text != nullptr && mode != nullptr, "null argument");
    switch (cprune::parse_estimator_mode(text)) {
      case cprune::EstimatorMode::plain_mc: *mode = CP_MODE_PLAIN_MC; break;
      case cprune::EstimatorMode::truncated_mc: *mode = CP_MODE_TRUNCATED_MC; break;
      case cprune::EstimatorMode::tmab: *mode = CP_MODE_TMAB; break;
    }
  });
}

int cp_bernstein_width(double variance, uint64_t t, double delta, double range_R, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = cprune::bernstein_width(variance, t, delta, range_R);
  });
}

int cp_config_digest(const cp_game* game, const cp_estimator_config* config, char** out) {
  return guarded([&] {
    require(game != nullptr && config != nullptr && out != nullptr, "null argument");
    *out = duplicate(cprune::config_digest(to_config(*config), game->game));
  });
}

int cp_estimate(const cp_game* game, const cp_estimator_config* config, const char* resume_json,
                cp_checkpoint_fn on_checkpoint, void* user, cp_estimates** out) {
  return guarded([&] {
    require(game != nullptr && config != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    std::optional<cprune::Checkpoint> resume;
    if (resume_json != nullptr) resume = cprune::load_checkpoint(resume_json);
    cprune::CheckpointSink sink;
    if (on_checkpoint != nullptr) {
      sink = [&](const cprune::Checkpoint& state) {
        const auto text = cprune::save_checkpoint(state);
        if (on_checkpoint(text.c_str(), user) != 0) {
          throw cprune::Error(cprune::ErrorCode::io, "checkpoint callback failed");
        }
      };
    }
    auto result = cprune::estimate(game->game, to_config(*config), resume, sink);
    *out = new cp_estimates{std::move(result.estimates), result.evaluations_used,
                            result.permutations_completed, result.range_violations,
                            std::move(result.final_state)};
  });
}

int cp_estimates_from_csv(const char* csv, cp_estimates** out) {
  return guarded([&] {
    require(csv != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    *out = new cp_estimates{cprune::parse_estimates_csv(csv), 0, 0, 0, std::nullopt};
  });
}

void cp_estimates_free(cp_estimates* estimates) { delete estimates; }

size_t cp_estimates_count(const cp_estimates* estimates) {
  return estimates ? estimates->rows.size() : 0;
}

int cp_estimates_get(const cp_estimates* estimates, size_t player, cp_estimate_row* row) {
  return guarded([&] {
    require(estimates != nullptr && row != nullptr, "null argument");
    require(player < estimates->rows.size(), "player out of range");
    const auto& e = estimates->rows[player];
    *row = {e.mean, e.variance, e.t, e.lower, e.upper, e.converged ? 1 : 0,
            cprune::to_string(e.reason)};
  });
}

uint64_t cp_estimates_evaluations(const cp_estimates* estimates) {
  return estimates ? estimates->evaluations : 0;
}

uint64_t cp_estimates_permutations(const cp_estimates* estimates) {
  return estimates ? estimates->permutations : 0;
}

uint64_t cp_estimates_range_violations(const cp_estimates* estimates) {
  return estimates ? estimates->range_violations : 0;
}

int cp_estimates_csv(const cp_estimates* estimates, const cp_game* layout_game, char** out) {
  return guarded([&] {
    require(estimates != nullptr && out != nullptr, "null argument");
    cprune::HeadLayout layout(estimates->rows.size(), 0);
    if (layout_game != nullptr) {
      require(layout_game->game.n_players() == estimates->rows.size(),
              "layout game player count does not match estimates");
      layout = layout_game->game.layout();
    }
    *out = duplicate(cprune::estimates_csv(estimates->rows, layout));
  });
}

int cp_estimates_checkpoint(const cp_estimates* estimates, char** out) {
  return guarded([&] {
    require(estimates != nullptr && out != nullptr, "null argument");
    *out = duplicate(estimates->state ? cprune::save_checkpoint(*estimates->state) : "");
  });
}

int cp_prune(const cp_estimates* estimates, const cp_game* game, const char* rule,
             cp_prune_report** out) {
  return guarded([&] {
    require(estimates != nullptr && game != nullptr && rule != nullptr && out != nullptr,
            "null argument");
    *out = nullptr;
    auto report =
        cprune::prune_negative_upper(estimates->rows, game->game, cprune::parse_prune_rule(rule));
    *out = new cp_prune_report{std::move(report)};
  });
}

int cp_prune_mask(const cp_game* game, const char* mask_bits, cp_prune_report** out) {
  return guarded([&] {
    require(game != nullptr && mask_bits != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto report =
        cprune::report_for_mask(cprune::Coalition::from_string(mask_bits), game->game);
    *out = new cp_prune_report{std::move(report)};
  });
}

int cp_zero_shot_transfer(const cp_prune_report* source, const cp_game* target,
                          cp_prune_report** out) {
  return guarded([&] {
    require(source != nullptr && target != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    *out = new cp_prune_report{cprune::zero_shot_transfer(source->report, target->game)};
  });
}

void cp_prune_report_free(cp_prune_report* report) { delete report; }

size_t cp_prune_report_k(const cp_prune_report* report) { return report ? report->report.k : 0; }

double cp_prune_report_delta(const cp_prune_report* report) {
  return report ? report->report.delta : 0.0;
}

int cp_prune_report_mask(const cp_prune_report* report, char** mask_bits) {
  return guarded([&] {
    require(report != nullptr && mask_bits != nullptr, "null argument");
    *mask_bits = duplicate(report->report.mask.to_string());
  });
}

int cp_prune_report_json(const cp_prune_report* report, char** out) {
  return guarded([&] {
    require(report != nullptr && out != nullptr, "null argument");
    *out = duplicate(cprune::prune_report_json(report->report));
  });
}

int cp_bottom_k_mask(const double* values, size_t n, size_t k, uint8_t* mask_out) {
  return guarded([&] {
    require((values != nullptr && mask_out != nullptr) || n == 0, "null argument");
    cprune::RankingSource ranking;
    ranking.values.assign(values, values + n);
    const auto mask = cprune::bottom_k_mask(ranking, k).to_mask();
    std::copy(mask.begin(), mask.end(), mask_out);
  });
}

int cp_gradient_importance(const cp_game* game, double epsilon, double* out, size_t n) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    require(n == game->game.n_players(), "output length does not match player count");
    const auto ranking = cprune::gradient_importance(game->game, epsilon);
    std::copy(ranking.values.begin(), ranking.values.end(), out);
  });
}

int cp_curve(const cp_game* game, int ranking, const double* values, size_t n, size_t n_draws,
             uint64_t seed, double* metrics_out) {
  return guarded([&] {
    require(game != nullptr && metrics_out != nullptr, "null argument");
    cprune::RankingSource source;
    source.kind = ranking_of(ranking);
    source.seed = seed;
    if (source.kind != cprune::RankingKind::random) {
      require(values != nullptr, "ranking values are null");
      source.values.assign(values, values + n);
    }
    const auto curve = cprune::iterative_curve(game->game, source, n_draws);
    for (std::size_t i = 0; i < curve.points.size(); ++i) metrics_out[i] = curve.points[i].metric;
  });
}

int cp_curve_csv(const int* rankings, const double* const* metrics, size_t n_curves,
                 size_t n_points, char** out) {
  return guarded([&] {
    require((rankings != nullptr && metrics != nullptr) || n_curves == 0, "null argument");
    require(out != nullptr, "null argument");
    std::vector<cprune::PruningCurve> curves(n_curves);
    for (std::size_t c = 0; c < n_curves; ++c) {
      curves[c].kind = ranking_of(rankings[c]);
      for (std::size_t k = 0; k < n_points; ++k) curves[c].points.push_back({k, metrics[c][k]});
    }
    *out = duplicate(cprune::curve_csv(curves));
  });
}

int cp_random_prune_baseline(const cp_game* game, size_t k, size_t n_draws, uint64_t seed,
                             double* out) {
  return guarded([&] {
    require(game != nullptr && out != nullptr, "null argument");
    *out = cprune::random_prune_baseline(game->game, k, n_draws, seed);
  });
}

int cp_spearman(const double* a, const double* b, size_t n, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "null argument");
    *out = cprune::spearman_rho(std::span<const double>(a, n), std::span<const double>(b, n));
  });
}

int cp_correlation_matrix(const double* const* values, const char* const* labels,
                          size_t n_languages, size_t n_players, double* out) {
  return guarded([&] {
    require(values != nullptr && out != nullptr, "null argument");
    std::vector<cprune::LabeledValues> series;
    for (std::size_t l = 0; l < n_languages; ++l) {
      require(values[l] != nullptr, "null value series");
      series.emplace_back(labels ? std::string(labels[l]) : std::to_string(l),
                          std::vector<double>(values[l], values[l] + n_players));
    }
    const auto rho = cprune::correlation_matrix(series);
    for (std::size_t i = 0; i < n_languages; ++i) {
      for (std::size_t j = 0; j < n_languages; ++j) out[i * n_languages + j] = rho[i][j];
    }
  });
}

int cp_correlation_csv(const char* const* labels, size_t n_languages, const double* matrix,
                       char** out) {
  return guarded([&] {
    require(labels != nullptr && matrix != nullptr && out != nullptr, "null argument");
    std::vector<std::string> tags(labels, labels + n_languages);
    std::vector<std::vector<double>> rows(n_languages);
    for (std::size_t i = 0; i < n_languages; ++i) {
      rows[i].assign(matrix + i * n_languages, matrix + (i + 1) * n_languages);
    }
    *out = duplicate(cprune::correlation_csv(tags, rows));
  });
}

}  // extern "C"
