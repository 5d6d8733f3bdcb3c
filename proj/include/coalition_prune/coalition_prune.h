/* Shapley attribution and structured pruning over maskable components.
 *
 * C interface over the C++ core. Objects are opaque handles owned by the
 * caller and released with the matching *_free function. Functions return a
 * cp_status; on failure cp_last_error() describes the problem (per thread).
 * Strings returned through char** are released with cp_string_free. */
#ifndef COALITION_PRUNE_H
#define COALITION_PRUNE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(CPRUNE_BUILDING_LIBRARY)
#define CP_API __attribute__((visibility("default")))
#else
#define CP_API
#endif

typedef enum cp_status {
  CP_OK = 0,
  CP_ERR_ARGUMENT = 1,
  CP_ERR_GAME_CONTRACT = 2,
  CP_ERR_CAPACITY = 3,
  CP_ERR_UNDEFINED = 4,
  CP_ERR_CHECKPOINT = 5,
  CP_ERR_EXTERNAL = 6,
  CP_ERR_UNSUPPORTED = 7,
  CP_ERR_PARSE = 8,
  CP_ERR_IO = 9,
  CP_ERR_INTERNAL = 10
} cp_status;

typedef struct cp_game cp_game;
typedef struct cp_estimates cp_estimates;
typedef struct cp_prune_report cp_prune_report;

CP_API const char* cp_last_error(void);
CP_API void cp_string_free(char* text);

/* ---- games ------------------------------------------------------------ */

CP_API int cp_game_from_json(const char* json, cp_game** out);
CP_API int cp_game_from_file(const char* path, cp_game** out);
/* Game served by an external evaluator process (line-delimited JSON). */
CP_API int cp_game_external(const char* command, double timeout_seconds, cp_game** out);
CP_API void cp_game_free(cp_game* game);

CP_API size_t cp_game_players(const cp_game* game);
CP_API size_t cp_game_heads_per_layer(const cp_game* game);
CP_API int cp_game_is_external(const cp_game* game);
/* Construction warnings joined by newlines (empty when none). */
CP_API int cp_game_warnings(const cp_game* game, char** out);
CP_API int cp_game_descriptor(const cp_game* game, char** out);

/* mask: n bytes of 0/1, entry i for player i. */
CP_API int cp_game_raw_metric(const cp_game* game, const uint8_t* mask, size_t n, double* out);
CP_API int cp_game_adjusted(const cp_game* game, const uint8_t* mask, size_t n, double* out);
CP_API int cp_game_grand_value(const cp_game* game, double* out);
CP_API int cp_game_baseline(const cp_game* game, double* out);

/* ---- exact Shapley ---------------------------------------------------- */

/* Subset-form solver; refuses (CP_ERR_CAPACITY) above `player_cap` (0: 20). */
CP_API int cp_exact_shapley(const cp_game* game, size_t player_cap, size_t workers,
                            double* values, size_t n, uint64_t* evaluations);
/* All-permutations form; at most 8 players. */
CP_API int cp_exact_shapley_permutations(const cp_game* game, double* values, size_t n);
/* CSV with columns player,layer,head,shapley. */
CP_API int cp_exact_csv(const cp_game* game, const double* values, size_t n, char** out);

/* ---- Monte Carlo estimation ------------------------------------------ */

typedef enum cp_mode {
  CP_MODE_PLAIN_MC = 0,
  CP_MODE_TRUNCATED_MC = 1,
  CP_MODE_TMAB = 2
} cp_mode;

typedef struct cp_estimator_config {
  double delta;
  double range_R;
  double truncation_fraction;
  uint64_t max_permutations;
  uint64_t min_samples_per_player;
  uint64_t seed;
  int mode; /* cp_mode */
  uint64_t sync_interval;
  uint64_t checkpoint_interval;
  size_t workers;
} cp_estimator_config;

typedef struct cp_estimate_row {
  double mean;
  double variance;
  uint64_t t;
  double lower;
  double upper;
  int converged;
  const char* reason; /* static string */
} cp_estimate_row;

/* Receives checkpoint JSON; a nonzero return aborts the estimation. */
typedef int (*cp_checkpoint_fn)(const char* checkpoint_json, void* user);

CP_API void cp_estimator_config_default(cp_estimator_config* config);
CP_API int cp_parse_mode(const char* text, int* mode);
CP_API int cp_bernstein_width(double variance, uint64_t t, double delta, double range_R,
                              double* out);
CP_API int cp_config_digest(const cp_game* game, const cp_estimator_config* config, char** out);

/* resume_json may be NULL. On failure with a checkpoint callback installed,
 * the callback has received the last consistent state. */
CP_API int cp_estimate(const cp_game* game, const cp_estimator_config* config,
                       const char* resume_json, cp_checkpoint_fn on_checkpoint, void* user,
                       cp_estimates** out);
CP_API int cp_estimates_from_csv(const char* csv, cp_estimates** out);
CP_API void cp_estimates_free(cp_estimates* estimates);

CP_API size_t cp_estimates_count(const cp_estimates* estimates);
CP_API int cp_estimates_get(const cp_estimates* estimates, size_t player, cp_estimate_row* row);
CP_API uint64_t cp_estimates_evaluations(const cp_estimates* estimates);
CP_API uint64_t cp_estimates_permutations(const cp_estimates* estimates);
CP_API uint64_t cp_estimates_range_violations(const cp_estimates* estimates);
/* CSV with columns player,layer,head,mean,variance,t,lower,upper,converged,
 * reason. layout_game (nullable) supplies the layer/head mapping. */
CP_API int cp_estimates_csv(const cp_estimates* estimates, const cp_game* layout_game,
                            char** out);
/* Final estimator state as checkpoint JSON (empty for CSV-loaded sets). */
CP_API int cp_estimates_checkpoint(const cp_estimates* estimates, char** out);

/* ---- pruning and analysis -------------------------------------------- */

/* rule: "upper" (Bernstein upper bound < 0) or "point" (mean < 0). */
CP_API int cp_prune(const cp_estimates* estimates, const cp_game* game, const char* rule,
                    cp_prune_report** out);
/* Report for an explicit keep-mask given as a "0/1" string. */
CP_API int cp_prune_mask(const cp_game* game, const char* mask_bits, cp_prune_report** out);
CP_API int cp_zero_shot_transfer(const cp_prune_report* source, const cp_game* target,
                                 cp_prune_report** out);
CP_API void cp_prune_report_free(cp_prune_report* report);
CP_API size_t cp_prune_report_k(const cp_prune_report* report);
CP_API double cp_prune_report_delta(const cp_prune_report* report);
CP_API int cp_prune_report_mask(const cp_prune_report* report, char** mask_bits);
CP_API int cp_prune_report_json(const cp_prune_report* report, char** out);

typedef enum cp_ranking {
  CP_RANKING_SHAPLEY = 0,
  CP_RANKING_GRADIENT = 1,
  CP_RANKING_RANDOM = 2
} cp_ranking;

/* mask_out: n bytes, 0 for the k lowest-valued players (ties: lower index). */
CP_API int cp_bottom_k_mask(const double* values, size_t n, size_t k, uint8_t* mask_out);
/* Transformer games only (CP_ERR_UNSUPPORTED otherwise). */
CP_API int cp_gradient_importance(const cp_game* game, double epsilon, double* out, size_t n);
/* Adjusted metric after removing k = 0..n players; writes n+1 values.
 * values is ignored for CP_RANKING_RANDOM, which averages n_draws draws. */
CP_API int cp_curve(const cp_game* game, int ranking, const double* values, size_t n,
                    size_t n_draws, uint64_t seed, double* metrics_out);
CP_API int cp_curve_csv(const int* rankings, const double* const* metrics, size_t n_curves,
                        size_t n_points, char** out);
CP_API int cp_random_prune_baseline(const cp_game* game, size_t k, size_t n_draws,
                                    uint64_t seed, double* out);

CP_API int cp_spearman(const double* a, const double* b, size_t n, double* out);
/* values[l] points at n_players values for language l; out is row-major
 * n_languages x n_languages. */
CP_API int cp_correlation_matrix(const double* const* values, const char* const* labels,
                                 size_t n_languages, size_t n_players, double* out);
CP_API int cp_correlation_csv(const char* const* labels, size_t n_languages,
                              const double* matrix, char** out);

#ifdef __cplusplus
}
#endif

#endif /* COALITION_PRUNE_H */
