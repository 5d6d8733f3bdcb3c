// coalition-prune: command-line front end over the C API.
//
//   coalition-prune exact        --game FILE --out CSV
//   coalition-prune estimate     --game FILE --mode tmab --out CSV [...]
//   coalition-prune run-external --cmd "..." --out CSV [...]
//   coalition-prune prune        --estimates CSV --game FILE --out JSON
//   coalition-prune curve        --game FILE --ranking shapley:CSV --out CSV
//   coalition-prune correlate    --estimates A.csv B.csv --labels a b --out CSV
//
// Exit codes: 0 success, 2 usage/spec error, 3 external-evaluator failure.

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "coalition_prune/coalition_prune.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitExternal = 3;

// Thrown to unwind a command with a given exit code.
struct CommandFailure {
  int exit_code;
  std::string message;
};

int exit_code_for(int status) {
  switch (status) {
    case CP_ERR_EXTERNAL:
    case CP_ERR_GAME_CONTRACT: return kExitExternal;
    case CP_ERR_INTERNAL: return 1;
    default: return kExitUsage;
  }
}

void check(int status, const std::string& context) {
  if (status != CP_OK) {
    throw CommandFailure{exit_code_for(status), context + ": " + cp_last_error()};
  }
}

struct GameDeleter {
  void operator()(cp_game* g) const { cp_game_free(g); }
};
struct EstimatesDeleter {
  void operator()(cp_estimates* e) const { cp_estimates_free(e); }
};
struct ReportDeleter {
  void operator()(cp_prune_report* r) const { cp_prune_report_free(r); }
};
using GamePtr = std::unique_ptr<cp_game, GameDeleter>;
using EstimatesPtr = std::unique_ptr<cp_estimates, EstimatesDeleter>;
using ReportPtr = std::unique_ptr<cp_prune_report, ReportDeleter>;

std::string take(char* text) {
  std::string copy = text ? text : "";
  cp_string_free(text);
  return copy;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CommandFailure{kExitUsage, "cannot read '" + path + "'"};
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Write-temp-then-rename so readers never see a partial file.
void write_atomic(const std::string& path, const std::string& content) {
  const std::string temp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw CommandFailure{kExitUsage, "cannot write '" + temp + "'"};
    out << content;
    out.flush();
    if (!out) throw CommandFailure{kExitUsage, "write to '" + temp + "' failed"};
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp);
    throw CommandFailure{kExitUsage, "cannot move output into '" + path + "': " + ec.message()};
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

struct Manifest {
  std::string command;
  json game_spec;
  json estimator_config;
  std::vector<std::string> outputs;
  std::string started = utc_now();
  std::uint64_t evaluations_used = 0;

  void write(const std::string& primary_output) const {
    json doc = {{"command", command},
                {"game_spec", game_spec},
                {"estimator_config", estimator_config},
                {"outputs", outputs},
                {"started", started},
                {"finished", utc_now()},
                {"evaluations_used", evaluations_used}};
    write_atomic(primary_output + ".manifest.json", doc.dump(2) + "\n");
  }
};

json spec_json_of_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception&) {
    return json(nullptr);
  }
}

void print_warnings(const cp_game* game) {
  char* text = nullptr;
  if (cp_game_warnings(game, &text) == CP_OK) {
    const auto warnings = take(text);
    if (!warnings.empty()) std::cerr << "warning: " << warnings;
  }
}

GamePtr load_game(const std::string& path) {
  cp_game* raw = nullptr;
  check(cp_game_from_file(path.c_str(), &raw), "loading game '" + path + "'");
  GamePtr game(raw);
  print_warnings(game.get());
  return game;
}

std::vector<double> estimate_means(const std::string& path) {
  cp_estimates* raw = nullptr;
  check(cp_estimates_from_csv(read_file(path).c_str(), &raw), "reading estimates '" + path + "'");
  EstimatesPtr estimates(raw);
  std::vector<double> means(cp_estimates_count(estimates.get()));
  for (std::size_t i = 0; i < means.size(); ++i) {
    cp_estimate_row row{};
    check(cp_estimates_get(estimates.get(), i, &row), "reading estimates");
    means[i] = row.mean;
  }
  return means;
}

// ---- exact ----------------------------------------------------------------

struct ExactOptions {
  std::string game;
  std::string out;
  std::size_t workers = 1;
};

int run_exact(const ExactOptions& o) {
  Manifest manifest;
  manifest.command = "exact";
  manifest.game_spec = spec_json_of_file(o.game);
  auto game = load_game(o.game);
  const std::size_t n = cp_game_players(game.get());
  std::vector<double> values(n);
  std::uint64_t evaluations = 0;
  check(cp_exact_shapley(game.get(), 0, o.workers, values.data(), n, &evaluations),
        "exact Shapley");
  write_atomic(o.out, take([&] {
                 char* csv = nullptr;
                 check(cp_exact_csv(game.get(), values.data(), n, &csv), "formatting");
                 return csv;
               }()));
  manifest.outputs = {o.out};
  manifest.evaluations_used = evaluations;
  manifest.write(o.out);
  return kExitOk;
}

// ---- estimate / run-external ---------------------------------------------

struct EstimateOptions {
  std::string game;
  std::string command;  // run-external only
  double timeout = 60.0;
  std::string mode = "tmab";
  double delta = 0.1;
  double range = 1.0;
  double truncation = 0.5;
  std::uint64_t max_perms = 10000;
  std::uint64_t min_samples = 5;
  std::uint64_t seed = 0;
  std::uint64_t sync_interval = 10;
  std::size_t workers = 1;
  std::string checkpoint;
  std::string out;
};

struct CheckpointTarget {
  std::string path;
};

int write_checkpoint(const char* json_text, void* user) {
  const auto* target = static_cast<const CheckpointTarget*>(user);
  try {
    write_atomic(target->path, json_text);
    return 0;
  } catch (const CommandFailure& failure) {
    std::cerr << "error: " << failure.message << "\n";
    return 1;
  }
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  const char* env = std::getenv("COALITION_PRUNE_SEED");
  if (env == nullptr || *env == '\0') return flag_seed;
  errno = 0;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw CommandFailure{kExitUsage, "COALITION_PRUNE_SEED is not an unsigned integer"};
  }
  return value;
}

int run_estimate(const EstimateOptions& o, bool external) {
  Manifest manifest;
  manifest.command = external ? "run-external" : "estimate";

  cp_estimator_config config;
  cp_estimator_config_default(&config);
  check(cp_parse_mode(o.mode.c_str(), &config.mode), "--mode");
  config.delta = o.delta;
  config.range_R = o.range;
  config.truncation_fraction = o.truncation;
  config.max_permutations = o.max_perms;
  config.min_samples_per_player = o.min_samples;
  config.seed = effective_seed(o.seed);
  config.sync_interval = o.sync_interval;
  config.checkpoint_interval = 50;
  config.workers = external ? 1 : o.workers;

  GamePtr game;
  if (external) {
    manifest.game_spec = {{"family", "external"}, {"command", o.command}, {"timeout", o.timeout}};
    cp_game* raw = nullptr;
    check(cp_game_external(o.command.c_str(), o.timeout, &raw), "starting external evaluator");
    game.reset(raw);
  } else {
    manifest.game_spec = spec_json_of_file(o.game);
    game = load_game(o.game);
    if (cp_game_is_external(game.get())) config.workers = 1;
  }
  manifest.estimator_config = {{"mode", o.mode},
                               {"delta", config.delta},
                               {"range_R", config.range_R},
                               {"truncation_fraction", config.truncation_fraction},
                               {"max_permutations", config.max_permutations},
                               {"min_samples_per_player", config.min_samples_per_player},
                               {"seed", config.seed},
                               {"sync_interval", config.sync_interval},
                               {"workers", config.workers}};

  std::optional<std::string> resume;
  CheckpointTarget target{o.checkpoint};
  if (!o.checkpoint.empty() && std::filesystem::exists(o.checkpoint)) {
    resume = read_file(o.checkpoint);
  }

  cp_estimates* raw = nullptr;
  check(cp_estimate(game.get(), &config, resume ? resume->c_str() : nullptr,
                    o.checkpoint.empty() ? nullptr : write_checkpoint, &target, &raw),
        "estimation");
  EstimatesPtr estimates(raw);

  char* csv = nullptr;
  check(cp_estimates_csv(estimates.get(), game.get(), &csv), "formatting");
  write_atomic(o.out, take(csv));
  manifest.outputs = {o.out};
  if (!o.checkpoint.empty()) {
    char* state = nullptr;
    check(cp_estimates_checkpoint(estimates.get(), &state), "checkpoint");
    write_atomic(o.checkpoint, take(state));
    manifest.outputs.push_back(o.checkpoint);
  }
  const auto violations = cp_estimates_range_violations(estimates.get());
  if (violations > 0) {
    std::cerr << "warning: " << violations << " marginals fell outside [-R, R] and were clamped\n";
  }
  manifest.evaluations_used = cp_estimates_evaluations(estimates.get());
  manifest.write(o.out);
  return kExitOk;
}

// ---- prune ------------------------------------------------------------------

struct PruneOptions {
  std::string estimates;
  std::string game;
  std::string rule = "upper";
  std::string out;
};

int run_prune(const PruneOptions& o) {
  Manifest manifest;
  manifest.command = "prune";
  manifest.game_spec = spec_json_of_file(o.game);
  cp_estimates* raw = nullptr;
  check(cp_estimates_from_csv(read_file(o.estimates).c_str(), &raw),
        "reading estimates '" + o.estimates + "'");
  EstimatesPtr estimates(raw);
  auto game = load_game(o.game);
  cp_prune_report* report_raw = nullptr;
  check(cp_prune(estimates.get(), game.get(), o.rule.c_str(), &report_raw), "pruning");
  ReportPtr report(report_raw);
  char* text = nullptr;
  check(cp_prune_report_json(report.get(), &text), "formatting");
  write_atomic(o.out, take(text));
  manifest.outputs = {o.out};
  manifest.evaluations_used = 2;
  manifest.write(o.out);
  return kExitOk;
}

// ---- curve ------------------------------------------------------------------

struct CurveOptions {
  std::string game;
  std::vector<std::string> rankings;
  std::size_t seeds = 10;
  std::uint64_t seed = 0;
  double epsilon = 1e-3;
  std::string out;
};

int run_curve(const CurveOptions& o) {
  Manifest manifest;
  manifest.command = "curve";
  manifest.game_spec = spec_json_of_file(o.game);
  auto game = load_game(o.game);
  const std::size_t n = cp_game_players(game.get());
  const std::uint64_t seed = effective_seed(o.seed);

  std::vector<int> kinds;
  std::vector<std::vector<double>> curves;
  for (const auto& spec : o.rankings) {
    int kind = 0;
    std::vector<double> values;
    if (spec.rfind("shapley:", 0) == 0) {
      kind = CP_RANKING_SHAPLEY;
      values = estimate_means(spec.substr(8));
      if (values.size() != n) {
        throw CommandFailure{kExitUsage, "estimates in '" + spec.substr(8) + "' cover " +
                                             std::to_string(values.size()) +
                                             " players, game has " + std::to_string(n)};
      }
    } else if (spec == "gradient") {
      kind = CP_RANKING_GRADIENT;
      values.resize(n);
      check(cp_gradient_importance(game.get(), o.epsilon, values.data(), n),
            "gradient ranking");
    } else if (spec == "random") {
      kind = CP_RANKING_RANDOM;
    } else {
      throw CommandFailure{kExitUsage, "unknown ranking '" + spec +
                                           "' (expected shapley:CSV, gradient or random)"};
    }
    std::vector<double> metrics(n + 1);
    check(cp_curve(game.get(), kind, values.empty() ? nullptr : values.data(), values.size(),
                   o.seeds, seed, metrics.data()),
          "curve");
    kinds.push_back(kind);
    curves.push_back(std::move(metrics));
  }

  std::vector<const double*> pointers;
  for (const auto& c : curves) pointers.push_back(c.data());
  char* csv = nullptr;
  check(cp_curve_csv(kinds.data(), pointers.data(), kinds.size(), n + 1, &csv), "formatting");
  write_atomic(o.out, take(csv));
  manifest.outputs = {o.out};
  manifest.write(o.out);
  return kExitOk;
}

// ---- correlate ----------------------------------------------------------------

struct CorrelateOptions {
  std::vector<std::string> estimates;
  std::vector<std::string> labels;
  std::string out;
};

int run_correlate(const CorrelateOptions& o) {
  if (o.estimates.size() < 2) {
    throw CommandFailure{kExitUsage, "correlate needs at least two estimate files"};
  }
  std::vector<std::string> labels = o.labels;
  if (labels.empty()) {
    for (const auto& path : o.estimates) labels.push_back(std::filesystem::path(path).stem());
  }
  if (labels.size() != o.estimates.size()) {
    throw CommandFailure{kExitUsage, "--labels must name every estimates file"};
  }
  std::vector<std::vector<double>> series;
  for (const auto& path : o.estimates) series.push_back(estimate_means(path));
  for (const auto& s : series) {
    if (s.size() != series.front().size()) {
      throw CommandFailure{kExitUsage, "estimate files have different player counts"};
    }
  }
  std::vector<const double*> values;
  std::vector<const char*> tags;
  for (std::size_t i = 0; i < series.size(); ++i) {
    values.push_back(series[i].data());
    tags.push_back(labels[i].c_str());
  }
  const std::size_t m = series.size();
  std::vector<double> matrix(m * m);
  check(cp_correlation_matrix(values.data(), tags.data(), m, series.front().size(),
                              matrix.data()),
        "correlation");
  char* csv = nullptr;
  check(cp_correlation_csv(tags.data(), m, matrix.data(), &csv), "formatting");
  write_atomic(o.out, take(csv));
  Manifest manifest;
  manifest.command = "correlate";
  manifest.outputs = {o.out};
  manifest.write(o.out);
  return kExitOk;
}

void add_estimator_flags(CLI::App* cmd, EstimateOptions& o) {
  cmd->add_option("--mode", o.mode, "plain_mc | truncated_mc | tmab")
      ->check(CLI::IsMember({"plain_mc", "truncated_mc", "tmab"}));
  cmd->add_option("--delta", o.delta, "Bernstein confidence parameter");
  cmd->add_option("--range", o.range, "Range R of the marginal contributions");
  cmd->add_option("--truncation", o.truncation, "Stop scans below this active fraction");
  cmd->add_option("--max-perms", o.max_perms, "Permutation budget");
  cmd->add_option("--min-samples", o.min_samples, "Samples before a bandit stop");
  cmd->add_option("--seed", o.seed, "Seed (COALITION_PRUNE_SEED overrides)");
  cmd->add_option("--sync-interval", o.sync_interval, "Permutations per merge point");
  cmd->add_option("--workers", o.workers, "Concurrent permutation scans");
  cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file (resumed if present)");
  cmd->add_option("--out", o.out, "Estimates CSV")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shapley attribution and structured pruning of maskable components"};
  app.require_subcommand(1);

  ExactOptions exact;
  auto* exact_cmd = app.add_subcommand("exact", "Exact Shapley values by enumeration");
  exact_cmd->add_option("--game", exact.game, "Game spec JSON")->required();
  exact_cmd->add_option("--out", exact.out, "Output CSV")->required();
  exact_cmd->add_option("--workers", exact.workers, "Threads filling the subset table");

  EstimateOptions estimate;
  auto* estimate_cmd = app.add_subcommand("estimate", "Monte Carlo Shapley estimation");
  estimate_cmd->add_option("--game", estimate.game, "Game spec JSON")->required();
  add_estimator_flags(estimate_cmd, estimate);

  EstimateOptions external;
  auto* external_cmd =
      app.add_subcommand("run-external", "Estimate against an external evaluator process");
  external_cmd->add_option("--cmd", external.command, "Evaluator command line")->required();
  external_cmd->add_option("--timeout", external.timeout, "Seconds to wait for each response");
  add_estimator_flags(external_cmd, external);

  PruneOptions prune;
  auto* prune_cmd = app.add_subcommand("prune", "Prune players with confidently negative value");
  prune_cmd->add_option("--estimates", prune.estimates, "Estimates CSV")->required();
  prune_cmd->add_option("--game", prune.game, "Game spec JSON")->required();
  prune_cmd->add_option("--rule", prune.rule, "upper | point")
      ->check(CLI::IsMember({"upper", "point"}));
  prune_cmd->add_option("--out", prune.out, "Prune report JSON")->required();

  CurveOptions curve;
  auto* curve_cmd = app.add_subcommand("curve", "Metric as players are removed by ranking");
  curve_cmd->add_option("--game", curve.game, "Game spec JSON")->required();
  curve_cmd->add_option("--ranking", curve.rankings, "shapley:CSV | gradient | random")
      ->required();
  curve_cmd->add_option("--seeds", curve.seeds, "Random draws per sparsity level");
  curve_cmd->add_option("--seed", curve.seed, "Seed for random rankings");
  curve_cmd->add_option("--epsilon", curve.epsilon, "Finite-difference step (gradient)");
  curve_cmd->add_option("--out", curve.out, "Curve CSV")->required();

  CorrelateOptions correlate;
  auto* correlate_cmd =
      app.add_subcommand("correlate", "Spearman correlation of estimates across languages");
  correlate_cmd->add_option("--estimates", correlate.estimates, "Estimates CSV files")
      ->required();
  correlate_cmd->add_option("--labels", correlate.labels, "Language tags");
  correlate_cmd->add_option("--out", correlate.out, "Correlation CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*exact_cmd) return run_exact(exact);
    if (*estimate_cmd) return run_estimate(estimate, false);
    if (*external_cmd) return run_estimate(external, true);
    if (*prune_cmd) return run_prune(prune);
    if (*curve_cmd) return run_curve(curve);
    if (*correlate_cmd) return run_correlate(correlate);
  } catch (const CommandFailure& failure) {
    std::cerr << "error: " << failure.message << "\n";
    return failure.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
