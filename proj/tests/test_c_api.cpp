#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "doctest.h"

#include "coalition_prune/coalition_prune.h"

extern "C" int c_glove_first_value(double* out);

namespace {

struct Owned {
  char* text = nullptr;
  ~Owned() { cp_string_free(text); }
  std::string str() const { return text ? text : ""; }
};

struct GameHandle {
  cp_game* game = nullptr;
  ~GameHandle() { cp_game_free(game); }
};

struct EstimatesHandle {
  cp_estimates* estimates = nullptr;
  ~EstimatesHandle() { cp_estimates_free(estimates); }
};

struct ReportHandle {
  cp_prune_report* report = nullptr;
  ~ReportHandle() { cp_prune_report_free(report); }
};

const char* kAdditive = R"({"family":"additive","base":0.5,"weights":[0.2,-0.1,0.3]})";

const char* kPlanted = R"({"family":"planted","n_players":6,"languages":["en"],"base":[0.5],
  "coeff":[[0.06],[-0.03],[0.045],[0.02],[-0.04],[0.05]],"noise_scale":0.01,"seed":3,
  "heads_per_layer":3})";

}  // namespace

TEST_CASE("header is usable from C") {
  double value = 0.0;
  REQUIRE(c_glove_first_value(&value) == CP_OK);
  CHECK(std::abs(value - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("game handles") {
  GameHandle g;
  REQUIRE(cp_game_from_json(kAdditive, &g.game) == CP_OK);
  CHECK(cp_game_players(g.game) == 3);
  CHECK(cp_game_is_external(g.game) == 0);
  const uint8_t all[] = {1, 1, 1};
  const uint8_t none[] = {0, 0, 0};
  double v = 0;
  REQUIRE(cp_game_adjusted(g.game, all, 3, &v) == CP_OK);
  CHECK(v == doctest::Approx(0.4));
  REQUIRE(cp_game_adjusted(g.game, none, 3, &v) == CP_OK);
  CHECK(v == 0.0);
  REQUIRE(cp_game_raw_metric(g.game, all, 3, &v) == CP_OK);
  CHECK(v == doctest::Approx(0.9));
  REQUIRE(cp_game_baseline(g.game, &v) == CP_OK);
  CHECK(v == 0.5);
  REQUIRE(cp_game_grand_value(g.game, &v) == CP_OK);
  CHECK(v == doctest::Approx(0.4));
  CHECK(cp_game_adjusted(g.game, all, 2, &v) == CP_ERR_ARGUMENT);
  CHECK(std::string(cp_last_error()).find("width") != std::string::npos);

  Owned descriptor;
  REQUIRE(cp_game_descriptor(g.game, &descriptor.text) == CP_OK);
  CHECK(descriptor.str().find("additive") != std::string::npos);
  Owned warnings;
  REQUIRE(cp_game_warnings(g.game, &warnings.text) == CP_OK);
  CHECK(warnings.str().empty());
}

TEST_CASE("error statuses") {
  cp_game* game = nullptr;
  CHECK(cp_game_from_json("{not json", &game) == CP_ERR_PARSE);
  CHECK(game == nullptr);
  CHECK(std::string(cp_last_error()).size() > 0);
  CHECK(cp_game_from_file("/nonexistent.json", &game) == CP_ERR_IO);
  CHECK(cp_game_from_json(nullptr, &game) == CP_ERR_ARGUMENT);

  GameHandle big;
  REQUIRE(cp_game_from_json(R"({"family":"unanimity","n":30})", &big.game) == CP_OK);
  std::vector<double> values(30);
  uint64_t evaluations = 0;
  CHECK(cp_exact_shapley(big.game, 0, 1, values.data(), 30, &evaluations) == CP_ERR_CAPACITY);

  double w = 0;
  CHECK(cp_bernstein_width(0.01, 0, 0.1, 1.0, &w) == CP_ERR_UNDEFINED);
  const double constant[] = {1, 1, 1};
  const double ramp[] = {1, 2, 3};
  CHECK(cp_spearman(constant, ramp, 3, &w) == CP_ERR_UNDEFINED);
  REQUIRE(cp_spearman(ramp, ramp, 3, &w) == CP_OK);
  CHECK(w == doctest::Approx(1.0));
  int mode = -1;
  CHECK(cp_parse_mode("bandit", &mode) == CP_ERR_ARGUMENT);
  REQUIRE(cp_parse_mode("truncated_mc", &mode) == CP_OK);
  CHECK(mode == CP_MODE_TRUNCATED_MC);
}

TEST_CASE("exact solvers and csv") {
  GameHandle g;
  REQUIRE(cp_game_from_json(R"({"family":"glove"})", &g.game) == CP_OK);
  double values[3];
  double perm[3];
  uint64_t evaluations = 0;
  REQUIRE(cp_exact_shapley(g.game, 0, 2, values, 3, &evaluations) == CP_OK);
  REQUIRE(cp_exact_shapley_permutations(g.game, perm, 3) == CP_OK);
  CHECK(evaluations == 8);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(values[i] - perm[i]) < 1e-12);
  CHECK(cp_exact_shapley(g.game, 0, 1, values, 2, &evaluations) == CP_ERR_ARGUMENT);
  Owned csv;
  REQUIRE(cp_exact_csv(g.game, values, 3, &csv.text) == CP_OK);
  CHECK(csv.str().rfind("player,layer,head,shapley\n0,0,0,0.66666666666666", 0) == 0);
}

namespace {

int collect(const char* json, void* user) {
  static_cast<std::vector<std::string>*>(user)->push_back(json);
  return 0;
}

int refuse(const char*, void*) { return 1; }

}  // namespace

TEST_CASE("estimation, checkpoints and resume") {
  GameHandle g;
  REQUIRE(cp_game_from_json(kPlanted, &g.game) == CP_OK);
  cp_estimator_config config;
  cp_estimator_config_default(&config);
  CHECK(config.delta == 0.1);
  CHECK(config.mode == CP_MODE_TMAB);
  CHECK(config.truncation_fraction == 0.5);
  config.max_permutations = 200;
  config.seed = 4;

  EstimatesHandle straight;
  std::vector<std::string> checkpoints;
  REQUIRE(cp_estimate(g.game, &config, nullptr, collect, &checkpoints, &straight.estimates) == CP_OK);
  CHECK(cp_estimates_count(straight.estimates) == 6);
  CHECK(cp_estimates_permutations(straight.estimates) <= 200);
  CHECK(cp_estimates_evaluations(straight.estimates) > 1);
  CHECK(cp_estimates_range_violations(straight.estimates) == 0);
  REQUIRE_FALSE(checkpoints.empty());

  cp_estimate_row row;
  REQUIRE(cp_estimates_get(straight.estimates, 4, &row) == CP_OK);
  CHECK(row.mean < 0);
  CHECK(std::string(row.reason).size() > 0);
  CHECK(cp_estimates_get(straight.estimates, 6, &row) == CP_ERR_ARGUMENT);

  auto half = config;
  half.max_permutations = 100;
  EstimatesHandle first;
  REQUIRE(cp_estimate(g.game, &half, nullptr, nullptr, nullptr, &first.estimates) == CP_OK);
  Owned state;
  REQUIRE(cp_estimates_checkpoint(first.estimates, &state.text) == CP_OK);
  EstimatesHandle resumed;
  REQUIRE(cp_estimate(g.game, &config, state.text, nullptr, nullptr, &resumed.estimates) == CP_OK);
  Owned a, b;
  REQUIRE(cp_estimates_csv(straight.estimates, g.game, &a.text) == CP_OK);
  REQUIRE(cp_estimates_csv(resumed.estimates, g.game, &b.text) == CP_OK);
  CHECK(a.str() == b.str());

  auto other = config;
  other.seed = 5;
  EstimatesHandle refused;
  CHECK(cp_estimate(g.game, &other, state.text, nullptr, nullptr, &refused.estimates) ==
        CP_ERR_CHECKPOINT);
  CHECK(refused.estimates == nullptr);
  CHECK(cp_estimate(g.game, &config, "{}", nullptr, nullptr, &refused.estimates) ==
        CP_ERR_CHECKPOINT);
  CHECK(cp_estimate(g.game, &config, nullptr, refuse, nullptr, &refused.estimates) == CP_ERR_IO);

  Owned digest1, digest2;
  REQUIRE(cp_config_digest(g.game, &config, &digest1.text) == CP_OK);
  REQUIRE(cp_config_digest(g.game, &other, &digest2.text) == CP_OK);
  CHECK(digest1.str() != digest2.str());

  EstimatesHandle parsed;
  REQUIRE(cp_estimates_from_csv(a.text, &parsed.estimates) == CP_OK);
  Owned again;
  REQUIRE(cp_estimates_csv(parsed.estimates, g.game, &again.text) == CP_OK);
  CHECK(again.str() == a.str());
  CHECK(cp_estimates_from_csv("player\n", &refused.estimates) == CP_ERR_PARSE);
}

TEST_CASE("pruning through the C API") {
  GameHandle g;
  REQUIRE(cp_game_from_json(kAdditive, &g.game) == CP_OK);
  EstimatesHandle e;
  REQUIRE(cp_estimates_from_csv(
              "player,mean,variance,t,lower,upper,converged,reason\n"
              "0,0.2,0,10,0.1,0.3,true,lower_bound_positive\n"
              "1,-0.1,0,10,-0.2,-0.01,true,upper_bound_negative\n"
              "2,0.3,0,10,0.2,0.4,true,lower_bound_positive\n",
              &e.estimates) == CP_OK);
  ReportHandle r;
  REQUIRE(cp_prune(e.estimates, g.game, "upper", &r.report) == CP_OK);
  CHECK(cp_prune_report_k(r.report) == 1);
  CHECK(cp_prune_report_delta(r.report) == doctest::Approx(0.1));
  Owned mask;
  REQUIRE(cp_prune_report_mask(r.report, &mask.text) == CP_OK);
  CHECK(mask.str() == "101");
  Owned json;
  REQUIRE(cp_prune_report_json(r.report, &json.text) == CP_OK);
  CHECK(json.str().find("\"mask_bits\": \"101\"") != std::string::npos);
  ReportHandle bad;
  CHECK(cp_prune(e.estimates, g.game, "sideways", &bad.report) == CP_ERR_ARGUMENT);

  GameHandle glove;
  REQUIRE(cp_game_from_json(R"({"family":"glove"})", &glove.game) == CP_OK);
  ReportHandle transferred;
  REQUIRE(cp_zero_shot_transfer(r.report, glove.game, &transferred.report) == CP_OK);
  CHECK(cp_prune_report_delta(transferred.report) == doctest::Approx(0.0));
  ReportHandle explicit_mask;
  REQUIRE(cp_prune_mask(glove.game, "011", &explicit_mask.report) == CP_OK);
  CHECK(cp_prune_report_delta(explicit_mask.report) == doctest::Approx(-1.0));
  CHECK(cp_prune_mask(glove.game, "01", &bad.report) == CP_ERR_ARGUMENT);

  GameHandle four;
  REQUIRE(cp_game_from_json(R"({"family":"unanimity","n":4})", &four.game) == CP_OK);
  CHECK(cp_zero_shot_transfer(r.report, four.game, &bad.report) == CP_ERR_ARGUMENT);
}

TEST_CASE("rankings, curves and correlation") {
  const double values[] = {0.1, 0.1, 0.5};
  uint8_t mask[3];
  REQUIRE(cp_bottom_k_mask(values, 3, 1, mask) == CP_OK);
  CHECK(mask[0] == 0);
  CHECK(mask[1] == 1);
  CHECK(mask[2] == 1);
  CHECK(cp_bottom_k_mask(values, 3, 4, mask) == CP_ERR_ARGUMENT);

  GameHandle g;
  REQUIRE(cp_game_from_json(kAdditive, &g.game) == CP_OK);
  const double phi[] = {0.2, -0.1, 0.3};
  double shapley_curve[4];
  double random_curve[4];
  REQUIRE(cp_curve(g.game, CP_RANKING_SHAPLEY, phi, 3, 10, 0, shapley_curve) == CP_OK);
  CHECK(shapley_curve[1] == doctest::Approx(0.5));
  CHECK(shapley_curve[3] == 0.0);
  REQUIRE(cp_curve(g.game, CP_RANKING_RANDOM, nullptr, 0, 10, 7, random_curve) == CP_OK);
  CHECK(random_curve[0] == doctest::Approx(0.4));
  double gradient[3];
  CHECK(cp_gradient_importance(g.game, 1e-3, gradient, 3) == CP_ERR_UNSUPPORTED);

  const int kinds[] = {CP_RANKING_SHAPLEY, CP_RANKING_RANDOM};
  const double* curves[] = {shapley_curve, random_curve};
  Owned csv;
  REQUIRE(cp_curve_csv(kinds, curves, 2, 4, &csv.text) == CP_OK);
  CHECK(csv.str().find("3,0,random") != std::string::npos);

  double baseline = 0;
  REQUIRE(cp_random_prune_baseline(g.game, 0, 10, 1, &baseline) == CP_OK);
  CHECK(baseline == doctest::Approx(0.9));

  const double en[] = {0.1, 0.2, 0.3, -0.1};
  const double de[] = {0.1, 0.2, 0.3, -0.1};
  const double sw[] = {-0.1, 0.3, 0.2, 0.1};
  const double* by_language[] = {en, de, sw};
  const char* labels[] = {"en", "de", "sw"};
  double matrix[9];
  REQUIRE(cp_correlation_matrix(by_language, labels, 3, 4, matrix) == CP_OK);
  CHECK(matrix[1] == doctest::Approx(1.0));
  CHECK(matrix[0] == 1.0);
  CHECK(matrix[2] == matrix[6]);
  Owned table;
  REQUIRE(cp_correlation_csv(labels, 3, matrix, &table.text) == CP_OK);
  CHECK(table.str().rfind(",en,de,sw\nen,1,1,", 0) == 0);
}

TEST_CASE("transformer gradient through the C API") {
  GameHandle g;
  REQUIRE(cp_game_from_json(
              R"({"family":"transformer","weight_seed":2,"dataset":{"size":16,"seed":1}})",
              &g.game) == CP_OK);
  CHECK(cp_game_heads_per_layer(g.game) == 4);
  double gradient[8];
  REQUIRE(cp_gradient_importance(g.game, 1e-3, gradient, 8) == CP_OK);
  for (double v : gradient) CHECK(v > 0.0);
  CHECK(cp_gradient_importance(g.game, 1e-3, gradient, 7) == CP_ERR_ARGUMENT);
}
