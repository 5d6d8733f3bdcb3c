#include <cmath>
#include <limits>

#include "doctest.h"
#include "json.hpp"

#include "coalition_prune/error.hpp"
#include "coalition_prune/tables.hpp"

using namespace cprune;

TEST_CASE("real formatting round-trips") {
  for (double v : {0.1, -0.123456789012345678, 1e-300, 2.0 / 3.0, 0.0, 1.0}) {
    CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("exact csv carries head coordinates") {
  const std::vector<double> values = {0.5, -0.25, 0.125, 0.0};
  const auto csv = exact_csv(values, HeadLayout(4, 2));
  CHECK(csv ==
        "player,layer,head,shapley\n"
        "0,0,0,0.5\n"
        "1,0,1,-0.25\n"
        "2,1,0,0.125\n"
        "3,1,1,0\n");
}

TEST_CASE("estimates csv round trip") {
  std::vector<ShapleyEstimate> rows(3);
  rows[0] = {0.1, 0.01, 40, 0.02, 0.18, true, ConvergenceReason::lower_bound_positive};
  rows[1] = {-0.3, 0.0, 12, -0.4, -0.2, true, ConvergenceReason::upper_bound_negative};
  rows[2] = {2.0 / 3.0, 1e-5, 0, -1.0, 1.0, false, ConvergenceReason::budget_exhausted};
  const auto csv = estimates_csv(rows, HeadLayout(3, 0));
  CHECK(csv.rfind("player,layer,head,mean,variance,t,lower,upper,converged,reason\n", 0) == 0);
  CHECK(parse_estimates_csv(csv) == rows);

  // Column order does not matter; extra columns are ignored.
  const auto shuffled = parse_estimates_csv(
      "reason,converged,upper,lower,t,variance,mean,player,note\n"
      "none,false,0.5,-0.5,3,0.1,0,0,x\n");
  REQUIRE(shuffled.size() == 1);
  CHECK(shuffled[0].upper == 0.5);

  CHECK_THROWS_AS(parse_estimates_csv(""), Error);
  CHECK_THROWS_AS(parse_estimates_csv("player,mean\n0,1\n"), Error);
  CHECK_THROWS_AS(parse_estimates_csv(
                      "player,mean,variance,t,lower,upper,converged,reason\n1,0,0,1,0,0,true,none\n"),
                  Error);
  CHECK_THROWS_AS(parse_estimates_csv(
                      "player,mean,variance,t,lower,upper,converged,reason\n0,abc,0,1,0,0,true,none\n"),
                  Error);
  CHECK_THROWS_AS(parse_estimates_csv(
                      "player,mean,variance,t,lower,upper,converged,reason\n0,0,0,1,0,0,yes,none\n"),
                  Error);
}

TEST_CASE("prune report json") {
  PruneReport report;
  report.decisions = {Decision::keep, Decision::prune};
  report.k = 1;
  report.mask = Coalition::from_string("10");
  report.metric_before = 0.5;
  report.metric_after = 0.6;
  report.delta = 0.1;
  const auto doc = nlohmann::json::parse(prune_report_json(report));
  CHECK(doc["decisions"] == nlohmann::json({"keep", "prune"}));
  CHECK(doc["k"] == 1);
  CHECK(doc["mask_bits"] == "10");
  CHECK(doc["delta"].get<double>() == 0.1);
}

TEST_CASE("curve and correlation csv") {
  PruningCurve a{RankingKind::shapley, {{0, 0.5}, {1, 0.25}}};
  PruningCurve b{RankingKind::random, {{0, 0.5}, {1, 0.0}}};
  const std::vector<PruningCurve> curves = {a, b};
  CHECK(curve_csv(curves) ==
        "heads_removed,metric,ranking_kind\n0,0.5,shapley\n1,0.25,shapley\n0,0.5,random\n1,0,random\n");

  const std::vector<std::string> labels = {"en", "de"};
  const std::vector<std::vector<double>> m = {{1.0, 0.5}, {0.5, 1.0}};
  CHECK(correlation_csv(labels, m) == ",en,de\nen,1,0.5\nde,0.5,1\n");
  const std::vector<std::string> one = {"en"};
  CHECK_THROWS_AS(correlation_csv(one, m), Error);
}
