#include <cmath>
#include <map>
#include <set>

#include "doctest.h"

#include "coalition_prune/error.hpp"
#include "coalition_prune/game_spec.hpp"
#include "coalition_prune/games.hpp"
#include "coalition_prune/transformer.hpp"
#include "fixtures.hpp"

using namespace cprune;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("additive game") {
  const auto game = make_additive_game({0.5, {0.2, -0.1, 0.3}});
  CHECK(game.n_players() == 3);
  CHECK(game.warnings().empty());
  CHECK(game.evaluate_adjusted(Coalition::from_string("101")) == doctest::Approx(0.5));
  CHECK(code_of([] { (void)make_additive_game({0.5, {}}); }) == ErrorCode::argument);

  const auto clamped = make_additive_game({0.5, {0.45, 0.45}});
  CHECK_FALSE(clamped.warnings().empty());
  CHECK(clamped.raw_metric(Coalition::grand(2)) == 1.0);
}

TEST_CASE("planted singleton equals its coefficient") {
  const auto spec = testing::multilingual_spec(0.0);
  for (std::size_t l = 0; l < spec.languages.size(); ++l) {
    const auto game = make_planted_game(spec, spec.languages[l]);
    CHECK(game.warnings().empty());
    for (PlayerId h = 0; h < 12; ++h) {
      const double direct = game.evaluate_adjusted(Coalition::empty(12).with(h));
      CHECK(std::abs(direct - spec.coeff[h][l]) < 1e-12);
    }
  }
}

TEST_CASE("planted noise is deterministic and bounded") {
  const auto spec = testing::multilingual_spec(0.01, 99);
  const auto a = make_planted_game(spec, "en");
  const auto b = make_planted_game(spec, "en");
  double largest = 0.0;
  for (std::uint64_t bits = 0; bits < 4096; bits += 3) {
    const auto c = Coalition::from_bits(12, bits);
    CHECK(a.raw_metric(c) == b.raw_metric(c));
    largest = std::max(largest, std::abs(planted_noise(c, 99, "en", 0.01)));
  }
  CHECK(largest <= 0.01);
  CHECK(largest > 0.009);
  const auto c = Coalition::from_bits(12, 77);
  CHECK(planted_noise(c, 99, "en", 0.01) != planted_noise(c, 99, "de", 0.01));
  CHECK(planted_noise(c, 99, "en", 0.01) != planted_noise(c, 100, "en", 0.01));
}

TEST_CASE("pairwise interaction splits evenly between the pair") {
  PlantedMultilingualSpec spec;
  spec.n_players = 4;
  spec.languages = {"en"};
  spec.base = {0.5};
  spec.coeff.assign(4, {0.0});
  spec.pairwise = {{2, 3, 0.02}, {3, 2, 0.02}};
  const auto game = make_planted_game(spec, "en");
  const auto phi = testing::shapley_by_orderings(4, [&](std::uint64_t bits) {
    return game.evaluate_adjusted(Coalition::from_bits(4, bits));
  });
  CHECK(std::abs(phi[0]) < 1e-15);
  CHECK(std::abs(phi[1]) < 1e-15);
  CHECK(std::abs(phi[2] - 0.01) < 1e-12);
  CHECK(std::abs(phi[3] - 0.01) < 1e-12);
}

TEST_CASE("outlier player is positive only for the outlier language") {
  const auto spec = testing::multilingual_spec();
  for (std::size_t l = 0; l < spec.languages.size(); ++l) {
    const bool is_sw = spec.languages[l] == "sw";
    CHECK((spec.coeff[5][l] > 0.0) == is_sw);
  }
}

TEST_CASE("planted validation") {
  auto spec = testing::multilingual_spec();
  CHECK(code_of([&] { (void)make_planted_game(spec, "fr"); }) == ErrorCode::argument);
  auto bad = spec;
  bad.base.pop_back();
  CHECK(code_of([&] { (void)make_planted_family(bad); }) == ErrorCode::argument);
  bad = spec;
  bad.coeff[3].push_back(0.0);
  CHECK(code_of([&] { (void)make_planted_family(bad); }) == ErrorCode::argument);
  bad = spec;
  bad.pairwise = {{1, 1, 0.1}};
  CHECK(code_of([&] { (void)make_planted_family(bad); }) == ErrorCode::argument);
  bad = spec;
  bad.pairwise = {{1, 2, 0.1}, {2, 1, 0.2}};
  CHECK(code_of([&] { (void)make_planted_family(bad); }) == ErrorCode::argument);
  bad = spec;
  bad.languages[1] = "en";
  CHECK(code_of([&] { (void)make_planted_family(bad); }) == ErrorCode::argument);
  bad = spec;
  bad.pairwise = {{0, 12, 0.1}};
  CHECK(code_of([&] { (void)make_planted_family(bad); }) == ErrorCode::argument);
  CHECK(make_planted_family(spec).size() == 4);
}

TEST_CASE("unanimity and glove games") {
  const auto u = make_unanimity_game(4);
  for (std::uint64_t bits = 0; bits < 16; ++bits) {
    CHECK(u.evaluate_adjusted(Coalition::from_bits(4, bits)) == (bits == 15 ? 1.0 : 0.0));
  }
  CHECK(code_of([] { (void)make_unanimity_game(0); }) == ErrorCode::argument);
  const auto g = make_glove_game();
  CHECK(g.evaluate_adjusted(Coalition::from_string("110")) == 1.0);
  CHECK(g.evaluate_adjusted(Coalition::from_string("101")) == 1.0);
  CHECK(g.evaluate_adjusted(Coalition::from_string("011")) == 0.0);
  CHECK(g.evaluate_adjusted(Coalition::from_string("100")) == 0.0);
}

TEST_CASE("synthetic dataset") {
  const ToyTransformerSpec spec;
  const auto a = generate_synthetic_dataset(spec, "en", 512, 3);
  const auto b = generate_synthetic_dataset(spec, "en", 512, 3);
  CHECK(a.sequences == b.sequences);
  CHECK(a.labels == b.labels);
  CHECK(a.sequences.size() == 512);
  std::map<int, int> counts;
  for (int label : a.labels) ++counts[label];
  CHECK(counts.size() == 3);
  for (const auto& [label, count] : counts) CHECK(std::abs(count - 512 / 3) <= 1);
  for (const auto& seq : a.sequences) {
    CHECK(seq.size() == kDefaultSequenceLength);
    for (int token : seq) {
      CHECK(token >= 0);
      CHECK(token < 64);
    }
  }
  const auto other_seed = generate_synthetic_dataset(spec, "en", 512, 4);
  CHECK(other_seed.sequences != a.sequences);
  const auto other_language = generate_synthetic_dataset(spec, "de", 512, 3);
  CHECK(other_language.sequences != a.sequences);

  ToyTransformerSpec tiny;
  tiny.vocab_size = 4;
  CHECK(code_of([&] { (void)generate_synthetic_dataset(tiny, "en", 8, 1); }) == ErrorCode::argument);
  CHECK(code_of([&] { (void)generate_synthetic_dataset(spec, "en", 0, 1); }) == ErrorCode::argument);
}

TEST_CASE("game specs from JSON") {
  auto additive = make_game_from_json(R"({"family":"additive","base":0.5,"weights":[0.2,-0.1,0.3]})");
  CHECK(additive.n_players() == 3);
  CHECK(additive.grand_value() == doctest::Approx(0.4));

  CHECK(make_game_from_json(R"({"family":"glove"})").n_players() == 3);
  CHECK(make_game_from_json(R"({"family":"unanimity","n":5})").grand_value() == 1.0);

  const auto planted = make_game_from_json(R"({
    "family":"planted","n_players":3,"languages":["en","de"],"base":[0.5,0.4],
    "coeff":[[0.1,0.2],[-0.05,0.1],[0.02,0.03]],"pairwise":[[0,1,0.01]],
    "noise_scale":0,"seed":5,"language":"de","heads_per_layer":3})");
  CHECK(planted.grand_value() == doctest::Approx(0.34));
  CHECK(planted.layout().heads_per_layer() == 3);

  const auto transformer = make_game_from_json(
      R"({"family":"transformer","weight_seed":2,"dataset":{"size":16,"seed":1}})");
  CHECK(transformer.n_players() == 8);
  CHECK(transformer.layout().heads_per_layer() == 4);
  CHECK(transformer.fractional() != nullptr);

  CHECK(code_of([] { (void)make_game_from_json("{"); }) == ErrorCode::parse);
  CHECK(code_of([] { (void)make_game_from_json(R"({"family":"nope"})"); }) == ErrorCode::parse);
  CHECK(code_of([] { (void)make_game_from_json(R"({"family":"additive","base":0.5})"); }) ==
        ErrorCode::parse);
  CHECK(code_of([] { (void)make_game_from_json(R"({"family":"unanimity","n":"x"})"); }) ==
        ErrorCode::parse);
  // Several languages and no selection.
  CHECK(code_of([] {
          (void)make_game_from_json(R"({"family":"planted","n_players":1,"languages":["en","de"],
            "base":[0.5,0.5],"coeff":[[0.1,0.1]]})");
        }) == ErrorCode::parse);
  CHECK(code_of([] { (void)make_game_from_file("/nonexistent/spec.json"); }) == ErrorCode::io);
}

TEST_CASE("descriptors distinguish games") {
  const auto a = make_game_from_json(R"({"family":"additive","base":0.5,"weights":[0.2,-0.1]})");
  const auto b = make_game_from_json(R"({"family":"additive","base":0.5,"weights":[0.2,-0.2]})");
  CHECK_FALSE(a.descriptor().empty());
  CHECK(a.descriptor() != b.descriptor());
}
