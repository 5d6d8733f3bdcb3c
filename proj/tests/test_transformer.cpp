#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include "doctest.h"

#include "coalition_prune/error.hpp"
#include "coalition_prune/rng.hpp"
#include "coalition_prune/transformer.hpp"

using namespace cprune;

namespace {

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<int> random_tokens(SplitMix64& rng, std::size_t vocab, std::size_t len) {
  std::vector<int> tokens(len);
  for (auto& t : tokens) t = static_cast<int>(rng.below(vocab));
  return tokens;
}

}  // namespace

TEST_CASE("forward is deterministic") {
  ToyTransformerSpec spec;
  spec.weight_seed = 2;
  const ToyTransformer a(spec);
  const ToyTransformer b(spec);
  SplitMix64 rng(5);
  const auto tokens = random_tokens(rng, spec.vocab_size, 16);
  const std::vector<double> ones(spec.n_heads(), 1.0);
  CHECK(bit_identical(a.forward(ones, tokens), a.forward(ones, tokens)));
  CHECK(bit_identical(a.forward(ones, tokens), b.forward(ones, tokens)));
  spec.weight_seed = 3;
  CHECK_FALSE(bit_identical(a.forward(ones, tokens), ToyTransformer(spec).forward(ones, tokens)));
}

TEST_CASE("closing a gate equals skipping the head") {
  ToyTransformerSpec spec;
  spec.weight_seed = 2;
  const ToyTransformer model(spec);
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tokens = random_tokens(rng, spec.vocab_size, 4 + rng.below(20));
    for (std::size_t h = 0; h < spec.n_heads(); ++h) {
      std::vector<double> gates(spec.n_heads(), 1.0);
      gates[h] = 0.0;
      std::vector<std::uint8_t> zeroed(spec.n_heads(), 0);
      zeroed[h] = 1;
      const std::vector<double> ones(spec.n_heads(), 1.0);
      ForwardOptions options;
      options.zeroed_heads = zeroed;
      CHECK(bit_identical(model.forward(gates, tokens), model.forward(ones, tokens, options)));
    }
  }
}

TEST_CASE("all gates closed equals the attention-free path") {
  ToyTransformerSpec spec;
  spec.weight_seed = 4;
  const ToyTransformer model(spec);
  SplitMix64 rng(12);
  const std::vector<double> zeros(spec.n_heads(), 0.0);
  const std::vector<double> ones(spec.n_heads(), 1.0);
  ForwardOptions skip;
  skip.skip_attention = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto tokens = random_tokens(rng, spec.vocab_size, 16);
    CHECK(bit_identical(model.forward(zeros, tokens), model.forward(ones, tokens, skip)));
    CHECK_FALSE(bit_identical(model.forward(zeros, tokens), model.forward(ones, tokens)));
  }
}

TEST_CASE("a silenced head contributes nothing") {
  ToyTransformerSpec spec;
  spec.weight_seed = 2;
  ToyTransformer model(spec);
  // Zero the output-projection block of layer 1, head 2.
  auto& wo = model.layer_weights(1).wo;
  const std::size_t dh = spec.model_dim / spec.heads_per_layer;
  for (std::size_t r = 2 * dh; r < 3 * dh; ++r) {
    for (std::size_t c = 0; c < wo.cols; ++c) wo(r, c) = 0.0;
  }
  SplitMix64 rng(3);
  const auto tokens = random_tokens(rng, spec.vocab_size, 16);
  std::vector<double> gates(spec.n_heads(), 1.0);
  const auto open = model.forward(gates, tokens);
  gates[6] = 0.0;
  CHECK(bit_identical(open, model.forward(gates, tokens)));
}

TEST_CASE("forward argument errors") {
  const ToyTransformerSpec spec;
  const ToyTransformer model(spec);
  const std::vector<double> ones(spec.n_heads(), 1.0);
  const std::vector<int> bad_token = {1, 2, 64};
  CHECK_THROWS_AS(model.forward(ones, bad_token), Error);
  const std::vector<int> negative = {-1};
  CHECK_THROWS_AS(model.forward(ones, negative), Error);
  const std::vector<int> ok = {1, 2};
  CHECK_THROWS_AS(model.forward(std::vector<double>(3, 1.0), ok), Error);
  ToyTransformerSpec bad = spec;
  bad.model_dim = 30;  // not divisible by 4 heads
  CHECK_THROWS_AS(ToyTransformer{bad}, Error);
}

TEST_CASE("transformer game matches the public forward path") {
  ToyTransformerSpec spec;
  spec.weight_seed = 2;
  const auto dataset = generate_synthetic_dataset(spec, "en", 64, 5);
  auto model = std::make_shared<const ToyTransformer>(spec);
  const auto game = make_transformer_game(model, dataset);
  CHECK(game.n_players() == 8);

  auto accuracy = [&](std::uint64_t bits) {
    std::vector<double> gates(8);
    for (std::size_t h = 0; h < 8; ++h) gates[h] = ((bits >> h) & 1U) ? 1.0 : 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
      const auto scores = model->forward(gates, dataset.sequences[i]);
      if (argmax(scores) == static_cast<std::size_t>(dataset.labels[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.sequences.size());
  };
  for (std::uint64_t bits : {0ULL, 255ULL, 1ULL, 0x5aULL, 0xf0ULL, 0x0fULL}) {
    CHECK(game.raw_metric(Coalition::from_bits(8, bits)) == accuracy(bits));
  }
  CHECK(game.grand_value() == accuracy(255) - accuracy(0));
}

TEST_CASE("argmax and cross entropy") {
  const std::vector<double> tied = {0.5, 0.5, 0.1};
  CHECK(argmax(tied) == 0);
  const std::vector<double> scores = {0.0, 0.0};
  CHECK(cross_entropy(scores, 1) == doctest::Approx(std::log(2.0)));
  const std::vector<double> big = {1000.0, 0.0};
  CHECK(cross_entropy(big, 0) == doctest::Approx(0.0));
}

TEST_CASE("default model gives a head-dependent game") {
  const ToyTransformerSpec spec;
  const auto dataset = generate_synthetic_dataset(spec, "en", 256, 0);
  const auto game = make_transformer_game(spec, dataset);
  const double all = game.raw_metric(Coalition::grand(8));
  int changed = 0;
  for (PlayerId h = 0; h < 8; ++h) {
    changed += game.raw_metric(Coalition::grand(8).without(h)) != all;
  }
  CHECK(changed > 0);
}
