#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coalition_prune/game.hpp"

namespace cprune {

struct ToyTransformerSpec {
  std::size_t vocab_size = 64;
  std::size_t model_dim = 32;
  std::size_t layers = 2;
  std::size_t heads_per_layer = 4;
  std::size_t ffn_dim = 64;
  std::size_t n_classes = 3;
  std::uint64_t weight_seed = 0;

  std::size_t n_heads() const { return layers * heads_per_layer; }
  void validate() const;
};

struct SyntheticDataset {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
  std::string language;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultSequenceLength = 16;

// Sequences draw filler tokens from a language-specific window of the
// vocabulary; each carries one marker token whose index is the label.
// Labels are assigned round-robin so class counts differ by at most one.
SyntheticDataset generate_synthetic_dataset(
    const ToyTransformerSpec& spec, const std::string& language,
    std::size_t size, std::uint64_t seed,
    std::size_t sequence_length = kDefaultSequenceLength);

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

struct TransformerLayerWeights {
  Matrix wq, wk, wv;  // model_dim x model_dim; head h owns a column block
  Matrix wo;          // model_dim x model_dim; head h owns a row block
  Matrix w1;          // model_dim x ffn_dim
  std::vector<double> b1;
  Matrix w2;          // ffn_dim x model_dim
  std::vector<double> b2;
};

struct ForwardOptions {
  // Heads whose attention output is replaced by the zero vector (one flag
  // per head, flat index). Empty: none.
  std::span<const std::uint8_t> zeroed_heads;
  // Drop the whole attention sub-layer (residual + feed-forward only).
  bool skip_attention = false;
};

// Encoder-only classifier without layer norm or positional encodings:
//   x = embed(tokens)
//   per layer: x += sum_h gate_h * Att_h(x);  x += W2 relu(W1 x + b1) + b2
//   scores = Wc mean_pool(x)
// Weights are uniform in [-0.1, 0.1] from SplitMix64 streams keyed by
// weight_seed; biases start at zero. The model is never trained.
class ToyTransformer {
 public:
  explicit ToyTransformer(const ToyTransformerSpec& spec);

  const ToyTransformerSpec& spec() const { return spec_; }

  std::vector<double> forward(std::span<const double> gates,
                              std::span<const int> tokens,
                              const ForwardOptions& options = {}) const;

  // Pieces of forward(), exposed so callers can cache gate-independent work.
  Matrix embed(std::span<const int> tokens) const;
  // Att_h(x) for every head of `layer`, each seq_len x model_dim.
  std::vector<Matrix> head_outputs(std::size_t layer, const Matrix& x) const;
  // Residual attention update followed by the feed-forward block. Heads with
  // a null entry in `heads` contribute nothing.
  void finish_layer(std::size_t layer, Matrix& x,
                    std::span<const Matrix* const> heads,
                    std::span<const double> layer_gates) const;
  std::vector<double> classify(const Matrix& x) const;

  // Mutable access for experiments that edit weights (e.g. silencing a head).
  TransformerLayerWeights& layer_weights(std::size_t layer) {
    return layers_.at(layer);
  }
  const TransformerLayerWeights& layer_weights(std::size_t layer) const {
    return layers_.at(layer);
  }

 private:
  Matrix head_output(std::size_t layer, std::size_t head,
                     const Matrix& x) const;

  ToyTransformerSpec spec_;
  Matrix embedding_;  // vocab_size x model_dim
  std::vector<TransformerLayerWeights> layers_;
  Matrix classifier_;  // model_dim x n_classes, no bias
};

// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

// Cross-entropy of `label` under softmax(scores).
double cross_entropy(std::span<const double> scores, std::size_t label);

// Raw metric = accuracy over the dataset with gates = indicator(S).
// Supports fractional gates for the gradient baseline.
Game make_transformer_game(const ToyTransformerSpec& spec,
                           const SyntheticDataset& dataset,
                           std::string descriptor = {});
Game make_transformer_game(std::shared_ptr<const ToyTransformer> model,
                           const SyntheticDataset& dataset,
                           std::string descriptor = {});

}  // namespace cprune
