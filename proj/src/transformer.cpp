#include "coalition_prune/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "coalition_prune/error.hpp"
#include "coalition_prune/rng.hpp"

namespace cprune {

void ToyTransformerSpec::validate() const {
  if (vocab_size == 0 || model_dim == 0 || layers == 0 ||
      heads_per_layer == 0 || ffn_dim == 0 || n_classes == 0) {
    throw Error(ErrorCode::argument,
                "transformer dimensions must all be positive");
  }
  if (model_dim % heads_per_layer != 0) {
    throw Error(ErrorCode::argument,
                "model_dim must be divisible by heads_per_layer");
  }
}

SyntheticDataset generate_synthetic_dataset(const ToyTransformerSpec& spec,
                                            const std::string& language,
                                            std::size_t size,
                                            std::uint64_t seed,
                                            std::size_t sequence_length) {
  spec.validate();
  if (size < 1) throw Error(ErrorCode::argument, "dataset size must be >= 1");
  if (sequence_length < 1) {
    throw Error(ErrorCode::argument, "sequence length must be >= 1");
  }
  const std::size_t window = spec.vocab_size / 2;
  if (window < spec.n_classes + 1) {
    throw Error(ErrorCode::argument,
                "vocab_size too small: a language window of " +
                    std::to_string(window) + " tokens cannot hold " +
                    std::to_string(spec.n_classes) +
                    " markers plus filler tokens");
  }

  // Markers depend only on the language so datasets with different seeds
  // share the labelling rule.
  const std::uint64_t lang_key = fnv1a(language);
  const std::size_t offset =
      static_cast<std::size_t>(lang_key % (spec.vocab_size - window + 1));
  std::vector<int> pool(window);
  std::iota(pool.begin(), pool.end(), static_cast<int>(offset));
  auto marker_rng = derive_stream(lang_key, "dataset.markers");
  shuffle(std::span<int>(pool), marker_rng);
  const std::vector<int> markers(pool.begin(), pool.begin() + spec.n_classes);
  std::vector<int> fillers(pool.begin() + spec.n_classes, pool.end());
  std::sort(fillers.begin(), fillers.end());

  SyntheticDataset data;
  data.language = language;
  data.seed = seed;
  data.sequences.reserve(size);
  data.labels.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    auto rng = derive_stream(seed ^ lang_key, "dataset.sequence", i);
    const auto label = static_cast<int>(i % spec.n_classes);
    std::vector<int> sequence(sequence_length);
    for (auto& token : sequence) token = fillers[rng.below(fillers.size())];
    sequence[rng.below(sequence_length)] = markers[label];
    data.sequences.push_back(std::move(sequence));
    data.labels.push_back(label);
  }
  return data;
}

namespace {

Matrix random_matrix(std::uint64_t seed, const std::string& tag,
                     std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  auto rng = derive_stream(seed, tag);
  for (auto& v : m.data) v = rng.uniform(-0.1, 0.1);
  return m;
}

}  // namespace

ToyTransformer::ToyTransformer(const ToyTransformerSpec& spec) : spec_(spec) {
  spec_.validate();
  const auto seed = spec_.weight_seed;
  const auto d = spec_.model_dim;
  embedding_ = random_matrix(seed, "embedding", spec_.vocab_size, d);
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    TransformerLayerWeights w;
    w.wq = random_matrix(seed, p + "wq", d, d);
    w.wk = random_matrix(seed, p + "wk", d, d);
    w.wv = random_matrix(seed, p + "wv", d, d);
    w.wo = random_matrix(seed, p + "wo", d, d);
    w.w1 = random_matrix(seed, p + "w1", d, spec_.ffn_dim);
    w.b1.assign(spec_.ffn_dim, 0.0);
    w.w2 = random_matrix(seed, p + "w2", spec_.ffn_dim, d);
    w.b2.assign(d, 0.0);
    layers_.push_back(std::move(w));
  }
  classifier_ = random_matrix(seed, "classifier", d, spec_.n_classes);
}

Matrix ToyTransformer::embed(std::span<const int> tokens) const {
  if (tokens.empty()) {
    throw Error(ErrorCode::argument, "token sequence is empty");
  }
  Matrix x(tokens.size(), spec_.model_dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int token = tokens[i];
    if (token < 0 || static_cast<std::size_t>(token) >= spec_.vocab_size) {
      throw Error(ErrorCode::argument,
                  "token id " + std::to_string(token) +
                      " outside vocabulary of size " +
                      std::to_string(spec_.vocab_size));
    }
    std::copy_n(embedding_.data.begin() +
                    static_cast<std::ptrdiff_t>(static_cast<std::size_t>(token) *
                                                spec_.model_dim),
                spec_.model_dim, &x(i, 0));
  }
  return x;
}

Matrix ToyTransformer::head_output(std::size_t layer, std::size_t head,
                                   const Matrix& x) const {
  const auto& w = layers_[layer];
  const std::size_t n = x.rows;
  const std::size_t d = spec_.model_dim;
  const std::size_t dh = d / spec_.heads_per_layer;
  const std::size_t c0 = head * dh;

  Matrix q(n, dh), k(n, dh), v(n, dh);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = x(i, a);
      for (std::size_t c = 0; c < dh; ++c) {
        q(i, c) += xa * w.wq(a, c0 + c);
        k(i, c) += xa * w.wk(a, c0 + c);
        v(i, c) += xa * w.wv(a, c0 + c);
      }
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix context(n, dh);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    double peak = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += q(i, c) * k(j, c);
      weights[j] = s * scale;
      peak = std::max(peak, weights[j]);
    }
    double total = 0.0;
    for (auto& s : weights) {
      s = std::exp(s - peak);
      total += s;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double p = weights[j] / total;
      for (std::size_t c = 0; c < dh; ++c) context(i, c) += p * v(j, c);
    }
  }

  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dh; ++c) {
      const double ctx = context(i, c);
      for (std::size_t b = 0; b < d; ++b) out(i, b) += ctx * w.wo(c0 + c, b);
    }
  }
  return out;
}

std::vector<Matrix> ToyTransformer::head_outputs(std::size_t layer,
                                                 const Matrix& x) const {
  std::vector<Matrix> outputs;
  outputs.reserve(spec_.heads_per_layer);
  for (std::size_t h = 0; h < spec_.heads_per_layer; ++h) {
    outputs.push_back(head_output(layer, h, x));
  }
  return outputs;
}

void ToyTransformer::finish_layer(std::size_t layer, Matrix& x,
                                  std::span<const Matrix* const> heads,
                                  std::span<const double> layer_gates) const {
  const auto& w = layers_[layer];
  const std::size_t n = x.rows;
  const std::size_t d = spec_.model_dim;

  Matrix attention(n, d);
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (heads[h] == nullptr) continue;
    const double gate = layer_gates[h];
    const auto& out = heads[h]->data;
    for (std::size_t e = 0; e < attention.data.size(); ++e) {
      attention.data[e] += gate * out[e];
    }
  }
  for (std::size_t e = 0; e < x.data.size(); ++e) x.data[e] += attention.data[e];

  std::vector<double> hidden(spec_.ffn_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < spec_.ffn_dim; ++f) hidden[f] = w.b1[f];
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = x(i, a);
      for (std::size_t f = 0; f < spec_.ffn_dim; ++f) {
        hidden[f] += xa * w.w1(a, f);
      }
    }
    std::vector<double> update(w.b2);
    for (std::size_t f = 0; f < spec_.ffn_dim; ++f) {
      const double hf = std::max(hidden[f], 0.0);
      for (std::size_t b = 0; b < d; ++b) update[b] += hf * w.w2(f, b);
    }
    for (std::size_t b = 0; b < d; ++b) x(i, b) += update[b];
  }
}

std::vector<double> ToyTransformer::classify(const Matrix& x) const {
  std::vector<double> pooled(spec_.model_dim, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t a = 0; a < x.cols; ++a) pooled[a] += x(i, a);
  }
  for (auto& p : pooled) p /= static_cast<double>(x.rows);

  std::vector<double> scores(spec_.n_classes, 0.0);
  for (std::size_t a = 0; a < spec_.model_dim; ++a) {
    for (std::size_t c = 0; c < spec_.n_classes; ++c) {
      scores[c] += pooled[a] * classifier_(a, c);
    }
  }
  return scores;
}

std::vector<double> ToyTransformer::forward(
    std::span<const double> gates, std::span<const int> tokens,
    const ForwardOptions& options) const {
  const std::size_t hpl = spec_.heads_per_layer;
  if (gates.size() != spec_.n_heads()) {
    throw Error(ErrorCode::argument,
                "expected " + std::to_string(spec_.n_heads()) +
                    " gates, got " + std::to_string(gates.size()));
  }
  if (!options.zeroed_heads.empty() &&
      options.zeroed_heads.size() != spec_.n_heads()) {
    throw Error(ErrorCode::argument, "zeroed_heads needs one flag per head");
  }

  Matrix x = embed(tokens);
  const Matrix zero(x.rows, spec_.model_dim);
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    std::vector<Matrix> outputs;
    std::vector<const Matrix*> heads(hpl, nullptr);
    if (!options.skip_attention) {
      outputs = head_outputs(l, x);
      for (std::size_t h = 0; h < hpl; ++h) {
        const bool zeroed = !options.zeroed_heads.empty() &&
                            options.zeroed_heads[l * hpl + h] != 0;
        heads[h] = zeroed ? &zero : &outputs[h];
      }
    }
    finish_layer(l, x, heads, gates.subspan(l * hpl, hpl));
  }
  return classify(x);
}

std::size_t argmax(std::span<const double> scores) {
  return static_cast<std::size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
}

double cross_entropy(std::span<const double> scores, std::size_t label) {
  const double peak = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double s : scores) total += std::exp(s - peak);
  return std::log(total) - (scores[label] - peak);
}

namespace {

// Caches the embedding and first-layer head outputs per example: neither
// depends on the gates.
class TransformerEvaluator final : public FractionalGates {
 public:
  TransformerEvaluator(std::shared_ptr<const ToyTransformer> model,
                       const SyntheticDataset& dataset)
      : model_(std::move(model)), labels_(dataset.labels) {
    const auto& spec = model_->spec();
    if (dataset.sequences.size() != dataset.labels.size() ||
        dataset.sequences.empty()) {
      throw Error(ErrorCode::argument,
                  "dataset needs one label per sequence and at least one "
                  "sequence");
    }
    for (int label : dataset.labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= spec.n_classes) {
        throw Error(ErrorCode::argument, "dataset label out of class range");
      }
    }
    sequences_ = dataset.sequences;
    embedded_.reserve(sequences_.size());
    first_layer_.reserve(sequences_.size());
    for (const auto& seq : sequences_) {
      embedded_.push_back(model_->embed(seq));
      first_layer_.push_back(model_->head_outputs(0, embedded_.back()));
    }
  }

  double accuracy(const Coalition& coalition) const {
    const auto& spec = model_->spec();
    const std::size_t hpl = spec.heads_per_layer;
    std::vector<double> gates(spec.n_heads());
    for (std::size_t h = 0; h < gates.size(); ++h) {
      gates[h] = coalition.contains(h) ? 1.0 : 0.0;
    }

    std::size_t correct = 0;
    std::vector<const Matrix*> heads(hpl);
    for (std::size_t e = 0; e < sequences_.size(); ++e) {
      Matrix x = embedded_[e];
      for (std::size_t l = 0; l < spec.layers; ++l) {
        // Gate-0 heads are skipped: adding 0 * out leaves x unchanged.
        std::vector<Matrix> computed;
        if (l == 0) {
          for (std::size_t h = 0; h < hpl; ++h) {
            heads[h] = gates[h] != 0.0 ? &first_layer_[e][h] : nullptr;
          }
        } else {
          computed = active_heads(l, x, gates, heads);
        }
        model_->finish_layer(l, x, heads,
                             std::span<const double>(gates).subspan(l * hpl,
                                                                    hpl));
      }
      const auto scores = model_->classify(x);
      if (argmax(scores) == static_cast<std::size_t>(labels_[e])) ++correct;
    }
    return static_cast<double>(correct) /
           static_cast<double>(sequences_.size());
  }

  std::size_t n_examples() const override { return sequences_.size(); }

  double example_loss(std::size_t example,
                      std::span<const double> gates) const override {
    const auto scores = model_->forward(gates, sequences_.at(example));
    return cross_entropy(scores, static_cast<std::size_t>(labels_[example]));
  }

 private:
  std::vector<Matrix> active_heads(std::size_t layer, const Matrix& x,
                                   const std::vector<double>& gates,
                                   std::vector<const Matrix*>& heads) const {
    const std::size_t hpl = model_->spec().heads_per_layer;
    std::vector<Matrix> all;
    bool any = false;
    for (std::size_t h = 0; h < hpl; ++h) any |= gates[layer * hpl + h] != 0.0;
    if (any) all = model_->head_outputs(layer, x);
    for (std::size_t h = 0; h < hpl; ++h) {
      heads[h] = gates[layer * hpl + h] != 0.0 ? &all[h] : nullptr;
    }
    return all;
  }

  std::shared_ptr<const ToyTransformer> model_;
  std::vector<std::vector<int>> sequences_;
  std::vector<int> labels_;
  std::vector<Matrix> embedded_;
  std::vector<std::vector<Matrix>> first_layer_;
};

}  // namespace

Game make_transformer_game(std::shared_ptr<const ToyTransformer> model,
                           const SyntheticDataset& dataset,
                           std::string descriptor) {
  auto evaluator = std::make_shared<TransformerEvaluator>(model, dataset);
  const auto& spec = model->spec();
  if (descriptor.empty()) {
    descriptor = nlohmann::json{{"family", "transformer"},
                                {"vocab_size", spec.vocab_size},
                                {"model_dim", spec.model_dim},
                                {"layers", spec.layers},
                                {"heads_per_layer", spec.heads_per_layer},
                                {"ffn_dim", spec.ffn_dim},
                                {"n_classes", spec.n_classes},
                                {"weight_seed", spec.weight_seed},
                                {"dataset",
                                 {{"language", dataset.language},
                                  {"size", dataset.sequences.size()},
                                  {"seed", dataset.seed}}}}
                     .dump();
  }
  GameOptions options;
  options.descriptor = std::move(descriptor);
  options.heads_per_layer = spec.heads_per_layer;
  options.fractional = evaluator;
  return Game(
      spec.n_heads(),
      [evaluator](const Coalition& s) { return evaluator->accuracy(s); },
      MetricRange{0.0, 1.0}, std::move(options));
}

Game make_transformer_game(const ToyTransformerSpec& spec,
                           const SyntheticDataset& dataset,
                           std::string descriptor) {
  return make_transformer_game(std::make_shared<const ToyTransformer>(spec),
                               dataset, std::move(descriptor));
}

}  // namespace cprune
