#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "p2plab/corpus.hpp"

namespace p2plab {

// Whitespace vocabulary built from training text only. Index 0 is the
// unknown token.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);  // tokens[0] must be "<unk>"

  int size() const { return static_cast<int>(tokens_.size()); }
  int lookup(const std::string& token) const;
  const std::string& token(int idx) const { return tokens_.at(idx); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::string& text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

Vocabulary build_vocab(const Dataset& train, int min_count);

// Mean-pooled bag-of-embeddings with a linear head over the extended
// label space (output dimension is always 2n).
struct ModelParams {
  int vocab_size = 0;
  int dim = 0;
  int n_classes = 0;  // original class count; head emits 2n logits

  std::vector<double> embedding;  // vocab_size x dim, row-major
  std::vector<double> head_w;     // 2n x dim, row-major
  std::vector<double> head_b;     // 2n

  int out_dim() const { return 2 * n_classes; }

  // Embeddings uniform in [-0.05, 0.05]; head zeros (uniform softmax at
  // step 0). Seeded.
  static ModelParams init(int vocab_size, int dim, int n_classes, std::uint64_t seed);
};

// Gradient buffers (and Adam moment buffers) shaped like ModelParams.
struct ParamTensors {
  std::vector<double> embedding;
  std::vector<double> head_w;
  std::vector<double> head_b;

  static ParamTensors zeros_like(const ModelParams& p);
  void fill_zero();
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probs;
  int argmax = 0;  // ties resolve to the lowest index
};

Prediction forward(const ModelParams& p, const Vocabulary& v, const std::string& text);

// Mean cross-entropy over the batch plus exact analytical gradients.
// The serial version is the reference implementation; loss_and_grad runs
// the per-sample forward passes in parallel (OpenMP when available) and
// accumulates in fixed sample order, so the two are bit-identical.
double loss_and_grad_serial(const ModelParams& p, const Vocabulary& v,
                            std::span<const Sample> batch, ParamTensors& grads);
double loss_and_grad(const ModelParams& p, const Vocabulary& v,
                     std::span<const Sample> batch, ParamTensors& grads);

}  // namespace p2plab
