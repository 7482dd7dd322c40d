#include "p2plab/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace p2plab {

Vocabulary::Vocabulary() : tokens_{"<unk>"} { index_["<unk>"] = 0; }

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != "<unk>")
    throw ModelError("vocabulary must start with <unk>");
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& tok : tokenize_ws(text)) ids.push_back(lookup(tok));
  if (ids.empty()) ids.push_back(kUnk);  // empty-token text uses the unk embedding
  return ids;
}

Vocabulary build_vocab(const Dataset& train, int min_count) {
  if (train.samples.empty()) throw ModelError("cannot build vocabulary from empty dataset");
  std::map<std::string, long> counts;
  for (const Sample& s : train.samples)
    for (const std::string& tok : tokenize_ws(s.text)) ++counts[tok];

  // Count desc, then lexicographic: deterministic ordering.
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, c] : counts)
    if (c >= min_count) kept.emplace_back(tok, c);
  if (kept.empty()) throw ModelError("vocabulary empty after min_count filtering");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens;
  tokens.reserve(kept.size() + 1);
  tokens.emplace_back("<unk>");
  for (auto& [tok, c] : kept) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

ModelParams ModelParams::init(int vocab_size, int dim, int n_classes, std::uint64_t seed) {
  if (vocab_size <= 0 || dim <= 0 || n_classes < 2)
    throw ModelError("bad model shape");
  ModelParams p;
  p.vocab_size = vocab_size;
  p.dim = dim;
  p.n_classes = n_classes;
  p.embedding.resize(static_cast<std::size_t>(vocab_size) * dim);
  p.head_w.assign(static_cast<std::size_t>(p.out_dim()) * dim, 0.0);
  p.head_b.assign(p.out_dim(), 0.0);
  Rng rng(derive_seed(seed, "model_init"));
  for (double& e : p.embedding) e = rng.uniform(-0.05, 0.05);
  return p;
}

ParamTensors ParamTensors::zeros_like(const ModelParams& p) {
  ParamTensors t;
  t.embedding.assign(p.embedding.size(), 0.0);
  t.head_w.assign(p.head_w.size(), 0.0);
  t.head_b.assign(p.head_b.size(), 0.0);
  return t;
}

void ParamTensors::fill_zero() {
  std::fill(embedding.begin(), embedding.end(), 0.0);
  std::fill(head_w.begin(), head_w.end(), 0.0);
  std::fill(head_b.begin(), head_b.end(), 0.0);
}

namespace {

// Per-sample forward artifacts shared by loss and gradient accumulation.
struct SampleForward {
  std::vector<int> token_ids;
  std::vector<double> pooled;  // dim
  std::vector<double> logits;  // out_dim
  std::vector<double> probs;   // out_dim
  double loss = 0.0;
};

void softmax_inplace(std::vector<double>& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

SampleForward run_forward(const ModelParams& p, const Vocabulary& v, const Sample& s) {
  SampleForward f;
  f.token_ids = v.encode(s.text);
  f.pooled.assign(p.dim, 0.0);
  for (int t : f.token_ids)
    for (int j = 0; j < p.dim; ++j)
      f.pooled[j] += p.embedding[static_cast<std::size_t>(t) * p.dim + j];
  double inv = 1.0 / static_cast<double>(f.token_ids.size());
  for (double& x : f.pooled) x *= inv;

  int out = p.out_dim();
  f.logits.assign(out, 0.0);
  for (int c = 0; c < out; ++c) {
    double z = p.head_b[c];
    const double* wr = &p.head_w[static_cast<std::size_t>(c) * p.dim];
    for (int j = 0; j < p.dim; ++j) z += wr[j] * f.pooled[j];
    f.logits[c] = z;
  }
  f.probs = f.logits;
  softmax_inplace(f.probs);

  if (s.label < 0 || s.label >= out)
    throw ModelError("sample " + std::to_string(s.id) + " label outside [0, 2n)");
  f.loss = -std::log(std::max(f.probs[s.label], 1e-300));
  return f;
}

// Accumulation is always serial and in sample order so that results do
// not depend on thread count.
double accumulate(const ModelParams& p, std::span<const Sample> batch,
                  const std::vector<SampleForward>& fwd, ParamTensors& grads) {
  int out = p.out_dim();
  double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  std::vector<double> dpooled(p.dim);
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    const SampleForward& f = fwd[i];
    int label = batch[i].label;
    loss_sum += f.loss;
    for (int c = 0; c < out; ++c) {
      double dl = (f.probs[c] - (c == label ? 1.0 : 0.0)) * inv_batch;
      grads.head_b[c] += dl;
      double* gw = &grads.head_w[static_cast<std::size_t>(c) * p.dim];
      for (int j = 0; j < p.dim; ++j) gw[j] += dl * f.pooled[j];
    }
    std::fill(dpooled.begin(), dpooled.end(), 0.0);
    for (int c = 0; c < out; ++c) {
      double dl = (f.probs[c] - (c == label ? 1.0 : 0.0)) * inv_batch;
      const double* wr = &p.head_w[static_cast<std::size_t>(c) * p.dim];
      for (int j = 0; j < p.dim; ++j) dpooled[j] += dl * wr[j];
    }
    double inv_tok = 1.0 / static_cast<double>(f.token_ids.size());
    for (int t : f.token_ids) {
      double* ge = &grads.embedding[static_cast<std::size_t>(t) * p.dim];
      for (int j = 0; j < p.dim; ++j) ge[j] += dpooled[j] * inv_tok;
    }
  }
  double loss = loss_sum * inv_batch;
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
  return loss;
}

}  // namespace

Prediction forward(const ModelParams& p, const Vocabulary& v, const std::string& text) {
  Sample tmp;
  tmp.text = text.empty() ? " " : text;
  tmp.label = 0;
  SampleForward f = run_forward(p, v, tmp);

  Prediction pred;
  pred.logits = std::move(f.logits);
  pred.probs = std::move(f.probs);
  pred.argmax = 0;
  for (int c = 1; c < p.out_dim(); ++c)
    if (pred.logits[c] > pred.logits[pred.argmax]) pred.argmax = c;
  return pred;
}

double loss_and_grad_serial(const ModelParams& p, const Vocabulary& v,
                            std::span<const Sample> batch, ParamTensors& grads) {
  if (batch.empty()) throw ModelError("empty batch");
  grads.fill_zero();
  std::vector<SampleForward> fwd(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) fwd[i] = run_forward(p, v, batch[i]);
  return accumulate(p, batch, fwd, grads);
}

double loss_and_grad(const ModelParams& p, const Vocabulary& v,
                     std::span<const Sample> batch, ParamTensors& grads) {
  if (batch.empty()) throw ModelError("empty batch");
  grads.fill_zero();
  std::vector<SampleForward> fwd(batch.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i)
    fwd[i] = run_forward(p, v, batch[i]);
  return accumulate(p, batch, fwd, grads);
}

}  // namespace p2plab
