#include "p2plab/trainer.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace p2plab {

using json = nlohmann::ordered_json;

namespace {
constexpr int kCheckpointSchemaVersion = 1;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be nonnegative");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("betas must be in [0, 1)");
}

OptimizerState OptimizerState::zeros_like(const ModelParams& p) {
  OptimizerState s;
  s.m = ParamTensors::zeros_like(p);
  s.v = ParamTensors::zeros_like(p);
  return s;
}

namespace {

void adamw_update(std::vector<double>& param, const std::vector<double>& grad,
                  std::vector<double>& m, std::vector<double>& v, double lr, double wd,
                  double beta1, double beta2, double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double m_hat = m[i] / bc1;
    double v_hat = v[i] / bc2;
    param[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * param[i]);
  }
}

}  // namespace

void adamw_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state,
                const TrainConfig& cfg) {
  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  adamw_update(params.embedding, grads.embedding, state.m.embedding, state.v.embedding,
               cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps_opt, bc1, bc2);
  adamw_update(params.head_w, grads.head_w, state.m.head_w, state.v.head_w, cfg.lr,
               cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps_opt, bc1, bc2);
  adamw_update(params.head_b, grads.head_b, state.m.head_b, state.v.head_b, cfg.lr,
               cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps_opt, bc1, bc2);
}

TrainResult train(const Dataset& ds, const Vocabulary& vocab, ModelParams init,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (ds.samples.empty()) throw ModelError("cannot train on empty dataset");

  TrainResult result;
  result.params = std::move(init);
  OptimizerState state = OptimizerState::zeros_like(result.params);
  ParamTensors grads = ParamTensors::zeros_like(result.params);

  std::vector<std::size_t> order(ds.samples.size());
  std::vector<Sample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, "epoch_" + std::to_string(epoch)));
    fisher_yates_shuffle(order, rng);

    double epoch_loss = 0.0;
    std::size_t step_count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(ds.samples[order[i]]);
      double loss =
          cfg.use_serial_kernel
              ? loss_and_grad_serial(result.params, vocab, batch, grads)
              : loss_and_grad(result.params, vocab, batch, grads);
      adamw_step(result.params, grads, state, cfg);
      epoch_loss += loss;
      ++step_count;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(step_count));
  }
  return result;
}

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  json ckpt;
  ckpt["schema_version"] = kCheckpointSchemaVersion;
  ckpt["vocab_size"] = params.vocab_size;
  ckpt["dim"] = params.dim;
  ckpt["n"] = params.n_classes;
  ckpt["vocab"] = vocab.tokens();
  ckpt["embedding"] = params.embedding;
  ckpt["head_w"] = params.head_w;
  ckpt["head_b"] = params.head_b;
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << ckpt.dump(1) << '\n';
  if (!out) throw CheckpointError("write failed for " + path.string());
}

std::pair<ModelParams, Vocabulary> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  json ckpt;
  try {
    in >> ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  try {
    int version = ckpt.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion)
      throw CheckpointError("checkpoint schema version " + std::to_string(version) +
                            " not supported (expected " +
                            std::to_string(kCheckpointSchemaVersion) + ")");
    ModelParams p;
    p.vocab_size = ckpt.at("vocab_size").get<int>();
    p.dim = ckpt.at("dim").get<int>();
    p.n_classes = ckpt.at("n").get<int>();
    p.embedding = ckpt.at("embedding").get<std::vector<double>>();
    p.head_w = ckpt.at("head_w").get<std::vector<double>>();
    p.head_b = ckpt.at("head_b").get<std::vector<double>>();
    Vocabulary vocab(ckpt.at("vocab").get<std::vector<std::string>>());
    if (static_cast<int>(p.embedding.size()) != p.vocab_size * p.dim ||
        static_cast<int>(p.head_w.size()) != p.out_dim() * p.dim ||
        static_cast<int>(p.head_b.size()) != p.out_dim() ||
        vocab.size() != p.vocab_size)
      throw CheckpointError("checkpoint shape mismatch in " + path.string());
    return {std::move(p), std::move(vocab)};
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace p2plab
