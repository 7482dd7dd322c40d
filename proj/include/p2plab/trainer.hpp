#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "p2plab/model.hpp"

namespace p2plab {

struct TrainConfig {
  double lr = 2e-4;
  int batch_size = 16;
  int epochs = 3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  std::uint64_t seed = 0;
  bool use_serial_kernel = false;  // reference path, for testing/benchmarks

  void validate() const;
};

struct OptimizerState {
  ParamTensors m;  // first moments
  ParamTensors v;  // second moments
  long step = 0;

  static OptimizerState zeros_like(const ModelParams& p);
};

// One decoupled-weight-decay Adam step with bias correction:
// param -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * param).
void adamw_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state,
                const TrainConfig& cfg);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;  // mean loss per epoch
};

// Deterministic mini-batch training: per-epoch shuffle seeded by
// (cfg.seed, epoch), final partial batch kept.
TrainResult train(const Dataset& ds, const Vocabulary& vocab, ModelParams init,
                  const TrainConfig& cfg);

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     const std::filesystem::path& path);
std::pair<ModelParams, Vocabulary> load_checkpoint(const std::filesystem::path& path);

}  // namespace p2plab
