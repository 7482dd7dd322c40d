#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "p2plab/model.hpp"
#include "p2plab/p2p.hpp"

namespace p2plab {

struct MetricCount {
  long hits = 0;
  long total = 0;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(hits) / total; }
};

struct EvalReport {
  double ca = 0.0;
  double asr = 0.0;
  double delta_ca = 0.0;  // vs a named baseline report
  MetricCount ca_counts;
  MetricCount asr_counts;
  bool defense_enabled = false;
};

// ASR decomposition: alpha is the prediction mass landing
// in the extended half, eps_ext / beta the target rates inside / outside
// it. The reconstruction alpha*eps_ext + (1-alpha)*beta is an exact
// counting identity with the measured ASR.
struct DecompositionReport {
  double alpha = 0.0;
  double eps_ext = 0.0;
  double beta = 0.0;
  double asr_reconstructed = 0.0;
  long total = 0;
  long extended_count = 0;
  long extended_target_hits = 0;
  long original_target_hits = 0;
  bool extended_empty = false;
  bool original_empty = false;
};

struct ConfidenceHistogram {
  static constexpr int kBins = 20;  // width 0.05
  int n_classes = 0;
  long sample_count = 0;
  std::vector<std::vector<long>> bins;  // n_classes x kBins, projected-pair mass
  double mean_true_class_confidence = 0.0;
};

// CA on a clean test set. With a defense config, each text gets the
// benign trigger attached and the prediction is projected.
MetricCount clean_accuracy(const ModelParams& params, const Vocabulary& vocab,
                           const Dataset& test, const std::optional<DefenseConfig>& defense);

// ASR on a poisoned test set built by make_poisoned_testset: hit iff the
// (projected) prediction equals the target label.
MetricCount attack_success_rate(const ModelParams& params, const Vocabulary& vocab,
                                const Dataset& poisoned_test, int target_label,
                                const std::optional<DefenseConfig>& defense);

DecompositionReport decompose_asr(const ModelParams& params, const Vocabulary& vocab,
                                  const Dataset& poisoned_test, int target_label,
                                  const DefenseConfig& defense);

// Embedding soundness as an executable check: for random classifiers
// g over the original space, the embedded classifier f = h ∘ g scores
// identically under projected evaluation, sample for sample.
bool definition1_check(int n, int trial_count, std::uint64_t seed);

ConfidenceHistogram confidence_histogram(const ModelParams& params, const Vocabulary& vocab,
                                         const Dataset& samples,
                                         const std::optional<DefenseConfig>& defense);

struct GenerationReport {
  MetricCount ca;   // exact match on clean references
  MetricCount asr;  // attacker-target match on poisoned references
};

// Scores a predictions file ("id<TAB>output" per line) against reference
// outputs. A leading gen_prefix is stripped before matching.
GenerationReport eval_generation(const std::filesystem::path& predictions,
                                 const Dataset& refs, const std::string& attacker_target,
                                 const std::string& gen_prefix, bool containment = false);

}  // namespace p2plab
