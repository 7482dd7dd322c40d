#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "p2plab/attacks.hpp"
#include "p2plab/eval.hpp"
#include "p2plab/trainer.hpp"

namespace p2plab {

struct CorpusConfig {
  std::string source = "synthetic";  // synthetic | tsv | jsonl
  SynthSpec synth;
  std::string path;                       // tsv/jsonl source
  std::vector<std::string> label_names;   // required for tsv/jsonl
  double train_frac = 5.0 / 6.0;
};

struct AttackSetup {
  std::string preset = "badnets";
  int target_label = 0;
  double poison_ratio = 0.02;
  bool exclude_target_class = false;
  std::string gen_target = "0.1";

  AttackConfig resolve(std::uint64_t seed) const;
};

struct ModelConfig {
  int dim = 128;
  int min_count = 1;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir;
  CorpusConfig corpus;
  AttackSetup attack;
  DefenseConfig defense;
  TrainConfig train;
  ModelConfig model;

  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::ordered_json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Hash of the resolved config; embedded in every report for provenance.
std::string config_hash(const ExperimentConfig& cfg);

// The four-run protocol: (a) clean train/eval, (b) attacked undefended,
// (c) attacked + defense, (d) clean + defense.
struct ExperimentResult {
  double ca_clean = 0.0;
  double ca_attacked = 0.0;
  double asr_attacked = 0.0;
  double ca_defended = 0.0;
  double asr_defended = 0.0;
  double delta_ca = 0.0;  // ca_defended - ca_attacked
  double ca_clean_defended = 0.0;
  MetricCount ca_clean_counts, ca_attacked_counts, asr_attacked_counts;
  MetricCount ca_defended_counts, asr_defended_counts, ca_clean_defended_counts;
  DecompositionReport decomposition;
  ConfidenceHistogram confidence;
  double benign_capture = 0.0;  // share of benign-triggered test inputs with raw argmax >= n
  std::vector<double> loss_curve_defended;
};

// Prepared inputs shared across defense/model sweeps so the attacked
// corpus stays fixed while only the studied parameter varies.
struct PreparedData {
  Dataset train_clean;
  Dataset test_clean;
  Dataset train_poisoned;
  Dataset test_poisoned;
  PoisonReport poison_report;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Runs the protocol; when cfg.out_dir is non-empty, writes datasets,
// checkpoints, reports, and a hashed run manifest underneath it.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const PreparedData* cached = nullptr);

struct SweepSpec {
  std::string parameter;  // poison_ratio | reserve_ratio | dim
  std::vector<double> values;
  int repetitions = 1;

  void validate() const;
};

struct SweepRow {
  double value = 0.0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SweepSpec& sweep);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

// Human-readable aligned table for a machine report file.
std::string render_report_table(const nlohmann::ordered_json& report);

}  // namespace p2plab
