#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "p2plab/common.hpp"

namespace p2plab {

enum class Provenance { clean, poisoned, benign };
enum class TaskMode { classification, generation };

std::string to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);
std::string to_string(TaskMode m);
TaskMode task_mode_from_string(std::string_view s);

// The original label space {0..n-1}. Extended labels n..2n-1 are carried
// by samples but have no names; names are presentation only.
struct LabelSpace {
  int n = 0;
  std::vector<std::string> names;  // size n, unique

  void validate() const;
  // Index of a name, or -1.
  int name_index(std::string_view name) const;
};

struct Sample {
  std::int64_t id = 0;
  std::string text;
  int label = 0;  // in [0, 2n)
  Provenance provenance = Provenance::clean;
  std::optional<std::string> reference;  // generation-mode target output

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  LabelSpace space;
  TaskMode mode = TaskMode::classification;
  std::vector<Sample> samples;

  void validate() const;
};

// Hermetic synthetic corpus in a marked-vs-background layout (spam/ham
// style): classes 0..n-2 each own tokens_per_class signal tokens that appear
// in their documents with probability signal_prob; the last class is
// background text with no signal tokens, recognizable only by the absence of
// evidence. Every document carries exactly doc_len shared-pool filler tokens,
// so filler frequencies are label-balanced. `crossover` lets a marked
// document pick up each rival marked class's tokens too, making the signal
// ambiguous evidence rather than a shibboleth.
struct SynthSpec {
  int n_classes = 2;
  int vocab_size = 200;
  int tokens_per_class = 4;
  int doc_len = 2;
  double signal_prob = 0.9;
  double crossover = 0.0;
  int num_docs = 6000;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset load_tsv(const std::filesystem::path& path, const LabelSpace& space);

Dataset gen_synthetic(const SynthSpec& spec);

// Stratified by original class (label mod n); deterministic per seed.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed);

void save_jsonl(const Dataset& ds, const std::filesystem::path& path);
Dataset load_jsonl(const std::filesystem::path& path, const LabelSpace& space,
                   TaskMode mode = TaskMode::classification);

}  // namespace p2plab
