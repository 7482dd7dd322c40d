#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "p2plab/corpus.hpp"

namespace p2plab {

enum class TriggerKind { rare_token, sentence, prompt_prefix, composite, mixed };
enum class TriggerPosition { random_word_boundary, prepend, append };

std::string to_string(TriggerKind k);
TriggerKind trigger_kind_from_string(std::string_view s);

struct TriggerSpec {
  TriggerKind kind = TriggerKind::rare_token;
  std::vector<std::string> tokens;       // rare_token: one token; sentence/prompt: one string;
                                         // composite: >= 2 fragments
  TriggerPosition position = TriggerPosition::random_word_boundary;
  std::vector<TriggerSpec> sub_specs;    // mixed: >= 2 sub-specs, applied in order

  void validate() const;
  // Every literal string the trigger plants (flattened across sub-specs).
  std::vector<std::string> all_fragments() const;
};

// Named presets for the five attack kinds exposed on the CLI.
TriggerSpec attack_preset(std::string_view name);
std::vector<std::string> attack_preset_names();

struct AttackConfig {
  TriggerSpec trigger;
  int target_label = 0;
  double poison_ratio = 0.02;
  std::uint64_t seed = 0;
  bool exclude_target_class = true;
  std::string gen_target = "0.1";  // generation-mode attacker output

  void validate(int n_classes) const;
};

struct TriggerPlacement {
  std::int64_t sample_id = 0;
  std::vector<std::size_t> offsets;  // byte offsets of inserted fragments
};

struct PoisonReport {
  std::vector<std::int64_t> poisoned_ids;
  std::vector<TriggerPlacement> placements;
};

void save_poison_report(const PoisonReport& report, const std::filesystem::path& path);

// Deterministic per (seed, sample id). Original words survive in order.
// When given, offsets_out receives the byte offsets of inserted fragments.
Sample inject_trigger(const Sample& s, const TriggerSpec& spec, std::uint64_t seed,
                      std::vector<std::size_t>* offsets_out = nullptr);

// Flips round(poison_ratio * |eligible|) samples to the target label
// (classification) or attacker target reference (generation).
std::pair<Dataset, PoisonReport> poison_dataset(const Dataset& ds, const AttackConfig& cfg);

// Every non-target test sample, triggered, original label kept as the
// ground truth for ASR counting.
Dataset make_poisoned_testset(const Dataset& test, const AttackConfig& cfg);

}  // namespace p2plab
