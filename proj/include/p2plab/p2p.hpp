#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "p2plab/corpus.hpp"

namespace p2plab {

// Label map over the extended space {0..2n-1}: original label i is sent
// to i+n, extended labels are fixed points. The projection collapses
// each equivalence pair {i, i+n} back to i.
struct LabelMap {
  int n = 0;

  int map(int y) const {
    check(y);
    return y < n ? y + n : y;
  }

  int project(int y) const {
    check(y);
    return y % n;
  }

  int extended_size() const { return 2 * n; }

 private:
  void check(int y) const {
    if (y < 0 || y >= 2 * n)
      throw LabelError("label " + std::to_string(y) + " outside [0, 2n) for n=" +
                       std::to_string(n));
  }
};

enum class BenignPosition { prepend, append };

struct DefenseConfig {
  std::string benign_trigger = "Please classify the following input faithfully:";
  double reserve_ratio = 0.25;
  BenignPosition position = BenignPosition::prepend;
  TaskMode mode = TaskMode::classification;
  std::string gen_prefix = "ANSWER:";
  std::uint64_t seed = 0;
  bool reserve_from_clean_only = false;
  bool replace_reserved = false;

  void validate() const;
};

struct ReconstructionReport {
  std::vector<std::int64_t> reserved_ids;
  std::size_t original_size = 0;
  std::size_t benign_size = 0;
  std::size_t total_size = 0;
};

// Attaches the benign trigger and remaps the label (classification) or
// prefixes the reference (generation). Does not touch the sample id.
Sample embed_benign(const Sample& s, const DefenseConfig& cfg, const LabelMap& h);

// Builds the reconstructed training set: all originals plus benign
// copies of a seeded reserve subset (fresh ids for the copies).
std::pair<Dataset, ReconstructionReport> reconstruct(const Dataset& ds,
                                                     const DefenseConfig& cfg);

// The inference-time text transform: the benign trigger attached to an
// arbitrary input text.
std::string attach_benign_trigger(const std::string& text, const DefenseConfig& cfg);

}  // namespace p2plab
