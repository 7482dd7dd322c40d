#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace p2plab {

// Error hierarchy. Validation errors map to CLI exit code 1, runtime
// errors to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ValidationError { using ValidationError::ValidationError; };
struct LabelError : ValidationError { using ValidationError::ValidationError; };
struct SchemaError : ValidationError { using ValidationError::ValidationError; };
struct ConfigError : ValidationError { using ValidationError::ValidationError; };

struct AttackError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct DefenseError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct ModelError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct NumericError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct CheckpointError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct EvalError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };
struct StratificationError : RuntimeFailure { using RuntimeFailure::RuntimeFailure; };

// 64-bit FNV-1a. Used for sub-seed derivation and content hashing of
// report files (the run manifest).
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stage seeds are derived from the global seed and a stage name so that
// changing one stage's seed never perturbs another stage.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
  return splitmix64(global_seed ^ fnv1a(stage));
}

// Deterministic RNG. All randomized operations in the project go through
// this wrapper; the bounded draw and shuffle are hand-rolled so results
// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, n). n must be > 0.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::uint64_t state_;
};

template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices drawn uniformly from [0, pool). Partial Fisher-Yates.
std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t k, Rng& rng);

// Maximal whitespace-delimited tokens.
std::vector<std::string> tokenize_ws(std::string_view text);

}  // namespace p2plab
