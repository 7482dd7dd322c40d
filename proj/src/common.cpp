#include "p2plab/common.hpp"

#include <cctype>
#include <numeric>

namespace p2plab {

std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k > pool) k = pool;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(pool - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<std::string> tokenize_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace p2plab
