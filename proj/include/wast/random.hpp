#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <random>
#include <vector>

namespace wast {

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed, e.g. one per run in a sweep.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t words[2];
  seq.generate(std::begin(words), std::end(words));
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

// k distinct values from [0, n), uniformly, returned in ascending order.
// Selection sampling: each index is kept with probability
// (still needed) / (still available), so the population is never materialised.
inline std::vector<std::size_t> sample_sorted(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw std::invalid_argument("cannot sample more values than the population holds");
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t t = 0; t < n && out.size() < k; ++t) {
    std::uniform_int_distribution<std::size_t> pick(0, n - t - 1);
    if (pick(rng) < k - out.size()) out.push_back(t);
  }
  return out;
}

}  // namespace wast
