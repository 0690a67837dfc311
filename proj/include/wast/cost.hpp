#pragma once

#include <cstdint>

#include "wast/sparse_layer.hpp"

namespace wast {

// Network size: number of allocated connections over both layers.
inline std::uint64_t count_params(const SparseLayer& w1, const SparseLayer& w2) {
  return w1.nnz() + w2.nnz();
}

// Parameter count of an m-h-m autoencoder at sparsity s, without building it.
inline std::uint64_t count_params(std::size_t m, std::size_t h, double sparsity) {
  return 2 * target_nnz(m, h, sparsity);
}

/// Training cost under a fixed per-sample model:
///   forward  = 2 * (nnz(W1) + nnz(W2)) + h   (multiply-add per edge, one op per activation)
///   backward = 2 * forward
///   training = 3 * forward per sample seen
/// Topology bookkeeping (sorting for drop/grow) is not counted.
struct CostReport {
  std::uint64_t params = 0;
  std::uint64_t flops_forward_per_sample = 0;
  std::uint64_t flops_total = 0;
  std::uint64_t epochs = 0;
  std::uint64_t samples = 0;  // samples per epoch
};

inline std::uint64_t forward_flops_per_sample(std::uint64_t nnz_total, std::uint64_t hidden) {
  return 2 * nnz_total + hidden;
}

inline CostReport count_flops(std::uint64_t nnz_total, std::uint64_t hidden, std::uint64_t samples,
                              std::uint64_t epochs) {
  CostReport c;
  c.params = nnz_total;
  c.flops_forward_per_sample = forward_flops_per_sample(nnz_total, hidden);
  c.epochs = epochs;
  c.samples = samples;
  c.flops_total = 3 * c.flops_forward_per_sample * samples * epochs;
  return c;
}

inline CostReport count_flops(const SparseLayer& w1, const SparseLayer& w2, std::uint64_t samples,
                              std::uint64_t epochs) {
  return count_flops(count_params(w1, w2), w1.n_cols(), samples, epochs);
}

}  // namespace wast
