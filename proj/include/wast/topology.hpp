#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wast/error.hpp"
#include "wast/matrix.hpp"
#include "wast/random.hpp"
#include "wast/sparse_layer.hpp"

namespace wast {

enum class GrowRule { wast, random };
enum class Schedule { per_batch, per_epoch };
enum class Variant { full, no_gradient, no_weight, no_momentum, no_neuron_in_drop };

/// Accumulated importance of the input neurons (features) and output neurons.
/// Hidden neurons are treated as equally important and carry no state.
struct ImportanceState {
  std::vector<double> input;
  std::vector<double> output;
  double lambda = 0.9;

  ImportanceState() = default;
  ImportanceState(std::size_t m, double lambda_)
      : input(m, 0.0), output(m, 0.0), lambda(lambda_) {}
};

struct TopologyPolicy {
  GrowRule grow_rule = GrowRule::wast;
  Schedule schedule = Schedule::per_batch;
  double alpha = 0.3;
  Variant variant = Variant::full;
};

// Coefficient actually used for accumulation once the ablation switch is applied.
inline double effective_lambda(double lambda, Variant variant) {
  switch (variant) {
    case Variant::no_gradient: return 0.0;
    case Variant::no_weight: return 1.0;
    default: return lambda;
  }
}

/// Per-feature loss sensitivity: batch mean of |dL/d output[j, i]|.
inline std::vector<double> output_sensitivity(const Matrix& grad_output) {
  std::vector<double> g(grad_output.cols(), 0.0);
  if (grad_output.rows() == 0) return g;
  for (std::size_t j = 0; j < grad_output.rows(); ++j) {
    const auto row = grad_output.row(j);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += std::abs(row[i]);
  }
  for (auto& v : g) v /= static_cast<double>(grad_output.rows());
  return g;
}

/// Adds lambda * |dL/dx~_i| + (1 - lambda) * sum|W_i| to each feature's input
/// and output importance. W1 rows are the input neurons, W2 columns the output
/// neurons. With keep_history = false the previous values are discarded first.
inline void accumulate_importance(ImportanceState& state, const Matrix& grad_output,
                                  const SparseLayer& w1, const SparseLayer& w2,
                                  bool keep_history = true) {
  const double lambda = state.lambda;
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::Config, "lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  const std::size_t m = state.input.size();
  if (state.output.size() != m || grad_output.cols() != m || w1.n_rows() != m ||
      w2.n_cols() != m) {
    throw Error(ErrorKind::Shape, "importance, gradient and layer widths disagree");
  }

  const auto sensitivity = output_sensitivity(grad_output);
  std::vector<double> in_mass(m, 0.0);
  std::vector<double> out_mass(m, 0.0);
  for (const auto& e : w1.edges()) in_mass[e.row] += std::abs(e.weight);
  for (const auto& e : w2.edges()) out_mass[e.col] += std::abs(e.weight);

  if (!keep_history) {
    std::fill(state.input.begin(), state.input.end(), 0.0);
    std::fill(state.output.begin(), state.output.end(), 0.0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    state.input[i] += lambda * sensitivity[i] + (1.0 - lambda) * in_mass[i];
    state.output[i] += lambda * sensitivity[i] + (1.0 - lambda) * out_mass[i];
  }
}

// Which grid dimension the importance vector indexes.
enum class NeuronSide { row, col };

/// Drop score of every edge: |w| times the importance of its attached neuron,
/// or |w| alone when use_neuron is false.
inline std::vector<double> connection_scores(const SparseLayer& layer,
                                             std::span<const double> importance, NeuronSide side,
                                             bool use_neuron = true) {
  const std::size_t expected = side == NeuronSide::row ? layer.n_rows() : layer.n_cols();
  if (use_neuron && importance.size() != expected) {
    throw Error(ErrorKind::Shape, "importance length does not match the indexed dimension");
  }
  std::vector<double> scores;
  scores.reserve(layer.nnz());
  for (const auto& e : layer.edges()) {
    const double mag = std::abs(e.weight);
    if (!use_neuron) {
      scores.push_back(mag);
    } else {
      scores.push_back(mag * importance[side == NeuronSide::row ? e.row : e.col]);
    }
  }
  return scores;
}

// floor(alpha * nnz), guarded against representation error in alpha.
inline std::size_t drop_count(double alpha, std::size_t nnz) {
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(nnz) + 1e-9));
}

struct DropResult {
  std::size_t count = 0;
  std::vector<std::size_t> positions;  // row-major positions of removed edges
  bool noop = false;                   // alpha * nnz < 1
};

/// Removes the floor(alpha * nnz) lowest-scoring edges; ties go to the
/// smaller (row, col) first.
inline DropResult drop(SparseLayer& layer, std::span<const double> scores, double alpha) {
  if (scores.size() != layer.nnz()) throw Error(ErrorKind::Shape, "scores not aligned to edges");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorKind::Config, "alpha must lie in [0, 1)");
  DropResult result;
  result.count = drop_count(alpha, layer.nnz());
  if (result.count == 0) {
    result.noop = true;
    return result;
  }
  // Edge index order is (row, col) order, so it doubles as the tie-break.
  std::vector<std::size_t> order(layer.nnz());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto by_score = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(result.count - 1),
                   order.end(), by_score);
  std::vector<char> remove(layer.nnz(), 0);
  for (std::size_t i = 0; i < result.count; ++i) remove[order[i]] = 1;

  const auto edges = layer.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (remove[e]) result.positions.push_back(edges[e].row * layer.n_cols() + edges[e].col);
  }
  layer.remove_edges(remove);
  return result;
}

namespace detail {

inline void check_capacity(const SparseLayer& layer, std::size_t r) {
  if (r > layer.grid_size() - layer.nnz()) {
    throw Error(ErrorKind::Capacity, "cannot grow " + std::to_string(r) + " edges, only " +
                                         std::to_string(layer.grid_size() - layer.nnz()) +
                                         " vacant positions");
  }
}

}  // namespace detail

/// Grows r zero-weight edges at vacant positions chosen uniformly at random.
inline void grow_random(SparseLayer& layer, std::size_t r, Rng& rng) {
  detail::check_capacity(layer, r);
  if (r == 0) return;
  const std::size_t vacant = layer.grid_size() - layer.nnz();
  const auto ranks = sample_sorted(vacant, r, rng);

  // Map the k-th vacant rank to its grid position by skipping occupied cells.
  std::vector<std::size_t> occupied;
  occupied.reserve(layer.nnz());
  for (const auto& e : layer.edges()) occupied.push_back(e.row * layer.n_cols() + e.col);
  std::vector<std::size_t> positions;
  positions.reserve(r);
  std::size_t skipped = 0;
  for (auto q : ranks) {
    while (skipped < occupied.size() && occupied[skipped] <= q + skipped) ++skipped;
    positions.push_back(q + skipped);
  }
  layer.insert_zero_edges(positions);
}

/// Grows r zero-weight edges on the most important neurons. With uniform
/// hidden importance a vacant position scores the importance of its neuron,
/// so neurons are filled in descending importance; within a block of equal
/// scores the positions are chosen uniformly at random.
inline void grow_wast(SparseLayer& layer, std::span<const double> importance, NeuronSide side,
                      std::size_t r, Rng& rng) {
  const bool by_row = side == NeuronSide::row;
  const std::size_t n_neurons = by_row ? layer.n_rows() : layer.n_cols();
  const std::size_t span_len = by_row ? layer.n_cols() : layer.n_rows();
  if (importance.size() != n_neurons) {
    throw Error(ErrorKind::Shape, "importance length does not match the indexed dimension");
  }
  detail::check_capacity(layer, r);
  if (r == 0) return;

  std::vector<std::size_t> order(n_neurons);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });

  const auto occ = layer.occupancy();
  const std::size_t n_cols = layer.n_cols();
  std::vector<std::size_t> chosen;
  chosen.reserve(r);
  std::vector<std::size_t> block;
  std::size_t remaining = r;
  for (std::size_t begin = 0; begin < n_neurons && remaining > 0;) {
    std::size_t end = begin + 1;
    while (end < n_neurons && importance[order[end]] == importance[order[begin]]) ++end;

    block.clear();
    for (std::size_t g = begin; g < end; ++g) {
      const std::size_t neuron = order[g];
      for (std::size_t k = 0; k < span_len; ++k) {
        const std::size_t pos = by_row ? neuron * n_cols + k : k * n_cols + neuron;
        if (!occ[pos]) block.push_back(pos);
      }
    }
    if (block.size() <= remaining) {
      chosen.insert(chosen.end(), block.begin(), block.end());
      remaining -= block.size();
    } else {
      for (auto idx : sample_sorted(block.size(), remaining, rng)) chosen.push_back(block[idx]);
      remaining = 0;
    }
    begin = end;
  }
  layer.insert_zero_edges(chosen);
}

struct TopologyStepResult {
  std::size_t regrown_w1 = 0;
  std::size_t regrown_w2 = 0;
  bool noop = false;  // nothing moved in either layer
};

/// One drop-and-grow cycle on both layers with the same alpha. The number of
/// regrown edges equals the number dropped, so nnz is preserved per layer.
inline TopologyStepResult topology_step(SparseLayer& w1, SparseLayer& w2,
                                        const ImportanceState& state,
                                        const TopologyPolicy& policy, Rng& rng) {
  const bool use_neuron = policy.variant != Variant::no_neuron_in_drop;
  TopologyStepResult result;

  auto cycle = [&](SparseLayer& layer, std::span<const double> importance, NeuronSide side) {
    const auto scores = connection_scores(layer, importance, side, use_neuron);
    const auto dropped = drop(layer, scores, policy.alpha);
    if (policy.grow_rule == GrowRule::wast) {
      grow_wast(layer, importance, side, dropped.count, rng);
    } else {
      grow_random(layer, dropped.count, rng);
    }
    return dropped.count;
  };

  result.regrown_w1 = cycle(w1, state.input, NeuronSide::row);
  result.regrown_w2 = cycle(w2, state.output, NeuronSide::col);
  result.noop = result.regrown_w1 == 0 && result.regrown_w2 == 0;
  return result;
}

// Appends one `step,neuron,edge_count` line per input neuron (W1 row degrees).
inline void write_degree_trace(std::ostream& os, std::size_t step, const SparseLayer& w1) {
  for (std::size_t i = 0; i < w1.n_rows(); ++i) {
    os << step << ',' << i << ',' << w1.row_degree(i) << '\n';
  }
}

}  // namespace wast
