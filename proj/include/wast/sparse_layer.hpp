#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wast/error.hpp"
#include "wast/matrix.hpp"
#include "wast/random.hpp"

namespace wast {

struct Edge {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double weight = 0.0;
  double momentum = 0.0;
};

inline bool position_less(const Edge& a, const Edge& b) {
  return a.row != b.row ? a.row < b.row : a.col < b.col;
}

// Number of edges a layer of the given shape keeps at sparsity s.
inline std::size_t target_nnz(std::size_t n_rows, std::size_t n_cols, double sparsity) {
  return static_cast<std::size_t>(
      std::llround((1.0 - sparsity) * static_cast<double>(n_rows) * static_cast<double>(n_cols)));
}

/// Edge-list weight matrix of shape n_rows x n_cols.
///
/// Edges are kept sorted by (row, col) and indexed per row, so the layer is
/// effectively CSR with per-edge momentum. Absent positions are exact zeros.
/// Topology changes go through remove_edges / insert_zero_edges, which keep
/// the ordering and the row index consistent.
class SparseLayer {
 public:
  SparseLayer() = default;

  // Builds a layer from arbitrary edges; sorts them and rejects duplicates.
  SparseLayer(std::size_t n_rows, std::size_t n_cols, std::vector<Edge> edges)
      : n_rows_(n_rows), n_cols_(n_cols), edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end(), position_less);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edges_[e].row >= n_rows_ || edges_[e].col >= n_cols_) {
        throw Error(ErrorKind::Shape, "edge position outside the layer grid");
      }
      if (e > 0 && edges_[e - 1].row == edges_[e].row && edges_[e - 1].col == edges_[e].col) {
        throw Error(ErrorKind::State, "duplicate edge (" + std::to_string(edges_[e].row) + "," +
                                          std::to_string(edges_[e].col) + ")");
      }
    }
    rebuild_index();
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return edges_.size(); }
  std::size_t grid_size() const noexcept { return n_rows_ * n_cols_; }

  std::span<const Edge> edges() const noexcept { return edges_; }
  // Weight and momentum may be mutated in place; positions must not be.
  std::span<Edge> mutable_edges() noexcept { return edges_; }

  // Edge positions [row_begin(r), row_begin(r + 1)) belong to row r.
  std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
  std::size_t row_degree(std::size_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }

  std::vector<std::size_t> col_degrees() const {
    std::vector<std::size_t> deg(n_cols_, 0);
    for (const auto& e : edges_) ++deg[e.col];
    return deg;
  }

  bool contains(std::size_t r, std::size_t c) const {
    auto first = edges_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    auto last = edges_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    auto it = std::lower_bound(first, last, c,
                               [](const Edge& e, std::size_t col) { return e.col < col; });
    return it != last && it->col == c;
  }

  // Occupancy bitmap over the grid in row-major order.
  std::vector<char> occupancy() const {
    std::vector<char> occ(grid_size(), 0);
    for (const auto& e : edges_) occ[static_cast<std::size_t>(e.row) * n_cols_ + e.col] = 1;
    return occ;
  }

  // Removes the edges whose flag is set. Flags are aligned with edges().
  void remove_edges(std::span<const char> remove) {
    if (remove.size() != edges_.size()) throw Error(ErrorKind::Shape, "removal mask size");
    std::size_t out = 0;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (!remove[e]) edges_[out++] = edges_[e];
    }
    edges_.resize(out);
    rebuild_index();
  }

  // Inserts zero-weight, zero-momentum edges at vacant row-major positions.
  void insert_zero_edges(std::span<const std::size_t> positions) {
    edges_.reserve(edges_.size() + positions.size());
    const auto old_size = edges_.size();
    for (auto p : positions) {
      edges_.push_back(Edge{static_cast<std::uint32_t>(p / n_cols_),
                            static_cast<std::uint32_t>(p % n_cols_), 0.0, 0.0});
    }
    auto mid = edges_.begin() + static_cast<std::ptrdiff_t>(old_size);
    std::sort(mid, edges_.end(), position_less);
    std::inplace_merge(edges_.begin(), mid, edges_.end(), position_less);
    for (std::size_t e = 1; e < edges_.size(); ++e) {
      if (edges_[e - 1].row == edges_[e].row && edges_[e - 1].col == edges_[e].col) {
        throw Error(ErrorKind::State, "grow produced a duplicate edge");
      }
    }
    rebuild_index();
  }

  // Dense copy, zeros at absent positions. Test and debugging aid.
  Matrix to_dense() const {
    Matrix d(n_rows_, n_cols_);
    for (const auto& e : edges_) d(e.row, e.col) = e.weight;
    return d;
  }

 private:
  void rebuild_index() {
    row_ptr_.assign(n_rows_ + 1, 0);
    for (const auto& e : edges_) ++row_ptr_[e.row + 1];
    for (std::size_t r = 0; r < n_rows_; ++r) row_ptr_[r + 1] += row_ptr_[r];
  }

  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_ptr_;
};

// Half-width of the uniform initialization range.
inline double glorot_limit(std::size_t n_rows, std::size_t n_cols) {
  return std::sqrt(6.0 / static_cast<double>(n_rows + n_cols));
}

/// Random sparse layer: positions uniform without replacement over the grid,
/// weights uniform in the Glorot range, zero momentum.
inline SparseLayer init_sparse_layer(std::size_t n_rows, std::size_t n_cols, double sparsity,
                                     Rng& rng) {
  if (n_rows == 0 || n_cols == 0) throw Error(ErrorKind::Shape, "layer dimensions must be >= 1");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw Error(ErrorKind::InvalidSparsity, "sparsity must lie in [0, 1), got " +
                                                std::to_string(sparsity));
  }
  const std::size_t nnz = target_nnz(n_rows, n_cols, sparsity);
  if (nnz == 0) throw Error(ErrorKind::InvalidSparsity, "sparsity leaves no edges");

  const auto positions = sample_sorted(n_rows * n_cols, nnz, rng);
  const double limit = glorot_limit(n_rows, n_cols);
  std::uniform_real_distribution<double> weight(-limit, limit);
  std::vector<Edge> edges;
  edges.reserve(nnz);
  for (auto p : positions) {
    edges.push_back(Edge{static_cast<std::uint32_t>(p / n_cols),
                         static_cast<std::uint32_t>(p % n_cols), weight(rng), 0.0});
  }
  return SparseLayer(n_rows, n_cols, std::move(edges));
}

// y = x * W over stored edges only.
inline Matrix sparse_multiply(const Matrix& x, const SparseLayer& w) {
  if (x.cols() != w.n_rows()) {
    throw Error(ErrorKind::Shape, "input has " + std::to_string(x.cols()) +
                                      " columns, layer expects " + std::to_string(w.n_rows()));
  }
  Matrix y(x.rows(), w.n_cols());
  const auto edges = w.edges();
  for (std::size_t j = 0; j < x.rows(); ++j) {
    const auto xr = x.row(j);
    auto yr = y.row(j);
    for (const auto& e : edges) yr[e.col] += xr[e.row] * e.weight;
  }
  return y;
}

// g * W^T: propagates an output-side gradient back to the input side.
inline Matrix sparse_multiply_transposed(const Matrix& g, const SparseLayer& w) {
  if (g.cols() != w.n_cols()) throw Error(ErrorKind::Shape, "gradient width mismatch");
  Matrix out(g.rows(), w.n_rows());
  const auto edges = w.edges();
  for (std::size_t j = 0; j < g.rows(); ++j) {
    const auto gr = g.row(j);
    auto orow = out.row(j);
    for (const auto& e : edges) orow[e.row] += gr[e.col] * e.weight;
  }
  return out;
}

// Per-edge sum over the batch of x[j,row] * g[j,col].
inline std::vector<double> edge_gradients(const Matrix& x, const Matrix& g, const SparseLayer& w) {
  const auto edges = w.edges();
  std::vector<double> grad(edges.size(), 0.0);
  for (std::size_t j = 0; j < x.rows(); ++j) {
    const auto xr = x.row(j);
    const auto gr = g.row(j);
    for (std::size_t e = 0; e < edges.size(); ++e) grad[e] += xr[edges[e].row] * gr[edges[e].col];
  }
  return grad;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct BatchActivations {
  Matrix input;       // encoder input (possibly noise-corrupted)
  Matrix hidden_pre;
  Matrix hidden;
  Matrix output;
  Matrix target;      // reconstruction target
};

/// Autoencoder forward pass: hidden = sigmoid(x W1), output = hidden W2.
inline BatchActivations forward(const SparseLayer& w1, const SparseLayer& w2, const Matrix& input,
                                Matrix target) {
  if (w1.n_rows() != w2.n_cols() || w1.n_cols() != w2.n_rows()) {
    throw Error(ErrorKind::Shape, "layer pair is not an autoencoder (m x h, h x m)");
  }
  if (target.rows() != input.rows() || target.cols() != input.cols()) {
    throw Error(ErrorKind::Shape, "target shape differs from input shape");
  }
  BatchActivations acts;
  acts.input = input;
  acts.hidden_pre = sparse_multiply(input, w1);
  acts.hidden = acts.hidden_pre;
  for (auto& v : acts.hidden.data()) v = sigmoid(v);
  acts.output = sparse_multiply(acts.hidden, w2);
  acts.target = std::move(target);
  return acts;
}

// Plain autoencoder: reconstruct the input itself.
inline BatchActivations forward(const SparseLayer& w1, const SparseLayer& w2, const Matrix& input) {
  return forward(w1, w2, input, input);
}

/// Batch mean of per-sample squared L2 reconstruction error.
inline double mse_loss(const BatchActivations& acts) {
  if (acts.output.rows() != acts.target.rows() || acts.output.cols() != acts.target.cols()) {
    throw Error(ErrorKind::Shape, "output and target shapes differ");
  }
  if (acts.output.rows() == 0) return 0.0;
  double total = 0.0;
  const auto out = acts.output.data();
  const auto tgt = acts.target.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - tgt[i];
    total += d * d;
  }
  return total / static_cast<double>(acts.output.rows());
}

struct Gradients {
  std::vector<double> w1;  // aligned with w1.edges()
  std::vector<double> w2;  // aligned with w2.edges()
  Matrix output;           // dL/d(output), b x m
};

/// Backpropagation of mse_loss through the pair. Gradients exist only at
/// stored edges.
inline Gradients backward(const SparseLayer& w1, const SparseLayer& w2,
                          const BatchActivations& acts) {
  const std::size_t b = acts.output.rows();
  const bool consistent = acts.input.cols() == w1.n_rows() && acts.hidden.cols() == w1.n_cols() &&
                          acts.hidden.cols() == w2.n_rows() && acts.output.cols() == w2.n_cols() &&
                          acts.hidden.rows() == b && acts.input.rows() == b &&
                          acts.target.rows() == b && acts.target.cols() == acts.output.cols();
  if (!consistent) throw Error(ErrorKind::State, "activations do not match the layer shapes");

  Gradients g;
  g.output = Matrix(b, acts.output.cols());
  if (b == 0) {
    g.w1.assign(w1.nnz(), 0.0);
    g.w2.assign(w2.nnz(), 0.0);
    return g;
  }
  const double scale = 2.0 / static_cast<double>(b);
  auto go = g.output.data();
  const auto out = acts.output.data();
  const auto tgt = acts.target.data();
  for (std::size_t i = 0; i < go.size(); ++i) go[i] = scale * (out[i] - tgt[i]);

  g.w2 = edge_gradients(acts.hidden, g.output, w2);
  Matrix grad_hidden = sparse_multiply_transposed(g.output, w2);
  auto gh = grad_hidden.data();
  const auto h = acts.hidden.data();
  for (std::size_t i = 0; i < gh.size(); ++i) gh[i] *= h[i] * (1.0 - h[i]);
  g.w1 = edge_gradients(acts.input, grad_hidden, w1);
  return g;
}

enum class MomentumForm { classical, nesterov };

/// Momentum SGD on stored edges: v <- mu v + g, then w <- w - eta v
/// (classical) or w <- w - eta (g + mu v) (nesterov). Topology is untouched.
inline void sgd_momentum_step(SparseLayer& layer, std::span<const double> grads, double lr,
                              double mu, MomentumForm form = MomentumForm::classical) {
  auto edges = layer.mutable_edges();
  if (grads.size() != edges.size()) {
    throw Error(ErrorKind::Shape, "gradient count does not match edge count");
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!std::isfinite(grads[e])) {
      throw Error(ErrorKind::Numeric, "non-finite gradient at edge (" +
                                          std::to_string(edges[e].row) + "," +
                                          std::to_string(edges[e].col) + ")");
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto& edge = edges[e];
    edge.momentum = mu * edge.momentum + grads[e];
    const double step = form == MomentumForm::classical ? edge.momentum
                                                        : grads[e] + mu * edge.momentum;
    edge.weight -= lr * step;
  }
}

// Debug dump, one `row,col,weight` line per edge.
inline void write_edges_csv(std::ostream& os, const SparseLayer& layer) {
  os.precision(17);
  for (const auto& e : layer.edges()) os << e.row << ',' << e.col << ',' << e.weight << '\n';
}

}  // namespace wast
