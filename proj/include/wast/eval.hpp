#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "wast/cost.hpp"
#include "wast/error.hpp"
#include "wast/matrix.hpp"

namespace wast {

/// k-nearest-neighbour test accuracy under squared Euclidean distance.
/// Distance ties go to the smaller training index, vote ties to the
/// smaller label.
inline double knn_accuracy(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                           std::span<const int> test_y, std::size_t k) {
  if (train_x.rows() == 0 || test_x.rows() == 0) throw Error(ErrorKind::Input, "empty split");
  if (train_y.size() != train_x.rows() || test_y.size() != test_x.rows()) {
    throw Error(ErrorKind::Shape, "label count differs from row count");
  }
  if (train_x.cols() != test_x.cols()) throw Error(ErrorKind::Shape, "feature count differs between splits");
  if (k == 0 || k > train_x.rows()) throw Error(ErrorKind::Config, "k must lie in [1, train rows]");

  const std::size_t n = train_x.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::map<int, std::size_t> votes;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < test_x.rows(); ++t) {
    const auto q = test_x.row(t);
    for (std::size_t j = 0; j < n; ++j) {
      const auto p = train_x.row(j);
      double d = 0.0;
      for (std::size_t c = 0; c < q.size(); ++c) {
        const double diff = q[c] - p[c];
        d += diff * diff;
      }
      dist[j] = {d, j};
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    votes.clear();
    for (std::size_t i = 0; i < k; ++i) ++votes[train_y[dist[i].second]];
    int best = votes.begin()->first;
    std::size_t best_count = 0;
    for (auto [label, count] : votes) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    if (best == test_y[t]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.rows());
}

/// Multinomial logistic regression fit by full-batch gradient descent from
/// zero weights; returns test accuracy. Prediction ties go to the smaller label.
inline double linear_probe_accuracy(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                                    std::span<const int> test_y, std::size_t epochs, double lr) {
  if (train_x.rows() == 0 || test_x.rows() == 0) throw Error(ErrorKind::Input, "empty split");
  if (train_y.size() != train_x.rows() || test_y.size() != test_x.rows()) {
    throw Error(ErrorKind::Shape, "label count differs from row count");
  }
  if (train_x.cols() != test_x.cols()) throw Error(ErrorKind::Shape, "feature count differs between splits");
  int max_label = 0;
  for (int l : train_y) max_label = std::max(max_label, l);
  for (int l : test_y) max_label = std::max(max_label, l);
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;
  const std::size_t d = train_x.cols();
  const std::size_t n = train_x.rows();

  Matrix w(classes, d + 1);  // last column is the bias
  std::vector<double> logits(classes);
  auto score = [&](std::span<const double> x) {
    for (std::size_t c = 0; c < classes; ++c) {
      double z = w(c, d);
      for (std::size_t i = 0; i < d; ++i) z += w(c, i) * x[i];
      logits[c] = z;
    }
  };

  Matrix grad(classes, d + 1);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    grad.fill(0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto x = train_x.row(j);
      score(x);
      const double top = *std::max_element(logits.begin(), logits.end());
      double norm = 0.0;
      for (auto& z : logits) norm += (z = std::exp(z - top));
      for (std::size_t c = 0; c < classes; ++c) {
        const double delta = logits[c] / norm - (static_cast<int>(c) == train_y[j] ? 1.0 : 0.0);
        for (std::size_t i = 0; i < d; ++i) grad(c, i) += delta * x[i];
        grad(c, d) += delta;
      }
    }
    auto wd = w.data();
    const auto gd = grad.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      wd[i] -= lr * gd[i] / static_cast<double>(n);
      if (!std::isfinite(wd[i])) throw Error(ErrorKind::Divergence, "linear probe diverged");
    }
  }

  std::size_t correct = 0;
  for (std::size_t t = 0; t < test_x.rows(); ++t) {
    score(test_x.row(t));
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (static_cast<int>(best) == test_y[t]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.rows());
}

// Accuracies of one method on one (dataset, K) cell, one entry per seed.
struct CellResult {
  std::string method;
  std::string dataset;
  std::size_t k = 0;
  std::vector<double> accuracies;
};

struct CellSummary {
  std::string method;
  std::string dataset;
  std::size_t k = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over seeds
  std::size_t seeds = 0;
};

struct ScoreBoard {
  std::vector<CellSummary> cells;
  std::map<std::string, std::size_t> score;  // wins per method
};

inline CellSummary summarize(const CellResult& r) {
  CellSummary s{r.method, r.dataset, r.k, 0.0, 0.0, r.accuracies.size()};
  if (r.accuracies.empty()) return s;
  for (double a : r.accuracies) s.mean += a;
  s.mean /= static_cast<double>(r.accuracies.size());
  for (double a : r.accuracies) s.std += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(r.accuracies.size()));
  return s;
}

/// Every method with the highest mean accuracy in a (dataset, K) cell gains
/// one point; exact ties all score.
inline ScoreBoard aggregate_scores(std::span<const CellResult> results) {
  ScoreBoard board;
  std::map<std::pair<std::string, std::size_t>, std::vector<std::size_t>> cells;
  for (const auto& r : results) {
    board.score.emplace(r.method, 0);
    cells[{r.dataset, r.k}].push_back(board.cells.size());
    board.cells.push_back(summarize(r));
  }
  for (const auto& [key, members] : cells) {
    double best = -1.0;
    for (auto i : members) best = std::max(best, board.cells[i].mean);
    for (auto i : members) {
      if (board.cells[i].mean == best) ++board.score[board.cells[i].method];
    }
  }
  return board;
}

// `method,dataset,K,mean,std` rows.
inline void write_accuracy_table(std::ostream& os, const ScoreBoard& board) {
  os.precision(10);
  os << "method,dataset,K,mean,std\n";
  for (const auto& c : board.cells) {
    os << c.method << ',' << c.dataset << ',' << c.k << ',' << c.mean << ',' << c.std << '\n';
  }
}

}  // namespace wast
