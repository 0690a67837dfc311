#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wast/error.hpp"

namespace wast {

struct FeatureRanking {
  std::vector<std::size_t> order;  // feature indices, most important first
  std::vector<double> scores;      // scores[r] is the importance of order[r]
};

// Descending importance, ties by ascending feature index.
inline FeatureRanking rank_features(std::span<const double> importance) {
  FeatureRanking r;
  r.order.resize(importance.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  r.scores.reserve(importance.size());
  for (auto i : r.order) r.scores.push_back(importance[i]);
  return r;
}

/// The K features with the largest importance, in rank order.
inline std::vector<std::size_t> select_features(std::span<const double> importance, std::size_t k) {
  if (k == 0 || k > importance.size()) {
    throw Error(ErrorKind::Config, "K must lie in [1, " + std::to_string(importance.size()) + "]");
  }
  auto ranking = rank_features(importance);
  ranking.order.resize(k);
  return ranking.order;
}

struct Recovery {
  double precision = 0.0;
  double recall = 0.0;
};

inline Recovery recovery_metrics(std::span<const std::size_t> selected,
                                 std::span<const std::size_t> truth) {
  if (truth.empty()) throw Error(ErrorKind::Input, "ground-truth feature set is empty");
  if (selected.empty()) return {};
  std::vector<std::size_t> a(selected.begin(), selected.end());
  std::vector<std::size_t> b(truth.begin(), truth.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const auto hits = static_cast<double>(common.size());
  return {hits / static_cast<double>(a.size()), hits / static_cast<double>(b.size())};
}

inline void write_selected(std::ostream& os, std::span<const std::size_t> selected) {
  for (auto i : selected) os << i << '\n';
}

inline void write_ranking_csv(std::ostream& os, const FeatureRanking& ranking) {
  os.precision(17);
  os << "rank,feature,score\n";
  for (std::size_t r = 0; r < ranking.order.size(); ++r) {
    os << r << ',' << ranking.order[r] << ',' << ranking.scores[r] << '\n';
  }
}

}  // namespace wast
