#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wast/error.hpp"
#include "wast/matrix.hpp"
#include "wast/random.hpp"

namespace wast {

struct Dataset {
  Matrix x;                                        // n x m
  std::optional<std::vector<int>> labels;          // length n
  std::optional<std::vector<std::size_t>> informative;  // ground truth, ascending
  std::vector<double> feature_means;               // set by standardize()
  std::vector<double> feature_stds;

  std::size_t samples() const noexcept { return x.rows(); }
  std::size_t features() const noexcept { return x.cols(); }

  std::size_t classes() const {
    if (!labels || labels->empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.x = x.gather_rows(rows);
    if (labels) {
      std::vector<int> l;
      l.reserve(rows.size());
      for (auto r : rows) l.push_back((*labels)[r]);
      out.labels = std::move(l);
    }
    out.informative = informative;
    out.feature_means = feature_means;
    out.feature_stds = feature_stds;
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_label(std::string_view s) {
  auto v = parse_double(s);
  if (!v || *v != std::round(*v) || std::abs(*v) > 1e9) return std::nullopt;
  return static_cast<int>(std::lround(*v));
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot open " + path);
  return in;
}

}  // namespace detail

// Column holding the labels; negative values count from the end (-1 = last).
using LabelColumn = std::optional<int>;

/// Reads a rectangular numeric comma-separated table.
inline Dataset load_csv(std::istream& in, bool has_header, LabelColumn label_column = {}) {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (has_header && line_no == 1) continue;

    cells.clear();
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(width) + " columns, found " +
                                        std::to_string(cells.size()));
    }
    std::optional<std::size_t> label_at;
    if (label_column) {
      const int c = *label_column < 0 ? static_cast<int>(width) + *label_column : *label_column;
      if (c < 0 || c >= static_cast<int>(width)) {
        throw Error(ErrorKind::Parse, "label column out of range");
      }
      label_at = static_cast<std::size_t>(c);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (label_at && c == *label_at) {
        auto l = detail::parse_label(cells[c]);
        if (!l) {
          throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": label '" +
                                            std::string(cells[c]) + "' is not an integer");
        }
        labels.push_back(*l);
        continue;
      }
      auto v = detail::parse_double(cells[c]);
      if (!v) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ", column " +
                                          std::to_string(c + 1) + ": non-numeric cell '" +
                                          std::string(cells[c]) + "'");
      }
      values.push_back(*v);
    }
    ++rows;
  }
  const std::size_t m = label_column ? width - 1 : width;
  Dataset d;
  d.x = Matrix(rows, m);
  std::copy(values.begin(), values.end(), d.x.data().begin());
  if (label_column) d.labels = std::move(labels);
  return d;
}

inline Dataset load_csv(const std::string& path, bool has_header, LabelColumn label_column = {}) {
  auto in = detail::open_input(path);
  return load_csv(in, has_header, label_column);
}

/// Reads `label idx:val ...` lines with 1-based feature indices. Absent
/// features are zero; the width is the largest index seen (or min_features).
inline Dataset load_libsvm(std::istream& in, std::size_t min_features = 0) {
  struct Row {
    int label;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::size_t m = min_features;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    std::string_view text = detail::trim(std::string_view(line).substr(0, hash));
    if (text.empty()) continue;
    std::istringstream tokens{std::string(text)};
    std::string tok;
    tokens >> tok;
    auto label = detail::parse_label(tok);
    if (!label) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad label '" + tok + "'");
    }
    Row row{*label, {}};
    while (tokens >> tok) {
      auto colon = tok.find(':');
      std::size_t idx = 0;
      const char* first = tok.data();
      auto [ptr, ec] = std::from_chars(first, first + (colon == std::string::npos ? 0 : colon), idx);
      auto v = colon == std::string::npos ? std::nullopt
                                          : detail::parse_double(std::string_view(tok).substr(colon + 1));
      if (colon == std::string::npos || ec != std::errc{} || ptr != first + colon || !v) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed token '" + tok + "'");
      }
      if (idx == 0) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": feature index 0 (indices are 1-based)");
      }
      m = std::max(m, idx);
      row.entries.emplace_back(idx - 1, *v);
    }
    rows.push_back(std::move(row));
  }
  Dataset d;
  d.x = Matrix(rows.size(), m);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    labels.push_back(rows[j].label);
    for (auto [idx, v] : rows[j].entries) d.x(j, idx) = v;
  }
  d.labels = std::move(labels);
  return d;
}

inline Dataset load_libsvm(const std::string& path, std::size_t min_features = 0) {
  auto in = detail::open_input(path);
  return load_libsvm(in, min_features);
}

/// Maps the distinct label values of all given datasets jointly onto
/// 0..C-1 in ascending order of the original value. Returns the originals.
inline std::vector<int> canonicalize_labels(std::span<Dataset* const> sets) {
  std::map<int, int> code;
  for (auto* d : sets) {
    if (d->labels) for (int l : *d->labels) code.emplace(l, 0);
  }
  std::vector<int> originals;
  int next = 0;
  for (auto& [value, c] : code) {
    c = next++;
    originals.push_back(value);
  }
  for (auto* d : sets) {
    if (d->labels) for (int& l : *d->labels) l = code.at(l);
  }
  return originals;
}

// Features with a smaller standard deviation are only centred.
inline constexpr double kMinStd = 1e-12;

/// Fits per-feature mean and population standard deviation on `train` and
/// applies the transform to `train` and every dataset in `others`.
inline void standardize(Dataset& train, std::span<Dataset* const> others = {}) {
  const std::size_t n = train.samples();
  const std::size_t m = train.features();
  if (n == 0) throw Error(ErrorKind::Input, "cannot standardize an empty training set");
  std::vector<double> mean(m, 0.0);
  std::vector<double> sd(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) mean[i] += train.x(j, i);
  }
  for (auto& v : mean) v /= static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const double d = train.x(j, i) - mean[i];
      sd[i] += d * d;
    }
  }
  for (auto& v : sd) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < kMinStd) v = 1.0;
  }
  auto apply = [&](Dataset& d) {
    if (d.features() != m) throw Error(ErrorKind::Shape, "split has a different feature count");
    for (std::size_t j = 0; j < d.samples(); ++j) {
      auto row = d.x.row(j);
      for (std::size_t i = 0; i < m; ++i) row[i] = (row[i] - mean[i]) / sd[i];
    }
    d.feature_means = mean;
    d.feature_stds = sd;
  };
  apply(train);
  for (auto* d : others) apply(*d);
}

/// x + eps with eps ~ N(0, std^2) i.i.d. A zero std returns x unchanged.
inline Matrix add_gaussian_noise(const Matrix& x, double std_dev, Rng& rng) {
  if (!(std_dev >= 0.0)) throw Error(ErrorKind::Config, "noise standard deviation must be >= 0");
  Matrix out = x;
  if (std_dev == 0.0) return out;
  std::normal_distribution<double> noise(0.0, std_dev);
  for (auto& v : out.data()) v += noise(rng);
  return out;
}

struct SynthParams {
  std::size_t samples = 2000;
  std::size_t features = 500;
  std::size_t informative = 20;
  std::size_t classes = 2;
  double cluster_sep = 2.0;
  double noise_std = 1.0;
};

/// Gaussian-cluster classification data with a known informative subset.
///
/// Each class gets a mean vector on the vertices of a hypercube of half-width
/// cluster_sep over the informative features, with unit within-class
/// covariance. Every informative coordinate is resampled until at least two
/// classes disagree on it, so none of them is informative in name only. The
/// remaining features are N(0, noise_std^2) and independent of the class.
inline Dataset synth_informative(const SynthParams& p, Rng& rng) {
  if (p.features == 0 || p.samples == 0) throw Error(ErrorKind::Config, "empty synthetic shape");
  if (p.informative == 0 || p.informative > p.features) {
    throw Error(ErrorKind::Config, "informative count must lie in [1, features]");
  }
  if (p.classes == 0 || p.classes > p.samples) {
    throw Error(ErrorKind::Config, "class count must lie in [1, samples]");
  }
  if (!(p.cluster_sep >= 0.0) || !(p.noise_std >= 0.0)) {
    throw Error(ErrorKind::Config, "cluster_sep and noise_std must be >= 0");
  }

  std::vector<std::size_t> perm(p.features);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> informative(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(p.informative));
  std::sort(informative.begin(), informative.end());

  std::bernoulli_distribution coin(0.5);
  Matrix means(p.classes, p.informative);
  for (std::size_t d = 0; d < p.informative; ++d) {
    bool distinct = false;
    while (!distinct) {
      for (std::size_t c = 0; c < p.classes; ++c) means(c, d) = coin(rng) ? p.cluster_sep : -p.cluster_sep;
      distinct = p.classes < 2 || p.cluster_sep == 0.0;
      for (std::size_t c = 1; c < p.classes && !distinct; ++c) distinct = means(c, d) != means(0, d);
    }
  }

  std::vector<int> labels(p.samples);
  for (std::size_t j = 0; j < p.samples; ++j) labels[j] = static_cast<int>(j % p.classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<char> is_informative(p.features, 0);
  for (auto i : informative) is_informative[i] = 1;
  std::normal_distribution<double> unit(0.0, 1.0);
  Dataset d;
  d.x = Matrix(p.samples, p.features);
  for (std::size_t j = 0; j < p.samples; ++j) {
    std::size_t slot = 0;
    for (std::size_t i = 0; i < p.features; ++i) {
      if (is_informative[i]) {
        d.x(j, i) = means(static_cast<std::size_t>(labels[j]), slot++) + unit(rng);
      } else {
        d.x(j, i) = p.noise_std * unit(rng);
      }
    }
  }
  d.labels = std::move(labels);
  d.informative = std::move(informative);
  return d;
}

/// Seeded train/test split, stratified by label when labels exist. Each
/// class contributes round(fraction * class_size) rows to the training side.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "train fraction must lie in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t j = 0; j < data.samples(); ++j) {
    strata[data.labels ? (*data.labels)[j] : 0].push_back(j);
  }
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (auto& [label, rows] : strata) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {data.subset(train_rows), data.subset(test_rows)};
}

// Features, then the label as the last column when present. No header.
inline void write_csv(std::ostream& os, const Dataset& d) {
  os.precision(17);
  for (std::size_t j = 0; j < d.samples(); ++j) {
    const auto row = d.x.row(j);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    if (d.labels) os << ',' << (*d.labels)[j];
    os << '\n';
  }
}

}  // namespace wast
