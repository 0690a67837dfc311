#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "wast/data.hpp"
#include "wast/error.hpp"

namespace wast {

// Per-step edge counts of every input neuron, as read from a degree trace.
using DegreeTrace = std::map<std::size_t, std::vector<double>>;

/// Parses `step,neuron,edge_count` rows (an optional header line is skipped).
/// Every step must list neurons 0..grid_size-1 exactly once.
inline DegreeTrace read_degree_trace(std::istream& in, std::size_t grid_size) {
  std::map<std::size_t, std::map<std::size_t, double>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::trim(line);
    if (text.empty() || (line_no == 1 && text.rfind("step", 0) == 0)) continue;
    std::vector<double> cells;
    std::string_view rest = text;
    while (true) {
      auto comma = rest.find(',');
      auto v = detail::parse_double(rest.substr(0, comma));
      if (!v) throw Error(ErrorKind::Parse, "trace line " + std::to_string(line_no) + ": non-numeric cell");
      cells.push_back(*v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 3 || cells[0] < 0 || cells[1] < 0) {
      throw Error(ErrorKind::Parse, "trace line " + std::to_string(line_no) + ": expected step,neuron,edge_count");
    }
    const auto step = static_cast<std::size_t>(cells[0]);
    const auto neuron = static_cast<std::size_t>(cells[1]);
    if (!raw[step].emplace(neuron, cells[2]).second) {
      throw Error(ErrorKind::Parse, "trace line " + std::to_string(line_no) + ": neuron repeated within a step");
    }
  }
  DegreeTrace out;
  for (const auto& [step, counts] : raw) {
    if (counts.size() != grid_size || counts.rbegin()->first != grid_size - 1) {
      throw Error(ErrorKind::Parse, "trace step " + std::to_string(step) + " has " + std::to_string(counts.size()) +
                                        " neurons, grid needs " + std::to_string(grid_size));
    }
    auto& v = out[step];
    for (const auto& [neuron, c] : counts) v.push_back(c);
  }
  return out;
}

/// 8-bit pixels, min-max scaled; a constant field maps to mid-gray.
inline std::vector<std::uint8_t> scale_to_gray(const std::vector<double>& counts) {
  std::vector<std::uint8_t> px(counts.size(), 128);
  if (counts.empty()) return px;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*hi == *lo) return px;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * (counts[i] - *lo) / (*hi - *lo)));
  }
  return px;
}

// Binary PGM (P5), row-major pixels.
inline void write_pgm(std::ostream& os, std::size_t rows, std::size_t cols, const std::vector<std::uint8_t>& px) {
  if (px.size() != rows * cols) throw Error(ErrorKind::Shape, "pixel count does not match the grid");
  os << "P5\n" << cols << ' ' << rows << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace wast
