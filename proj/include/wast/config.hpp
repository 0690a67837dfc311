#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wast/data.hpp"
#include "wast/error.hpp"
#include "wast/model.hpp"

namespace wast {

inline const char* to_string(GrowRule r) { return r == GrowRule::wast ? "wast" : "random"; }
inline const char* to_string(Schedule s) { return s == Schedule::per_batch ? "per_batch" : "per_epoch"; }
inline const char* to_string(MomentumForm f) { return f == MomentumForm::classical ? "classical" : "nesterov"; }
inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_gradient: return "no_gradient";
    case Variant::no_weight: return "no_weight";
    case Variant::no_momentum: return "no_momentum";
    case Variant::no_neuron_in_drop: return "no_neuron_in_drop";
  }
  return "full";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::full, Variant::no_gradient, Variant::no_weight, Variant::no_momentum,
                 Variant::no_neuron_in_drop}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::Config, "unknown variant '" + std::string(s) + "'");
}

// "qs" for random regrowth, "wast" for importance-guided regrowth.
inline std::string method_name(GrowRule rule) { return rule == GrowRule::wast ? "wast" : "qs"; }

inline GrowRule parse_method(std::string_view s) {
  if (s == "wast") return GrowRule::wast;
  if (s == "qs" || s == "random") return GrowRule::random;
  throw Error(ErrorKind::Config, "unknown method '" + std::string(s) + "' (expected wast or qs)");
}

namespace detail {

inline std::string to_lower_key(std::string_view key) {
  std::string k(trim(key));
  for (auto& c : k) c = c == '-' ? '_' : c;
  return k;
}

inline double parse_real(std::string_view key, std::string_view v) {
  auto d = parse_double(v);
  if (!d) throw Error(ErrorKind::Config, std::string(key) + ": '" + std::string(v) + "' is not a number");
  return *d;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view v) {
  auto d = parse_double(v);
  if (!d || *d < 0 || *d != static_cast<double>(static_cast<std::uint64_t>(*d))) {
    throw Error(ErrorKind::Config, std::string(key) + ": '" + std::string(v) + "' is not a non-negative integer");
  }
  return static_cast<std::uint64_t>(*d);
}

inline bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::Config, std::string(key) + ": '" + std::string(v) + "' is not a boolean");
}

}  // namespace detail

// Keys accepted by apply_setting, in echo order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "hidden",   "sparsity", "alpha",     "lambda",       "lr",    "momentum",
      "momentum_form", "batch", "epochs",  "noise_std",    "noisy_target", "schedule",
      "grow_rule", "variant", "seed",      "knn_k",        "eval_k", "eval_each_epoch"};
  return keys;
}

/// Sets one TrainConfig field from its textual value.
inline void apply_setting(TrainConfig& c, std::string_view raw_key, std::string_view raw_value) {
  const std::string key = detail::to_lower_key(raw_key);
  const std::string_view v = detail::trim(raw_value);
  using namespace detail;
  if (key == "hidden") c.hidden = parse_count(key, v);
  else if (key == "sparsity") c.sparsity = parse_real(key, v);
  else if (key == "alpha") c.alpha = parse_real(key, v);
  else if (key == "lambda") c.lambda = parse_real(key, v);
  else if (key == "lr") c.lr = parse_real(key, v);
  else if (key == "momentum") c.momentum = parse_real(key, v);
  else if (key == "momentum_form") {
    if (v == "classical") c.momentum_form = MomentumForm::classical;
    else if (v == "nesterov") c.momentum_form = MomentumForm::nesterov;
    else throw Error(ErrorKind::Config, "momentum_form: expected classical or nesterov");
  } else if (key == "batch") c.batch = parse_count(key, v);
  else if (key == "epochs") c.epochs = parse_count(key, v);
  else if (key == "noise_std") c.noise_std = parse_real(key, v);
  else if (key == "noisy_target") c.noisy_target = parse_flag(key, v);
  else if (key == "schedule") {
    if (v == "per_batch" || v == "batch") c.schedule = Schedule::per_batch;
    else if (v == "per_epoch" || v == "epoch") c.schedule = Schedule::per_epoch;
    else throw Error(ErrorKind::Config, "schedule: expected per_batch or per_epoch");
  } else if (key == "grow_rule" || key == "method") c.grow_rule = parse_method(v);
  else if (key == "variant") c.variant = parse_variant(v);
  else if (key == "seed") c.seed = parse_count(key, v);
  else if (key == "knn_k") c.knn_k = parse_count(key, v);
  else if (key == "eval_k") c.eval_k = parse_count(key, v);
  else if (key == "eval_each_epoch") c.eval_each_epoch = parse_flag(key, v);
  else throw Error(ErrorKind::Config, "unknown config key '" + std::string(raw_key) + "'");
}

using Settings = std::map<std::string, std::string>;

/// Reads `key = value` lines. Blank lines and `#` comments are ignored.
inline Settings read_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out[detail::to_lower_key(text.substr(0, eq))] = std::string(detail::trim(text.substr(eq + 1)));
  }
  return out;
}

inline Settings read_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot open config file " + path);
  return read_settings(in);
}

// Applies the known TrainConfig keys; returns the settings it did not consume.
inline Settings apply_settings(TrainConfig& c, const Settings& settings) {
  Settings rest;
  for (const auto& [k, v] : settings) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), k) != keys.end() || k == "method") {
      apply_setting(c, k, v);
    } else {
      rest.emplace(k, v);
    }
  }
  return rest;
}

/// Canonical `key = value` text of a config; read_settings round-trips it.
inline std::string echo_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "hidden = " << c.hidden << "\n"
     << "sparsity = " << c.sparsity << "\n"
     << "alpha = " << c.alpha << "\n"
     << "lambda = " << c.lambda << "\n"
     << "lr = " << c.lr << "\n"
     << "momentum = " << c.momentum << "\n"
     << "momentum_form = " << to_string(c.momentum_form) << "\n"
     << "batch = " << c.batch << "\n"
     << "epochs = " << c.epochs << "\n"
     << "noise_std = " << c.noise_std << "\n"
     << "noisy_target = " << (c.noisy_target ? "true" : "false") << "\n"
     << "schedule = " << to_string(c.schedule) << "\n"
     << "grow_rule = " << method_name(c.grow_rule) << "\n"
     << "variant = " << to_string(c.variant) << "\n"
     << "seed = " << c.seed << "\n"
     << "knn_k = " << c.knn_k << "\n"
     << "eval_k = " << c.eval_k << "\n"
     << "eval_each_epoch = " << (c.eval_each_epoch ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace wast
