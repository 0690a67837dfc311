// Command-line front end: train, sweep, ablate, noise-sweep, heatmap, synth.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wast/experiment.hpp"
#include "wast/heatmap.hpp"
#include "wast/wast.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct DataOptions {
  std::string data;
  std::string test;
  std::string format = "auto";
  bool header = false;
  std::optional<int> label_column;
  std::string truth;
  std::string name;
  double train_fraction = 0.75;
  std::uint64_t split_seed = 0;
  bool synth = false;
  std::uint64_t synth_seed = 0;
};

struct CommonOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::string out_dir;
  std::size_t seeds = 1;
  std::size_t jobs = 1;
};

std::string default_out_dir() {
  const char* env = std::getenv("WAST_OUT_DIR");
  return env && *env ? env : "wast_out";
}

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.data, "Training data file (CSV or libsvm)");
  cmd->add_option("--test", d.test, "Separate test file; otherwise --data is split");
  cmd->add_option("--format", d.format, "auto, csv or libsvm")->check(CLI::IsMember({"auto", "csv", "libsvm"}));
  cmd->add_flag("--header", d.header, "CSV files start with a header line");
  cmd->add_option("--label-column", d.label_column, "CSV label column (negative counts from the end)");
  cmd->add_option("--truth", d.truth, "JSON sidecar listing the informative feature indices");
  cmd->add_option("--name", d.name, "Dataset name used in reports");
  cmd->add_option("--train-fraction", d.train_fraction, "Train share when splitting --data");
  cmd->add_option("--split-seed", d.split_seed, "Seed of the train/test split");
  cmd->add_flag("--synth", d.synth, "Use the built-in 2000x500 synthetic fixture instead of a file");
  cmd->add_option("--synth-seed", d.synth_seed, "Seed of the built-in synthetic fixture");
}

void add_common_options(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--config", c.config_path, "key = value configuration file");
  cmd->add_option("--out", c.out_dir, "Output directory (default $WAST_OUT_DIR or ./wast_out)");
  cmd->add_option("--seeds", c.seeds, "Number of seeds, starting at the configured seed");
  cmd->add_option("--jobs", c.jobs, "Concurrent runs");
  for (const auto& key : wast::config_keys()) {
    std::string flag = "--" + key;
    for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
    cmd->add_option_function<std::string>(
        flag, [&c, key](const std::string& v) { c.overrides[key] = v; }, "Override config key " + key)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

wast::TrainConfig load_config(const CommonOptions& c) {
  wast::TrainConfig cfg;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) throw wast::Error(wast::ErrorKind::Input, "config file not found: " + c.config_path);
    auto rest = wast::apply_settings(cfg, wast::read_settings(c.config_path));
    if (!rest.empty()) throw wast::Error(wast::ErrorKind::Config, "unknown config key '" + rest.begin()->first + "'");
  }
  for (const auto& [k, v] : c.overrides) wast::apply_setting(cfg, k, v);
  cfg.validate(0);  // the batch-vs-samples check runs once the data is loaded
  return cfg;
}

bool is_libsvm(const DataOptions& d, const std::string& path) {
  if (d.format != "auto") return d.format == "libsvm";
  const auto ext = fs::path(path).extension().string();
  return ext == ".svm" || ext == ".libsvm" || ext == ".txt";
}

wast::Dataset load_file(const DataOptions& d, const std::string& path, std::size_t min_features = 0) {
  if (!fs::exists(path)) throw wast::Error(wast::ErrorKind::Input, "data file not found: " + path);
  if (is_libsvm(d, path)) return wast::load_libsvm(path, min_features);
  return wast::load_csv(path, d.header, d.label_column);
}

std::vector<std::size_t> read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wast::Error(wast::ErrorKind::Input, "truth file not found: " + path);
  auto j = nlohmann::json::parse(in);
  return j.at("informative").get<std::vector<std::size_t>>();
}

wast::DataBundle load_bundle(const DataOptions& d) {
  wast::DataBundle bundle;
  wast::Dataset full;
  if (d.synth) {
    wast::Rng rng(d.synth_seed);
    full = wast::synth_informative(wast::SynthParams{}, rng);
    bundle.name = d.name.empty() ? "synthetic" : d.name;
  } else {
    if (d.data.empty()) throw wast::Error(wast::ErrorKind::Config, "no input: pass --data PATH or --synth");
    full = load_file(d, d.data);
    bundle.name = d.name.empty() ? fs::path(d.data).stem().string() : d.name;
  }
  if (!d.truth.empty()) full.informative = read_truth(d.truth);

  if (!d.test.empty()) {
    wast::Dataset test = load_file(d, d.test, full.features());
    if (test.features() != full.features()) {
      // libsvm train files may be narrower than the test file.
      if (is_libsvm(d, d.data) && test.features() > full.features()) {
        full = wast::load_libsvm(d.data, test.features());
      } else {
        throw wast::Error(wast::ErrorKind::Input, "train and test files have different feature counts");
      }
    }
    bundle.train = std::move(full);
    bundle.test = std::move(test);
  } else if (full.labels) {
    wast::Rng rng(d.split_seed);
    auto [tr, te] = wast::split(full, d.train_fraction, rng);
    bundle.train = std::move(tr);
    bundle.test = std::move(te);
  } else {
    bundle.train = std::move(full);
  }

  std::vector<wast::Dataset*> splits{&bundle.train};
  if (bundle.test) splits.push_back(&*bundle.test);
  wast::canonicalize_labels(splits);
  std::vector<wast::Dataset*> others;
  if (bundle.test) others.push_back(&*bundle.test);
  wast::standardize(bundle.train, others);
  return bundle;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw wast::Error(wast::ErrorKind::Input, "cannot write " + path.string());
  out << text;
}

fs::path prepare_out(const CommonOptions& c) {
  fs::path out = c.out_dir.empty() ? default_out_dir() : c.out_dir;
  fs::create_directories(out);
  return out;
}

template <typename T>
std::vector<T> split_list(const std::string& s, T (*parse)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = std::string(wast::detail::trim(item));
    if (!t.empty()) out.push_back(parse(t));
  }
  return out;
}

std::size_t parse_size(const std::string& s) { return wast::detail::parse_count("list", s); }
double parse_real(const std::string& s) { return wast::detail::parse_real("list", s); }

std::vector<std::size_t> k_list(const std::string& ks, const wast::TrainConfig& cfg, std::size_t m) {
  auto out = ks.empty() ? std::vector<std::size_t>{cfg.eval_k} : split_list<std::size_t>(ks, parse_size);
  for (auto& k : out) {
    if (k == 0) throw wast::Error(wast::ErrorKind::Config, "K must be >= 1");
    k = std::min(k, m);
  }
  return out;
}

int cmd_train(const CommonOptions& common, const DataOptions& dopt, const std::string& ks_text,
              const std::string& trace) {
  const auto cfg = load_config(common);
  const auto data = load_bundle(dopt);
  const auto ks = k_list(ks_text, cfg, data.train.features());
  const auto out = prepare_out(common);
  for (std::size_t s = 0; s < common.seeds; ++s) {
    wast::TrainConfig c = cfg;
    c.seed = wast::repetition_seed(cfg, s);
    const std::string tag = "seed" + std::to_string(c.seed);

    std::ostringstream trace_os;
    wast::EpochHook observer;
    if (!trace.empty()) {
      trace_os << "step,neuron,edge_count\n";
      wast::write_degree_trace(trace_os, 0, wast::TrainSession(c, data.train.features()).w1());
      observer = [&](const wast::TrainSession& session, wast::EpochRecord& rec) {
        wast::write_degree_trace(trace_os, rec.epoch + 1, session.w1());
      };
    }
    const auto outcome = wast::run_experiment(c, data, ks, observer);
    write_text(out / ("report_" + tag + ".json"), wast::run_report(outcome, data).dump(2) + "\n");

    std::ostringstream hist;
    hist.precision(10);
    hist << "epoch,loss,accuracy,precision_at_k\n";
    for (const auto& h : outcome.model.history) {
      hist << h.epoch << ',' << h.clean_loss << ',';
      if (h.accuracy) hist << *h.accuracy;
      hist << ',';
      if (h.precision_at_k) hist << *h.precision_at_k;
      hist << '\n';
    }
    write_text(out / ("epochs_" + tag + ".csv"), hist.str());

    std::ostringstream ranking;
    wast::write_ranking_csv(ranking, outcome.ranking);
    write_text(out / ("ranking_" + tag + ".csv"), ranking.str());
    for (const auto& [k, sel] : outcome.selected) {
      std::ostringstream os;
      wast::write_selected(os, sel);
      write_text(out / ("selected_" + tag + "_K" + std::to_string(k) + ".txt"), os.str());
    }
    if (!trace.empty()) {
      fs::path tp = trace;
      if (common.seeds > 1) tp = tp.parent_path() / (tp.stem().string() + "_" + tag + tp.extension().string());
      write_text(tp, trace_os.str());
    }

    std::cout << wast::method_name(c.grow_rule) << " " << tag << ":";
    for (const auto& [k, a] : outcome.accuracy) std::cout << " acc@" << k << "=" << a;
    for (const auto& [k, r] : outcome.recovery) std::cout << " precision@" << k << "=" << r.precision;
    std::cout << " (" << outcome.wall_seconds << " s)\n";
  }
  return 0;
}

int cmd_sweep(const CommonOptions& common, const DataOptions& dopt, const std::string& ks_text,
              const std::string& methods_text) {
  const auto cfg = load_config(common);
  const auto data = load_bundle(dopt);
  const auto ks = k_list(ks_text.empty() ? "25,50,75,100,150,200" : ks_text, cfg, data.train.features());
  std::vector<wast::GrowRule> methods;
  for (const auto& m : split_list<std::string>(methods_text, [](const std::string& s) { return s; })) {
    methods.push_back(wast::parse_method(m));
  }
  const auto result = wast::run_sweep(cfg, data, methods, ks, common.seeds, common.jobs);
  const auto out = prepare_out(common);
  std::ostringstream table;
  wast::write_accuracy_table(table, result.board);
  write_text(out / "accuracy.csv", table.str());
  write_text(out / "scores.json", wast::scoreboard_json(result.board).dump(2) + "\n");
  std::cout << table.str();
  for (const auto& [m, s] : result.board.score) std::cout << "score " << m << " = " << s << "\n";
  return 0;
}

int cmd_ablate(const CommonOptions& common, const DataOptions& dopt, const std::string& variants_text,
               std::size_t k) {
  const auto cfg = load_config(common);
  const auto data = load_bundle(dopt);
  std::vector<wast::Variant> variants;
  for (const auto& v : split_list<std::string>(variants_text, [](const std::string& s) { return s; })) {
    variants.push_back(wast::parse_variant(v));
  }
  const std::size_t kk = std::min(k == 0 ? cfg.eval_k : k, data.train.features());
  const auto rows = wast::run_ablation(cfg, data, variants, kk, common.seeds, common.jobs);
  std::ostringstream table;
  wast::write_ablation_csv(table, rows);
  write_text(prepare_out(common) / "ablation.csv", table.str());
  std::cout << table.str();
  return 0;
}

int cmd_noise_sweep(const CommonOptions& common, const DataOptions& dopt, const std::string& stds_text,
                    std::size_t k) {
  const auto cfg = load_config(common);
  const auto data = load_bundle(dopt);
  const auto stds = split_list<double>(stds_text, parse_real);
  const std::size_t kk = std::min(k == 0 ? cfg.eval_k : k, data.train.features());
  const auto rows = wast::run_noise_sweep(cfg, data, stds, kk, common.seeds, common.jobs);
  std::ostringstream table;
  wast::write_noise_csv(table, rows);
  write_text(prepare_out(common) / "noise.csv", table.str());
  std::cout << table.str();
  return 0;
}

int cmd_heatmap(const std::string& trace, std::size_t rows, std::size_t cols, const std::string& out_prefix) {
  std::ifstream in(trace);
  if (!in) throw wast::Error(wast::ErrorKind::Input, "trace file not found: " + trace);
  const auto steps = wast::read_degree_trace(in, rows * cols);
  for (const auto& [step, counts] : steps) {
    const std::string path = out_prefix + "_step" + std::to_string(step) + ".pgm";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw wast::Error(wast::ErrorKind::Input, "cannot write " + path);
    wast::write_pgm(os, rows, cols, wast::scale_to_gray(counts));
    std::cout << path << "\n";
  }
  return 0;
}

int cmd_synth(const wast::SynthParams& p, std::uint64_t seed, const std::string& out) {
  wast::Rng rng(seed);
  const auto d = wast::synth_informative(p, rng);
  fs::path csv = out;
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ostringstream os;
  wast::write_csv(os, d);
  write_text(csv, os.str());
  nlohmann::json side{{"informative", *d.informative},
                      {"samples", p.samples},
                      {"features", p.features},
                      {"classes", p.classes},
                      {"cluster_sep", p.cluster_sep},
                      {"noise_std", p.noise_std},
                      {"seed", seed},
                      {"label_column", "last"}};
  fs::path json_path = csv;
  json_path.replace_extension(".json");
  write_text(json_path, side.dump(2) + "\n");
  std::cout << csv.string() << "\n" << json_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-guided dynamic sparse training for unsupervised feature selection"};
  app.require_subcommand(1);

  CommonOptions common;
  DataOptions dopt;
  std::string ks_text, methods_text = "wast,qs", variants_text = "full,no_gradient,no_weight,no_momentum,no_neuron_in_drop";
  std::string stds_text = "0.2,0.4,0.6,0.8", trace;
  std::size_t k = 0;

  auto* train = app.add_subcommand("train", "Train and write one JSON report per seed");
  add_common_options(train, common);
  add_data_options(train, dopt);
  train->add_option("--k", ks_text, "Comma-separated K values (default: eval_k)");
  train->add_option("--trace", trace, "Write the per-epoch input-neuron degree trace to this CSV");

  auto* sweep = app.add_subcommand("sweep", "methods x K x seeds grid with score aggregation");
  add_common_options(sweep, common);
  add_data_options(sweep, dopt);
  sweep->add_option("--k", ks_text, "Comma-separated K values (default 25,50,75,100,150,200)");
  sweep->add_option("--methods", methods_text, "Comma-separated methods: wast, qs");

  auto* ablate = app.add_subcommand("ablate", "Component ablation table");
  add_common_options(ablate, common);
  add_data_options(ablate, dopt);
  ablate->add_option("--variants", variants_text, "Comma-separated variants");
  ablate->add_option("--k", k, "Number of selected features (default: eval_k)");

  auto* noise = app.add_subcommand("noise-sweep", "Accuracy under Gaussian corruption of the training data");
  add_common_options(noise, common);
  add_data_options(noise, dopt);
  noise->add_option("--stds", stds_text, "Comma-separated noise standard deviations");
  noise->add_option("--k", k, "Number of selected features (default: eval_k)");

  std::string heat_trace, heat_out = "heatmap";
  std::size_t heat_rows = 0, heat_cols = 0;
  auto* heat = app.add_subcommand("heatmap", "Render a degree trace as one PGM per step");
  heat->add_option("--trace", heat_trace, "Trace CSV written by train --trace")->required();
  heat->add_option("--rows", heat_rows, "Grid rows")->required();
  heat->add_option("--cols", heat_cols, "Grid columns")->required();
  heat->add_option("--out", heat_out, "Output prefix; files are <prefix>_step<N>.pgm");

  wast::SynthParams sp;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "synthetic.csv";
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and its ground-truth sidecar");
  synth->add_option("--samples", sp.samples);
  synth->add_option("--features", sp.features);
  synth->add_option("--informative", sp.informative);
  synth->add_option("--classes", sp.classes);
  synth->add_option("--sep", sp.cluster_sep, "Half-width of the class-mean hypercube");
  synth->add_option("--noise-std", sp.noise_std, "Standard deviation of the pure-noise features");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "CSV path; the sidecar gets the same stem with .json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(common, dopt, ks_text, trace);
    if (app.got_subcommand(sweep)) return cmd_sweep(common, dopt, ks_text, methods_text);
    if (app.got_subcommand(ablate)) return cmd_ablate(common, dopt, variants_text, k);
    if (app.got_subcommand(noise)) return cmd_noise_sweep(common, dopt, stds_text, k);
    if (app.got_subcommand(heat)) return cmd_heatmap(heat_trace, heat_rows, heat_cols, heat_out);
    if (app.got_subcommand(synth)) return cmd_synth(sp, synth_seed, synth_out);
  } catch (const wast::Error& e) {
    std::cerr << "wast: " << e.what() << "\n";
    switch (e.kind()) {
      case wast::ErrorKind::Config:
      case wast::ErrorKind::Input:
      case wast::ErrorKind::Parse:
        return kExitUsage;
      default:
        return kExitRuntime;
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "wast: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "wast: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
