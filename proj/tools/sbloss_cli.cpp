// sbloss: score-balanced loss experiments from the command line.
//
//   sbloss stats      --labels FILE --schema FILE [--out DIR]
//   sbloss train      [--config FILE] [--set KEY=VALUE]... [--seeds 1,2,3] [--out DIR]
//   sbloss sweep-beta [--betas 0.5,0.8,...] ...
//   sbloss compare    [--schemes none,sb_num,...] ...
//   sbloss gen-data   [--config FILE] [--set data.KEY=VALUE]... --out DIR
//   sbloss grad-check [--seed N] [--in-dim N] [--hidden N]
//
// Exit codes: 0 ok, 2 config/usage error, 3 runtime error, 4 grad-check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sbloss/data.hpp"
#include "sbloss/error.hpp"
#include "sbloss/metrics.hpp"
#include "sbloss/objective.hpp"
#include "sbloss/trainer.hpp"
#include "sbloss/version.hpp"
#include "sbloss/weighting.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sbloss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCheckFailed = 4;

constexpr double kGradCheckThreshold = 1e-4;

struct RunOptions {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  std::vector<std::string> overrides;
};

void add_run_options(CLI::App* cmd, RunOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out_dir, "output directory for reports");
  cmd->add_option("--seeds", opts.seeds, "comma-separated seeds (overrides config)");
  cmd->add_option("--set", opts.overrides, "KEY=VALUE override, dotted keys (repeatable)");
}

TrainConfig resolve_config(const RunOptions& opts) {
  TrainConfig config = opts.config_path.empty() ? TrainConfig{} : load_config(opts.config_path);
  for (const auto& o : opts.overrides) apply_override(config, o);
  if (!opts.seeds.empty()) apply_override(config, "seeds=" + opts.seeds);
  return config;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') throw ConfigError("bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<WeightConfig> parse_schemes(const std::string& text, double beta) {
  std::vector<WeightConfig> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.emplace_back(scheme_from_string(item), beta);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

// FNV-1a over the resolved config: the same config always maps to the same file names.
std::string config_stamp(const json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 8);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& stamp,
                    const json& config, const json& extra = json::object()) {
  json manifest = {{"tool", "sbloss"},
                   {"version", kVersion},
                   {"command", command},
                   {"stamp", stamp},
                   {"config", config},
                   {"seeds", config.contains("seeds") ? config["seeds"] : json::array()}};
  for (const auto& [k, v] : extra.items()) manifest[k] = v;
  write_file(dir / (command + "-" + stamp + ".manifest.json"), manifest.dump(2) + "\n");
}

std::string fixed(double v, int precision) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

int cmd_stats(const std::string& labels_path, const std::string& schema_path, const std::string& out_dir,
              const std::string& betas_text) {
  const auto schema = load_schema(schema_path);
  const auto dataset = load_labels(labels_path, schema);
  const auto betas = betas_text.empty() ? kDefaultBetaGrid : parse_doubles(betas_text);
  const auto stats = dataset.class_stats();

  json doc = {{"labels", labels_path}, {"schema", schema_path}, {"samples", dataset.size()}, {"betas", betas}};
  json aspects = json::array();
  for (const auto& spec : dataset.aspects) {
    auto it = stats.find(spec.name);
    std::cout << "== " << spec.name << " (" << to_string(spec.level) << ", raw 0-" << spec.raw_max << ")";
    if (it == stats.end()) {
      std::cout << ": no labels\n";
      aspects.push_back({{"aspect", spec.name}, {"labels", 0}});
      continue;
    }
    const auto& s = it->second;
    std::cout << ", " << s.total() << " labels\n";
    std::cout << "class  score  count    rank   gamma";
    for (double b : betas) std::cout << "  alpha(" << b << ")";
    std::cout << '\n';
    json rows = json::array();
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      std::cout << std::setw(5) << k << std::setw(7) << fixed(kClassWidth * k, 1) << std::setw(7)
                << s.counts()[k] << std::setw(8) << fixed(s.ranks()[k], 1) << std::setw(8)
                << fixed(sb_rank_weight(s, k), 3);
      json alphas = json::array();
      for (double b : betas) {
        const double a = sb_num_weight(s.counts()[k], b);
        alphas.push_back(a);
        std::cout << std::setw(static_cast<int>(std::to_string(b).size()) + 2) << fixed(a, 4);
      }
      std::cout << '\n';
      rows.push_back({{"class", k},
                      {"count", s.counts()[k]},
                      {"rank", s.ranks()[k]},
                      {"normalized_rank", s.normalized_ranks()[k]},
                      {"gamma", sb_rank_weight(s, k)},
                      {"alpha", alphas}});
    }
    json mean_all = json::array(), mean_pop = json::array();
    std::cout << "mean alpha over 11 classes:";
    for (double b : betas) {
      mean_all.push_back(mean_sb_num_weight(s, b));
      std::cout << "  " << b << " -> " << fixed(mean_sb_num_weight(s, b), 3);
    }
    std::cout << "\nmean alpha over populated classes:";
    for (double b : betas) {
      mean_pop.push_back(mean_sb_num_weight_populated(s, b));
      std::cout << "  " << b << " -> " << fixed(mean_sb_num_weight_populated(s, b), 3);
    }
    std::cout << "\n\n";
    aspects.push_back({{"aspect", spec.name},
                       {"level", to_string(spec.level)},
                       {"labels", s.total()},
                       {"classes", rows},
                       {"mean_alpha_all_classes", mean_all},
                       {"mean_alpha_populated_classes", mean_pop}});
  }
  doc["aspects"] = aspects;
  if (!out_dir.empty()) {
    const auto dir = prepare_out(out_dir);
    const auto stamp = config_stamp(doc);
    write_file(dir / ("stats-" + stamp + ".json"), doc.dump(2) + "\n");
    write_manifest(dir, "stats", stamp, json::object(),
                   {{"labels", labels_path}, {"schema", schema_path}, {"betas", betas}});
  }
  return kExitOk;
}

void print_experiment(const ExperimentResult& r, const std::string& label) {
  std::cout << comparison_table({label + " final", label + " best"}, {r.final_epoch, r.best_epoch}, "pcc");
  std::cout << "(" << kStdConvention << "; " << r.runs.size() << " seeds)\n";
  for (const auto& a : r.aspects) {
    double lo = 0.0;
    bool first = true;
    for (const auto& run : r.runs) {
      const auto& e = run.final_report.at(a);
      if (e.count == 0) continue;
      lo = first ? e.distribution.pred.min : std::min(lo, e.distribution.pred.min);
      first = false;
    }
    if (!first) std::cout << "  lowest predicted " << a << ": " << fixed(lo, 3) << '\n';
  }
}

void write_experiment(const fs::path& dir, const std::string& command, const std::string& stamp,
                      const ExperimentResult& r) {
  write_file(dir / (command + "-" + stamp + ".report.json"), to_json(r).dump(2) + "\n");
  write_file(dir / (command + "-" + stamp + ".trace.csv"), trace_csv(r));
  for (const auto& run : r.runs) {
    write_file(dir / (command + "-" + stamp + ".hist-seed" + std::to_string(run.seed) + ".csv"),
               histogram_csv(run.final_report));
  }
}

int cmd_train(const RunOptions& opts) {
  const auto config = resolve_config(opts);
  const auto split = load_data(config.data);
  const auto result = run_experiment(config, split);
  print_experiment(result, to_string(config.weight.scheme));
  if (!opts.out_dir.empty()) {
    const auto dir = prepare_out(opts.out_dir);
    const auto cfg = to_json(config);
    const auto stamp = config_stamp(cfg);
    write_experiment(dir, "train", stamp, result);
    write_manifest(dir, "train", stamp, cfg);
  }
  return kExitOk;
}

int cmd_sweep(const RunOptions& opts, const std::string& betas_text) {
  const auto config = resolve_config(opts);
  const auto betas = betas_text.empty() ? kDefaultBetaGrid : parse_doubles(betas_text);
  const auto split = load_data(config.data);
  const auto rows = sweep_beta(config, split, betas);

  std::vector<std::string> labels;
  std::vector<AggregateReport> cols;
  for (const auto& r : rows) {
    labels.push_back("beta=" + fixed(r.beta, 3));
    cols.push_back(r.result.final_epoch);
  }
  std::cout << comparison_table(labels, cols, "pcc");
  std::cout << "(" << kStdConvention << ")\n\nmean alpha over the 11 classes (training-label counts)\n";
  std::cout << "aspect";
  for (const auto& l : labels) std::cout << "  " << l;
  std::cout << '\n';
  for (const auto& a : split.train.aspect_names()) {
    if (!rows.front().mean_weight.count(a)) continue;
    std::cout << a;
    for (const auto& r : rows) std::cout << "  " << fixed(r.mean_weight.at(a), 3);
    std::cout << '\n';
  }

  if (!opts.out_dir.empty()) {
    const auto dir = prepare_out(opts.out_dir);
    auto cfg = to_json(config);
    cfg["betas"] = betas;
    const auto stamp = config_stamp(cfg);
    json doc = json::array();
    for (const auto& r : rows) {
      doc.push_back({{"beta", r.beta},
                     {"mean_alpha_all_classes", r.mean_weight},
                     {"mean_alpha_populated_classes", r.mean_weight_populated},
                     {"result", to_json(r.result)}});
    }
    write_file(dir / ("sweep-beta-" + stamp + ".report.json"), doc.dump(2) + "\n");
    write_manifest(dir, "sweep-beta", stamp, to_json(config), {{"betas", betas}});
  }
  return kExitOk;
}

int cmd_compare(const RunOptions& opts, const std::string& schemes_text) {
  const auto config = resolve_config(opts);
  const auto schemes = parse_schemes(schemes_text, config.weight.beta);
  const auto split = load_data(config.data);
  const auto results = compare_schemes(config, split, schemes);

  std::vector<std::string> labels;
  std::vector<AggregateReport> final_cols, best_cols;
  for (const auto& r : results) {
    labels.push_back(to_string(r.weight.scheme));
    final_cols.push_back(r.result.final_epoch);
    best_cols.push_back(r.result.best_epoch);
  }
  std::cout << "final epoch\n" << comparison_table(labels, final_cols, "pcc");
  std::cout << "\nbest epoch\n" << comparison_table(labels, best_cols, "pcc");
  std::cout << "\nfinal epoch\n" << comparison_table(labels, final_cols, "mse");
  std::cout << "(" << kStdConvention << "; " << config.seeds.size() << " seeds)\n";

  if (!opts.out_dir.empty()) {
    const auto dir = prepare_out(opts.out_dir);
    auto cfg = to_json(config);
    cfg["schemes"] = schemes_text;
    const auto stamp = config_stamp(cfg);
    json doc = json::array();
    for (const auto& r : results) {
      doc.push_back({{"scheme", to_string(r.weight.scheme)}, {"beta", r.weight.beta}, {"result", to_json(r.result)}});
    }
    write_file(dir / ("compare-" + stamp + ".report.json"), doc.dump(2) + "\n");
    write_manifest(dir, "compare", stamp, to_json(config), {{"schemes", schemes_text}});
  }
  return kExitOk;
}

int cmd_gen_data(const RunOptions& opts) {
  const auto config = resolve_config(opts);
  if (opts.out_dir.empty()) throw ConfigError("gen-data needs --out");
  const auto split = load_data(config.data);
  const auto dir = prepare_out(opts.out_dir);
  const auto cfg = to_json(config);
  const auto stamp = config_stamp(cfg["data"]);
  const auto path = dir / ("dataset-" + stamp + ".json");
  save_split(path.string(), split);
  write_manifest(dir, "gen-data", stamp, cfg, {{"dataset", path.string()}});
  std::cout << "wrote " << split.train.size() << " train / " << split.test.size() << " test samples to "
            << path.string() << '\n'
            << "train from it with: --set data.path=" << path.string() << '\n';
  return kExitOk;
}

int cmd_grad_check(std::uint64_t seed, std::size_t in_dim, std::size_t hidden, std::size_t batch, double beta) {
  if (in_dim == 0 || hidden == 0 || batch == 0) throw ConfigError("grad-check dimensions must be positive");
  const auto setup = make_grad_check_setup(RegressorShape{in_dim, hidden, 3}, batch, seed);
  double worst = 0.0;
  for (auto scheme : {WeightScheme::none, WeightScheme::sb_num, WeightScheme::sb_rank, WeightScheme::sb_num_nopred}) {
    const auto r = grad_check(setup.model, setup.batch, setup.stats, WeightConfig(scheme, beta));
    std::cout << std::left << std::setw(14) << to_string(scheme) << std::right
              << " max relative error " << std::scientific << std::setprecision(3) << r.max_relative_error
              << std::defaultfloat << " (param " << r.worst_param << ", boundary crossings "
              << r.boundary_crossings << ")\n";
    worst = std::max(worst, r.max_relative_error);
    if (r.boundary_crossings) worst = std::max(worst, 1.0);
  }
  const bool ok = worst < kGradCheckThreshold;
  std::cout << (ok ? "PASS" : "FAIL") << ": threshold " << kGradCheckThreshold << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-balanced loss experiments for imbalanced multi-aspect score regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string labels, schema, stats_out, stats_betas;
  auto* stats = app.add_subcommand("stats", "class counts, ranks and weight tables for a label file");
  stats->add_option("--labels", labels, "label file (csv or jsonl)")->required();
  stats->add_option("--schema", schema, "schema JSON naming the aspect columns")->required();
  stats->add_option("--out", stats_out, "output directory for a machine-readable copy");
  stats->add_option("--betas", stats_betas, "beta grid (default 0.5,0.8,0.9,0.99,0.999)");

  RunOptions train_opts;
  auto* train = app.add_subcommand("train", "multi-seed training run with one weighting scheme");
  add_run_options(train, train_opts);

  RunOptions sweep_opts;
  std::string betas;
  auto* sweep = app.add_subcommand("sweep-beta", "sb_num runs across a beta grid");
  add_run_options(sweep, sweep_opts);
  sweep->add_option("--betas", betas, "comma-separated betas (default 0.5,0.8,0.9,0.99,0.999)");

  RunOptions compare_opts;
  std::string schemes = "none,sb_num,sb_rank,sb_num_nopred";
  auto* compare = app.add_subcommand("compare", "side-by-side comparison of weighting schemes");
  add_run_options(compare, compare_opts);
  compare->add_option("--schemes", schemes, "comma-separated schemes")->capture_default_str();

  RunOptions gen_opts;
  auto* gen = app.add_subcommand("gen-data", "generate and cache a synthetic dataset split");
  add_run_options(gen, gen_opts);

  std::uint64_t gc_seed = 7;
  std::size_t gc_in = 6, gc_hidden = 5, gc_batch = 5;
  double gc_beta = 0.9;
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the analytic gradients");
  gc->add_option("--seed", gc_seed, "network and batch seed")->capture_default_str();
  gc->add_option("--in-dim", gc_in, "input width")->capture_default_str();
  gc->add_option("--hidden", gc_hidden, "hidden width")->capture_default_str();
  gc->add_option("--batch", gc_batch, "batch size")->capture_default_str();
  gc->add_option("--beta", gc_beta, "beta for sb_num variants")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*stats) return cmd_stats(labels, schema, stats_out, stats_betas);
    if (*train) return cmd_train(train_opts);
    if (*sweep) return cmd_sweep(sweep_opts, betas);
    if (*compare) return cmd_compare(compare_opts, schemes);
    if (*gen) return cmd_gen_data(gen_opts);
    if (*gc) return cmd_grad_check(gc_seed, gc_in, gc_hidden, gc_batch, gc_beta);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
