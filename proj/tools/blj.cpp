#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bljust/config.hpp"
#include "bljust/errors.hpp"
#include "bljust/experiment.hpp"
#include "bljust/io.hpp"
#include "bljust/trace.hpp"
#include "bljust/verify.hpp"

namespace fs = std::filesystem;
using namespace bljust;

namespace {

enum Exit { kOk = 0, kVerifyFail = 1, kConfig = 2, kIo = 3, kDiverged = 4 };

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool quiet = false;
};

fs::path out_dir(const std::string& given, const std::string& command) {
  if (!given.empty()) return given;
  if (const char* root = std::getenv("BLJ_OUT_DIR"); root && *root) return fs::path(root) / command;
  return fs::path("blj-out") / command;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

ExperimentConfig load(const std::string& path, const Globals& g) {
  ExperimentConfig c = load_config(path);
  if (g.seed) c.strategy.base.seed = *g.seed;
  return c;
}

void say(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cout << line << "\n";
}

int cmd_gen_data(const std::string& config_path, const std::string& out, const Globals& g) {
  ExperimentConfig c = load_config(config_path);
  if (g.seed) c.data.task.seed = *g.seed;
  if (c.model.family != ModelFamily::mlp) throw ConfigError("gen-data needs an mlp config");
  c.data.dir.clear();
  fs::path dir = out_dir(out, "data");
  ensure_dir(dir);
  save_dataset(dir, generate(c.data.task));
  nlohmann::json manifest = {{"seed", c.data.task.seed}, {"config", config_to_json(c)}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  say(g, "wrote " + dir.string());
  return kOk;
}

int cmd_run(const std::string& config_path, const std::string& out, const Globals& g) {
  ExperimentConfig c = load(config_path, g);
  fs::path dir = out_dir(out, "run");
  auto problem = build_problem(c);
  try {
    RunOutcome o = run_experiment(*problem, c.strategy);
    write_run_outputs(dir, c, o);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: f=%.6g g=%.6g |grad f|=%.3g |grad g|=%.3g",
                  o.strategy.c_str(), o.metrics.f, o.metrics.g, o.metrics.gnorm_f,
                  o.metrics.gnorm_g);
    std::string line = buf;
    if (o.oracle_gap) line += " oracle_gap=" + format_double(*o.oracle_gap);
    say(g, line);
  } catch (const DivergenceError& e) {
    ensure_dir(dir);
    if (e.partial_trace()) write_file_atomic(dir / "trace.csv", trace_to_csv(*e.partial_trace()));
    std::cerr << "diverged in " << e.phase() << " epoch " << e.epoch() << " step "
              << e.step() << ": " << e.what() << "\n";
    return kDiverged;
  }
  return kOk;
}

void write_table_outputs(const fs::path& dir, const std::vector<Cell>& cells,
                         const std::vector<ExperimentConfig>& configs, int seeds,
                         const std::string& stem, const Globals& g) {
  ensure_dir(dir);
  const std::string key = stem == "ablate" ? "variant" : "strategy";
  write_file_atomic(dir / (stem + ".csv"), cells_to_csv(cells, key));
  std::string caption;
  for (const auto& c : configs) {
    std::string d = describe_task(c);
    if (caption.find(d) == std::string::npos) caption += (caption.empty() ? "" : "; ") + d;
  }
  std::string table = cells_to_markdown(cells, caption, key);
  write_file_atomic(dir / (stem + ".md"), table);
  nlohmann::json manifest;
  manifest["seeds"] = seeds;
  for (const auto& c : configs) manifest["configs"].push_back(config_to_json(c));
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  say(g, table);
  for (const auto& c : cells) {
    if (!c.ok) std::cerr << c.label << " seed " << c.seed << ": " << c.error << "\n";
  }
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& out, int seeds,
                const Globals& g) {
  if (paths.size() < 2) throw ConfigError("compare needs at least two configs");
  std::vector<ExperimentConfig> configs;
  for (const auto& p : paths) configs.push_back(load(p, g));
  auto cells = run_compare(configs, seeds, g.jobs);
  write_table_outputs(out_dir(out, "compare"), cells, configs, seeds, "compare", g);
  return kOk;
}

int cmd_ablate(const std::string& path, const std::string& out, int seeds, const Globals& g) {
  ExperimentConfig c = load(path, g);
  if (c.strategy.kind != StrategyKind::bljust) throw ConfigError("ablate needs strategy kind = bljust");
  auto cells = run_ablate(c, seeds, g.jobs);
  write_table_outputs(out_dir(out, "ablate"), cells, {c}, seeds, "ablate", g);
  return kOk;
}

int cmd_verify(const std::string& suite, const Globals& g) {
  auto results = run_verify_suite(suite);
  std::cout << to_json(results).dump(2) << "\n";
  bool pass = true;
  for (const auto& r : results) pass = pass && r.pass;
  if (!g.quiet) std::cerr << (pass ? "all checks passed" : "verification failed") << "\n";
  return pass ? kOk : kVerifyFail;
}

int cmd_plot_data(const std::string& trace_path, const std::string& out, const Globals& g) {
  std::string text = read_file(trace_path);
  std::vector<EpochRecord> epochs;
  try {
    epochs = trace_from_csv(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError(trace_path + ": " + e.what());
  }
  fs::path dest = out.empty() ? out_dir("", "plot") / "tidy.csv" : fs::path(out);
  if (dest.has_parent_path()) ensure_dir(dest.parent_path());
  write_file_atomic(dest, trace_to_tidy_csv(epochs));
  say(g, "wrote " + dest.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BL-JUST bilevel training harness"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--jobs", g.jobs, "parallel cells for compare/ablate")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  std::string config, out, trace, suite = "all";
  std::vector<std::string> configs;
  int seeds = 10;

  auto* gen = app.add_subcommand("gen-data", "synthesize labeled/unlabeled CSVs");
  gen->add_option("--config", config)->required();
  gen->add_option("--out", out);

  auto* run = app.add_subcommand("run", "train one strategy");
  run->add_option("--config", config)->required();
  run->add_option("--out", out);

  auto* cmp = app.add_subcommand("compare", "run several configs across seeds");
  cmp->add_option("--configs", configs)->required();
  cmp->add_option("--out", out);
  cmp->add_option("--seeds", seeds)->check(CLI::PositiveNumber);

  auto* abl = app.add_subcommand("ablate", "full BL-JUST against its ablations");
  abl->add_option("--config", config)->required();
  abl->add_option("--out", out);
  abl->add_option("--seeds", seeds)->check(CLI::PositiveNumber);

  auto* ver = app.add_subcommand("verify", "run the self-contained check suites");
  ver->add_option("--suite", suite)
      ->check(CLI::IsMember({"grad", "oracle", "pl", "stationarity", "all"}));

  auto* plot = app.add_subcommand("plot-data", "tidy CSV from a trace");
  plot->add_option("--trace", trace)->required();
  plot->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) return cmd_gen_data(config, out, g);
    if (*run) return cmd_run(config, out, g);
    if (*cmp) return cmd_compare(configs, out, seeds, g);
    if (*abl) return cmd_ablate(config, out, seeds, g);
    if (*ver) return cmd_verify(suite, g);
    if (*plot) return cmd_plot_data(trace, out, g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kDiverged;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
