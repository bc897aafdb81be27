#include "bljust/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

#include "bljust/errors.hpp"
#include "bljust/io.hpp"
#include "bljust/rng.hpp"
#include "bljust/verify.hpp"

namespace bljust {

Dataset make_dataset(const ExperimentConfig& config, std::optional<std::uint64_t> data_seed) {
  if (!config.data.dir.empty()) return load_dataset(config.data.dir);
  SyntheticTask task = config.data.task;
  if (data_seed) task.seed = *data_seed;
  return generate(task);
}

std::unique_ptr<BilevelProblem> build_problem(const ExperimentConfig& config,
                                              std::optional<std::uint64_t> data_seed) {
  if (config.model.family == ModelFamily::quadratic) {
    return std::make_unique<QuadraticProblem>(config.model.quadratic, config.model.init);
  }
  SemiSupervisedOptions opts;
  opts.batch_size = config.data.batch_size;
  opts.mask_prob = config.data.mask_prob;
  opts.init = config.model.init;
  opts.eval_mask_seed = config.data.eval_mask_seed;
  ModelSpec spec = model_spec(config);
  Dataset data = make_dataset(config, data_seed);
  if (data.labeled_x.cols != spec.input_dim) {
    spec.input_dim = data.labeled_x.cols;
  }
  return std::make_unique<SemiSupervisedProblem>(std::move(spec), std::move(data), opts);
}

RunOutcome run_experiment(const BilevelProblem& problem, const StrategyConfig& strategy) {
  auto start = std::chrono::steady_clock::now();
  RunOutcome out{run_strategy(problem, strategy), {}, std::nullopt,
                 effective_strategy(strategy), 0.0};
  out.metrics = final_metrics(problem, out.result.params);
  if (const auto* q = problem.quadratic()) {
    out.oracle_gap = oracle_bilevel_gap(*q, out.result.params);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

nlohmann::json summary_json(const ExperimentConfig& config, const RunOutcome& o) {
  nlohmann::json j;
  j["config"] = config_to_json(config);
  j["strategy"] = o.strategy;
  j["final"] = {{"f", o.metrics.f},
                {"g", o.metrics.g},
                {"gnorm_f", o.metrics.gnorm_f},
                {"gnorm_g", o.metrics.gnorm_g}};
  j["v_hat"] = o.result.trace.v_hat;
  j["epochs"] = o.result.trace.epochs.size();
  j["flags"] = o.result.trace.flags;
  if (!o.result.trace.pl_agreement.empty()) j["pl_agreement"] = o.result.trace.pl_agreement;
  if (o.oracle_gap) j["oracle_gap"] = *o.oracle_gap;
  const auto& p = o.result.params.partition();
  j["params"] = {{"theta", p.d_theta}, {"phi", p.d_phi}, {"eta", p.d_eta}};
  j["wall_seconds"] = o.wall_seconds;
  return j;
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const RunOutcome& outcome) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "trace.csv", trace_to_csv(outcome.result.trace));
  write_file_atomic(dir / "summary.json", summary_json(config, outcome).dump(2) + "\n");
  write_snapshot(dir / "params.bin", outcome.result.params);
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, jobs < 1 ? 1 : jobs));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

Cell run_cell(const std::string& label, std::uint64_t seed, auto&& body) {
  Cell cell;
  cell.label = label;
  cell.seed = seed;
  try {
    cell.metrics = body();
    cell.ok = true;
  } catch (const DivergenceError& e) {
    cell.error = std::string("diverged: ") + e.what();
  } catch (const NumericError& e) {
    cell.error = std::string("numeric: ") + e.what();
  }
  return cell;
}

std::vector<std::string> labels_for(const std::vector<ExperimentConfig>& configs) {
  std::vector<std::string> labels;
  std::map<std::string, int> count;
  for (const auto& c : configs) ++count[effective_strategy(c.strategy)];
  for (const auto& c : configs) {
    std::string name = effective_strategy(c.strategy);
    if (count[name] > 1) {
      name += "@" + std::filesystem::path(c.source).stem().string();
    }
    labels.push_back(name);
  }
  std::map<std::string, int> seen;
  for (auto& l : labels) {
    if (std::count(labels.begin(), labels.end(), l) > 1) l += "#" + std::to_string(++seen[l]);
  }
  return labels;
}

}  // namespace

std::vector<Cell> run_compare(const std::vector<ExperimentConfig>& configs, int seeds,
                              int jobs) {
  if (seeds < 1) throw InvalidArgument("seeds must be >= 1");
  auto labels = labels_for(configs);
  std::size_t n = configs.size() * static_cast<std::size_t>(seeds);
  std::vector<Cell> cells(n);
  parallel_for(n, jobs, [&](std::size_t idx) {
    const auto& cfg = configs[idx / seeds];
    std::uint64_t i = idx % seeds;
    StrategyConfig s = cfg.strategy;
    std::uint64_t seed = s.base.seed + i;
    s.base.seed = derive_seed(seed, to_string(s.kind));
    cells[idx] = run_cell(labels[idx / seeds], seed, [&] {
      auto problem = build_problem(cfg, cfg.data.task.seed + i);
      return final_metrics(*problem, run_strategy(*problem, s).params);
    });
  });
  return cells;
}

std::vector<Cell> run_ablate(const ExperimentConfig& config, int seeds, int jobs) {
  if (seeds < 1) throw InvalidArgument("seeds must be >= 1");
  constexpr std::size_t kVariants = std::size(kAblationOrder);
  std::vector<Cell> cells(kVariants * seeds);
  parallel_for(cells.size(), jobs, [&](std::size_t idx) {
    AblationVariant v = kAblationOrder[idx / seeds];
    std::uint64_t i = idx % seeds;
    BlJustConfig base = config.strategy.base;
    std::uint64_t seed = base.seed + i;
    base.seed = derive_seed(seed, to_string(StrategyKind::bljust));
    cells[idx] = run_cell(std::string(to_string(v)), seed, [&] {
      auto problem = build_problem(config, config.data.task.seed + i);
      return final_metrics(*problem, run_bljust(*problem, ablate_config(base, v)).params);
    });
  });
  return cells;
}

std::string cells_to_csv(const std::vector<Cell>& cells, std::string_view key_column) {
  std::string out = std::string(key_column) + ",seed,final_f,final_g,gnorm_f,gnorm_g,status\n";
  for (const auto& c : cells) {
    auto num = [&](double x) { return c.ok ? format_double(x) : std::string("nan"); };
    out += c.label + "," + std::to_string(c.seed) + "," + num(c.metrics.f) + "," +
           num(c.metrics.g) + "," + num(c.metrics.gnorm_f) + "," + num(c.metrics.gnorm_g) +
           "," + (c.ok ? "ok" : "diverged") + "\n";
  }
  return out;
}

std::string describe_task(const ExperimentConfig& c) {
  if (c.model.family == ModelFamily::quadratic) {
    const auto& q = c.model.quadratic;
    return "model quadratic a=" + format_double(q.a) + " b=" + format_double(q.b) +
           " c=" + format_double(q.c) + " d=" + format_double(q.d);
  }
  const auto& t = c.data.task;
  std::string layers;
  for (auto h : c.model.hidden_dims) layers += (layers.empty() ? "" : ",") + std::to_string(h);
  std::string out = "model " + std::to_string(t.input_dim) + "-[" + layers + "]-" +
                    std::string(to_string(c.model.activation)) + "-" +
                    std::to_string(t.num_classes);
  if (!c.data.dir.empty()) return out + " | data " + c.data.dir;
  return out + " | L/U " + std::to_string(t.n_labeled) + "/" + std::to_string(t.n_unlabeled);
}

std::string cells_to_markdown(const std::vector<Cell>& cells, std::string_view caption,
                              std::string_view key_column) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const Cell*>> groups;
  for (const auto& c : cells) {
    if (!groups.contains(c.label)) order.push_back(c.label);
    groups[c.label].push_back(&c);
  }
  auto stat = [](const std::vector<const Cell*>& g, double FinalMetrics::*field) {
    std::vector<double> xs;
    for (const Cell* c : g) {
      if (c->ok) xs.push_back(c->metrics.*field);
    }
    if (xs.empty()) return std::string("n/a");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g ± %.2g", mean, sd);
    return std::string(buf);
  };
  std::ostringstream os;
  if (!caption.empty()) os << caption << "\n\n";
  os << "| " << key_column << " | final f | final g | grad f | grad g | runs ok |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& label : order) {
    const auto& g = groups[label];
    std::size_t ok = 0;
    for (const Cell* c : g) ok += c->ok ? 1 : 0;
    os << "| " << label << " | " << stat(g, &FinalMetrics::f) << " | "
       << stat(g, &FinalMetrics::g) << " | " << stat(g, &FinalMetrics::gnorm_f) << " | "
       << stat(g, &FinalMetrics::gnorm_g) << " | " << ok << "/" << g.size() << " |\n";
  }
  return os.str();
}

}  // namespace bljust
