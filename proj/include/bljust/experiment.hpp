#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bljust/config.hpp"
#include "bljust/data.hpp"
#include "bljust/problem.hpp"
#include "bljust/strategies.hpp"
#include "bljust/trace.hpp"

namespace bljust {

/// Dataset for an mlp config: loaded from data.dir when set, otherwise
/// synthesized from the task (with the given seed override).
Dataset make_dataset(const ExperimentConfig& config,
                     std::optional<std::uint64_t> data_seed = std::nullopt);

std::unique_ptr<BilevelProblem> build_problem(const ExperimentConfig& config,
                                              std::optional<std::uint64_t> data_seed = std::nullopt);

struct RunOutcome {
  RunResult result;
  FinalMetrics metrics;
  std::optional<double> oracle_gap;  // quadratic problems only
  std::string strategy;              // effective strategy name
  double wall_seconds = 0.0;
};

RunOutcome run_experiment(const BilevelProblem& problem, const StrategyConfig& strategy);

nlohmann::json summary_json(const ExperimentConfig& config, const RunOutcome& outcome);

/// trace.csv, summary.json and params.bin under dir.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const RunOutcome& outcome);

/// One strategy/seed cell of a comparison or ablation.
struct Cell {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  FinalMetrics metrics;
};

/// Seed index i runs with data seed data.seed + i and strategy seed
/// derive_seed(strategy.seed + i, kind), so every strategy sees the same
/// data at a given index.
std::vector<Cell> run_compare(const std::vector<ExperimentConfig>& configs, int seeds,
                              int jobs);

/// Full BL-JUST and the three ablated variants on the same data and streams.
std::vector<Cell> run_ablate(const ExperimentConfig& config, int seeds, int jobs);

/// Long format: <key_column>,seed,final_f,final_g,gnorm_f,gnorm_g,status.
std::string cells_to_csv(const std::vector<Cell>& cells,
                         std::string_view key_column = "strategy");

/// Mean and sample standard deviation per label, in first-seen order,
/// under a "model ... | L/U ..." caption line.
std::string cells_to_markdown(const std::vector<Cell>& cells, std::string_view caption,
                              std::string_view key_column = "strategy");

/// "model 16-[8]-tanh-4 | L/U 500/4300", or the quadratic coefficients.
std::string describe_task(const ExperimentConfig& config);

}  // namespace bljust
