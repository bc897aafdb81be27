#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bljust/data.hpp"
#include "bljust/model.hpp"
#include "bljust/objectives.hpp"
#include "bljust/param.hpp"
#include "bljust/strategies.hpp"

namespace bljust {

enum class ModelFamily { mlp, quadratic };

struct ModelSection {
  ModelFamily family = ModelFamily::mlp;
  std::vector<std::size_t> hidden_dims{16};
  Activation activation = Activation::tanh;
  InitScheme init = InitScheme::uniform(0.5);
  QuadraticBilevel quadratic;
};

struct DataSection {
  SyntheticTask task;
  std::string preset;       // empty when unset
  std::string dir;          // load CSVs from here instead of synthesizing
  double mask_prob = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t eval_mask_seed = 0;
};

struct VerifySection {
  std::string suite = "all";
};

/// Fully-resolved contents of a run configuration file.
struct ExperimentConfig {
  ModelSection model;
  DataSection data;
  StrategyConfig strategy;
  VerifySection verify;
  std::string source;  // file path or "<string>"
};

/// Parses `key = value` lines under [model], [data], [strategy],
/// [schedule] and [verify]. Unknown sections or keys, duplicates and bad
/// values raise ConfigError with the offending line number.
ExperimentConfig parse_config(std::string_view text, std::string source = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every resolved field, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& config);

ModelSpec model_spec(const ExperimentConfig& config);

}  // namespace bljust
