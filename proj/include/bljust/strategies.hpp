#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bljust/pbgd.hpp"
#include "bljust/problem.hpp"

namespace bljust {

enum class StrategyKind { bljust, ptft, just, ao, pl };

std::string_view to_string(StrategyKind k);
StrategyKind parse_strategy(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::bljust;
  BlJustConfig base;

  // PT+FT: pretrain epochs run N1 steps on g at rho; fine-tune epochs run
  // N2 steps on f at alpha (decayed per epoch), after phi is re-drawn.
  int pretrain_epochs = 0;
  int finetune_epochs = 0;

  // JUST: N1 forced to 0 and gamma held at just_gamma, or the base linear
  // ramp when just_ramped is set. pretrain_init runs pretrain_epochs of
  // exploration-style steps first.
  double just_gamma = 0.0;
  bool just_ramped = false;
  bool pretrain_init = false;

  // AO: per-epoch step counts; negative means N2 (sup) and N1 (unsup).
  int ao_sup_steps = -1;
  int ao_unsup_steps = -1;

  // PL: number of supervised trainings; a labeling pass follows each.
  int pl_rounds = 2;
  bool pl_continue = false;  // keep training the previous model instead of a fresh init

  void validate() const;
};

/// Strategy actually executed, e.g. "supervised" for PT+FT with no pretraining.
std::string effective_strategy(const StrategyConfig& config);

RunResult run_ptft(const BilevelProblem& problem, const StrategyConfig& config);
RunResult run_just(const BilevelProblem& problem, const StrategyConfig& config);
RunResult run_ao(const BilevelProblem& problem, const StrategyConfig& config);
RunResult run_pl(const SemiSupervisedProblem& problem, const StrategyConfig& config);

/// Dispatch on config.kind. PL requires a SemiSupervisedProblem.
RunResult run_strategy(const BilevelProblem& problem, const StrategyConfig& config);

enum class AblationVariant { full, no_finetune, no_explore, neither };

std::string_view to_string(AblationVariant v);
AblationVariant parse_ablation(std::string_view name);

/// Row order of the ablation table: full, -fine-tuning, -exploration, -both.
inline constexpr AblationVariant kAblationOrder[] = {
    AblationVariant::full, AblationVariant::no_finetune, AblationVariant::no_explore,
    AblationVariant::neither};

BlJustConfig ablate_config(const BlJustConfig& base, AblationVariant variant);

struct FinalMetrics {
  double f = 0.0;
  double g = 0.0;
  double gnorm_f = 0.0;
  double gnorm_g = 0.0;
};

FinalMetrics final_metrics(const BilevelProblem& problem, const ParamVector& params);

struct AblationRecord {
  std::uint64_t seed = 0;
  FinalMetrics full;
  AblationVariant variant = AblationVariant::no_explore;
  FinalMetrics ablated;
};

/// Full BL-JUST and one variant under identical seeds and streams.
AblationRecord run_ablation(const BilevelProblem& problem, const BlJustConfig& base,
                            AblationVariant variant);

}  // namespace bljust
