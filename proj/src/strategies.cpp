#include "bljust/strategies.hpp"

#include <cmath>
#include <string>

#include "bljust/errors.hpp"
#include "bljust/rng.hpp"

namespace bljust {

namespace {

double decayed(const BlJustConfig& c, int epoch) {
  return c.alpha * std::pow(c.lr_decay, epoch - 1);
}

TrainingSession make_session(const BilevelProblem& problem, const BlJustConfig& c,
                             ParamVector start) {
  const double v_hat = initial_value_estimate(problem, c.value_budget, c.rho,
                                              derive_seed(c.seed, stream_tag::value));
  return TrainingSession(problem, std::move(start), c.trace_stride, c.record_params, v_hat);
}

}  // namespace

std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::bljust: return "bljust";
    case StrategyKind::ptft: return "ptft";
    case StrategyKind::just: return "just";
    case StrategyKind::ao: return "ao";
    case StrategyKind::pl: return "pl";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::bljust, StrategyKind::ptft, StrategyKind::just,
                 StrategyKind::ao, StrategyKind::pl}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidArgument("unknown strategy '" + std::string(name) + "'");
}

void StrategyConfig::validate() const {
  base.validate();
  if (pretrain_epochs < 0 || finetune_epochs < 0) {
    throw InvalidArgument("pretrain_epochs and finetune_epochs must be >= 0");
  }
  if (!(just_gamma >= 0.0)) throw InvalidArgument("just_gamma must be >= 0");
  if (kind == StrategyKind::pl && pl_rounds < 1) {
    throw InvalidArgument("pl_rounds must be >= 1");
  }
}

std::string effective_strategy(const StrategyConfig& c) {
  switch (c.kind) {
    case StrategyKind::ptft:
      return c.pretrain_epochs == 0 || c.base.explore_steps == 0 ? "supervised" : "ptft";
    case StrategyKind::just:
      return c.just_gamma == 0.0 && !c.just_ramped ? "supervised" : "just";
    case StrategyKind::ao:
      return (c.ao_unsup_steps < 0 ? c.base.explore_steps : c.ao_unsup_steps) == 0
                 ? "supervised"
                 : "ao";
    default: return std::string(to_string(c.kind));
  }
}

RunResult run_ptft(const BilevelProblem& problem, const StrategyConfig& config) {
  config.validate();
  const BlJustConfig& c = config.base;
  TrainingSession session = make_session(
      problem, c, problem.initial_params(derive_seed(c.seed, stream_tag::init)));
  BatchStream pre = problem.stream(Level::lower, derive_seed(c.seed, "ptft-pretrain"));
  BatchStream ft = problem.stream(Level::upper, derive_seed(c.seed, "ptft-finetune"));
  int epoch = 0;
  for (int e = 1; e <= config.pretrain_epochs; ++e) {
    session.descend(Level::lower, pre, c.rho, c.explore_steps, "pretrain", ++epoch);
    session.record_epoch("pretrain", epoch, 0.0);
  }
  // The supervised head is new at fine-tuning time.
  problem.reinit_segment(session.params(), Segment::phi, derive_seed(c.seed, "ptft-head"));
  for (int e = 1; e <= config.finetune_epochs; ++e) {
    session.descend(Level::upper, ft, decayed(c, e), c.joint_steps, "finetune", ++epoch);
    session.record_epoch("finetune", epoch, 0.0);
  }
  return std::move(session).finish();
}

RunResult run_just(const BilevelProblem& problem, const StrategyConfig& config) {
  config.validate();
  BlJustConfig c = config.base;
  std::optional<ParamVector> start;
  RunTrace pretrain_trace;
  if (config.pretrain_init && config.pretrain_epochs > 0) {
    TrainingSession session = make_session(
        problem, c, problem.initial_params(derive_seed(c.seed, stream_tag::init)));
    BatchStream pre = problem.stream(Level::lower, derive_seed(c.seed, "just-pretrain"));
    for (int e = 1; e <= config.pretrain_epochs; ++e) {
      session.descend(Level::lower, pre, c.rho, c.explore_steps, "pretrain", e);
      session.record_epoch("pretrain", e, 0.0);
    }
    RunResult pre_result = std::move(session).finish();
    start = std::move(pre_result.params);
    pretrain_trace = std::move(pre_result.trace);
  }
  c.explore_steps = 0;
  if (!config.just_ramped) {
    c.schedule = PenaltySchedule::constant(config.just_gamma, c.schedule.num_epochs);
  }
  RunResult r = run_bljust(problem, c, std::move(start));
  if (!pretrain_trace.epochs.empty()) {
    const int offset = static_cast<int>(pretrain_trace.epochs.size());
    for (auto& e : r.trace.epochs) e.epoch += offset;
    for (auto& s : r.trace.steps) s.epoch += offset;
    r.trace.epochs.insert(r.trace.epochs.begin(), pretrain_trace.epochs.begin(),
                          pretrain_trace.epochs.end());
    r.trace.steps.insert(r.trace.steps.begin(), pretrain_trace.steps.begin(),
                         pretrain_trace.steps.end());
  }
  return r;
}

RunResult run_ao(const BilevelProblem& problem, const StrategyConfig& config) {
  config.validate();
  const BlJustConfig& c = config.base;
  const int sup_steps = config.ao_sup_steps < 0 ? c.joint_steps : config.ao_sup_steps;
  const int unsup_steps = config.ao_unsup_steps < 0 ? c.explore_steps : config.ao_unsup_steps;
  TrainingSession session = make_session(
      problem, c, problem.initial_params(derive_seed(c.seed, stream_tag::init)));
  BatchStream sup = problem.stream(Level::upper, derive_seed(c.seed, "ao-sup"));
  BatchStream unsup = problem.stream(Level::lower, derive_seed(c.seed, "ao-unsup"));
  for (int k = 1; k <= c.epochs(); ++k) {
    session.descend(Level::upper, sup, decayed(c, k), sup_steps, "ao-sup", k);
    session.descend(Level::lower, unsup, c.rho, unsup_steps, "ao-unsup", k);
    session.record_epoch("ao", k, 0.0);
  }
  return std::move(session).finish();
}

RunResult run_pl(const SemiSupervisedProblem& problem, const StrategyConfig& config) {
  config.validate();
  if (config.pl_rounds < 1) throw InvalidArgument("pl_rounds must be >= 1");
  const BlJustConfig& c = config.base;
  const auto& pool = problem.data().unlabeled_x;
  const auto& truth = problem.data().unlabeled_truth;

  // Epoch records always evaluate f on the original labeled pool.
  RunTrace trace;
  trace.stride = c.trace_stride;
  std::optional<ParamVector> params;
  SemiSupervisedProblem current = problem;
  trace.v_hat = initial_value_estimate(problem, c.value_budget, c.rho,
                                       derive_seed(c.seed, stream_tag::value));
  int epoch = 0;
  for (int round = 0; round < config.pl_rounds; ++round) {
    const std::string tag = "pl-" + std::to_string(round);
    ParamVector start = (config.pl_continue && params)
                            ? *params
                            : problem.initial_params(derive_seed(c.seed, tag + "-init"));
    TrainingSession session(problem, std::move(start), c.trace_stride, c.record_params,
                            trace.v_hat);
    BatchStream sup = current.stream(Level::upper, derive_seed(c.seed, tag));
    for (int k = 1; k <= c.epochs(); ++k) {
      // Batches come from the current (possibly augmented) pool.
      session.descend(Level::upper, sup, decayed(c, k), c.joint_steps, tag, epoch + k,
                      &current);
      session.record_epoch(tag, epoch + k, 0.0);
    }
    epoch += c.epochs();
    RunResult r = std::move(session).finish();
    trace.v_hat = r.trace.v_hat;
    trace.epochs.insert(trace.epochs.end(), r.trace.epochs.begin(), r.trace.epochs.end());
    trace.flags.insert(trace.flags.end(), r.trace.flags.begin(), r.trace.flags.end());
    params = std::move(r.params);

    auto pseudo = problem.predict(*params, pool);
    if (truth.size() == pseudo.size() && !pseudo.empty()) {
      std::size_t agree = 0;
      for (std::size_t i = 0; i < pseudo.size(); ++i) agree += pseudo[i] == truth[i];
      trace.pl_agreement.push_back(static_cast<double>(agree) /
                                   static_cast<double>(pseudo.size()));
    } else {
      trace.pl_agreement.push_back(std::nan(""));
    }
    if (round + 1 < config.pl_rounds) current = problem.with_extra_labels(pool, pseudo);
  }
  return RunResult{std::move(*params), std::move(trace)};
}

RunResult run_strategy(const BilevelProblem& problem, const StrategyConfig& config) {
  switch (config.kind) {
    case StrategyKind::bljust: return run_bljust(problem, config.base);
    case StrategyKind::ptft: return run_ptft(problem, config);
    case StrategyKind::just: return run_just(problem, config);
    case StrategyKind::ao: return run_ao(problem, config);
    case StrategyKind::pl: {
      const auto* semi = dynamic_cast<const SemiSupervisedProblem*>(&problem);
      if (!semi) throw InvalidArgument("pseudo-labeling needs a classification task");
      return run_pl(*semi, config);
    }
  }
  throw InvalidArgument("unknown strategy");
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_finetune: return "no_finetune";
    case AblationVariant::no_explore: return "no_explore";
    case AblationVariant::neither: return "neither";
  }
  return "?";
}

AblationVariant parse_ablation(std::string_view name) {
  for (auto v : kAblationOrder) {
    if (name == to_string(v)) return v;
  }
  throw InvalidArgument("unknown ablation variant '" + std::string(name) + "'");
}

BlJustConfig ablate_config(const BlJustConfig& base, AblationVariant variant) {
  BlJustConfig c = base;
  if (variant == AblationVariant::no_explore || variant == AblationVariant::neither) {
    c.explore_steps = 0;
  }
  if (variant == AblationVariant::no_finetune || variant == AblationVariant::neither) {
    c.finetune_steps = 0;
  }
  return c;
}

FinalMetrics final_metrics(const BilevelProblem& problem, const ParamVector& params) {
  Evaluation ef = problem.upper().eval(params);
  Evaluation eg = problem.lower().eval(params);
  return {ef.value, eg.value, l2_norm(ef.gradient), l2_norm(eg.gradient)};
}

AblationRecord run_ablation(const BilevelProblem& problem, const BlJustConfig& base,
                            AblationVariant variant) {
  AblationRecord rec;
  rec.seed = base.seed;
  rec.variant = variant;
  rec.full = final_metrics(problem, run_bljust(problem, base).params);
  rec.ablated =
      final_metrics(problem, run_bljust(problem, ablate_config(base, variant)).params);
  return rec;
}

}  // namespace bljust
