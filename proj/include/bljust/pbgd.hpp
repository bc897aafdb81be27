#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bljust/param.hpp"
#include "bljust/problem.hpp"
#include "bljust/trace.hpp"

namespace bljust {

/// Penalty factor per epoch. The linear ramp follows
/// gamma_k = (k - 1) * gamma_max / K, so it starts at 0 and stops one
/// increment short of gamma_max unless ramp_to_max is set, in which case
/// gamma_k = (k - 1) * gamma_max / (K - 1).
struct PenaltySchedule {
  enum class Kind { linear_ramp, constant };

  Kind kind = Kind::linear_ramp;
  double gamma_max = 0.2;
  int num_epochs = 1;
  double constant_value = 0.0;
  bool ramp_to_max = false;

  static PenaltySchedule linear(double gamma_max, int epochs, bool ramp_to_max = false) {
    return {Kind::linear_ramp, gamma_max, epochs, 0.0, ramp_to_max};
  }
  static PenaltySchedule constant(double value, int epochs) {
    return {Kind::constant, value, epochs, value, false};
  }

  void validate() const;
};

std::string_view to_string(PenaltySchedule::Kind k);

double penalty_at(const PenaltySchedule& schedule, int epoch);

/// Which penalty multiplies the eta update in the joint phase: the epoch's
/// gamma_k, or the schedule maximum.
enum class EtaPenalty { epoch, maximum };

struct BlJustConfig {
  double rho = 0.05;    // exploration learning rate
  double alpha = 0.05;  // joint learning rate
  double tau = 0.005;   // fine-tune learning rate
  PenaltySchedule schedule = PenaltySchedule::linear(0.2, 20);
  int explore_steps = 10;   // N1
  int joint_steps = 10;     // N2
  int finetune_steps = 20;  // N3
  std::uint64_t seed = 0;
  double lr_decay = 1.0;    // alpha_k = alpha * lr_decay^(k-1)
  EtaPenalty eta_penalty = EtaPenalty::epoch;

  long trace_stride = 0;       // 0 disables step records
  bool record_params = false;  // store parameters after each recorded step
  int value_budget = 100;      // steps for the initial value-function estimate

  int epochs() const { return schedule.num_epochs; }
  void validate() const;
};

/// One joint PBGD update: every coordinate moves by
/// -alpha * (grad_f + gamma * grad_g), with eta_gamma in place of gamma on
/// the eta segment. grad_f must vanish on eta and grad_g on phi.
ParamVector pbgd_step(const ParamVector& params, std::span<const double> grad_f,
                      std::span<const double> grad_g, double alpha, double gamma,
                      std::optional<double> eta_gamma = std::nullopt);

/// N1 descent steps on g over (theta, eta). phi is never touched.
ParamVector explore_epoch(const BilevelProblem& problem, ParamVector params,
                          double rho, int steps, BatchStream& stream);

/// N3 descent steps on f over (theta, phi). eta is never touched.
ParamVector finetune(const BilevelProblem& problem, ParamVector params, double tau,
                     int steps, BatchStream& stream);

/// Stream seeds for each phase of a run. Equivalence checks replay these
/// tags, so they are part of the API.
namespace stream_tag {
inline constexpr std::string_view init = "init";
inline constexpr std::string_view value = "value";
inline constexpr std::string_view explore = "explore";
inline constexpr std::string_view joint_sup = "joint-sup";
inline constexpr std::string_view joint_unsup = "joint-unsup";
inline constexpr std::string_view finetune = "finetune";
}  // namespace stream_tag

/// Drives optimizer steps over a problem while recording a RunTrace.
/// NumericError raised inside becomes DivergenceError with position and
/// the partial trace.
class TrainingSession {
 public:
  TrainingSession(const BilevelProblem& problem, ParamVector start,
                  long stride, bool record_params, double v_hat);

  /// Plain descent on one level: upper moves (theta, phi), lower (theta, eta).
  /// Batches come from `sampler` when given (same partition), otherwise
  /// from the session's problem.
  void descend(Level level, BatchStream& stream, double lr, int steps,
               std::string_view phase, int epoch,
               const BilevelProblem* sampler = nullptr);

  void joint(BatchStream& sup, BatchStream& unsup, double alpha, double gamma,
             double eta_gamma, int steps, std::string_view phase, int epoch);

  /// Full-data f and g at the current parameters.
  const EpochRecord& record_epoch(std::string_view phase, int epoch, double gamma);

  void flag(std::string note);

  const ParamVector& params() const { return params_; }
  ParamVector& params() { return params_; }
  RunTrace& trace() { return trace_; }
  const BilevelProblem& problem() const { return problem_; }

  RunResult finish() &&;

 private:
  void push_step(StepRecord rec);
  [[noreturn]] void diverged(const std::exception& e, std::string_view phase,
                             int epoch, long step);

  const BilevelProblem& problem_;
  ParamVector params_;
  RunTrace trace_;
  bool record_params_;
  bool v_known_;
  // current run of steps sharing (phase, source, gamma)
  std::string seg_phase_;
  StepSource seg_source_ = StepSource::joint;
  double seg_gamma_ = 0.0;
  long seg_count_ = 0;
  double seg_sum_ = 0.0;
};

/// Initial v_hat for a run: the known optimum, or a budgeted estimate.
double initial_value_estimate(const BilevelProblem& problem, int budget, double lr,
                              std::uint64_t seed);

/// The three-phase procedure: per epoch, N1 exploration steps on g, then
/// N2 joint PBGD steps with gamma_k; after K epochs, N3 fine-tune steps on f.
RunResult run_bljust(const BilevelProblem& problem, const BlJustConfig& config,
                     std::optional<ParamVector> start = std::nullopt);

}  // namespace bljust
