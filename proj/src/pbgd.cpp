#include "bljust/pbgd.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <string>

#include "bljust/errors.hpp"
#include "bljust/rng.hpp"

namespace bljust {

namespace {

// value * num / den, where value is read as its shortest decimal form, rounded
// once to the nearest double. Keeps 0.2 * 1 / 100 equal to the literal 0.002.
double decimal_scaled(double value, long num, long den) {
  if (value == 0.0 || num == 0) return 0.0;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific);
  std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
  const auto e_pos = text.find('e');
  int exponent = std::atoi(std::string(text.substr(e_pos + 1)).c_str());
  unsigned __int128 mantissa = 0;
  bool negative = false;
  for (char ch : text.substr(0, e_pos)) {
    if (ch == '-') {
      negative = true;
    } else if (ch == '.') {
      continue;
    } else {
      mantissa = mantissa * 10 + static_cast<unsigned>(ch - '0');
    }
  }
  const auto point = text.find('.');
  if (point != std::string_view::npos) exponent -= static_cast<int>(e_pos - point - 1);

  unsigned __int128 n = mantissa * static_cast<unsigned __int128>(num);
  const auto d = static_cast<unsigned __int128>(den);
  unsigned __int128 q = n / d, r = n % d;
  std::string digits;
  do {
    digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(q % 10)));
    q /= 10;
  } while (q > 0);
  digits += '.';
  for (int i = 0; i < 40 && r != 0; ++i) {
    r *= 10;
    digits += static_cast<char>('0' + static_cast<int>(r / d));
    r %= d;
  }
  if (r != 0) digits += '1';  // sticky digit: the expansion continues
  digits += 'e' + std::to_string(exponent);
  const double out = std::strtod(digits.c_str(), nullptr);
  return negative ? -out : out;
}

void require_finite(const Evaluation& e, std::string_view what) {
  if (!std::isfinite(e.value)) {
    throw NumericError(std::string(what) + " loss is not finite");
  }
  for (double g : e.gradient) {
    if (!std::isfinite(g)) throw NumericError(std::string(what) + " gradient is not finite");
  }
}

void check_zero(std::span<const double> g, const Partition& p, Segment s,
                std::string_view what) {
  for (double x : g.subspan(p.offset(s), p.size(s))) {
    if (x != 0.0) {
      throw InvalidArgument(std::string(what) + " has a nonzero " +
                            std::string(to_string(s)) + " segment");
    }
  }
}

// Lower-level steps move (theta, eta); upper-level steps move (theta, phi).
void single_level_update(ParamVector& p, Level level, double lr,
                         std::span<const double> grad) {
  axpy_segment_inplace(p, Segment::theta, lr, grad);
  axpy_segment_inplace(p, level == Level::upper ? Segment::phi : Segment::eta, lr, grad);
}

}  // namespace

std::string_view to_string(PenaltySchedule::Kind k) {
  return k == PenaltySchedule::Kind::linear_ramp ? "linear_ramp" : "constant";
}

void PenaltySchedule::validate() const {
  if (num_epochs < 1) throw InvalidArgument("schedule needs K >= 1");
  if (kind == Kind::linear_ramp && !(gamma_max >= 0.0 && std::isfinite(gamma_max))) {
    throw InvalidArgument("gamma_max must be finite and >= 0");
  }
  if (kind == Kind::constant && !(constant_value >= 0.0 && std::isfinite(constant_value))) {
    throw InvalidArgument("constant penalty must be finite and >= 0");
  }
}

double penalty_at(const PenaltySchedule& s, int k) {
  s.validate();
  if (k < 1 || k > s.num_epochs) {
    throw InvalidArgument("epoch " + std::to_string(k) + " outside [1, " +
                          std::to_string(s.num_epochs) + "]");
  }
  if (s.kind == PenaltySchedule::Kind::constant) return s.constant_value;
  if (s.ramp_to_max) {
    if (k == s.num_epochs) return s.gamma_max;
    return decimal_scaled(s.gamma_max, k - 1, s.num_epochs - 1);
  }
  return decimal_scaled(s.gamma_max, k - 1, s.num_epochs);
}

void BlJustConfig::validate() const {
  schedule.validate();
  if (!(rho > 0.0) || !(alpha > 0.0) || !(tau > 0.0)) {
    throw InvalidArgument("learning rates rho, alpha, tau must be > 0");
  }
  if (explore_steps < 0 || joint_steps < 0 || finetune_steps < 0) {
    throw InvalidArgument("step counts N1, N2, N3 must be >= 0");
  }
  if (!(lr_decay > 0.0)) throw InvalidArgument("lr_decay must be > 0");
  if (trace_stride < 0) throw InvalidArgument("trace_stride must be >= 0");
}

ParamVector pbgd_step(const ParamVector& params, std::span<const double> grad_f,
                      std::span<const double> grad_g, double alpha, double gamma,
                      std::optional<double> eta_gamma) {
  const Partition& p = params.partition();
  if (grad_f.size() != p.total() || grad_g.size() != p.total()) {
    throw InvalidArgument("pbgd_step: gradient length does not match partition");
  }
  check_zero(grad_f, p, Segment::eta, "grad_f");
  check_zero(grad_g, p, Segment::phi, "grad_g");
  const double g_eta = eta_gamma.value_or(gamma);
  const std::size_t eta_begin = p.offset(Segment::eta);
  ParamVector out = params;
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double direction = grad_f[i] + (i < eta_begin ? gamma : g_eta) * grad_g[i];
    const double updated = v[i] - alpha * direction;
    if (!std::isfinite(updated)) {
      throw NumericError("non-finite parameter at index " + std::to_string(i) +
                         " after joint step");
    }
    v[i] = updated;
  }
  return out;
}

ParamVector explore_epoch(const BilevelProblem& problem, ParamVector params,
                          double rho, int steps, BatchStream& stream) {
  if (steps < 0) throw InvalidArgument("N1 must be >= 0");
  for (int i = 1; i <= steps; ++i) {
    Evaluation e = problem.sample(Level::lower, params, stream);
    try {
      require_finite(e, "unsupervised");
      single_level_update(params, Level::lower, rho, e.gradient);
    } catch (const NumericError& err) {
      throw NumericError(std::string(err.what()) + " at exploration step " +
                         std::to_string(i));
    }
  }
  return params;
}

ParamVector finetune(const BilevelProblem& problem, ParamVector params, double tau,
                     int steps, BatchStream& stream) {
  if (steps < 0) throw InvalidArgument("N3 must be >= 0");
  for (int i = 1; i <= steps; ++i) {
    Evaluation e = problem.sample(Level::upper, params, stream);
    try {
      require_finite(e, "supervised");
      single_level_update(params, Level::upper, tau, e.gradient);
    } catch (const NumericError& err) {
      throw NumericError(std::string(err.what()) + " at fine-tune step " +
                         std::to_string(i));
    }
  }
  return params;
}

TrainingSession::TrainingSession(const BilevelProblem& problem, ParamVector start,
                                 long stride, bool record_params, double v_hat)
    : problem_(problem),
      params_(std::move(start)),
      record_params_(record_params),
      v_known_(problem.known_value().has_value()) {
  if (params_.partition() != problem_.partition()) {
    throw InvalidArgument("start parameters do not match the problem partition");
  }
  trace_.stride = stride;
  trace_.v_hat = v_hat;
}

void TrainingSession::flag(std::string note) {
  for (const auto& f : trace_.flags) {
    if (f == note) return;
  }
  trace_.flags.push_back(std::move(note));
}

void TrainingSession::push_step(StepRecord rec) {
  if (rec.phase != seg_phase_ || rec.source != seg_source_ || rec.gamma != seg_gamma_ ||
      seg_count_ == 0) {
    seg_phase_ = rec.phase;
    seg_source_ = rec.source;
    seg_gamma_ = rec.gamma;
    seg_count_ = 0;
    seg_sum_ = 0.0;
  }
  ++seg_count_;
  seg_sum_ += rec.gnorm_F * rec.gnorm_F;
  if (trace_.stride <= 0 || seg_count_ % trace_.stride != 0) return;
  rec.segment_step = seg_count_;
  rec.cum_sq_F = seg_sum_;
  if (record_params_) rec.params_after = params_;
  trace_.steps.push_back(std::move(rec));
}

void TrainingSession::diverged(const std::exception& e, std::string_view phase,
                               int epoch, long step) {
  auto partial = std::make_shared<RunTrace>(trace_);
  throw DivergenceError(std::string(e.what()) + " (phase " + std::string(phase) +
                            ", epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step) + ")",
                        std::string(phase), epoch, step, std::move(partial));
}

void TrainingSession::descend(Level level, BatchStream& stream, double lr, int steps,
                              std::string_view phase, int epoch,
                              const BilevelProblem* sampler) {
  const BilevelProblem& source_problem = sampler ? *sampler : problem_;
  if (steps < 0) throw InvalidArgument("step count must be >= 0");
  const StepSource source = level == Level::upper ? StepSource::sup : StepSource::unsup;
  for (int i = 1; i <= steps; ++i) {
    try {
      Evaluation e = source_problem.sample(level, params_, stream);
      if (e.degenerate) {
        flag(level == Level::upper ? "empty labeled batch" : "unsupervised batch with no masked entries");
      }
      require_finite(e, level == Level::upper ? "supervised" : "unsupervised");
      single_level_update(params_, level, lr, e.gradient);
      StepRecord rec;
      rec.phase = phase;
      rec.epoch = epoch;
      rec.step = i;
      rec.source = source;
      rec.lr = lr;
      const double n = l2_norm(e.gradient);
      if (level == Level::upper) {
        rec.f_batch = e.value;
        rec.g_batch = std::numeric_limits<double>::quiet_NaN();
        rec.gnorm_f = n;
      } else {
        rec.g_batch = e.value;
        rec.f_batch = std::numeric_limits<double>::quiet_NaN();
        rec.gnorm_g = n;
      }
      rec.gnorm_F = n;
      push_step(std::move(rec));
    } catch (const NumericError& err) {
      diverged(err, phase, epoch, i);
    }
  }
}

void TrainingSession::joint(BatchStream& sup, BatchStream& unsup, double alpha,
                            double gamma, double eta_gamma, int steps,
                            std::string_view phase, int epoch) {
  if (steps < 0) throw InvalidArgument("step count must be >= 0");
  const Partition& p = params_.partition();
  const std::size_t eta_begin = p.offset(Segment::eta);
  for (int i = 1; i <= steps; ++i) {
    try {
      Evaluation ef = problem_.sample(Level::upper, params_, sup);
      Evaluation eg = problem_.sample(Level::lower, params_, unsup);
      if (ef.degenerate) flag("empty labeled batch");
      if (eg.degenerate) flag("unsupervised batch with no masked entries");
      require_finite(ef, "supervised");
      require_finite(eg, "unsupervised");
      params_ = pbgd_step(params_, ef.gradient, eg.gradient, alpha, gamma, eta_gamma);
      double sq = 0.0;
      for (std::size_t k = 0; k < ef.gradient.size(); ++k) {
        const double d = ef.gradient[k] + (k < eta_begin ? gamma : eta_gamma) * eg.gradient[k];
        sq += d * d;
      }
      StepRecord rec;
      rec.phase = phase;
      rec.epoch = epoch;
      rec.step = i;
      rec.source = StepSource::joint;
      rec.gamma = gamma;
      rec.lr = alpha;
      rec.f_batch = ef.value;
      rec.g_batch = eg.value;
      rec.gnorm_f = l2_norm(ef.gradient);
      rec.gnorm_g = l2_norm(eg.gradient);
      rec.gnorm_F = std::sqrt(sq);
      push_step(std::move(rec));
    } catch (const NumericError& err) {
      diverged(err, phase, epoch, i);
    }
  }
}

const EpochRecord& TrainingSession::record_epoch(std::string_view phase, int epoch,
                                                 double gamma) {
  Evaluation ef = problem_.upper().eval(params_);
  Evaluation eg = problem_.lower().eval(params_);
  try {
    require_finite(ef, "supervised");
    require_finite(eg, "unsupervised");
  } catch (const NumericError& err) {
    diverged(err, phase, epoch, 0);
  }
  if (ef.degenerate) flag("empty labeled pool");
  if (eg.degenerate) flag("unlabeled pool has no masked entries");
  if (!v_known_ && eg.value < trace_.v_hat) trace_.v_hat = eg.value;
  EpochRecord r;
  r.epoch = epoch;
  r.phase = phase;
  r.gamma = gamma;
  r.f = ef.value;
  r.g = eg.value;
  r.p_hat = eg.value - trace_.v_hat;
  r.gnorm_f = l2_norm(ef.gradient);
  r.gnorm_g = l2_norm(eg.gradient);
  std::vector<double> F(ef.gradient.size());
  for (std::size_t k = 0; k < F.size(); ++k) F[k] = ef.gradient[k] + gamma * eg.gradient[k];
  r.gnorm_F = l2_norm(F);
  if (r.p_hat < 0.0) flag("negative value gap: v_hat is stale");
  trace_.epochs.push_back(std::move(r));
  return trace_.epochs.back();
}

RunResult TrainingSession::finish() && {
  return RunResult{std::move(params_), std::move(trace_)};
}

double initial_value_estimate(const BilevelProblem& problem, int budget, double lr,
                              std::uint64_t seed) {
  if (auto v = problem.known_value()) return *v;
  if (budget <= 0) return std::numeric_limits<double>::infinity();
  try {
    return estimate_value_function(problem.lower(), budget, lr, seed);
  } catch (const NumericError& e) {
    throw DivergenceError(e.what(), "value", 0, 0, std::make_shared<RunTrace>());
  }
}

RunResult run_bljust(const BilevelProblem& problem, const BlJustConfig& config,
                     std::optional<ParamVector> start) {
  config.validate();
  const std::uint64_t seed = config.seed;
  ParamVector params = start ? std::move(*start)
                             : problem.initial_params(derive_seed(seed, stream_tag::init));
  const double v_hat = initial_value_estimate(problem, config.value_budget, config.rho,
                                              derive_seed(seed, stream_tag::value));
  TrainingSession session(problem, std::move(params), config.trace_stride,
                          config.record_params, v_hat);

  BatchStream explore = problem.stream(Level::lower, derive_seed(seed, stream_tag::explore));
  BatchStream joint_sup = problem.stream(Level::upper, derive_seed(seed, stream_tag::joint_sup));
  BatchStream joint_unsup =
      problem.stream(Level::lower, derive_seed(seed, stream_tag::joint_unsup));
  BatchStream ft = problem.stream(Level::upper, derive_seed(seed, stream_tag::finetune));

  const int K = config.epochs();
  const double eta_max = config.schedule.kind == PenaltySchedule::Kind::constant
                             ? config.schedule.constant_value
                             : config.schedule.gamma_max;
  for (int k = 1; k <= K; ++k) {
    session.descend(Level::lower, explore, config.rho, config.explore_steps, "explore", k);
    const double gamma = penalty_at(config.schedule, k);
    const double eta_gamma = config.eta_penalty == EtaPenalty::epoch ? gamma : eta_max;
    const double alpha = config.alpha * std::pow(config.lr_decay, k - 1);
    session.joint(joint_sup, joint_unsup, alpha, gamma, eta_gamma, config.joint_steps,
                  "joint", k);
    session.record_epoch("joint", k, gamma);
  }
  if (config.finetune_steps > 0) {
    session.descend(Level::upper, ft, config.tau, config.finetune_steps, "finetune", K + 1);
    session.record_epoch("finetune", K + 1, 0.0);
  }
  return std::move(session).finish();
}

}  // namespace bljust
