#include <cmath>
#include <string>

#include "bljust/errors.hpp"
#include "bljust/pbgd.hpp"
#include "bljust/reference.hpp"
#include "bljust/strategies.hpp"
#include "bljust/verify.hpp"

namespace bljust {

namespace {

constexpr double kGradTolerance = 1e-5;
constexpr double kOracleGapTolerance = 0.05;
constexpr double kArgminTolerance = 1e-6;
constexpr double kMuTolerance = 1e-9;
constexpr double kSlopeThreshold = -0.9;

struct FdCase {
  LabeledBatch labeled;
  UnlabeledBatch unlabeled;
  ParamVector params;
};

FdCase make_fd_case(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "fd-data"));
  const std::size_t n = 8;
  Matrix x(n, spec.input_dim);
  for (double& v : x.data) v = rng.gaussian();
  FdCase c;
  c.labeled.x = x;
  for (std::size_t i = 0; i < n; ++i) c.labeled.y.push_back(rng.below(spec.num_classes));
  c.unlabeled = make_unlabeled_batch(x, 0.3, rng);
  c.unlabeled.mask[0] = 1;
  c.params = init_params(spec.partition(), InitScheme::uniform(0.5),
                         derive_seed(seed, "fd-params"));
  return c;
}

std::string spec_name(const ModelSpec& s) {
  std::string name = std::to_string(s.input_dim) + "-[";
  for (std::size_t i = 0; i < s.hidden_dims.size(); ++i) {
    if (i) name += ",";
    name += std::to_string(s.hidden_dims[i]);
  }
  return name + "]-" + std::string(to_string(s.activation)) + "-" +
         std::to_string(s.num_classes);
}

CheckResult grad_suite() {
  CheckResult r{"grad", true, nlohmann::json::array()};
  for (const auto& spec : reference::gradient_grid()) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      FdCase c = make_fd_case(spec, seed);
      SupervisedObjective f(spec, c.labeled, InitScheme::uniform(0.5));
      UnsupervisedObjective g(spec, c.unlabeled, InitScheme::uniform(0.5));
      for (const Objective* obj : {static_cast<const Objective*>(&f),
                                   static_cast<const Objective*>(&g)}) {
        FdReport rep = fd_check(*obj, c.params, 1e-6);
        const bool ok = rep.max_rel_error <= kGradTolerance;
        r.pass = r.pass && ok;
        r.details.push_back({{"spec", spec_name(spec)},
                             {"seed", seed},
                             {"loss", obj == &f ? "sup_ce" : "unsup_masked_mse"},
                             {"max_rel_error", rep.max_rel_error},
                             {"worst_coordinate", rep.worst_coordinate},
                             {"checked", rep.checked},
                             {"skipped", rep.skipped.size()},
                             {"pass", ok}});
      }
    }
  }
  return r;
}

// Gradient descent on f + gamma * g until the gradient vanishes.
std::array<double, 3> minimize_penalized(const QuadraticBilevel& q, double gamma) {
  ParamVector p(QuadraticBilevel::partition());
  const double lr = 0.25 / (1.0 + gamma);
  for (int it = 0; it < 100000; ++it) {
    auto gf = quad_eval(q, p, Level::upper).gradient;
    auto gg = quad_eval(q, p, Level::lower).gradient;
    std::vector<double> d(3);
    for (int i = 0; i < 3; ++i) d[i] = gf[i] + gamma * gg[i];
    if (l2_norm(d) < 1e-13) break;
    axpy_segment_inplace(p, Segment::all, lr, d);
  }
  return {p[0], p[1], p[2]};
}

CheckResult oracle_suite() {
  CheckResult r{"oracle", true, nlohmann::json::object()};
  const auto q = reference::quadratic_problem();
  const BlJustConfig cfg = reference::quadratic_bljust();
  QuadraticProblem problem(q);
  RunResult run = run_bljust(problem, cfg);
  const double gap = oracle_bilevel_gap(q, run.params);
  const double gamma_K = penalty_at(cfg.schedule, cfg.epochs());
  const auto argmin_K = quad_penalized_argmin(q, gamma_K);
  const double gap_K =
      oracle_bilevel_gap(q, ParamVector(QuadraticBilevel::partition(),
                                        {argmin_K[0], argmin_K[1], argmin_K[2]}));
  const bool gap_ok = gap <= kOracleGapTolerance;
  const bool schedule_ok = gap <= gap_K + 0.01;
  r.details["bljust_gap"] = gap;
  r.details["bljust_gap_tolerance"] = kOracleGapTolerance;
  r.details["penalized_argmin_gap_at_gamma_K"] = gap_K;
  r.details["final_params"] = {run.params[0], run.params[1], run.params[2]};

  nlohmann::json argmins = nlohmann::json::array();
  bool argmin_ok = true;
  for (double gamma : {0.0, 0.5, 1.0, 2.0, 10.0}) {
    const auto closed = quad_penalized_argmin(q, gamma);
    const auto numeric = minimize_penalized(q, gamma);
    // At gamma = 0 the penalized objective does not depend on eta.
    const int coords = gamma == 0.0 ? 2 : 3;
    double worst = 0.0;
    for (int i = 0; i < coords; ++i) worst = std::max(worst, std::abs(closed[i] - numeric[i]));
    const bool ok = worst <= kArgminTolerance;
    argmin_ok = argmin_ok && ok;
    argmins.push_back({{"gamma", gamma}, {"max_abs_diff", worst}, {"pass", ok}});
  }
  r.details["penalized_argmin"] = argmins;
  r.pass = gap_ok && schedule_ok && argmin_ok;
  return r;
}

CheckResult pl_suite() {
  CheckResult r{"pl", true, nlohmann::json::object()};
  const auto q = reference::quadratic_problem();
  QuadraticObjective g(q, Level::lower);
  QuadraticObjective f(q, Level::upper);
  ParamVector center(QuadraticBilevel::partition());
  Rng rng(derive_seed(0, "pl-probe"));
  PlProbe probe = pl_probe(g, center, 256, 3.0, 0.0, rng);
  const bool ok = std::abs(probe.mu_hat - 0.25) <= kMuTolerance && probe.witnesses.empty();
  r.pass = ok;
  r.details["mu_hat"] = probe.mu_hat;
  r.details["used"] = probe.used;
  r.details["witnesses"] = probe.witnesses.size();
  r.details["lipschitz_grad_f_estimate"] = lipschitz_estimate(f, center, 64, 3.0, rng);
  r.details["lipschitz_grad_g_estimate"] = lipschitz_estimate(g, center, 64, 3.0, rng);
  return r;
}

CheckResult stationarity_suite() {
  CheckResult r{"stationarity", true, nlohmann::json::object()};
  QuadraticProblem problem(reference::quadratic_problem());
  BlJustConfig c;
  c.alpha = 0.01;
  c.schedule = PenaltySchedule::constant(1.0, 1);
  c.explore_steps = 0;
  c.joint_steps = 10000;
  c.finetune_steps = 0;
  c.trace_stride = 1;
  RunResult run = run_bljust(problem, c);
  auto series = stationarity_series(run.trace, 1.0);
  const long n = series.back().n;
  const double slope = loglog_slope(series, n / 10, n);
  r.pass = slope <= kSlopeThreshold;
  r.details["slope"] = slope;
  r.details["threshold"] = kSlopeThreshold;
  r.details["iterations"] = n;
  r.details["final_running_mean"] = series.back().mean;
  return r;
}

}  // namespace

std::vector<CheckResult> run_verify_suite(std::string_view suite) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "grad") { out.push_back(grad_suite()); known = true; }
  if (all || suite == "oracle") { out.push_back(oracle_suite()); known = true; }
  if (all || suite == "pl") { out.push_back(pl_suite()); known = true; }
  if (all || suite == "stationarity") { out.push_back(stationarity_suite()); known = true; }
  if (!known) throw InvalidArgument("unknown verify suite '" + std::string(suite) + "'");
  return out;
}

}  // namespace bljust
