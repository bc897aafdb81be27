#include "bljust/verify.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bljust/errors.hpp"

namespace bljust {

FdReport fd_check(const Objective& objective, const ParamVector& params, double h) {
  if (!(h > 0.0)) throw InvalidArgument("fd_check: h must be > 0");
  FdReport report;
  report.h = h;
  const Evaluation base = objective.eval(params);
  if (base.gradient.size() != params.size()) {
    throw InvalidArgument("fd_check: gradient length does not match parameters");
  }
  const std::vector<double> probes = objective.kink_probes(params);
  ParamVector x = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double xi = params[i];
    const double step = h * (1.0 + std::abs(xi));
    x.mutable_values()[i] = xi + step;
    const long double fp = objective.value_extended(x);
    std::vector<double> probes_p, probes_m;
    if (!probes.empty()) probes_p = objective.kink_probes(x);
    x.mutable_values()[i] = xi - step;
    const long double fm = objective.value_extended(x);
    if (!probes.empty()) probes_m = objective.kink_probes(x);
    x.mutable_values()[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("fd_check: non-finite objective at coordinate " + std::to_string(i));
    }
    bool near_kink = false;
    for (std::size_t j = 0; j < probes.size() && !near_kink; ++j) {
      const double moved = std::max(std::abs(probes_p[j] - probes[j]),
                                    std::abs(probes_m[j] - probes[j]));
      near_kink = moved > 0.0 && std::abs(probes[j]) < 10.0 * moved;
    }
    if (near_kink) {
      report.skipped.push_back(i);
      continue;
    }
    const double fd = static_cast<double>((fp - fm) / (2.0L * step));
    const double rel = std::abs(base.gradient[i] - fd) / (std::abs(fd) + 1e-8);
    if (++report.checked == 1 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
    }
  }
  return report;
}

double oracle_bilevel_gap(const QuadraticBilevel& q, const ParamVector& params) {
  if (params.partition() != QuadraticBilevel::partition()) {
    throw InvalidArgument("oracle gap needs a 1/1/1 partition");
  }
  const auto s = q.solution();
  double sq = 0.0;
  for (std::size_t i = 0; i < 3; ++i) sq += (params[i] - s[i]) * (params[i] - s[i]);
  return std::sqrt(sq);
}

namespace {

ParamVector sample_in_ball(const ParamVector& center, double radius, Rng& rng) {
  const std::size_t d = center.size();
  std::vector<double> dir(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : dir) v = rng.gaussian();
    norm = l2_norm(dir);
  }
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  ParamVector p = center;
  auto v = p.mutable_values();
  for (std::size_t i = 0; i < d; ++i) v[i] += r * dir[i] / norm;
  return p;
}

}  // namespace

PlProbe pl_probe(const Objective& lower, const ParamVector& center,
                 std::size_t n_samples, double radius, double v_hat, Rng& rng) {
  if (n_samples < 1) throw InvalidArgument("pl_probe: n_samples must be >= 1");
  if (!(radius >= 0.0)) throw InvalidArgument("pl_probe: radius must be >= 0");
  // Squared gradient norms below this count as vanishing.
  constexpr double kTinyGradSq = 1e-24;
  constexpr double kTinyGap = 1e-12;
  PlProbe probe;
  for (std::size_t s = 0; s < n_samples; ++s) {
    ParamVector p = sample_in_ball(center, radius, rng);
    Evaluation e = lower.eval(p);
    PlSample sample{e.value - v_hat, 0.0};
    for (double g : e.gradient) sample.grad_norm_sq += g * g;
    probe.samples.push_back(sample);
    if (sample.grad_norm_sq > kTinyGradSq) {
      const double ratio = sample.gap / sample.grad_norm_sq;
      probe.mu_hat = probe.used == 0 ? ratio : std::max(probe.mu_hat, ratio);
      ++probe.used;
    } else if (sample.gap > kTinyGap) {
      probe.witnesses.push_back(s);
    } else {
      ++probe.excluded;
    }
  }
  return probe;
}

double lipschitz_estimate(const Objective& objective, const ParamVector& center,
                          std::size_t n_pairs, double radius, Rng& rng) {
  double best = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    ParamVector a = sample_in_ball(center, radius, rng);
    ParamVector b = sample_in_ball(center, radius, rng);
    auto ga = objective.eval(a).gradient;
    auto gb = objective.eval(b).gradient;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      num += (ga[i] - gb[i]) * (ga[i] - gb[i]);
      den += (a[i] - b[i]) * (a[i] - b[i]);
    }
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

std::vector<StationarityPoint> stationarity_series(const RunTrace& trace, double gamma) {
  std::vector<StationarityPoint> out;
  for (const auto& s : trace.steps) {
    if (s.source != StepSource::joint || s.gamma != gamma) continue;
    if (s.segment_step <= 0) throw InvalidArgument("step record lacks a segment index");
    out.push_back({s.epoch, s.segment_step, s.cum_sq_F / static_cast<double>(s.segment_step)});
  }
  if (out.empty()) {
    throw InvalidArgument("trace has no per-step joint records at gamma " +
                          std::to_string(gamma));
  }
  return out;
}

double loglog_slope(const std::vector<StationarityPoint>& series, long lo, long hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& p : series) {
    if (p.n < lo || p.n > hi || !(p.mean > 0.0)) continue;
    const double x = std::log(static_cast<double>(p.n));
    const double y = std::log(p.mean);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw InvalidArgument("loglog_slope: need at least two positive points");
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

nlohmann::json to_json(const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    checks.push_back({{"name", r.name}, {"pass", r.pass}, {"details", r.details}});
    all = all && r.pass;
  }
  return {{"pass", all}, {"checks", checks}};
}

}  // namespace bljust
