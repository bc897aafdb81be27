#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bljust/objectives.hpp"
#include "bljust/param.hpp"
#include "bljust/rng.hpp"
#include "bljust/trace.hpp"

namespace bljust {

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  double h = 0.0;
  std::vector<std::size_t> skipped;  // kink-adjacent coordinates
  std::size_t checked = 0;
};

/// Central differences with per-coordinate step h * (1 + |x_i|) against the
/// analytic gradient, with objective values taken from value_extended;
/// relative error uses |fd| + 1e-8 as denominator.
/// A coordinate is skipped when some ReLU pre-activation it moves lies
/// within 10 perturbation-widths of zero.
FdReport fd_check(const Objective& objective, const ParamVector& params,
                  double h = 1e-6);

/// Euclidean distance to the bilevel solution (c, b, d).
double oracle_bilevel_gap(const QuadraticBilevel& problem, const ParamVector& params);

struct PlSample {
  double gap = 0.0;           // g - v_hat
  double grad_norm_sq = 0.0;
};

struct PlProbe {
  std::vector<PlSample> samples;
  double mu_hat = 0.0;                 // max gap / |grad g|^2 over usable samples
  std::size_t used = 0;
  std::size_t excluded = 0;            // zero gradient and no gap
  std::vector<std::size_t> witnesses;  // positive gap with vanishing gradient
};

/// Samples uniformly in a ball of `radius` around `center` and estimates
/// the Polyak-Lojasiewicz constant. A falsification probe, not a proof.
PlProbe pl_probe(const Objective& lower, const ParamVector& center,
                 std::size_t n_samples, double radius, double v_hat, Rng& rng);

/// Largest |grad(a) - grad(b)| / |a - b| over random pairs in a ball.
/// Reported as an estimate only; no finite sample certifies a bound.
double lipschitz_estimate(const Objective& objective, const ParamVector& center,
                          std::size_t n_pairs, double radius, Rng& rng);

struct StationarityPoint {
  int epoch = 0;
  long n = 0;         // iterations so far in the constant-gamma segment
  double mean = 0.0;  // (1/n) sum of |grad F_gamma|^2
};

/// Running means of |grad F_gamma|^2 over joint steps recorded at `gamma`.
/// Uses the cumulative sums stored in step records, so any stride that
/// divides n yields the same values at n.
std::vector<StationarityPoint> stationarity_series(const RunTrace& trace, double gamma);

/// Least-squares slope of log(mean) against log(n) over lo <= n <= hi.
double loglog_slope(const std::vector<StationarityPoint>& series, long lo, long hi);

struct CheckResult {
  std::string name;
  bool pass = false;
  nlohmann::json details;
};

/// Self-contained checks: "grad", "oracle", "pl", "stationarity" or "all".
std::vector<CheckResult> run_verify_suite(std::string_view suite);

nlohmann::json to_json(const std::vector<CheckResult>& results);

}  // namespace bljust
