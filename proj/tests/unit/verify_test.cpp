#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "bljust/errors.hpp"
#include "bljust/pbgd.hpp"
#include "bljust/reference.hpp"
#include "bljust/verify.hpp"

using namespace bljust;

namespace {

class ConstantObjective final : public Objective {
 public:
  Partition partition() const override { return {1, 1, 1}; }
  Evaluation eval(const ParamVector&) const override { return {1.0, {0.0, 0.0, 0.0}}; }
  ParamVector fresh_params(std::uint64_t) const override { return ParamVector({1, 1, 1}); }
};

StepRecord joint_record(int epoch, long n, double cum) {
  StepRecord s;
  s.phase = "joint";
  s.epoch = epoch;
  s.step = n;
  s.source = StepSource::joint;
  s.gamma = 1.0;
  s.segment_step = n;
  s.cum_sq_F = cum;
  return s;
}

}  // namespace

TEST_CASE("fd_check on a linear reconstruction model") {
  Rng rng(21);
  ModelSpec spec{5, {}, Activation::tanh, 2};
  auto batch = make_unlabeled_batch(test::random_matrix(12, 5, rng), 0.4, rng);
  UnsupervisedObjective g(spec, batch, InitScheme::gaussian(0.7));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto report = fd_check(g, g.fresh_params(seed));
    CHECK(report.skipped.empty());
    CHECK(report.checked == spec.partition().total());
    CHECK(report.max_rel_error <= 1e-9);
  }
}

TEST_CASE("fd_check skips coordinates sitting on a ReLU kink") {
  Rng rng(4);
  ModelSpec spec{3, {4}, Activation::relu, 2};
  LabeledBatch batch{test::random_matrix(6, 3, rng), {0, 1, 1, 0, 1, 0}};
  SupervisedObjective f(spec, batch, InitScheme::uniform(0.5));
  ParamVector p(spec.partition());
  for (double& v : p.mutable_segment(Segment::phi)) v = rng.gaussian();
  // theta = 0 puts every hidden pre-activation exactly at zero.
  auto report = fd_check(f, p);
  CHECK(report.skipped.size() == spec.partition().d_theta);
  for (auto i : report.skipped) CHECK(i < spec.partition().d_theta);
  CHECK(report.checked == spec.partition().total() - spec.partition().d_theta);
  CHECK(report.max_rel_error <= 1e-6);
}

TEST_CASE("fd_check rejects a bad step") {
  QuadraticObjective f(reference::quadratic_problem(), Level::upper);
  CHECK_THROWS_AS(fd_check(f, ParamVector({1, 1, 1}), 0.0), InvalidArgument);
}

TEST_CASE("oracle bilevel gap") {
  const auto q = reference::quadratic_problem();
  CHECK(oracle_bilevel_gap(q, ParamVector({1, 1, 1}, {3, 2, -1})) == 0.0);
  CHECK(oracle_bilevel_gap(q, ParamVector({1, 1, 1}, {6, 6, -1})) == doctest::Approx(5.0));
  CHECK(oracle_bilevel_gap(q, ParamVector({1, 1, 1}, {3, 2, 1})) == doctest::Approx(2.0));
  CHECK_THROWS_AS(oracle_bilevel_gap(q, ParamVector({2, 1, 1})), InvalidArgument);
}

TEST_CASE("PL probe on the quadratic lower level") {
  QuadraticObjective g(reference::quadratic_problem(), Level::lower);
  ParamVector center({1, 1, 1}, {3, 2, -1});
  Rng rng(8);
  SUBCASE("ratio is exactly one quarter") {
    auto probe = pl_probe(g, center, 200, 2.0, 0.0, rng);
    CHECK(probe.used + probe.excluded == 200);
    CHECK(probe.witnesses.empty());
    CHECK(probe.mu_hat == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("the minimizer itself is excluded") {
    auto probe = pl_probe(g, center, 10, 0.0, 0.0, rng);
    CHECK(probe.excluded == 10);
    CHECK(probe.used == 0);
    CHECK(probe.witnesses.empty());
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(pl_probe(g, center, 0, 1.0, 0.0, rng), InvalidArgument);
    CHECK_THROWS_AS(pl_probe(g, center, 5, -1.0, 0.0, rng), InvalidArgument);
  }
}

TEST_CASE("a flat objective above v_hat produces witnesses") {
  ConstantObjective flat;
  Rng rng(1);
  auto probe = pl_probe(flat, ParamVector({1, 1, 1}), 7, 1.0, 0.0, rng);
  CHECK(probe.witnesses.size() == 7);
  CHECK(probe.used == 0);
}

TEST_CASE("Lipschitz estimate of a quadratic is its curvature") {
  QuadraticObjective g(reference::quadratic_problem(), Level::lower);
  Rng rng(2);
  double L = lipschitz_estimate(g, ParamVector({1, 1, 1}), 100, 3.0, rng);
  CHECK(L <= 2.0 + 1e-9);
  CHECK(L >= 1.5);
}

TEST_CASE("PL samples never report a ratio above one quarter") {
  // Property: for g = (theta-c)^2 + (eta-d)^2 and v_hat = 0, gap / |grad|^2
  // is 1/4 wherever the gradient is nonzero, for any coefficients.
  Rng gen(77);
  for (int trial = 0; trial < 50; ++trial) {
    QuadraticBilevel q{gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(-5, 5),
                       gen.uniform(-5, 5)};
    QuadraticObjective g(q, Level::lower);
    ParamVector center({1, 1, 1}, {gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(-5, 5)});
    auto probe = pl_probe(g, center, 20, gen.uniform(0.1, 4), 0.0, gen);
    for (const auto& s : probe.samples) {
      if (s.grad_norm_sq > 1e-20) CHECK(s.gap / s.grad_norm_sq == doctest::Approx(0.25));
    }
  }
}

TEST_CASE("stationarity series") {
  SUBCASE("a single nonzero step gives slope -1") {
    RunTrace t;
    for (long n = 1; n <= 100; ++n) t.steps.push_back(joint_record(1, n, 4.0));
    auto series = stationarity_series(t, 1.0);
    REQUIRE(series.size() == 100);
    CHECK(series[9].mean == doctest::Approx(0.4));
    CHECK(loglog_slope(series, 10, 100) == doctest::Approx(-1.0));
  }
  SUBCASE("constant gradient norms give slope 0") {
    RunTrace t;
    for (long n = 1; n <= 50; ++n) t.steps.push_back(joint_record(1, n, 2.0 * n));
    CHECK(loglog_slope(stationarity_series(t, 1.0), 1, 50) == doctest::Approx(0.0));
  }
  SUBCASE("all-zero norms have no slope") {
    RunTrace t;
    for (long n = 1; n <= 10; ++n) t.steps.push_back(joint_record(1, n, 0.0));
    auto series = stationarity_series(t, 1.0);
    CHECK(series.back().mean == 0.0);
    CHECK_THROWS_AS(loglog_slope(series, 1, 10), InvalidArgument);
  }
  SUBCASE("no matching records") {
    RunTrace t;
    t.steps.push_back(joint_record(1, 1, 1.0));
    CHECK_THROWS_AS(stationarity_series(t, 0.5), InvalidArgument);
  }
}

TEST_CASE("stationarity means do not depend on the trace stride") {
  QuadraticProblem problem(reference::quadratic_problem());
  BlJustConfig c;
  c.alpha = 0.01;
  c.schedule = PenaltySchedule::constant(1.0, 2);
  c.explore_steps = 0;
  c.joint_steps = 60;
  c.finetune_steps = 0;
  c.trace_stride = 1;
  auto dense = stationarity_series(run_bljust(problem, c).trace, 1.0);
  c.trace_stride = 6;
  auto sparse = stationarity_series(run_bljust(problem, c).trace, 1.0);
  REQUIRE(!sparse.empty());
  for (const auto& p : sparse) {
    auto it = std::find_if(dense.begin(), dense.end(),
                           [&](const auto& d) { return d.n == p.n && d.epoch == p.epoch; });
    REQUIRE(it != dense.end());
    CHECK(it->mean == p.mean);
  }
}

TEST_CASE("verify suites") {
  CHECK_THROWS_AS(run_verify_suite("bogus"), InvalidArgument);
  auto oracle = run_verify_suite("oracle");
  REQUIRE(oracle.size() == 1);
  CHECK(oracle[0].name == "oracle");
  CHECK(oracle[0].pass);
  auto j = to_json(oracle);
  CHECK(j["pass"] == true);
  CHECK(j["checks"][0]["name"] == "oracle");

  std::vector<CheckResult> mixed{{"a", true, {}}, {"b", false, {}}};
  CHECK(to_json(mixed)["pass"] == false);
}
