#include <cmath>
#include <map>

#include "doctest.h"
#include "support.hpp"

#include "bljust/errors.hpp"
#include "bljust/pbgd.hpp"
#include "bljust/reference.hpp"
#include "bljust/io.hpp"
#include "bljust/trace.hpp"

using namespace bljust;

TEST_CASE("penalty_at") {
  auto ramp = PenaltySchedule::linear(0.2, 100);
  CHECK(penalty_at(ramp, 1) == 0.0);
  CHECK(penalty_at(ramp, 2) == 0.002);
  CHECK(penalty_at(ramp, 100) == 0.198);
  CHECK(penalty_at(ramp, 51) == 0.1);
  CHECK(penalty_at(PenaltySchedule::linear(1.0, 3), 2) == 1.0 / 3.0);
  CHECK(penalty_at(PenaltySchedule::linear(1e-5, 4), 3) == 5e-6);
  CHECK_THROWS_AS(penalty_at(ramp, 0), InvalidArgument);
  CHECK_THROWS_AS(penalty_at(ramp, 101), InvalidArgument);

  auto constant = PenaltySchedule::constant(0.2, 7);
  for (int k = 1; k <= 7; ++k) CHECK(penalty_at(constant, k) == 0.2);

  auto full = PenaltySchedule::linear(0.2, 100, true);
  CHECK(penalty_at(full, 1) == 0.0);
  CHECK(penalty_at(full, 100) == 0.2);
}

TEST_CASE("linear ramps start at zero and never decrease") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 1 + static_cast<int>(rng.below(300));
    auto s = PenaltySchedule::linear(rng.uniform(0, 50), K, rng.bernoulli(0.5));
    CHECK(penalty_at(s, 1) == 0.0);
    double prev = 0.0;
    for (int k = 1; k <= K; ++k) {
      double g = penalty_at(s, k);
      CHECK(g >= prev);
      CHECK(g <= s.gamma_max);
      prev = g;
    }
  }
}

TEST_CASE("pbgd_step") {
  const Partition q = QuadraticBilevel::partition();
  ParamVector p(q, {0.0, 1.5, -0.5});
  SUBCASE("gamma zero is a supervised step") {
    std::vector<double> gf{-2.0, 1.0, 0.0}, gg{-6.0, 0.0, 4.0};
    auto next = pbgd_step(p, gf, gg, 0.1, 0.0);
    CHECK(next == axpy_segment(p, Segment::all, 0.1, gf));
    CHECK(next[2] == p[2]);
  }
  SUBCASE("zero gradients") {
    std::vector<double> z{0, 0, 0};
    CHECK(pbgd_step(p, z, z, 0.3, 2.0) == p);
  }
  SUBCASE("hand example") {
    std::vector<double> gf{-2.0, 0.0, 0.0}, gg{-6.0, 0.0, 0.0};
    CHECK(pbgd_step(p, gf, gg, 0.1, 1.0)[0] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("eta uses its own penalty when given") {
    std::vector<double> gf{0, 0, 0}, gg{0, 0, 1.0};
    CHECK(pbgd_step(p, gf, gg, 0.1, 0.5)[2] == -0.5 - 0.05);
    CHECK(pbgd_step(p, gf, gg, 0.1, 0.5, 2.0)[2] == -0.5 - 0.2);
  }
  SUBCASE("segment purity") {
    std::vector<double> ok{1, 1, 0}, leaky_f{1, 1, 1e-300}, leaky_g{1, 1e-300, 1};
    CHECK_THROWS_AS(pbgd_step(p, leaky_f, leaky_f, 0.1, 1.0), InvalidArgument);
    CHECK_THROWS_AS(pbgd_step(p, ok, leaky_g, 0.1, 1.0), InvalidArgument);
  }
}

TEST_CASE("exploration and fine-tuning") {
  QuadraticProblem problem(reference::quadratic_problem());
  ParamVector start(QuadraticBilevel::partition(), {0.0, 0.5, 4.0});
  BatchStream none = problem.stream(Level::lower, 0);

  CHECK(explore_epoch(problem, start, 0.1, 0, none) == start);
  CHECK(finetune(problem, start, 0.1, 0, none) == start);

  auto explored = explore_epoch(problem, start, 0.25, 60, none);
  CHECK(explored[1] == start[1]);
  CHECK(std::abs(explored[0] - 3.0) < 1e-6);
  CHECK(std::abs(explored[2] + 1.0) < 1e-6);

  auto tuned = finetune(problem, start, 0.25, 60, none);
  CHECK(tuned[2] == start[2]);
  CHECK(std::abs(tuned[0] - 1.0) < 1e-6);
  CHECK(std::abs(tuned[1] - 2.0) < 1e-6);

  auto semi = test::small_problem();
  auto p0 = semi.initial_params(1);
  auto stream = semi.stream(Level::lower, 2);
  auto after = explore_epoch(semi, p0, 0.1, 5, stream);
  auto phi0 = p0.segment(Segment::phi), phi1 = after.segment(Segment::phi);
  CHECK(std::equal(phi0.begin(), phi0.end(), phi1.begin()));
  CHECK_FALSE(after == p0);
}

TEST_CASE("BL-JUST on the quadratic family reaches the bilevel solution") {
  QuadraticProblem problem(reference::quadratic_problem());
  auto r = run_bljust(problem, reference::quadratic_bljust());
  CHECK(std::abs(r.params[0] - 3.0) <= 0.05);
  CHECK(std::abs(r.params[1] - 2.0) <= 1e-3);
  CHECK(r.trace.epochs.size() == 51);
  CHECK(r.trace.epochs.back().phase == "finetune");
}

TEST_CASE("degenerate schedule is supervised training") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(0.3, 1);
  c.explore_steps = 0;
  c.joint_steps = 0;
  c.finetune_steps = 25;
  c.tau = 0.05;
  c.seed = 4;
  auto r = run_bljust(problem, c);

  auto p = problem.initial_params(derive_seed(4, stream_tag::init));
  auto stream = problem.stream(Level::upper, derive_seed(4, stream_tag::finetune));
  CHECK(r.params == finetune(problem, p, 0.05, 25, stream));
}

TEST_CASE("zero penalty joint phase replays supervised descent") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(0.0, 4);
  c.explore_steps = 0;
  c.joint_steps = 7;
  c.finetune_steps = 0;
  c.alpha = 0.07;
  c.seed = 12;
  auto r = run_bljust(problem, c);

  auto p = problem.initial_params(derive_seed(12, stream_tag::init));
  auto stream = problem.stream(Level::upper, derive_seed(12, stream_tag::joint_sup));
  for (int k = 0; k < 4; ++k) p = finetune(problem, p, 0.07, 7, stream);
  CHECK(r.params == p);
}

TEST_CASE("every joint step applies -alpha (grad f + gamma grad g)") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(2.0, 3);
  c.explore_steps = 2;
  c.joint_steps = 4;
  c.finetune_steps = 3;
  c.seed = 5;
  c.trace_stride = 1;
  c.record_params = true;
  auto r = run_bljust(problem, c);
  REQUIRE(r.trace.steps.size() == 3 * 6 + 3);

  auto sup = problem.stream(Level::upper, derive_seed(5, stream_tag::joint_sup));
  auto unsup = problem.stream(Level::lower, derive_seed(5, stream_tag::joint_unsup));
  ParamVector before = problem.initial_params(derive_seed(5, stream_tag::init));
  int joint_steps = 0;
  for (const auto& s : r.trace.steps) {
    REQUIRE(s.params_after.has_value());
    if (s.source == StepSource::joint) {
      auto gf = problem.sample(Level::upper, before, sup).gradient;
      auto gg = problem.sample(Level::lower, before, unsup).gradient;
      CHECK(*s.params_after == pbgd_step(before, gf, gg, s.lr, s.gamma));
      ++joint_steps;
    }
    before = *s.params_after;
  }
  CHECK(joint_steps == 12);
  CHECK(before == r.params);
}

TEST_CASE("runs are deterministic") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(0.5, 3);
  c.trace_stride = 2;
  c.seed = 77;
  auto a = run_bljust(problem, c);
  auto b = run_bljust(problem, c);
  CHECK(a.params == b.params);
  CHECK(trace_to_csv(a.trace) == trace_to_csv(b.trace));
  c.seed = 78;
  CHECK_FALSE(run_bljust(problem, c).params == a.params);
}

TEST_CASE("epoch records") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(0.4, 5);
  auto r = run_bljust(problem, c);
  REQUIRE(r.trace.epochs.size() == 6);
  for (int k = 0; k < 5; ++k) {
    const auto& e = r.trace.epochs[k];
    CHECK(e.epoch == k + 1);
    CHECK(e.gamma == penalty_at(c.schedule, k + 1));
    CHECK(std::isfinite(e.f));
    CHECK(std::isfinite(e.g));
    CHECK(e.p_hat >= 0.0);
    CHECK(e.p_hat == doctest::Approx(e.g - r.trace.v_hat));
  }
}

TEST_CASE("invalid configurations") {
  QuadraticProblem problem(reference::quadratic_problem());
  BlJustConfig c;
  c.rho = 0.0;
  CHECK_THROWS_AS(run_bljust(problem, c), InvalidArgument);
  c = BlJustConfig{};
  c.explore_steps = -1;
  CHECK_THROWS_AS(run_bljust(problem, c), InvalidArgument);
  c = BlJustConfig{};
  c.schedule.num_epochs = 0;
  CHECK_THROWS_AS(run_bljust(problem, c), InvalidArgument);
}

TEST_CASE("divergence keeps position and partial trace") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(1.0, 50);
  c.explore_steps = 0;
  c.alpha = 1e12;
  try {
    run_bljust(problem, c);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.phase() == "joint");
    CHECK(e.epoch() >= 1);
    CHECK(e.step() >= 1);
    REQUIRE(e.partial_trace() != nullptr);
  }
}

TEST_CASE("trace CSV") {
  QuadraticProblem problem(reference::quadratic_problem());
  auto r = run_bljust(problem, reference::quadratic_bljust());
  auto csv = trace_to_csv(r.trace);
  CHECK(csv.rfind("epoch,gamma,f,g,p_hat,gnorm_f,gnorm_g,gnorm_F,phase\n", 0) == 0);
  auto back = trace_from_csv(csv);
  REQUIRE(back.size() == r.trace.epochs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].f == r.trace.epochs[i].f);
    CHECK(back[i].gnorm_F == r.trace.epochs[i].gnorm_F);
    CHECK(back[i].phase == r.trace.epochs[i].phase);
  }
  CHECK_THROWS_AS(trace_from_csv("epoch,f\n1,2\n"), InvalidArgument);
  CHECK_THROWS_AS(trace_from_csv(csv + "1,2,3\n"), InvalidArgument);
}

TEST_CASE("tidy series re-aggregate to the trace") {
  auto problem = test::small_problem();
  BlJustConfig c;
  c.schedule = PenaltySchedule::linear(0.4, 4);
  auto r = run_bljust(problem, c);
  auto epochs = trace_from_csv(trace_to_csv(r.trace));
  auto tidy = trace_to_tidy_csv(epochs);
  auto lines = split(tidy, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  REQUIRE(lines.size() == 1 + 7 * epochs.size());
  CHECK(lines.size() - 1 >= 4 * epochs.size());
  std::map<std::pair<int, std::string>, double> got;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cols = split(lines[i], ',');
    REQUIRE(cols.size() == 3);
    got[{std::stoi(cols[0]), cols[1]}] = parse_double(cols[2]);
  }
  for (const auto& e : r.trace.epochs) {
    CHECK(got.at({e.epoch, "f"}) == e.f);
    CHECK(got.at({e.epoch, "g"}) == e.g);
    CHECK(got.at({e.epoch, "gamma"}) == e.gamma);
    CHECK(got.at({e.epoch, "gnorm_F"}) == e.gnorm_F);
  }
}
