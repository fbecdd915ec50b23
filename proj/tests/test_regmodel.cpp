#include <gtest/gtest.h>

#include "regsim/pipeline.hpp"

using namespace regsim;

TEST(RobustMeasurement, SingleReadout) {
  EXPECT_NEAR(robust_measure_error(0, 0.03, 0.02, 1e-3), 0.05 + 5e-4, 1e-15);
}

TEST(RobustMeasurement, OptimalRepetition) {
  const MeasurePlan a = optimal_m(0.05, 0.05, 1e-4);
  EXPECT_EQ(a.m, 6);
  EXPECT_NEAR(a.eps_M, 7.492854864e-4, 1e-12);
  const MeasurePlan b = optimal_m(0.05, 0.05, 1e-6);
  EXPECT_EQ(b.m, 10);
  EXPECT_NEAR(b.eps_M, 1.185306497e-5, 1e-13);
  EXPECT_EQ(optimal_m(0.01, 0.01, 0.05).m, 0);
}

TEST(RobustMeasurement, OptimumIsGlobal) {
  for (double pL : {1e-3, 1e-5, 1e-7}) {
    const MeasurePlan best = optimal_m(0.04, 0.03, pL);
    for (int m = 0; m <= kMaxRepetition; ++m) EXPECT_LE(best.eps_M, robust_measure_error(m, 0.04, 0.03, pL));
  }
}

TEST(RobustMeasurement, DecreasesThenIncreases) {
  const double pL = 1e-4;
  const int mstar = optimal_m(0.05, 0.05, pL).m;
  for (int m = 1; m <= mstar; ++m)
    EXPECT_LT(robust_measure_error(m, 0.05, 0.05, pL), robust_measure_error(m - 1, 0.05, 0.05, pL));
  for (int m = mstar + 1; m <= 30; ++m)
    EXPECT_GT(robust_measure_error(m, 0.05, 0.05, pL), robust_measure_error(m - 1, 0.05, 0.05, pL));
}

TEST(RobustMeasurement, InitializationErrors) {
  const MeasurePlan p = optimal_m(0.05, 0.05, 1e-4);
  EXPECT_EQ(robust_init_error(p), p.eps_M);
  EXPECT_NEAR(robust_init_error_verified(0, 0.06, 0.04, 1e-4), 0.1 + 0.5e-4, 1e-15);
  EXPECT_NEAR(robust_init_error_verified(1, 0.05, 0.05, 1e-4), 1.015e-2, 1e-15);
  EXPECT_THROW(robust_measure_error(-1, 0.1, 0.1, 0.0), InvalidArgument);
}

TEST(Timing, OpticalTimes) {
  const TimingParams tp;
  const OpticalTimes t = optical_times(tp, 0.05);
  EXPECT_NEAR(t.t_I * 1e9, 13.42, 0.01);
  EXPECT_EQ(t.t_M, t.t_I);
  EXPECT_NEAR(t.t_E * 1e9, 360.5, 0.5);
  TimingParams bad = tp;
  bad.eta = 1.0;
  EXPECT_THROW(optical_times(bad, 0.05), InvalidArgument);
}

TEST(Timing, RobustMeasurementTime) {
  EXPECT_EQ(robust_measure_time(0, 1.0, 2.0, 3.0), 3.0);
  EXPECT_EQ(robust_measure_time(2, 1.0, 2.0, 3.0), 30.0);
}

TEST(Timing, FastOpticsLimit) {
  TimingParams tp;
  tp.tau = 0.0;
  for (int m : {0, 3})
    for (long n : {10L, 250L}) {
      const GateMetrics g = gate_metrics(tp, 1e-4, 0.05, m, 1e-3, n, 1e-3);
      EXPECT_NEAR(g.t_tilde_E / tp.t_L, clock_factor(m, n), 1e-9 * clock_factor(m, n));
      EXPECT_EQ(g.tc_over_tl_limit, clock_factor(m, n));
    }
  EXPECT_EQ(clock_factor(0, 7), 7.0);
  EXPECT_EQ(clock_factor(2, 7), 42.0);
}

TEST(Timing, MetricsMonotone) {
  const TimingParams tp;
  double last_tc = 0.0, last_gamma = 0.0;
  for (long n = 1; n < 50; n += 7) {
    const GateMetrics g = gate_metrics(tp, 1e-4, 0.05, 6, 7.5e-4, n, 1e-3);
    EXPECT_GT(g.t_C, last_tc);
    last_tc = g.t_C;
  }
  for (double e : {1e-5, 1e-4, 1e-3}) {
    const GateMetrics g = gate_metrics(tp, 1e-4, 0.05, 6, 7.5e-4, 10, e);
    EXPECT_GT(g.gamma, last_gamma);
    last_gamma = g.gamma;
  }
}

TEST(Timing, MemoryRequirement) {
  EXPECT_NEAR(memory_requirement(0, 20, 1e-3), 2e4, 1e-9);
  EXPECT_NEAR(memory_requirement(2, 20, 1e-3), 1.2e5, 1e-6);
  EXPECT_THROW(memory_requirement(1, 10, 0.0), InvalidArgument);
}

TEST(Pipeline, OperatingPointIsConsistent) {
  const OperatingPoint op = solve_operating_point({RawModel::depolarizing, 0.95, 1e-4, 0.05, 0.05});
  EXPECT_EQ(op.plan.m, 6);
  EXPECT_EQ(op.delta_min, op.grid.at(op.sched.n_b, op.sched.n_p));
  EXPECT_LE(fail_prob(op.chain, op.n_tot_tep), op.delta_min);
  EXPECT_LT(op.n_tot_aif, op.n_tot_tep);
  const GateMetrics g = metrics_for(op, TimingParams{});
  EXPECT_NEAR(g.gamma, 2 * op.delta_min + 2e-4 + 2 * op.plan.eps_M, 1e-15);
  const MemoryConstraint mc = memory_constraint(TimingParams{}, op);
  EXPECT_GT(mc.required, 0.0);
  EXPECT_EQ(mc.feasible, TimingParams{}.t_mem / TimingParams{}.t_L >= mc.required);
}

TEST(Pipeline, RawGateError) { EXPECT_NEAR(raw_gate_error(0.95, 1e-3, 1e-2), 0.072, 1e-15); }
