#pragma once

#include "regsim/chain.hpp"
#include "regsim/regmodel.hpp"

// From hardware noise to a clock cycle: pick the readout repetition, the
// pumping schedule, the raw-pair budget, then the timing.

namespace regsim {

struct OperatingPoint {
  NoiseParams noise;
  MeasurePlan plan;
  PumpSchedule sched;
  double delta_min = 0.0;
  InfidelityGrid grid;
  PumpChain chain;
  long n_tot_tep = 0;
  long n_tot_aif = 0;
};

inline OperatingPoint solve_operating_point(const NoiseParams& noise, PumpScheme scheme = PumpScheme::ps) {
  noise.validate();
  OperatingPoint op;
  op.noise = noise;
  op.plan = optimal_m(noise.p_I, noise.p_M, noise.p_L);
  ScheduleOptimum opt = optimize_schedule(noise, op.plan.eps_M, default_caps(noise.raw_model));
  op.sched = opt.sched;
  op.delta_min = opt.delta_min;
  op.grid = std::move(opt.grid);
  op.chain = build_chain(scheme, op.grid.level1_probs(op.sched.n_b), op.grid.level2_probs(op.sched.n_b, op.sched.n_p),
                         op.sched);
  attach_infidelities(op.chain, op.grid, op.sched);
  op.n_tot_tep = first_ntot(op.chain, TargetMode::tep, op.delta_min);
  op.n_tot_aif = first_ntot(op.chain, TargetMode::aif, op.delta_min);
  return op;
}

inline GateMetrics metrics_for(const OperatingPoint& op, const TimingParams& tp, TargetMode mode = TargetMode::tep) {
  const long n = mode == TargetMode::tep ? op.n_tot_tep : op.n_tot_aif;
  GateMetrics g = gate_metrics(tp, op.noise.p_L, op.noise.p_M, op.plan.m, op.plan.eps_M, n, 2.0 * op.delta_min);
  return g;
}

struct MemoryConstraint {
  double required = 0.0;  // t_mem / t_L
  bool feasible = false;
};

inline MemoryConstraint memory_constraint(const TimingParams& tp, const OperatingPoint& op) {
  const double gamma = 2.0 * op.delta_min + 2.0 * op.noise.p_L + 2.0 * op.plan.eps_M;
  MemoryConstraint mc;
  mc.required = memory_requirement(op.plan.m, op.n_tot_tep, gamma);
  mc.feasible = tp.t_mem / tp.t_L >= mc.required;
  return mc;
}

inline MemoryConstraint memory_constraint(const TimingParams& tp, const NoiseParams& noise) {
  return memory_constraint(tp, solve_operating_point(noise));
}

}  // namespace regsim
