#pragma once

#include <cmath>

#include "regsim/error.hpp"

// Repeated-readout measurement and initialization errors, and the mapping of
// a purified entanglement budget to a clock cycle time and a gate error.

namespace regsim {

struct MeasurePlan {
  int m = 0;            // 2m+1 QND readouts, majority vote
  double eps_M = 0.0;
  double t_robust = 0.0;
};

// Majority vote over 2m+1 readouts, each wrong with p = p_I + p_M, plus one
// noisy coupling gate per readout: the full binomial tail of wrong majorities
// and (2m+1)/2 p_L.
inline double robust_measure_error(int m, double p_I, double p_M, double p_L) {
  detail::require(m >= 0, "m must be non-negative");
  const double p = p_I + p_M;
  detail::require(p >= 0.0 && p <= 1.0, "p_I + p_M must lie in [0,1]");
  detail::require_probability(p_L, "p_L");
  const int n = 2 * m + 1;
  double tail = 0.0;
  for (int j = m + 1; j <= n; ++j) {
    const double log_binom = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
    const double term = std::exp(log_binom) * std::pow(p, j) * std::pow(1.0 - p, n - j);
    tail += term;
  }
  return tail + n / 2.0 * p_L;
}

inline constexpr int kMaxRepetition = 50;

// Global minimum over m in [0, 50]; ties keep the smaller m.
inline MeasurePlan optimal_m(double p_I, double p_M, double p_L) {
  MeasurePlan best{0, robust_measure_error(0, p_I, p_M, p_L), 0.0};
  for (int m = 1; m <= kMaxRepetition; ++m) {
    const double e = robust_measure_error(m, p_I, p_M, p_L);
    if (e < best.eps_M) best = {m, e, 0.0};
  }
  return best;
}

inline double robust_init_error(const MeasurePlan& plan) { return plan.eps_M; }

// Initialization checked by k+1 successive verifications.
inline double robust_init_error_verified(int k, double p_I, double p_M, double p_L) {
  detail::require(k >= 0, "k must be non-negative");
  return std::pow(p_I + p_M, k + 1) + (2.0 * k + 1.0) / 2.0 * p_L;
}

struct TimingParams {
  double t_L = 0.1e-6;
  double tau = 10e-9;
  double C = 10.0;
  double eta = 0.2;
  double t_mem = 1.0;

  double tau_over_C() const { return tau / C; }

  void validate() const {
    detail::require(t_L > 0.0 && tau >= 0.0 && C > 0.0 && t_mem > 0.0, "timing parameters must be positive");
    detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0,1)");
  }
};

struct OpticalTimes {
  double t_I = 0.0;
  double t_M = 0.0;
  double t_E = 0.0;
};

// Optical pumping/readout repeated until a photon is seen with probability
// 1 - p_M; heralded generation needs two photons.
inline OpticalTimes optical_times(const TimingParams& tp, double p_M) {
  tp.validate();
  detail::require(p_M > 0.0 && p_M < 1.0, "p_M must lie in (0,1) for optical timing");
  OpticalTimes t;
  t.t_I = std::log(p_M) / std::log(1.0 - tp.eta) * tp.tau_over_C();
  t.t_M = t.t_I;
  t.t_E = (t.t_I + tp.tau_over_C()) / (tp.eta * tp.eta);
  return t;
}

// A single direct readout (m = 0) needs no coupling gate.
inline double robust_measure_time(int m, double t_I, double t_L, double t_M) {
  if (m == 0) return t_M;
  return (2.0 * m + 1.0) * (t_I + t_L + t_M);
}

// (2m + 2 - delta_{m,0}) N_tot: the generation time in units of t_L when
// optical times are negligible.
inline double clock_factor(int m, long n_tot) {
  return (2.0 * m + 2.0 - (m == 0 ? 1.0 : 0.0)) * static_cast<double>(n_tot);
}

struct GateMetrics {
  double t_I = 0.0;
  double t_M = 0.0;
  double t_E = 0.0;
  double t_tilde_M = 0.0;
  double t_tilde_E = 0.0;
  double t_C = 0.0;
  double gamma = 0.0;
  double tc_over_tl_limit = 0.0;  // t_tilde_E / t_L as tau/C -> 0
};

// eps_E is the error of one purified pair at the chosen budget (2 Delta_min).
inline GateMetrics gate_metrics(const TimingParams& tp, double p_L, double p_M, int m, double eps_M, long n_tot,
                                double eps_E) {
  detail::require(n_tot >= 0, "N_tot must be non-negative");
  const OpticalTimes ot = optical_times(tp, p_M);
  GateMetrics g;
  g.t_I = ot.t_I;
  g.t_M = ot.t_M;
  g.t_E = ot.t_E;
  g.t_tilde_M = robust_measure_time(m, ot.t_I, tp.t_L, ot.t_M);
  g.t_tilde_E = static_cast<double>(n_tot) * (ot.t_E + tp.t_L + g.t_tilde_M);
  g.t_C = g.t_tilde_E + 2.0 * tp.t_L + g.t_tilde_M;
  g.gamma = eps_E + 2.0 * p_L + 2.0 * eps_M;
  g.tc_over_tl_limit = clock_factor(m, n_tot);
  return g;
}

// Memory errors over one clock cycle must not exceed gamma:
// t_mem / t_L >= (2m + 2 - delta_{m,0}) N_tot / gamma.
inline double memory_requirement(int m, long n_tot, double gamma) {
  detail::require(gamma > 0.0, "gamma must be positive");
  return clock_factor(m, n_tot) / gamma;
}

// Error of a non-local CNOT built from one unpurified pair.
inline double raw_gate_error(double F, double p_L, double p_M) { return (1.0 - F) + 2.0 * p_L + 2.0 * p_M; }

}  // namespace regsim
