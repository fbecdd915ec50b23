#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "regsim/bellcore.hpp"

// Entanglement pumping: one stored pair is repeatedly purified with fresh
// pairs. Level 1 removes bit errors (n_b steps), level 2 removes phase errors
// (n_p steps) using level-1 outputs as its resource.

namespace regsim {

enum class PumpKind { bit, phase };

struct PumpSchedule {
  int n_b = 0;
  int n_p = 0;

  void validate() const { detail::require(n_b >= 0 && n_p >= 0, "pump schedule steps must be non-negative"); }
  // Raw pairs consumed on the all-success path.
  long raw_pairs() const { return static_cast<long>(n_b + 1) * (n_p + 1); }
  bool operator==(const PumpSchedule&) const = default;
};

struct PumpStepResult {
  double success_prob = 1.0;
  FidelityVector out_state;
};

inline PumpStepResult pump_bit_ideal(const FidelityVector& raw, const FidelityVector& cur) {
  const double p = (raw.a + raw.b) * (cur.a + cur.b) + (raw.c + raw.d) * (cur.c + cur.d);
  if (!(p > 0.0)) throw ImpossibleBranch("bit pumping step has zero success probability");
  return {p,
          {(raw.a * cur.a + raw.b * cur.b) / p, (raw.a * cur.b + raw.b * cur.a) / p,
           (raw.c * cur.c + raw.d * cur.d) / p, (raw.c * cur.d + raw.d * cur.c) / p}};
}

inline PumpStepResult pump_phase_ideal(const FidelityVector& raw, const FidelityVector& cur) {
  const double p = (raw.a + raw.c) * (cur.a + cur.c) + (raw.b + raw.d) * (cur.b + cur.d);
  if (!(p > 0.0)) throw ImpossibleBranch("phase pumping step has zero success probability");
  return {p,
          {(raw.a * cur.a + raw.c * cur.c) / p, (raw.b * cur.b + raw.d * cur.d) / p,
           (raw.a * cur.c + raw.c * cur.a) / p, (raw.b * cur.d + raw.d * cur.b) / p}};
}

inline PumpStepResult pump_ideal(PumpKind kind, const FidelityVector& raw, const FidelityVector& cur) {
  return kind == PumpKind::bit ? pump_bit_ideal(raw, cur) : pump_phase_ideal(raw, cur);
}

// Both outcomes of one noisy pumping step. Failure means the two reported
// parities differ; `failed` is what is left on the stored pair in that case.
struct PumpBranches {
  double success_prob = 0.0;
  DensityMatrix kept;
  double failure_prob = 0.0;
  DensityMatrix failed;

  PumpStepResult success() const { return {success_prob, bell_extract(kept)}; }
};

// Qubits: 0,1 stored pair (A,B); 2,3 fresh pair (A,B). One noisy CNOT per
// register, stored qubit as control. The phase variant conjugates the whole
// circuit with Hadamards so that it compares X parities; single-qubit gates
// are noiseless. Each readout is flipped with probability eps_M.
inline PumpBranches pump_branches_noisy(const DensityMatrix& raw, const DensityMatrix& cur, PumpKind kind,
                                        double p_L, double eps_M) {
  detail::require(raw.n_qubits() == 2 && cur.n_qubits() == 2, "pumping needs two-qubit states");
  detail::require_probability(p_L, "p_L");
  detail::require_probability(eps_M, "eps_M");
  DensityMatrix joint = tensor(cur, raw);
  const Mat2 h = gates::H();
  if (kind == PumpKind::phase)
    for (int q = 0; q < 4; ++q) joint = apply_unitary(joint, h, q);
  joint = apply_noisy_gate(joint, gates::CNOT(), 0, 2, p_L);
  joint = apply_noisy_gate(joint, gates::CNOT(), 1, 3, p_L);
  if (kind == PumpKind::phase)
    for (int q = 0; q < 2; ++q) joint = apply_unitary(joint, h, q);

  const double agree = (1.0 - eps_M) * (1.0 - eps_M) + eps_M * eps_M;
  Matrix kept = Matrix::Zero(4, 4);
  Matrix failed = Matrix::Zero(4, 4);
  for (int m2 = 0; m2 < 2; ++m2) {
    const Matrix half = detail::project(joint.matrix(), 4, 2, m2);
    for (int m3 = 0; m3 < 2; ++m3) {
      const Matrix reduced = detail::partial_trace(detail::project(half, 4, 3, m3), 4, {2, 3});
      const double w = m2 == m3 ? agree : 1.0 - agree;
      kept += w * reduced;
      failed += (1.0 - w) * reduced;
    }
  }
  PumpBranches out;
  out.success_prob = kept.trace().real();
  out.failure_prob = failed.trace().real();
  out.kept = out.success_prob > 0.0 ? DensityMatrix(2, kept / out.success_prob) : cur;
  out.failed = out.failure_prob > 0.0 ? DensityMatrix(2, failed / out.failure_prob) : cur;
  return out;
}

inline PumpStepResult pump_step_noisy(const DensityMatrix& raw, const DensityMatrix& cur, PumpKind kind,
                                      const NoiseParams& noise, double eps_M) {
  PumpBranches br = pump_branches_noisy(raw, cur, kind, noise.p_L, eps_M);
  if (!(br.success_prob > 0.0)) throw ImpossibleBranch("pumping step has zero success probability");
  return br.success();
}

// The noisy step restricted to Bell-diagonal inputs, precomputed as the
// bilinear map it is. Built by running pump_branches_noisy on the 16 pairs of
// Bell basis states, so it is the same circuit, only cheaper to apply.
class PumpKernel {
 public:
  struct Branch {
    double prob = 0.0;
    FidelityVector state;
  };

  static PumpKernel compile(PumpKind kind, double p_L, double eps_M) {
    PumpKernel k;
    for (int i = 0; i < 4; ++i) {
      FidelityVector ri = FidelityVector::from_array(unit(i));
      for (int j = 0; j < 4; ++j) {
        FidelityVector cj = FidelityVector::from_array(unit(j));
        PumpBranches br = pump_branches_noisy(bell_embed(ri), bell_embed(cj), kind, p_L, eps_M);
        const auto ws = bell_extract(br.kept).weights();
        const auto wf = bell_extract(br.failed).weights();
        for (int o = 0; o < 4; ++o) {
          k.succ_[index(o, i, j)] = br.success_prob * ws[static_cast<std::size_t>(o)];
          k.fail_[index(o, i, j)] = br.failure_prob * wf[static_cast<std::size_t>(o)];
        }
      }
    }
    return k;
  }

  // Returns (success branch, failure branch). A zero-probability branch
  // carries `cur` unchanged.
  std::pair<Branch, Branch> apply(const FidelityVector& raw, const FidelityVector& cur) const {
    const auto r = raw.weights();
    const auto c = cur.weights();
    std::array<double, 4> s{}, f{};
    for (int o = 0; o < 4; ++o)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const double w = r[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)];
          s[static_cast<std::size_t>(o)] += succ_[index(o, i, j)] * w;
          f[static_cast<std::size_t>(o)] += fail_[index(o, i, j)] * w;
        }
    return {normalize(s, cur), normalize(f, cur)};
  }

 private:
  static std::array<double, 4> unit(int i) {
    std::array<double, 4> u{};
    u[static_cast<std::size_t>(i)] = 1.0;
    return u;
  }
  static std::size_t index(int o, int i, int j) { return static_cast<std::size_t>(16 * o + 4 * i + j); }
  static Branch normalize(const std::array<double, 4>& w, const FidelityVector& fallback) {
    const double p = w[0] + w[1] + w[2] + w[3];
    if (!(p > 0.0)) return {0.0, fallback};
    return {p, {w[0] / p, w[1] / p, w[2] / p, w[3] / p}};
  }

  std::array<double, 64> succ_{};
  std::array<double, 64> fail_{};
};

struct ScheduleRun {
  PumpSchedule sched;
  std::vector<FidelityVector> level1;  // level1[j]: stored pair after j bit steps; level1[0] is raw
  std::vector<FidelityVector> level2;  // level2[k]: after k phase steps; level2[0] == level1.back()
  std::vector<double> q;               // q[j-1] = success probability of bit step j
  std::vector<double> Q;               // Q[k-1] = success probability of phase step k
  double final_infidelity = 0.0;
  DensityMatrix final_state;
};

inline ScheduleRun run_schedule(const NoiseParams& noise, double eps_M, const PumpSchedule& sched) {
  noise.validate();
  sched.validate();
  ScheduleRun run;
  run.sched = sched;
  const DensityMatrix raw = bell_embed(make_raw_pair(noise));
  DensityMatrix cur = raw;
  run.level1.push_back(bell_extract(cur));
  for (int j = 0; j < sched.n_b; ++j) {
    PumpBranches br = pump_branches_noisy(raw, cur, PumpKind::bit, noise.p_L, eps_M);
    if (!(br.success_prob > 0.0)) throw ImpossibleBranch("bit pumping step has zero success probability");
    run.q.push_back(br.success_prob);
    cur = br.kept;
    run.level1.push_back(bell_extract(cur));
  }
  const DensityMatrix resource = cur;
  run.level2.push_back(bell_extract(cur));
  for (int k = 0; k < sched.n_p; ++k) {
    PumpBranches br = pump_branches_noisy(resource, cur, PumpKind::phase, noise.p_L, eps_M);
    if (!(br.success_prob > 0.0)) throw ImpossibleBranch("phase pumping step has zero success probability");
    run.Q.push_back(br.success_prob);
    cur = br.kept;
    run.level2.push_back(bell_extract(cur));
  }
  run.final_state = cur;
  run.final_infidelity = run.level2.back().infidelity();
  return run;
}

// Final infidelities and success probabilities of every schedule up to caps.
struct InfidelityGrid {
  PumpSchedule caps;
  std::vector<double> q;                   // q[j-1], j = 1..caps.n_b
  std::vector<std::vector<double>> Q;      // Q[n_b][k-1], k = 1..caps.n_p
  std::vector<std::vector<double>> infid;  // infid[n_b][n_p]

  double at(int n_b, int n_p) const {
    detail::require(n_b >= 0 && n_b <= caps.n_b && n_p >= 0 && n_p <= caps.n_p, "schedule outside grid");
    return infid[static_cast<std::size_t>(n_b)][static_cast<std::size_t>(n_p)];
  }
  std::vector<double> level1_probs(int n_b) const { return {q.begin(), q.begin() + n_b}; }
  std::vector<double> level2_probs(int n_b, int n_p) const {
    const auto& row = Q.at(static_cast<std::size_t>(n_b));
    return {row.begin(), row.begin() + n_p};
  }
};

inline InfidelityGrid infidelity_grid(const NoiseParams& noise, double eps_M, const PumpSchedule& caps) {
  noise.validate();
  caps.validate();
  InfidelityGrid g;
  g.caps = caps;
  const DensityMatrix raw = bell_embed(make_raw_pair(noise));
  std::vector<DensityMatrix> level1{raw};
  for (int j = 0; j < caps.n_b; ++j) {
    PumpBranches br = pump_branches_noisy(raw, level1.back(), PumpKind::bit, noise.p_L, eps_M);
    if (!(br.success_prob > 0.0)) throw ImpossibleBranch("bit pumping step has zero success probability");
    g.q.push_back(br.success_prob);
    level1.push_back(br.kept);
  }
  for (int nb = 0; nb <= caps.n_b; ++nb) {
    const DensityMatrix& resource = level1[static_cast<std::size_t>(nb)];
    DensityMatrix cur = resource;
    std::vector<double> row{bell_extract(cur).infidelity()};
    std::vector<double> probs;
    for (int k = 0; k < caps.n_p; ++k) {
      PumpBranches br = pump_branches_noisy(resource, cur, PumpKind::phase, noise.p_L, eps_M);
      if (!(br.success_prob > 0.0)) throw ImpossibleBranch("phase pumping step has zero success probability");
      probs.push_back(br.success_prob);
      cur = br.kept;
      row.push_back(bell_extract(cur).infidelity());
    }
    g.Q.push_back(std::move(probs));
    g.infid.push_back(std::move(row));
  }
  return g;
}

struct ScheduleOptimum {
  PumpSchedule sched;
  double delta_min = 1.0;
  InfidelityGrid grid;
};

// Exhaustive search; ties go to fewer total steps, then fewer bit steps.
inline ScheduleOptimum optimize_schedule(const NoiseParams& noise, double eps_M,
                                         const PumpSchedule& caps = {8, 8}) {
  ScheduleOptimum best;
  best.grid = infidelity_grid(noise, eps_M, caps);
  best.delta_min = std::numeric_limits<double>::infinity();
  for (int nb = 0; nb <= caps.n_b; ++nb)
    for (int np = 0; np <= caps.n_p; ++np) {
      const double v = best.grid.at(nb, np);
      const int tot = nb + np, best_tot = best.sched.n_b + best.sched.n_p;
      const bool better = v < best.delta_min ||
                          (v == best.delta_min && (tot < best_tot || (tot == best_tot && nb < best.sched.n_b)));
      if (better) {
        best.delta_min = v;
        best.sched = {nb, np};
      }
    }
  return best;
}

// Leading-order infidelity in p_L and eps_M. Depolarizing input needs
// n_b, n_p >= 1; dephasing input needs n_b = 0, n_p >= 1.
inline double infidelity_closed_form(const NoiseParams& noise, double eps_M, const PumpSchedule& sched) {
  const double e = 1.0 - noise.F;
  const double nb = sched.n_b, np = sched.n_p;
  if (noise.raw_model == RawModel::dephasing) {
    detail::require(sched.n_b == 0 && sched.n_p >= 1, "dephasing closed form needs n_b = 0, n_p >= 1");
    return std::pow(e, np + 1) + (2.0 + np) / 4.0 * noise.p_L + 2.0 * e * eps_M;
  }
  detail::require(sched.n_b >= 1 && sched.n_p >= 1, "two-level closed form needs n_b, n_p >= 1");
  return (3.0 + 2.0 * np) / 4.0 * noise.p_L + (4.0 + 2.0 * (nb + np)) / 3.0 * e * eps_M +
         (np + 1.0) * std::pow(2.0 * e / 3.0, nb + 1.0) + std::pow((nb + 1.0) * e / 3.0, np + 1.0);
}

// Ideal (noiseless) two-level run from a Werner pair.
struct IdealRun {
  std::vector<FidelityVector> level1;  // size n_b + 1
  std::vector<FidelityVector> level2;  // size n_p + 1
  std::vector<double> p;               // bit-step success probabilities
  std::vector<double> p_phase;         // phase-step success probabilities
  double infidelity() const { return level2.back().infidelity(); }
};

inline IdealRun ideal_run(const FidelityVector& raw, const PumpSchedule& sched) {
  sched.validate();
  IdealRun r;
  r.level1.push_back(raw);
  for (int j = 0; j < sched.n_b; ++j) {
    PumpStepResult s = pump_bit_ideal(raw, r.level1.back());
    r.p.push_back(s.success_prob);
    r.level1.push_back(s.out_state);
  }
  const FidelityVector resource = r.level1.back();
  r.level2.push_back(resource);
  for (int k = 0; k < sched.n_p; ++k) {
    PumpStepResult s = pump_phase_ideal(resource, r.level2.back());
    r.p_phase.push_back(s.success_prob);
    r.level2.push_back(s.out_state);
  }
  return r;
}

// Trackers of the convergence argument for ideal pumping of a Werner pair.
struct IdealProofBundle {
  double alpha = 0.0;
  std::vector<double> delta, eta;                       // level 1, index n = 0..n_b
  std::vector<double> delta_p, eta_p, lambda_p;         // level 2, index n = 0..n_p
  double zeta = 0.0;
  double epsilon = 0.0;
  IdealRun run;
};

inline IdealProofBundle ideal_proof_bundle(double F0, double eps, const PumpSchedule& sched) {
  IdealProofBundle b;
  b.alpha = 2.0 / 3.0 * (1.0 - F0);
  b.epsilon = eps;
  b.zeta = 2.0 * eps;
  b.run = ideal_run(make_raw_pair(RawModel::werner, F0), sched);
  for (const auto& f : b.run.level1) {
    b.delta.push_back(f.a - 0.5);
    b.eta.push_back(f.c);
  }
  const double scale = std::sqrt((1.0 + b.zeta) / (1.0 - 2.0 * b.zeta));
  for (const auto& f : b.run.level2) {
    b.delta_p.push_back(f.a - 0.5);
    b.eta_p.push_back(f.c);
    b.lambda_p.push_back(scale * (f.a - 0.5));
  }
  return b;
}

// Schedule from the convergence argument: n_b is the ceiling of the larger
// of the two level-1 bounds, n_p the smallest integer above the level-2 lower
// bound, checked against the upper bound.
inline PumpSchedule epsilon_N_schedule(double F0, double eps) {
  detail::require(eps > 0.0 && eps < 0.25, "eps must lie in (0, 1/4)");
  detail::require(F0 <= 1.0, "F0 must not exceed 1");
  const double alpha = 2.0 / 3.0 * (1.0 - F0);
  if (!(alpha < 2.0 / 7.0)) throw InvalidArgument("infeasible: requires alpha < 2/7 (F0 > 4/7)");
  if (alpha == 0.0) return {0, 0};
  const double le = std::log(eps);
  const double b1 = (le - std::log(alpha / (1.0 - 3.0 * alpha))) / std::log(3.0 * alpha / (2.0 - 4.0 * alpha));
  const double b2 = (3.0 * le - std::log(alpha / 2.0)) / std::log(3.0 * alpha / (2.0 * (1.0 - alpha)));
  const int n_b = std::max(0, static_cast<int>(std::ceil(std::max(b1, b2))));

  const IdealRun lvl1 = ideal_run(make_raw_pair(RawModel::werner, F0), {n_b, 0});
  const double delta0 = lvl1.level1.back().a - 0.5;
  const double zeta = 2.0 * eps;
  const double lambda0 = std::sqrt((1.0 + zeta) / (1.0 - 2.0 * zeta)) * delta0;
  const double rate_lo = 1.0 - 2.0 * lambda0 * (1.0 - 2.0 * zeta);
  const double rate_hi = 1.0 - 2.0 * delta0;
  if (!(rate_lo < 1.0)) throw Unreachable("level-1 output does not contract under phase pumping");
  // A non-positive rate means a single step already meets the bound.
  const double lower = rate_lo > 0.0 ? le / std::log(rate_lo) : 0.0;
  const double upper = rate_hi > 0.0 ? 2.0 * le / std::log(rate_hi) : std::numeric_limits<double>::infinity();
  const int n_p = static_cast<int>(std::floor(lower)) + 1;
  if (!(n_p < upper)) throw Unreachable("no integer n_p inside the admissible interval");
  return {n_b, n_p};
}

}  // namespace regsim
