#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "regsim/pumping.hpp"

// Absorbing Markov chains over pumping progress. One transition consumes one
// raw pair. State "k,j" (index (n_b+1)k + j) holds a level-2 pair that has
// passed k-1 phase steps (none when k = 0) and a level-1 pair that has passed
// j-1 bit steps (none when j = 0). The last state is the delivered pair.

namespace regsim {

struct PumpChain {
  std::vector<std::string> labels;
  Eigen::MatrixXd M;          // column-stochastic: M(to, from)
  std::vector<double> infid;  // per-state weight used by the average infidelity
  std::size_t absorbing_index = 0;

  std::size_t size() const { return labels.size(); }

  void validate(double tol = kProbTol) const {
    const auto n = static_cast<Eigen::Index>(labels.size());
    detail::require(M.rows() == n && M.cols() == n, "transition matrix shape mismatch");
    detail::require(infid.size() == labels.size(), "infidelity vector size mismatch");
    for (Eigen::Index c = 0; c < n; ++c) {
      detail::require(std::abs(M.col(c).sum() - 1.0) <= tol, "transition matrix column does not sum to 1");
      for (Eigen::Index r = 0; r < n; ++r)
        detail::require(M(r, c) >= -tol && M(r, c) <= 1.0 + tol, "transition probability outside [0,1]");
    }
    const auto a = static_cast<Eigen::Index>(absorbing_index);
    detail::require(std::abs(M(a, a) - 1.0) <= tol, "final state must be absorbing");
  }
};

enum class PumpScheme { ps, nps };

namespace detail {

inline void check_probs(const std::vector<double>& p) {
  for (double v : p) require(v > 0.0 && v <= 1.0, "step success probabilities must lie in (0,1]");
}

// Shared builder. Level 1 always restarts on failure. A failed level-2 step
// either discards the level-2 pair (post-selection) or lowers its score by one.
inline PumpChain build_two_level(const std::vector<double>& q, const std::vector<double>& Q, int n_b, int n_p,
                                 bool level2_nps) {
  require(n_b >= 0 && n_p >= 0, "schedule steps must be non-negative");
  require(static_cast<int>(q.size()) == n_b, "need exactly n_b level-1 probabilities");
  require(static_cast<int>(Q.size()) == n_p, "need exactly n_p level-2 probabilities");
  check_probs(q);
  check_probs(Q);
  const int width = n_b + 1;
  const int S = width * (n_p + 1) + 1;
  auto idx = [width](int k, int j) { return static_cast<Eigen::Index>(width * k + j); };
  auto qj = [&q](int j) { return j == 0 ? 1.0 : q[static_cast<std::size_t>(j - 1)]; };
  auto Qk = [&Q](int k) { return k == 0 ? 1.0 : Q[static_cast<std::size_t>(k - 1)]; };
  const Eigen::Index fin = S - 1;

  PumpChain ch;
  ch.M = Eigen::MatrixXd::Zero(S, S);
  for (int k = 0; k <= n_p; ++k) {
    for (int j = 0; j <= n_b; ++j) {
      const Eigen::Index c = idx(k, j);
      if (j < n_b) {
        ch.M(idx(k, j + 1), c) += qj(j);
        ch.M(idx(k, 0), c) += 1.0 - qj(j);
        continue;
      }
      const double s1 = qj(n_b);
      ch.M(idx(k, 0), c) += 1.0 - s1;
      const Eigen::Index up = k == n_p ? fin : idx(k + 1, 0);
      ch.M(up, c) += s1 * Qk(k);
      const Eigen::Index down = level2_nps && k > 0 ? idx(k - 1, 0) : idx(0, 0);
      ch.M(down, c) += s1 * (1.0 - Qk(k));
    }
  }
  ch.M(fin, fin) = 1.0;
  ch.absorbing_index = static_cast<std::size_t>(fin);
  ch.infid.assign(static_cast<std::size_t>(S), 0.0);
  ch.infid[0] = 0.5;
  for (int k = 0; k <= n_p; ++k)
    for (int j = 0; j <= n_b; ++j) ch.labels.push_back(std::to_string(k) + "," + std::to_string(j));
  ch.labels.push_back("*");
  return ch;
}

inline PumpChain build_one_level(const std::vector<double>& q, bool nps) {
  require(!q.empty(), "one-level chain needs at least one step");
  PumpChain ch = build_two_level({}, q, 0, static_cast<int>(q.size()), nps);
  for (std::size_t s = 0; s + 1 < ch.labels.size(); ++s) ch.labels[s] = std::to_string(s);
  return ch;
}

}  // namespace detail

inline PumpChain build_one_level_ps(const std::vector<double>& q) { return detail::build_one_level(q, false); }
inline PumpChain build_one_level_nps(const std::vector<double>& q) { return detail::build_one_level(q, true); }

inline PumpChain build_two_level_ps(const std::vector<double>& q, const std::vector<double>& Q, int n_b, int n_p) {
  return detail::build_two_level(q, Q, n_b, n_p, false);
}

inline PumpChain build_two_level_mixed(const std::vector<double>& q, const std::vector<double>& Q, int n_b,
                                       int n_p) {
  return detail::build_two_level(q, Q, n_b, n_p, true);
}

inline PumpChain build_chain(PumpScheme scheme, const std::vector<double>& q, const std::vector<double>& Q,
                             const PumpSchedule& s) {
  return scheme == PumpScheme::ps ? build_two_level_ps(q, Q, s.n_b, s.n_p) : build_two_level_mixed(q, Q, s.n_b, s.n_p);
}

// Attach the average-infidelity weights: 1/2 for the empty state, and for
// state index s >= 1 the final infidelity of schedule (n_b', n_p') with
// s = (n_b+1) n_p' + n_b' + 1.
inline void attach_infidelities(PumpChain& ch, const InfidelityGrid& grid, const PumpSchedule& s) {
  const std::size_t S = static_cast<std::size_t>((s.n_b + 1) * (s.n_p + 1) + 1);
  detail::require(ch.size() == S, "chain does not match schedule");
  detail::require(grid.caps.n_b >= s.n_b && grid.caps.n_p >= s.n_p, "infidelity table does not cover schedule");
  ch.infid[0] = 0.5;
  for (std::size_t idx = 1; idx < S; ++idx) {
    const int r = static_cast<int>(idx) - 1;
    ch.infid[idx] = grid.at(r % (s.n_b + 1), r / (s.n_b + 1));
  }
}

// Transient columns become p_gen M + (1 - p_gen) I: before each raw pair is
// consumed, a generation attempt succeeds with probability p_gen and the
// chain otherwise waits in place. One step is one generation attempt.
inline PumpChain add_generation_sublevel(const PumpChain& ch, double p_gen) {
  detail::require(p_gen > 0.0 && p_gen <= 1.0, "p_gen must lie in (0,1]");
  PumpChain out = ch;
  const auto n = static_cast<Eigen::Index>(ch.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    if (static_cast<std::size_t>(c) == ch.absorbing_index) continue;
    out.M.col(c) *= p_gen;
    out.M(c, c) += 1.0 - p_gen;
  }
  return out;
}

inline Eigen::VectorXd initial_vector(const PumpChain& ch) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ch.size()));
  p(0) = 1.0;
  return p;
}

inline Eigen::VectorXd evolve(const PumpChain& ch, long n_tot) {
  detail::require(n_tot >= 0, "N_tot must be non-negative");
  Eigen::VectorXd p = initial_vector(ch);
  for (long n = 0; n < n_tot; ++n) p = ch.M * p;
  return p;
}

// Summed over transient states rather than 1 - absorbed, so deep tails keep
// their relative precision.
inline double fail_from(const PumpChain& ch, const Eigen::VectorXd& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < ch.size(); ++i)
    if (i != ch.absorbing_index) s += p(static_cast<Eigen::Index>(i));
  return s;
}

inline double aif_from(const PumpChain& ch, const Eigen::VectorXd& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < ch.size(); ++i) s += ch.infid[i] * p(static_cast<Eigen::Index>(i));
  return s;
}

inline double fail_prob(const PumpChain& ch, long n_tot) { return fail_from(ch, evolve(ch, n_tot)); }

// Failure plus the delivered infidelity; defined as 1 when no pair was used.
inline double tep(const PumpChain& ch, long n_tot, double infid_final) {
  if (n_tot == 0) return 1.0;
  return fail_prob(ch, n_tot) + infid_final;
}

inline double aif(const PumpChain& ch, long n_tot) { return aif_from(ch, evolve(ch, n_tot)); }

inline double aif(const PumpChain& ch, long n_tot, const InfidelityGrid& table, const PumpSchedule& s) {
  PumpChain c = ch;
  attach_infidelities(c, table, s);
  return aif(c, n_tot);
}

struct ChainAnalysis {
  long N_tot = 0;
  double fail_prob = 1.0;
  double tep = 1.0;
  double aif = 0.5;
};

// Analyses for N = 0..n_max from a single forward pass.
inline std::vector<ChainAnalysis> analyze_series(const PumpChain& ch, long n_max, double infid_final) {
  std::vector<ChainAnalysis> out;
  out.reserve(static_cast<std::size_t>(n_max + 1));
  Eigen::VectorXd p = initial_vector(ch);
  for (long n = 0; n <= n_max; ++n) {
    if (n > 0) p = ch.M * p;
    const double f = fail_from(ch, p);
    out.push_back({n, f, n == 0 ? 1.0 : f + infid_final, aif_from(ch, p)});
  }
  return out;
}

// Expected number of steps until absorption (fundamental-matrix solve).
inline double mean_absorption_time(const PumpChain& ch) {
  const auto n = static_cast<Eigen::Index>(ch.size());
  const auto a = static_cast<Eigen::Index>(ch.absorbing_index);
  std::vector<Eigen::Index> tr;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != a) tr.push_back(i);
  const auto m = static_cast<Eigen::Index>(tr.size());
  Eigen::MatrixXd T(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) T(r, c) = ch.M(tr[r], tr[c]);
  // Row-vector convention: t^T (I - T) = 1^T.
  Eigen::MatrixXd A = (Eigen::MatrixXd::Identity(m, m) - T).transpose();
  Eigen::VectorXd t = A.fullPivLu().solve(Eigen::VectorXd::Ones(m));
  return t(0);
}

enum class TargetMode { tep, aif };

inline constexpr long kMaxNtot = 1'000'000;

// Smallest N with fail(N) <= delta_min (tep) or aif(N) <= 2 delta_min (aif).
inline long first_ntot(const PumpChain& ch, TargetMode mode, double delta_min, long cap = kMaxNtot) {
  Eigen::VectorXd p = initial_vector(ch);
  for (long n = 1; n <= cap; ++n) {
    p = ch.M * p;
    const bool ok = mode == TargetMode::tep ? fail_from(ch, p) <= delta_min : aif_from(ch, p) <= 2.0 * delta_min;
    if (ok) return n;
  }
  throw Unreachable("N_tot target not reached within " + std::to_string(cap) + " attempts");
}

inline PumpSchedule default_caps(RawModel model) {
  return model == RawModel::dephasing ? PumpSchedule{0, 8} : PumpSchedule{8, 8};
}

struct NtotSolution {
  long N_tot = 0;
  PumpSchedule sched;
  double delta_min = 0.0;
  PumpChain chain;
};

inline NtotSolution solve_ntot(const NoiseParams& noise, double eps_M, TargetMode mode,
                               PumpScheme scheme = PumpScheme::ps) {
  ScheduleOptimum opt = optimize_schedule(noise, eps_M, default_caps(noise.raw_model));
  NtotSolution sol;
  sol.sched = opt.sched;
  sol.delta_min = opt.delta_min;
  sol.chain = build_chain(scheme, opt.grid.level1_probs(opt.sched.n_b),
                          opt.grid.level2_probs(opt.sched.n_b, opt.sched.n_p), opt.sched);
  attach_infidelities(sol.chain, opt.grid, opt.sched);
  sol.N_tot = first_ntot(sol.chain, mode, sol.delta_min);
  return sol;
}

}  // namespace regsim
