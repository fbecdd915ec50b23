#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "regsim/chain.hpp"
#include "regsim/parallel.hpp"

// Monte Carlo over pumping trajectories. Every sample tracks the actual
// stored pairs through both outcome branches of every pumping step, so it
// does not rely on the Markov-chain reduction it is used to check.

namespace regsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One independent stream per (seed, sample index), so results do not depend
// on how samples are spread over threads.
class SampleRng {
 public:
  SampleRng(std::uint64_t seed, std::uint64_t index) : eng_(splitmix64(splitmix64(seed) ^ splitmix64(~index))) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_); }

 private:
  std::mt19937_64 eng_;
};

struct TrajectoryStats {
  std::uint64_t n_samples = 0;
  std::uint64_t n_failed = 0;
  double fail_prob = 0.0;
  double ci_low = 0.0;   // Wilson 95%
  double ci_high = 0.0;
  std::uint64_t n_delivered = 0;
  double mean_delivered_infidelity = 0.0;
  double mean_aif = 0.0;  // mean chain weight of the state reached at N_tot
  // attempt_histogram[t], t = 1..N_tot: delivered on attempt t; [0] unused;
  // [N_tot + 1]: not delivered within the budget.
  std::vector<std::uint64_t> attempt_histogram;
  std::vector<std::uint64_t> final_state_counts;

  // Empirical failure probability within the first n attempts.
  double fail_within(long n) const {
    std::uint64_t ok = 0;
    for (long t = 1; t <= n && t + 1 < static_cast<long>(attempt_histogram.size()); ++t)
      ok += attempt_histogram[static_cast<std::size_t>(t)];
    return 1.0 - static_cast<double>(ok) / static_cast<double>(n_samples);
  }
};

inline std::pair<double, double> wilson_interval(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double den = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / den;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// |empirical - expected| in units of the binomial standard error at `expected`.
inline double binomial_z(double empirical, double expected, std::uint64_t n) {
  const double var = expected * (1.0 - expected) / static_cast<double>(n);
  const double diff = std::abs(empirical - expected);
  if (var <= 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / std::sqrt(var);
}

struct McSetup {
  NoiseParams noise;
  double eps_M = 0.0;
  PumpSchedule sched;
  long n_tot = 0;
  std::uint64_t n_samples = 200000;
  std::uint64_t seed = 1;
  PumpScheme scheme = PumpScheme::ps;
  double p_gen = 1.0;
};

namespace detail {

struct Kernels {
  PumpKernel bit;
  PumpKernel phase;
  FidelityVector raw;
};

inline Kernels make_kernels(const NoiseParams& noise, double eps_M) {
  return {PumpKernel::compile(PumpKind::bit, noise.p_L, eps_M), PumpKernel::compile(PumpKind::phase, noise.p_L, eps_M),
          make_raw_pair(noise)};
}

// Pumping progress of one trajectory, advanced one raw pair at a time.
struct Walker {
  bool have1 = false, have2 = false, done = false;
  int s1 = 0, s2 = 0;  // completed steps on the level-1 / level-2 pair
  FidelityVector L1, L2;

  struct Branches;

  std::size_t chain_index(const PumpSchedule& s) const {
    if (done) return static_cast<std::size_t>((s.n_b + 1) * (s.n_p + 1));
    return static_cast<std::size_t>((s.n_b + 1) * (have2 ? s2 + 1 : 0) + (have1 ? s1 + 1 : 0));
  }

  // Outcomes of consuming one raw pair.
  Branches consume(const Kernels& K, const PumpSchedule& s, bool nps) const;
};

struct WalkerBranch {
  double prob = 0.0;
  Walker next;
};

struct Walker::Branches {
  std::array<WalkerBranch, 3> b;
  int n = 0;
};

inline Walker::Branches Walker::consume(const Kernels& K, const PumpSchedule& s, bool nps) const {
    Branches out;
    Walker w = *this;
    double p_bit = 1.0;
    if (!w.have1) {
      w.L1 = K.raw;
      w.have1 = true;
      w.s1 = 0;
    } else {
      auto [ok, bad] = K.bit.apply(K.raw, w.L1);
      p_bit = ok.prob;
      if (ok.prob < 1.0) {
        Walker f = w;
        f.have1 = false;
        out.b[static_cast<std::size_t>(out.n++)] = {1.0 - ok.prob, f};
      }
      w.L1 = ok.state;
      ++w.s1;
    }
    if (w.s1 < s.n_b) {
      out.b[static_cast<std::size_t>(out.n++)] = {p_bit, w};
      return out;
    }
    w.have1 = false;
    if (!w.have2) {
      w.L2 = w.L1;
      w.have2 = true;
      w.s2 = 0;
      w.done = s.n_p == 0;
      out.b[static_cast<std::size_t>(out.n++)] = {p_bit, w};
      return out;
    }
    auto [ok, bad] = K.phase.apply(w.L1, w.L2);
    Walker f = w;
    if (nps && f.s2 > 0) {
      f.L2 = bad.state;
      --f.s2;
    } else {
      f.have2 = false;
    }
    w.L2 = ok.state;
    ++w.s2;
    w.done = w.s2 == s.n_p;
    out.b[static_cast<std::size_t>(out.n++)] = {p_bit * ok.prob, w};
    if (ok.prob < 1.0) out.b[static_cast<std::size_t>(out.n++)] = {p_bit * (1.0 - ok.prob), f};
    return out;
}

struct ChunkTally {
  std::uint64_t failed = 0, delivered = 0;
  double infid_sum = 0.0, aif_sum = 0.0;
  std::vector<std::uint64_t> hist, states;
};

}  // namespace detail

inline TrajectoryStats simulate(const McSetup& setup) {
  setup.noise.validate();
  setup.sched.validate();
  detail::require(setup.n_samples >= 1, "n_samples must be at least 1");
  detail::require(setup.n_tot >= 0, "N_tot must be non-negative");
  detail::require(setup.p_gen > 0.0 && setup.p_gen <= 1.0, "p_gen must lie in (0,1]");
  const detail::Kernels K = detail::make_kernels(setup.noise, setup.eps_M);
  const PumpSchedule& s = setup.sched;
  const bool nps = setup.scheme == PumpScheme::nps;
  const std::size_t n_states = static_cast<std::size_t>((s.n_b + 1) * (s.n_p + 1) + 1);

  // Chain weights for the average infidelity of the state reached at N_tot.
  const InfidelityGrid grid = infidelity_grid(setup.noise, setup.eps_M, s);
  std::vector<double> weights(n_states, 0.5);
  for (std::size_t i = 1; i < n_states; ++i) {
    const int r = static_cast<int>(i) - 1;
    weights[i] = grid.at(r % (s.n_b + 1), r / (s.n_b + 1));
  }

  constexpr std::uint64_t kChunk = 4096;
  const std::uint64_t n_chunks = (setup.n_samples + kChunk - 1) / kChunk;
  std::vector<detail::ChunkTally> tallies(static_cast<std::size_t>(n_chunks));
  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
    detail::ChunkTally& t = tallies[c];
    t.hist.assign(static_cast<std::size_t>(setup.n_tot + 2), 0);
    t.states.assign(n_states, 0);
    const std::uint64_t lo = c * kChunk;
    const std::uint64_t hi = std::min(setup.n_samples, lo + kChunk);
    for (std::uint64_t i = lo; i < hi; ++i) {
      SampleRng rng(setup.seed, i);
      detail::Walker w;
      long used = 0;
      long delivered_at = 0;
      while (!w.done) {
        if (setup.p_gen < 1.0) {
          bool got = false;
          while (used < setup.n_tot) {
            ++used;
            if (rng.bernoulli(setup.p_gen)) {
              got = true;
              break;
            }
          }
          if (!got) break;
        } else {
          if (used >= setup.n_tot) break;
          ++used;
        }
        const auto br = w.consume(K, s, nps);
        std::size_t pick = static_cast<std::size_t>(br.n - 1);
        if (br.n > 1) {
          double u = rng.uniform();
          for (int k = 0; k < br.n; ++k) {
            if (u < br.b[static_cast<std::size_t>(k)].prob) {
              pick = static_cast<std::size_t>(k);
              break;
            }
            u -= br.b[static_cast<std::size_t>(k)].prob;
          }
        }
        w = br.b[pick].next;
        if (w.done) delivered_at = used;
      }
      const std::size_t idx = w.chain_index(s);
      ++t.states[idx];
      t.aif_sum += idx + 1 == n_states ? w.L2.infidelity() : weights[idx];
      if (w.done) {
        ++t.delivered;
        ++t.hist[static_cast<std::size_t>(delivered_at)];
        t.infid_sum += w.L2.infidelity();
      } else {
        ++t.failed;
        ++t.hist[static_cast<std::size_t>(setup.n_tot + 1)];
      }
    }
  });

  TrajectoryStats st;
  st.n_samples = setup.n_samples;
  st.attempt_histogram.assign(static_cast<std::size_t>(setup.n_tot + 2), 0);
  st.final_state_counts.assign(n_states, 0);
  double infid_sum = 0.0, aif_sum = 0.0;
  for (const auto& t : tallies) {
    st.n_failed += t.failed;
    st.n_delivered += t.delivered;
    infid_sum += t.infid_sum;
    aif_sum += t.aif_sum;
    for (std::size_t k = 0; k < t.hist.size(); ++k) st.attempt_histogram[k] += t.hist[k];
    for (std::size_t k = 0; k < t.states.size(); ++k) st.final_state_counts[k] += t.states[k];
  }
  st.fail_prob = static_cast<double>(st.n_failed) / static_cast<double>(st.n_samples);
  std::tie(st.ci_low, st.ci_high) = wilson_interval(st.n_failed, st.n_samples);
  st.mean_delivered_infidelity = st.n_delivered ? infid_sum / static_cast<double>(st.n_delivered) : 0.0;
  st.mean_aif = aif_sum / static_cast<double>(st.n_samples);
  return st;
}

inline TrajectoryStats simulate_ps(const NoiseParams& noise, double eps_M, const PumpSchedule& sched, long n_tot,
                                   std::uint64_t n_samples, std::uint64_t seed) {
  return simulate({noise, eps_M, sched, n_tot, n_samples, seed, PumpScheme::ps, 1.0});
}

// Level 1 restarts on failure; a failed level-2 step keeps the degraded pair
// with its score lowered by one.
inline TrajectoryStats simulate_nps(const NoiseParams& noise, double eps_M, const PumpSchedule& sched, long n_tot,
                                    std::uint64_t n_samples, std::uint64_t seed) {
  return simulate({noise, eps_M, sched, n_tot, n_samples, seed, PumpScheme::nps, 1.0});
}

// Each raw pair takes a geometric number of generation attempts; n_tot counts
// generation attempts.
inline TrajectoryStats simulate_generation(double p_gen, const NoiseParams& noise, double eps_M,
                                           const PumpSchedule& sched, long n_tot, std::uint64_t n_samples,
                                           std::uint64_t seed, PumpScheme scheme = PumpScheme::ps) {
  return simulate({noise, eps_M, sched, n_tot, n_samples, seed, scheme, p_gen});
}

// Exact distribution over chain states after n_tot raw pairs, by enumerating
// every outcome history. Exponential in n_tot.
inline std::vector<double> enumerate_state_distribution(const NoiseParams& noise, double eps_M,
                                                        const PumpSchedule& sched, long n_tot, PumpScheme scheme) {
  detail::require(n_tot >= 0 && n_tot <= 24, "exhaustive enumeration is limited to 24 attempts");
  const detail::Kernels K = detail::make_kernels(noise, eps_M);
  const bool nps = scheme == PumpScheme::nps;
  std::vector<double> dist(static_cast<std::size_t>((sched.n_b + 1) * (sched.n_p + 1) + 1), 0.0);
  auto rec = [&](auto&& self, const detail::Walker& w, long left, double weight) -> void {
    if (weight == 0.0) return;
    if (w.done || left == 0) {
      dist[w.chain_index(sched)] += weight;
      return;
    }
    const auto br = w.consume(K, sched, nps);
    for (int k = 0; k < br.n; ++k)
      self(self, br.b[static_cast<std::size_t>(k)].next, left - 1, weight * br.b[static_cast<std::size_t>(k)].prob);
  };
  rec(rec, detail::Walker{}, n_tot, 1.0);
  return dist;
}

}  // namespace regsim
