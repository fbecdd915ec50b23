#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "regsim/bellcore.hpp"
#include "regsim/mc.hpp"

// Gates between registers that share one Bell pair, and GHZ preparation from
// partial Bell measurements (PBMs).

namespace regsim {

struct PauliFrame {
  std::vector<std::uint8_t> x, z;

  PauliFrame() = default;
  explicit PauliFrame(int n) : x(static_cast<std::size_t>(n), 0), z(static_cast<std::size_t>(n), 0) {}

  int size() const { return static_cast<int>(x.size()); }
  bool is_identity() const {
    return std::all_of(x.begin(), x.end(), [](auto v) { return v == 0; }) &&
           std::all_of(z.begin(), z.end(), [](auto v) { return v == 0; });
  }

  PauliFrame& operator*=(const PauliFrame& o) {
    detail::require(o.size() == size(), "frame size mismatch");
    for (std::size_t q = 0; q < x.size(); ++q) {
      x[q] ^= o.x[q];
      z[q] ^= o.z[q];
    }
    return *this;
  }
  friend PauliFrame operator*(PauliFrame a, const PauliFrame& b) { return a *= b; }
  bool operator==(const PauliFrame&) const = default;

  DensityMatrix apply(const DensityMatrix& rho) const {
    detail::require(size() == rho.n_qubits(), "frame size does not match state");
    DensityMatrix out = rho;
    for (int q = 0; q < size(); ++q) {
      if (z[static_cast<std::size_t>(q)]) out = apply_unitary(out, gates::Z(), q);
      if (x[static_cast<std::size_t>(q)]) out = apply_unitary(out, gates::X(), q);
    }
    return out;
  }
};

struct TeleportBranch {
  int m1 = 0;  // reported Z outcome on c1
  int m2 = 0;  // reported X outcome on c2
  double probability = 0.0;
  DensityMatrix state;  // storage qubits before the frame is applied
  PauliFrame frame;
};

struct TeleportResult {
  DensityMatrix output;  // frame-corrected, averaged over outcomes
  std::vector<TeleportBranch> branches;
};

namespace detail {

inline double flip_weight(int truth, int reported, double eps) { return truth == reported ? 1.0 - eps : eps; }

inline int shifted(int q, const std::vector<int>& removed) {
  return q - static_cast<int>(std::count_if(removed.begin(), removed.end(), [q](int r) { return r < q; }));
}

// Runs the shared-pair gate on `joint`, whose comm qubits c1, c2 hold the
// resource. With feed_forward the Z outcome on c1 is applied as X on c2 before
// the controlled gate; otherwise the gate must be a CNOT and that correction
// is deferred to the frame as X on s2. Returns unnormalized storage states
// indexed by reported (m1, m2).
inline std::array<Matrix, 4> shared_pair_gate(const DensityMatrix& joint, int s1, int s2, int c1, int c2,
                                              const Mat2& u, bool feed_forward, double p_L, double eps_M) {
  const int n = joint.n_qubits();
  DensityMatrix st = apply_noisy_gate(joint, gates::CNOT(), s1, c1, p_L);
  std::array<Matrix, 4> out;
  const std::vector<int> comm{c1, c2};
  for (auto& m : out) m = Matrix::Zero(static_cast<Eigen::Index>(st.dim() / 4), static_cast<Eigen::Index>(st.dim() / 4));
  if (!feed_forward) st = apply_noisy_gate(st, gates::controlled(u), c2, s2, p_L);
  for (int t1 = 0; t1 < 2; ++t1) {
    const Matrix p1 = project(st.matrix(), n, c1, t1);
    for (int r1 = 0; r1 < 2; ++r1) {
      const double w1 = flip_weight(t1, r1, eps_M);
      DensityMatrix br(n, p1);
      if (feed_forward) {
        if (r1) br = apply_unitary(br, gates::X(), c2);
        br = apply_noisy_gate(br, gates::controlled(u), c2, s2, p_L);
      }
      br = apply_unitary(br, gates::H(), c2);
      for (int t2 = 0; t2 < 2; ++t2) {
        const Matrix reduced = partial_trace(project(br.matrix(), n, c2, t2), n, comm);
        for (int r2 = 0; r2 < 2; ++r2) out[static_cast<std::size_t>(2 * r1 + r2)] += w1 * flip_weight(t2, r2, eps_M) * reduced;
      }
    }
  }
  return out;
}

inline TeleportResult finish_teleport(const std::array<Matrix, 4>& raw, int n_left, int s1, int s2, bool x_on_s2) {
  TeleportResult res;
  Matrix avg = Matrix::Zero(raw[0].rows(), raw[0].cols());
  for (int r1 = 0; r1 < 2; ++r1)
    for (int r2 = 0; r2 < 2; ++r2) {
      const Matrix& m = raw[static_cast<std::size_t>(2 * r1 + r2)];
      TeleportBranch b;
      b.m1 = r1;
      b.m2 = r2;
      b.probability = m.trace().real();
      b.frame = PauliFrame(n_left);
      b.frame.z[static_cast<std::size_t>(s1)] = static_cast<std::uint8_t>(r2);
      if (x_on_s2) b.frame.x[static_cast<std::size_t>(s2)] = static_cast<std::uint8_t>(r1);
      if (b.probability > 0.0) {
        b.state = DensityMatrix(n_left, m / b.probability);
        avg += b.probability * b.frame.apply(b.state).matrix();
      } else {
        b.state = DensityMatrix::maximally_mixed(n_left);
      }
      res.branches.push_back(std::move(b));
    }
  res.output = DensityMatrix(n_left, avg);
  return res;
}

}  // namespace detail

// Non-local CNOT with s1 (control) and s2 (target) at qubits s1, s2 of
// `input`. The resource pair is appended as comm qubits. Outcome m1 (Z on c1)
// becomes X on s2 and m2 (X on c2) becomes Z on s1.
inline TeleportResult teleported_cnot(const DensityMatrix& bell, const DensityMatrix& input, double p_L, double eps_M,
                                      int s1 = 0, int s2 = 1) {
  detail::require(bell.n_qubits() == 2, "resource must be a two-qubit state");
  detail::require(input.n_qubits() + 2 <= kMaxQubits, "input too large for the appended resource");
  const int c1 = input.n_qubits(), c2 = c1 + 1;
  DensityMatrix joint = tensor(input, bell);
  auto raw = detail::shared_pair_gate(joint, s1, s2, c1, c2, gates::X(), false, p_L, eps_M);
  return detail::finish_teleport(raw, input.n_qubits(), s1, s2, true);
}

inline TeleportResult teleported_cnot(const FidelityVector& bell, const DensityMatrix& input, double p_L, double eps_M) {
  return teleported_cnot(bell_embed(bell), input, p_L, eps_M);
}

// Controlled-U from s1 onto s2; the c1 outcome is fed forward as X on c2.
inline TeleportResult teleported_controlled_u(const DensityMatrix& bell, const DensityMatrix& input, const Mat2& u,
                                              double p_L, double eps_M, int s1 = 0, int s2 = 1) {
  detail::require(bell.n_qubits() == 2, "resource must be a two-qubit state");
  detail::require(input.n_qubits() + 2 <= kMaxQubits, "input too large for the appended resource");
  const int c1 = input.n_qubits(), c2 = c1 + 1;
  DensityMatrix joint = tensor(input, bell);
  auto raw = detail::shared_pair_gate(joint, s1, s2, c1, c2, u, true, p_L, eps_M);
  return detail::finish_teleport(raw, input.n_qubits(), s1, s2, false);
}

// 1 - entanglement fidelity of the implemented channel against controlled-U,
// from the Choi state on two reference qubits.
inline double teleported_gate_process_error(const DensityMatrix& bell, const Mat2& u, bool cnot_frame, double p_L,
                                            double eps_M) {
  // Qubits: r1, r2, s1, s2 with r1-s1 and r2-s2 maximally entangled.
  Vector choi = Vector::Zero(16);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) choi((a << 3) | (b << 2) | (a << 1) | b) = 0.5;
  const DensityMatrix in = DensityMatrix::pure(choi);
  TeleportResult r = cnot_frame ? teleported_cnot(bell, in, p_L, eps_M, 2, 3)
                                : teleported_controlled_u(bell, in, u, p_L, eps_M, 2, 3);
  Matrix target = choi;
  detail::apply_left(target, 4, gates::controlled(u), 2, 3);
  return 1.0 - r.output.expectation(target.col(0));
}

inline double teleported_cnot_process_error(const DensityMatrix& bell, double p_L, double eps_M) {
  return teleported_gate_process_error(bell, gates::X(), true, p_L, eps_M);
}

struct PbmBranch {
  int parity = 0;  // reported parity of the two storage qubits
  double probability = 0.0;
  DensityMatrix post_state;
  PauliFrame frame;  // correction already applied to post_state
};

// Parity measurement of storage qubits i, j through a shared resource pair:
// CNOT from each storage qubit onto its comm qubit, Z readout of both comm
// qubits. With `correct`, an odd parity is undone by X on qubit j.
inline std::vector<PbmBranch> pbm(const DensityMatrix& joint, int i, int j, const DensityMatrix& bell, double p_L,
                                  double eps_M, bool correct = true) {
  detail::require(bell.n_qubits() == 2, "resource must be a two-qubit state");
  detail::require(i != j, "PBM needs two distinct registers");
  const int n = joint.n_qubits();
  detail::require(n + 2 <= kMaxQubits, "state too large for the appended resource");
  detail::check_qubit(n, i);
  detail::check_qubit(n, j);
  const int ci = n, cj = n + 1;
  DensityMatrix st = tensor(joint, bell);
  st = apply_noisy_gate(st, gates::CNOT(), i, ci, p_L);
  st = apply_noisy_gate(st, gates::CNOT(), j, cj, p_L);
  std::array<Matrix, 2> acc = {Matrix::Zero(static_cast<Eigen::Index>(joint.dim()), static_cast<Eigen::Index>(joint.dim())),
                               Matrix::Zero(static_cast<Eigen::Index>(joint.dim()), static_cast<Eigen::Index>(joint.dim()))};
  for (int ti = 0; ti < 2; ++ti) {
    const Matrix pi = detail::project(st.matrix(), n + 2, ci, ti);
    for (int tj = 0; tj < 2; ++tj) {
      const Matrix reduced = detail::partial_trace(detail::project(pi, n + 2, cj, tj), n + 2, {ci, cj});
      for (int ri = 0; ri < 2; ++ri)
        for (int rj = 0; rj < 2; ++rj)
          acc[static_cast<std::size_t>(ri ^ rj)] +=
              detail::flip_weight(ti, ri, eps_M) * detail::flip_weight(tj, rj, eps_M) * reduced;
    }
  }
  std::vector<PbmBranch> out;
  for (int par = 0; par < 2; ++par) {
    PbmBranch b;
    b.parity = par;
    b.probability = acc[static_cast<std::size_t>(par)].trace().real();
    b.frame = PauliFrame(n);
    if (correct && par) b.frame.x[static_cast<std::size_t>(j)] = 1;
    b.post_state = b.probability > 0.0 ? b.frame.apply(DensityMatrix(n, acc[static_cast<std::size_t>(par)] / b.probability))
                                       : joint;
    out.push_back(std::move(b));
  }
  return out;
}

using RegisterPair = std::pair<int, int>;

struct GhzCircuit {
  int k = 0;
  int n = 0;
  std::vector<std::vector<RegisterPair>> cycles;  // PBMs per clock cycle
  std::vector<RegisterPair> tree;                 // PBMs that join components
  std::vector<RegisterPair> redundancy_pbms;      // PBMs that only check parities

  int depth() const { return static_cast<int>(cycles.size()); }
  std::size_t pbm_count() const { return tree.size() + redundancy_pbms.size(); }

  std::vector<RegisterPair> all_pbms() const {
    std::vector<RegisterPair> all;
    for (const auto& c : cycles) all.insert(all.end(), c.begin(), c.end());
    return all;
  }

  void validate() const {
    for (const auto& cyc : cycles) {
      std::vector<int> used;
      for (auto [a, b] : cyc) {
        detail::require(a >= 0 && a < n && b >= 0 && b < n && a != b, "PBM register index out of range");
        used.push_back(a);
        used.push_back(b);
      }
      std::sort(used.begin(), used.end());
      detail::require(std::adjacent_find(used.begin(), used.end()) == used.end(), "PBMs within a cycle must be disjoint");
    }
    detail::require(static_cast<int>(tree.size()) == n - 1, "tree PBMs must span the registers");
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)];
      return v;
    };
    for (auto [a, b] : tree) {
      const int ra = find(a), rb = find(b);
      detail::require(ra != rb, "tree PBMs contain a cycle");
      parent[static_cast<std::size_t>(ra)] = rb;
    }
  }
};

// 2^k registers. Cycle 1 pairs neighbours; cycle 2 joins pairs into blocks of
// four with one redundant check; cycle 3 joins consecutive blocks and closes
// the ring of blocks, again with one redundant check per link.
inline GhzCircuit ghz_schedule(int k) {
  detail::require(k >= 2 && k <= 20, "GHZ schedule needs 2 <= k <= 20");
  GhzCircuit c;
  c.k = k;
  c.n = 1 << k;
  std::vector<RegisterPair> c1, c2, c3;
  for (int m = 0; m < c.n / 2; ++m) {
    c1.push_back({2 * m, 2 * m + 1});
    c.tree.push_back({2 * m, 2 * m + 1});
  }
  const int blocks = c.n / 4;
  for (int b = 0; b < blocks; ++b) {
    c2.push_back({4 * b, 4 * b + 2});
    c2.push_back({4 * b + 1, 4 * b + 3});
    c.tree.push_back({4 * b, 4 * b + 2});
    c.redundancy_pbms.push_back({4 * b + 1, 4 * b + 3});
  }
  if (blocks > 1) {
    for (int b = 0; b < blocks; ++b) {
      const int nb = (b + 1) % blocks;
      c3.push_back({4 * b + 2, 4 * nb});
      c3.push_back({4 * b + 3, 4 * nb + 1});
      if (b + 1 < blocks) c.tree.push_back({4 * b + 2, 4 * nb});
      else c.redundancy_pbms.push_back({4 * b + 2, 4 * nb});
      c.redundancy_pbms.push_back({4 * b + 3, 4 * nb + 1});
    }
  }
  c.cycles.push_back(std::move(c1));
  c.cycles.push_back(std::move(c2));
  if (!c3.empty()) c.cycles.push_back(std::move(c3));
  c.validate();
  return c;
}

// X corrections that turn the measured parities into the canonical GHZ
// state, taken along the tree from register 0. `parity` is indexed like
// all_pbms(). Also reports whether the redundant PBMs agree.
struct GhzFrame {
  std::vector<std::uint8_t> x;
  bool consistent = true;
};

inline GhzFrame ghz_frame(const GhzCircuit& c, const std::vector<int>& parity) {
  const auto all = c.all_pbms();
  detail::require(parity.size() == all.size(), "one parity per PBM required");
  auto parity_of = [&](RegisterPair e) {
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i] == e) return parity[i];
    throw InvalidArgument("PBM not in circuit");
  };
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(c.n));
  for (auto e : c.tree) {
    const int p = parity_of(e);
    adj[static_cast<std::size_t>(e.first)].push_back({e.second, p});
    adj[static_cast<std::size_t>(e.second)].push_back({e.first, p});
  }
  GhzFrame f;
  f.x.assign(static_cast<std::size_t>(c.n), 0);
  std::vector<char> seen(static_cast<std::size_t>(c.n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (auto [w, p] : adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = 1;
      f.x[static_cast<std::size_t>(w)] = static_cast<std::uint8_t>(f.x[static_cast<std::size_t>(v)] ^ p);
      stack.push_back(w);
    }
  }
  for (auto e : c.redundancy_pbms)
    if ((f.x[static_cast<std::size_t>(e.first)] ^ f.x[static_cast<std::size_t>(e.second)]) != parity_of(e))
      f.consistent = false;
  return f;
}

inline Vector ghz_vector(int n) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(std::size_t{1} << n));
  v(0) = 1.0 / std::sqrt(2.0);
  v(v.size() - 1) = 1.0 / std::sqrt(2.0);
  return v;
}

struct GhzExactResult {
  double min_fidelity = 1.0;    // over outcome histories with nonzero weight
  double mean_fidelity = 0.0;   // probability-weighted
  double consistent_prob = 0.0; // weight of histories passing every check
};

// Density-matrix run of the whole circuit (registers start in |+>), every
// history enumerated; fidelity is taken after the frame correction. Needs
// n + 2 <= 6 qubits.
inline GhzExactResult ghz_exact(const GhzCircuit& c, const DensityMatrix& bell, double p_L, double eps_M) {
  detail::require(c.n + 2 <= kMaxQubits, "exact GHZ run limited to 4 registers");
  Vector plus = Vector::Constant(static_cast<Eigen::Index>(std::size_t{1} << c.n), 1.0);
  const auto all = c.all_pbms();
  GhzExactResult out;
  out.min_fidelity = 1.0;
  const Vector target = ghz_vector(c.n);
  auto rec = [&](auto&& self, const DensityMatrix& rho, std::size_t step, std::vector<int>& par, double w) -> void {
    if (w < 1e-14) return;
    if (step == all.size()) {
      GhzFrame f = ghz_frame(c, par);
      PauliFrame pf(c.n);
      pf.x = f.x;
      const double fid = pf.apply(rho).expectation(target);
      out.mean_fidelity += w * fid;
      out.min_fidelity = std::min(out.min_fidelity, fid);
      if (f.consistent) out.consistent_prob += w;
      return;
    }
    for (const PbmBranch& b : pbm(rho, all[step].first, all[step].second, bell, p_L, eps_M, false)) {
      if (b.probability <= 0.0) continue;
      par.push_back(b.parity);
      self(self, b.post_state, step + 1, par, w * b.probability);
      par.pop_back();
    }
  };
  std::vector<int> par;
  rec(rec, DensityMatrix::pure(plus), 0, par, 1.0);
  return out;
}

struct GhzFaultStats {
  double p = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t detected = 0;
  std::uint64_t undetected_multi = 0;   // undetected and >= 2 registers corrupted
  std::uint64_t undetected_single = 0;  // undetected and exactly 1 register corrupted
  double multi_rate = 0.0;              // undetected_multi / undetected runs
  double multi_rate_all = 0.0;          // undetected_multi / n_samples
  double per_register_rate = 0.0;       // corrupted registers per register, undetected runs
};

// Per PBM, independently: with probability p a phase error on one of its two
// registers (chosen uniformly), and with probability p a flipped parity
// report. A run is detected when a redundant PBM disagrees with the tree.
// A register is corrupted if it carries an odd number of phase errors or
// receives a wrong X correction (up to the harmless global flip).
inline GhzFaultStats ghz_fault_injection(const GhzCircuit& c, double p, std::uint64_t n_samples, std::uint64_t seed) {
  detail::require_probability(p, "p");
  detail::require(n_samples >= 1, "n_samples must be at least 1");
  const auto all = c.all_pbms();
  constexpr std::uint64_t kChunk = 8192;
  const std::uint64_t n_chunks = (n_samples + kChunk - 1) / kChunk;
  struct Tally {
    std::uint64_t detected = 0, multi = 0, single = 0, corrupted = 0, undetected = 0;
  };
  std::vector<Tally> tallies(static_cast<std::size_t>(n_chunks));
  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t ch) {
    Tally& t = tallies[ch];
    std::vector<int> par(all.size());
    std::vector<std::uint8_t> zerr(static_cast<std::size_t>(c.n));
    const std::uint64_t lo = ch * kChunk, hi = std::min(n_samples, lo + kChunk);
    for (std::uint64_t s = lo; s < hi; ++s) {
      SampleRng rng(seed, s);
      std::fill(zerr.begin(), zerr.end(), 0);
      for (std::size_t e = 0; e < all.size(); ++e) {
        if (rng.bernoulli(p)) {
          const int r = rng.bernoulli(0.5) ? all[e].first : all[e].second;
          zerr[static_cast<std::size_t>(r)] ^= 1;
        }
        par[e] = rng.bernoulli(p) ? 1 : 0;
      }
      const GhzFrame f = ghz_frame(c, par);
      if (!f.consistent) {
        ++t.detected;
        continue;
      }
      ++t.undetected;
      const int flips = static_cast<int>(std::count(f.x.begin(), f.x.end(), 1));
      const std::uint8_t global = flips * 2 > c.n ? 1 : 0;
      int bad = 0;
      for (int r = 0; r < c.n; ++r)
        if ((f.x[static_cast<std::size_t>(r)] ^ global) || zerr[static_cast<std::size_t>(r)]) ++bad;
      t.corrupted += static_cast<std::uint64_t>(bad);
      if (bad >= 2) ++t.multi;
      if (bad == 1) ++t.single;
    }
  });
  GhzFaultStats st;
  st.p = p;
  st.n_samples = n_samples;
  std::uint64_t corrupted = 0, undetected = 0;
  for (const auto& t : tallies) {
    st.detected += t.detected;
    st.undetected_multi += t.multi;
    st.undetected_single += t.single;
    corrupted += t.corrupted;
    undetected += t.undetected;
  }
  // Rates of the delivered state are conditioned on passing every check.
  st.multi_rate = undetected ? static_cast<double>(st.undetected_multi) / static_cast<double>(undetected) : 0.0;
  st.multi_rate_all = static_cast<double>(st.undetected_multi) / static_cast<double>(n_samples);
  st.per_register_rate =
      undetected ? static_cast<double>(corrupted) / (static_cast<double>(undetected) * c.n) : 0.0;
  return st;
}

// Least-squares slope of log(rate) against log(p).
inline double loglog_slope(const std::vector<double>& p, const std::vector<double>& rate) {
  detail::require(p.size() == rate.size() && p.size() >= 2, "need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    detail::require(p[i] > 0.0 && rate[i] > 0.0, "log-log fit needs positive values");
    const double x = std::log(p[i]), y = std::log(rate[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace regsim
