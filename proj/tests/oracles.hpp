#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <map>
#include <utility>
#include <vector>

// Test-side reference implementations that share no code with the library.

namespace oracles {

// Exact distribution after n steps of the two-level pumping process, by
// walking every success/failure history. State (k, j) as in the library;
// the delivered state is keyed (-1, -1). Failures restart level 1; a failed
// level-2 step restarts everything, or with `nps` lowers the level-2 score.
inline std::map<std::pair<int, int>, double> enumerate_chain(const std::vector<double>& q,
                                                             const std::vector<double>& Q, int n_b, int n_p, int n,
                                                             bool nps) {
  std::map<std::pair<int, int>, double> dist;
  auto rec = [&](auto&& self, int k, int j, int left, double w) -> void {
    if (k < 0 || left == 0) {
      dist[{k, j}] += w;
      return;
    }
    if (j < n_b) {
      const double s = j == 0 ? 1.0 : q[static_cast<std::size_t>(j - 1)];
      self(self, k, j + 1, left - 1, w * s);
      if (s < 1.0) self(self, k, 0, left - 1, w * (1.0 - s));
      return;
    }
    const double s1 = j == 0 ? 1.0 : q[static_cast<std::size_t>(j - 1)];
    const double s2 = k == 0 ? 1.0 : Q[static_cast<std::size_t>(k - 1)];
    if (s1 < 1.0) self(self, k, 0, left - 1, w * (1.0 - s1));
    if (k == n_p) self(self, -1, -1, left - 1, w * s1 * s2);
    else self(self, k + 1, 0, left - 1, w * s1 * s2);
    if (s2 < 1.0) {
      const int back = nps && k > 0 ? k - 1 : 0;
      self(self, back, 0, left - 1, w * s1 * (1.0 - s2));
    }
  };
  rec(rec, 0, 0, n, 1.0);
  return dist;
}

// Ideal parity projections on a 2^n statevector: keeps the components whose
// bits i and j have the given parity, then renormalizes. Returns the
// probability of that parity.
inline double project_parity(Eigen::VectorXcd& psi, int n, int i, int j, int parity) {
  const std::size_t bi = std::size_t{1} << (n - 1 - i), bj = std::size_t{1} << (n - 1 - j);
  for (Eigen::Index x = 0; x < psi.size(); ++x) {
    const auto ux = static_cast<std::size_t>(x);
    const int p = ((ux & bi) ? 1 : 0) ^ ((ux & bj) ? 1 : 0);
    if (p != parity) psi(x) = 0.0;
  }
  const double prob = psi.squaredNorm();
  if (prob > 0.0) psi /= std::sqrt(prob);
  return prob;
}

inline void flip_bit(Eigen::VectorXcd& psi, int n, int q) {
  const std::size_t b = std::size_t{1} << (n - 1 - q);
  Eigen::VectorXcd out(psi.size());
  for (Eigen::Index x = 0; x < psi.size(); ++x) out(static_cast<Eigen::Index>(static_cast<std::size_t>(x) ^ b)) = psi(x);
  psi = out;
}

inline double ghz_overlap(const Eigen::VectorXcd& psi) {
  const std::complex<double> a = (psi(0) + psi(psi.size() - 1)) / std::sqrt(2.0);
  return std::norm(a);
}

}  // namespace oracles
