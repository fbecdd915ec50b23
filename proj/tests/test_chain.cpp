#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "regsim/chain.hpp"

using namespace regsim;

namespace {

std::vector<double> random_probs(int n, std::mt19937_64& rng, double lo = 0.6) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(u(rng));
  return v;
}

}  // namespace

TEST(Chain, ColumnsAreStochastic) {
  std::mt19937_64 rng(1);
  for (int nb = 0; nb <= 3; ++nb)
    for (int np = 0; np <= 3; ++np) {
      const auto q = random_probs(nb, rng), Q = random_probs(np, rng);
      EXPECT_NO_THROW(build_two_level_ps(q, Q, nb, np).validate());
      EXPECT_NO_THROW(build_two_level_mixed(q, Q, nb, np).validate());
    }
}

TEST(Chain, LabelsAndSize) {
  const PumpChain ch = build_two_level_ps({0.9, 0.9}, {0.8}, 2, 1);
  ASSERT_EQ(ch.size(), 7u);
  EXPECT_EQ(ch.labels[0], "0,0");
  EXPECT_EQ(ch.labels[4], "1,1");
  EXPECT_EQ(ch.labels.back(), "*");
  EXPECT_EQ(ch.absorbing_index, 6u);
  const PumpChain one = build_one_level_ps({0.9, 0.8});
  EXPECT_EQ(one.labels, (std::vector<std::string>{"0", "1", "2", "*"}));
}

TEST(Chain, RejectsBadInput) {
  EXPECT_THROW(build_two_level_ps({0.9}, {0.8}, 2, 1), InvalidArgument);
  EXPECT_THROW(build_two_level_ps({1.1}, {}, 1, 0), InvalidArgument);
  EXPECT_THROW(build_one_level_ps({}), InvalidArgument);
  EXPECT_THROW(evolve(build_one_level_ps({0.5}), -1), InvalidArgument);
}

TEST(Chain, SingleStepFailureIsGeometric) {
  const double q = 0.7;
  const PumpChain ch = build_one_level_ps({q});
  for (long N = 0; N <= 15; ++N) EXPECT_NEAR(fail_prob(ch, N), std::pow(1.0 - q, N / 2), 1e-14) << N;
}

TEST(Chain, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 12; ++trial) {
    const int nb = trial % 3, np = 1 + trial % 4;
    const bool nps = trial % 2 == 1;
    const auto q = random_probs(nb, rng), Q = random_probs(np, rng);
    const PumpChain ch = nps ? build_two_level_mixed(q, Q, nb, np) : build_two_level_ps(q, Q, nb, np);
    for (int N : {0, 3, 7, 12}) {
      const auto ref = oracles::enumerate_chain(q, Q, nb, np, N, nps);
      const Eigen::VectorXd p = evolve(ch, N);
      for (const auto& [state, w] : ref) {
        const std::size_t idx =
            state.first < 0 ? ch.absorbing_index : static_cast<std::size_t>((nb + 1) * state.first + state.second);
        EXPECT_NEAR(p(static_cast<Eigen::Index>(idx)), w, 1e-13) << "trial " << trial << " N " << N;
      }
      EXPECT_NEAR(p.sum(), 1.0, 1e-13);
    }
  }
}

TEST(Chain, TwoLevelWithoutBitStepsIsOneLevel) {
  const std::vector<double> Q{0.9, 0.85, 0.8};
  EXPECT_LT((build_two_level_ps({}, Q, 0, 3).M - build_one_level_ps(Q).M).norm(), 1e-15);
  EXPECT_LT((build_two_level_mixed({}, Q, 0, 3).M - build_one_level_nps(Q).M).norm(), 1e-15);
}

TEST(Chain, CertainSuccessAbsorbsAfterSuccessPath) {
  for (auto [nb, np] : {std::pair{2, 3}, std::pair{0, 4}, std::pair{3, 0}}) {
    const PumpSchedule s{nb, np};
    const PumpChain ch = build_two_level_ps(std::vector<double>(static_cast<std::size_t>(nb), 1.0),
                                            std::vector<double>(static_cast<std::size_t>(np), 1.0), nb, np);
    EXPECT_EQ(fail_prob(ch, s.raw_pairs() - 1), 1.0);
    EXPECT_EQ(fail_prob(ch, s.raw_pairs()), 0.0);
  }
}

TEST(Chain, NonPostSelectiveNeverFailsMoreOften) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const int nb = trial % 3, np = 2 + trial % 3;
    const auto q = random_probs(nb, rng), Q = random_probs(np, rng, 0.4);
    const PumpChain ps = build_two_level_ps(q, Q, nb, np), nps = build_two_level_mixed(q, Q, nb, np);
    for (long N : {5L, 20L, 60L}) EXPECT_LE(fail_prob(nps, N), fail_prob(ps, N) + 1e-15);
  }
}

TEST(Chain, GenerationSublevelScalesWaitingTime) {
  const PumpChain ch = build_one_level_ps({1.0});
  EXPECT_NEAR(mean_absorption_time(ch), 2.0, 1e-12);
  const PumpChain g = add_generation_sublevel(ch, 0.5);
  g.validate();
  EXPECT_NEAR(mean_absorption_time(g), 4.0, 1e-12);
  EXPECT_THROW(add_generation_sublevel(ch, 0.0), InvalidArgument);
}

TEST(Chain, MeanAbsorptionTimeIsTailSum) {
  const PumpChain ch = build_two_level_ps({0.9, 0.95}, {0.85, 0.9}, 2, 2);
  double sum = 0.0;
  for (const auto& a : analyze_series(ch, 4000, 0.0)) sum += a.fail_prob;
  EXPECT_NEAR(mean_absorption_time(ch), sum, 1e-9);
}

TEST(Chain, FailureTailIsExponential) {
  const PumpChain ch = build_two_level_ps({0.93, 0.96}, {0.9, 0.94, 0.95}, 2, 3);
  const auto series = analyze_series(ch, 400, 0.0);
  // Linear fit of log fail over N in [100, 400].
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (long N = 100; N <= 400; ++N) {
    const double x = static_cast<double>(N), y = std::log(series[static_cast<std::size_t>(N)].fail_prob);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++n;
  }
  const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  EXPECT_GT(r * r, 0.999);
  EXPECT_LT(sxy * n - sx * sy, 0.0);
}

TEST(Chain, FailureIsMonotoneInBudget) {
  const PumpChain ch = build_two_level_mixed({0.8}, {0.7, 0.8}, 1, 2);
  const auto s = analyze_series(ch, 200, 1e-3);
  for (std::size_t N = 1; N < s.size(); ++N) EXPECT_LE(s[N].fail_prob, s[N - 1].fail_prob + 1e-15);
}

TEST(Metrics, TotalErrorAndAverageInfidelity) {
  const NoiseParams n{RawModel::depolarizing, 0.95, 1e-4, 0.05, 0.05};
  const PumpSchedule s{2, 3};
  const InfidelityGrid g = infidelity_grid(n, 1e-4, s);
  PumpChain ch = build_two_level_ps(g.level1_probs(2), g.level2_probs(2, 3), 2, 3);
  attach_infidelities(ch, g, s);
  EXPECT_EQ(tep(ch, 0, g.at(2, 3)), 1.0);
  EXPECT_NEAR(aif(ch, 0), 0.5, 1e-15);
  for (long N : {1L, 5L, 12L, 40L, 150L}) {
    EXPECT_LE(aif(ch, N), tep(ch, N, g.at(2, 3)) + 1e-15) << N;
    EXPECT_NEAR(aif(ch, N, g, s), aif(ch, N), 1e-15);
  }
  // Index s >= 1 carries schedule ((s-1) mod (n_b+1), (s-1) div (n_b+1)).
  EXPECT_NEAR(ch.infid[4], g.at(0, 1), 1e-15);
  EXPECT_NEAR(ch.infid[3], g.at(2, 0), 1e-15);
  EXPECT_NEAR(ch.infid[ch.absorbing_index], g.at(2, 3), 1e-15);
}

TEST(Metrics, FirstNtotIsTheFirstCrossing) {
  const PumpChain ch = build_two_level_ps({0.9, 0.95}, {0.85, 0.9}, 2, 2);
  const long N = first_ntot(ch, TargetMode::tep, 1e-3);
  EXPECT_LE(fail_prob(ch, N), 1e-3);
  EXPECT_GT(fail_prob(ch, N - 1), 1e-3);
  EXPECT_THROW(first_ntot(ch, TargetMode::tep, 1e-3, 10), Unreachable);
}

TEST(Metrics, SolverUsesDefaultCaps) {
  const NoiseParams deph{RawModel::dephasing, 0.95, 1e-4, 0.05, 0.05};
  const NtotSolution s = solve_ntot(deph, 7.49e-4, TargetMode::tep);
  EXPECT_EQ(s.sched.n_b, 0);
  EXPECT_GE(s.sched.n_p, 1);
  EXPECT_LE(fail_prob(s.chain, s.N_tot), s.delta_min);
  const NtotSolution a = solve_ntot(deph, 7.49e-4, TargetMode::aif);
  EXPECT_LT(a.N_tot, s.N_tot);
}
