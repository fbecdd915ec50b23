#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "regsim/cli.hpp"

using namespace regsim;
using namespace regsim::cli;

namespace {

struct Csv {
  json config;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  double value(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
};

Csv parse_csv(const std::string& text) {
  Csv c;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  const std::string tag = "# config: ";
  EXPECT_EQ(line.rfind(tag, 0), 0u);
  c.config = json::parse(line.substr(tag.size()));
  std::getline(in, line);
  c.header = split(line, ",");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    c.rows.push_back(split(line, ","));
    EXPECT_EQ(c.rows.back().size(), c.header.size()) << line;
  }
  return c;
}

}  // namespace

TEST(Grid, ParsesAxes) {
  const auto axes = parse_grid("p_L=1e-6:1e-3:4:log; F=0.8:0.9:3");
  ASSERT_EQ(axes.size(), 2u);
  EXPECT_EQ(axes[0].name, "p_L");
  EXPECT_TRUE(axes[0].log);
  const auto v = axes[0].values();
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[1], 1e-5, 1e-18);
  EXPECT_EQ(v.back(), 1e-3);
  EXPECT_EQ(axes[1].values(), (std::vector<double>{0.8, 0.8 + 0.05, 0.9}));
  EXPECT_EQ(parse_grid("F=0.9:0.9:1")[0].values(), std::vector<double>{0.9});
  EXPECT_TRUE(parse_grid("").empty());
}

TEST(Grid, RejectsMalformedAxes) {
  for (const char* bad : {"p_L", "=1:2:3", "F=0.8:0.9", "F=a:0.9:2", "F=0.8:0.9:0", "F=0.8:0.9:2.5",
                          "p_L=0:1e-3:3:log", "F=0.8:0.9:2:lin"})
    EXPECT_THROW(parse_grid(bad), InvalidArgument) << bad;
}

TEST(Config, MergesKnownKeysAndRejectsOthers) {
  RunConfig c = RunConfig::from_json(json::parse(R"({"F": 0.9, "model": "dephasing", "n_b": 0, "tau": 1e-9})"));
  EXPECT_EQ(c.F, 0.9);
  EXPECT_EQ(c.raw_model(), RawModel::dephasing);
  EXPECT_EQ(c.n_b, 0);
  EXPECT_FALSE(c.n_p.has_value());
  EXPECT_EQ(c.timing.tau, 1e-9);
  EXPECT_THROW(RunConfig::from_json(json::parse(R"({"fidelity": 0.9})")), InvalidArgument);
  EXPECT_THROW(RunConfig::from_json(json::parse(R"({"F": "high"})")), InvalidArgument);
  EXPECT_THROW(RunConfig::from_json(json::parse(R"({"model": "amplitude"})")), InvalidArgument);
  EXPECT_THROW(RunConfig::from_file("/nonexistent/config.json"), InvalidArgument);
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig c;
  c.model = "depolarizing";
  c.eps_M = 2e-4;
  c.samples = 1000;
  const RunConfig d = RunConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
}

TEST(Csv, NumbersAndSpecialValues) {
  EXPECT_EQ(num(std::nan("")), "nan");
  EXPECT_EQ(num(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(num(0.25), "0.25");
  EXPECT_EQ(num(12L), "12");
}

TEST(FidelityCurve, WalksTheSchedule) {
  RunConfig c;
  c.n_b = 2;
  c.n_p = 3;
  c.eps_M = 1e-4;
  const Csv csv = parse_csv(cmd_fidelity_curve(c));
  EXPECT_EQ(csv.header, fidelity_curve_columns());
  ASSERT_EQ(csv.rows.size(), 2u + 1u + 3u + 1u);
  EXPECT_EQ(csv.config["n_b"], 2);
  const ScheduleRun run = run_schedule(c.noise(), 1e-4, {2, 3});
  EXPECT_NEAR(csv.value(csv.rows.size() - 1, "fidelity"), 1.0 - run.final_infidelity, 1e-9);
}

TEST(Contours, SinglePointGrid) {
  RunConfig c;
  c.figure = "fig11";
  c.grid = "p_L=1e-4:1e-4:1;F=0.95:0.95:1";
  const Csv csv = parse_csv(cmd_contours(c));
  ASSERT_EQ(csv.rows.size(), 2u);  // one per raw-pair model
  EXPECT_EQ(csv.header, figure_spec("fig11").columns);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_GT(csv.value(r, "tep_aif_ratio"), 1.0);
    EXPECT_EQ(csv.value(r, "m"), 6.0);
  }
  EXPECT_EQ(csv.config["model"], json({"depolarizing", "dephasing"}));
}

TEST(Contours, ScheduleGridMinimumIsTheOptimum) {
  RunConfig c;
  c.figure = "fig7";
  c.grid = "F=0.95:0.95:1;p_L=1e-4:1e-4:1";
  const Csv csv = parse_csv(cmd_contours(c));
  ASSERT_EQ(csv.rows.size(), 81u);
  double best = 1.0;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) best = std::min(best, csv.value(r, "infidelity"));
  const ScheduleOptimum opt = optimize_schedule({RawModel::depolarizing, 0.95, 1e-4, 0.05, 0.05}, 1e-4);
  EXPECT_NEAR(best, opt.delta_min, 1e-9 * opt.delta_min);
}

TEST(Contours, FailureCurveFollowsChain) {
  RunConfig c;
  c.figure = "fig9";
  c.n_b = 2;
  c.n_p = 3;
  c.grid = "N_tot=10:50:5";
  const Csv csv = parse_csv(cmd_contours(c));
  ASSERT_EQ(csv.rows.size(), 5u);
  const NoiseParams n = c.noise();
  const InfidelityGrid g = infidelity_grid(n, n.p_L, {2, 3});
  const PumpChain ch = build_two_level_ps(g.level1_probs(2), g.level2_probs(2, 3), 2, 3);
  EXPECT_NEAR(csv.value(4, "fail_prob"), fail_prob(ch, 50), 1e-9);
  EXPECT_EQ(csv.value(0, "fail_prob"), 1.0);
}

TEST(Contours, EveryFigureRunsOnASmallGrid) {
  const std::map<std::string, std::string> grids{
      {"fig7", "F=0.9:0.9:1;p_L=1e-5:1e-5:1;n_b=0:2:3;n_p=0:2:3"},
      {"fig9", "N_tot=1:31:3"},
      {"fig10", "p_L=1e-5:1e-5:1;N_tot=5:51:3"},
      {"fig11", "p_L=1e-5:1e-3:2:log;F=0.85:0.95:2"},
      {"fig13", "p_L=1e-5:1e-5:1;F=0.9:0.9:1"},
      {"fig14", "one_minus_F=0.05:0.05:1;p_L=1e-4:1e-4:1;tau_over_tLC=1:1:1"},
      {"fig15", "one_minus_F=0.05:0.05:1;p_L=1e-4:1e-4:1;tau_over_tLC=1:1:1"},
      {"fig16", "p_L=1e-4:1e-4:1;one_minus_F=0.01:0.01:1"}};
  for (const auto& f : figure_specs()) {
    RunConfig c;
    c.figure = f.id;
    c.grid = grids.at(f.id);
    const Csv csv = parse_csv(cmd_contours(c));
    EXPECT_FALSE(csv.rows.empty()) << f.id;
    EXPECT_EQ(csv.header, f.columns) << f.id;
  }
}

TEST(Contours, RejectsUnknownFigureOrAxis) {
  RunConfig c;
  c.figure = "fig99";
  EXPECT_THROW(cmd_contours(c), InvalidArgument);
  c.figure = "fig11";
  c.grid = "tau=1:2:2";
  EXPECT_THROW(cmd_contours(c), InvalidArgument);
  c.figure.clear();
  EXPECT_THROW(cmd_contours(c), InvalidArgument);
}

TEST(Table1, JsonAndCsvAgree) {
  RunConfig c;
  const json j = json::parse(cmd_table1(c, false));
  ASSERT_EQ(j["cells"].size(), 16u);
  const Csv csv = parse_csv(cmd_table1(c, true));
  ASSERT_EQ(csv.rows.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(csv.value(i, "gamma"), j["cells"][i]["gamma"].get<double>(),
                1e-9 * j["cells"][i]["gamma"].get<double>());
    EXPECT_EQ(csv.rows[i][csv.col("model")], j["cells"][i]["model"].get<std::string>());
  }
}

TEST(Ghz, ReportsCircuitAndPoints) {
  RunConfig c;
  c.samples = 20000;
  const json j = cmd_ghz(c);
  EXPECT_EQ(j["circuit"]["depth"], 3);
  EXPECT_EQ(j["circuit"]["registers"], 8);
  EXPECT_EQ(j["circuit"]["cycles"].size(), 3u);
  ASSERT_EQ(j["points"].size(), 3u);
  EXPECT_EQ(j["points"][0]["samples"], 20000);
  for (const auto& pt : j["points"]) EXPECT_GE(pt["multi_rate"].get<double>(), pt["multi_rate_all"].get<double>());
  c.k = 2;
  EXPECT_EQ(cmd_ghz(c)["circuit"]["depth"], 2);
}

TEST(Validate, PassesAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig c;
    c.seed = seed;
    c.samples = 50000;
    const ValidationReport r = cmd_validate(c);
    EXPECT_TRUE(r.pass) << r.report.dump(2);
    EXPECT_EQ(r.report["checks"].size(), default_validation_suite().size());
  }
}

TEST(Validate, DetectsPerturbedChain) {
  RunConfig c;
  c.samples = 50000;
  c.perturb = 0.05;
  const ValidationReport r = cmd_validate(c);
  EXPECT_FALSE(r.pass);
  int failing = 0;
  for (const auto& chk : r.report["checks"]) {
    if (chk["pass"].get<bool>()) continue;
    ++failing;
    EXPECT_FALSE(chk["name"].get<std::string>().empty());
  }
  EXPECT_GE(failing, 1);
}
