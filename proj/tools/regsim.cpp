#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "regsim/cli.hpp"

namespace {

const char* kSchemas = R"(Output schemas (CSV files begin with one "# config: {json}" line, then the header):
  fidelity-curve  level,step,fidelity,success_prob
  contours fig7   model,F,p_L,eps_M,n_b,n_p,infidelity,log10_infidelity
  contours fig9   model,F,p_L,eps_M,n_b,n_p,N_tot,fail_prob,log10_fail_prob
  contours fig10  model,F,p_L,eps_M,N_tot,tep,tep_n_b,tep_n_p,aif,aif_n_b,aif_n_p,log10_tep,log10_aif
  contours fig11  model,p_L,F,m,eps_M,n_b,n_p,delta_min,eps_E,log10_eps_E,n_tot_tep,n_tot_aif,
                  log10_n_tot_tep,log10_n_tot_aif,tep_aif_ratio
  contours fig13  model,p_L,F,n_b,n_p,n_tot_ps,n_tot_nps,ratio
  contours fig14  model,one_minus_F,p_L,tau_over_tLC,m,eps_M,n_b,n_p,n_tot,t_C,tc_over_tl,
                  log10_tc_over_tl,gamma,log10_gamma (fig15: same columns)
  contours fig16  model,p_L,one_minus_F,m,eps_M,n_b,n_p,n_tot,gamma,log10_gamma,tmem_over_tl,log10_tmem_over_tl
  table1          JSON {config, cells[]}, or CSV when --out ends in .csv:
                  model,F,p_L,m,eps_M,n_b,n_p,delta_min,n_tot_tep,n_tot_aif,t_C_us,t_C_aif_us,gamma,tc_over_tl_limit
  ghz             JSON {config, circuit{k,registers,depth,pbm_count,cycles,tree,redundancy}, points[], multi_rate_slope}
  validate        JSON {config, checks[{name,expected_fail_prob,empirical_fail_prob,samples,z,pass}], pass}
Grid spec: name=lo:hi:n[:log] separated by ';' or ','. Unset axes keep the figure defaults.
Worker threads: REGSIM_THREADS (default: hardware concurrency).)";

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw regsim::InvalidArgument("cannot write " + out);
  f << text;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Purified-entanglement register model: pumping, Markov chains, timing, GHZ preparation"};
  app.footer(kSchemas);
  app.require_subcommand(1);

  std::string config_path, out, grid, model, figure;
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;
  double perturb = 0.0;
  int k = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output path (default: stdout)");
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--grid", grid, "sweep axes, name=lo:hi:n[:log];...");
    sub->add_option("--model", model, "raw pair model")->check(CLI::IsMember({"dephasing", "depolarizing", "werner"}));
    sub->add_option("--figure", figure, "figure id for contours");
  };
  CLI::App* fc = app.add_subcommand("fidelity-curve", "fidelity after each pumping step");
  CLI::App* ct = app.add_subcommand("contours", "figure sweeps as CSV grids");
  CLI::App* t1 = app.add_subcommand("table1", "clock cycle time and effective error table");
  CLI::App* gh = app.add_subcommand("ghz", "GHZ schedule and fault-injection report");
  CLI::App* va = app.add_subcommand("validate", "Markov chain vs Monte Carlo cross-check");
  for (CLI::App* s : {fc, ct, t1, gh, va}) common(s);
  gh->add_option("--samples", samples, "fault-injection samples per p");
  gh->add_option("--k", k, "2^k registers");
  va->add_option("--samples", samples, "trajectories per check");
  va->add_option("--perturb", perturb, "scale chain step probabilities by (1 - perturb)");

  CLI11_PARSE(app, argc, argv);

  try {
    regsim::cli::RunConfig cfg;
    if (!config_path.empty()) cfg = regsim::cli::RunConfig::from_file(config_path);
    for (CLI::App* s : {fc, ct, t1, gh, va}) {
      if (!s->parsed()) continue;
      if (s->count("--seed")) cfg.seed = seed;
      if (s->count("--grid")) cfg.grid = grid;
      if (s->count("--model")) cfg.model = model;
      if (s->count("--figure")) cfg.figure = figure;
      if (s->get_option_no_throw("--samples") && s->count("--samples")) cfg.samples = samples;
      if (s->get_option_no_throw("--k") && s->count("--k")) cfg.k = k;
      if (s->get_option_no_throw("--perturb") && s->count("--perturb")) cfg.perturb = perturb;
    }

    if (fc->parsed()) {
      emit(regsim::cli::cmd_fidelity_curve(cfg), out);
    } else if (ct->parsed()) {
      emit(regsim::cli::cmd_contours(cfg), out);
    } else if (t1->parsed()) {
      emit(regsim::cli::cmd_table1(cfg, ends_with(out, ".csv")), out);
    } else if (gh->parsed()) {
      emit(regsim::cli::cmd_ghz(cfg).dump(2) + "\n", out);
    } else if (va->parsed()) {
      const auto vr = regsim::cli::cmd_validate(cfg);
      emit(vr.report.dump(2) + "\n", out);
      if (!vr.pass) {
        for (const auto& c : vr.report["checks"])
          if (!c["pass"].get<bool>()) std::cerr << "FAILED: " << c["name"].get<std::string>() << '\n';
        return 1;
      }
    }
  } catch (const regsim::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
