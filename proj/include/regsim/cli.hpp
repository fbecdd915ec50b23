#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "regsim/mc.hpp"
#include "regsim/pipeline.hpp"
#include "regsim/protocols.hpp"

// Command implementations behind tools/regsim. Each returns the text that is
// written to --out (or stdout); CSV outputs start with one "# config: {...}"
// line holding the resolved configuration, then the header row.

namespace regsim::cli {

using json = nlohmann::json;

// ---- sweep axes ------------------------------------------------------------

struct Axis {
  std::string name;
  double lo = 0.0, hi = 0.0;
  int n = 1;
  bool log = false;

  std::vector<double> values() const {
    std::vector<double> v;
    if (n == 1) return {lo};
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / (n - 1);
      v.push_back(log ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo));
    }
    v.back() = hi;
    return v;
  }

  std::string spec() const {
    std::ostringstream os;
    os.precision(10);
    os << name << '=' << lo << ':' << hi << ':' << n << (log ? ":log" : "");
    return os.str();
  }
};

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (seps.find(ch) != std::string::npos) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("cannot parse " + what + ": '" + s + "'");
}

// "name=lo:hi:n[:log]", axes separated by ';' or ','.
inline std::vector<Axis> parse_grid(const std::string& spec) {
  std::vector<Axis> axes;
  if (spec.empty()) return axes;
  for (const std::string& part : split(spec, ";,")) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("grid axis must look like name=lo:hi:n[:log]: " + part);
    Axis a;
    a.name = part.substr(0, eq);
    const auto f = split(part.substr(eq + 1), ":");
    if (f.size() < 3 || f.size() > 4) throw InvalidArgument("grid axis must look like name=lo:hi:n[:log]: " + part);
    a.lo = parse_double(f[0], a.name + " lower bound");
    a.hi = parse_double(f[1], a.name + " upper bound");
    const double n = parse_double(f[2], a.name + " point count");
    if (!(n >= 1.0) || n != std::floor(n)) throw InvalidArgument("grid point count must be a positive integer");
    a.n = static_cast<int>(n);
    if (f.size() == 4) {
      if (f[3] != "log") throw InvalidArgument("unknown axis scale '" + f[3] + "'");
      a.log = true;
      if (!(a.lo > 0.0 && a.hi > 0.0)) throw InvalidArgument("log axis needs positive bounds");
    }
    axes.push_back(a);
  }
  return axes;
}

// ---- configuration ---------------------------------------------------------

struct RunConfig {
  std::string figure;
  std::optional<std::string> model;
  double F = 0.95;
  double p_L = 1e-4;
  double p_I = 0.05;
  double p_M = 0.05;
  std::optional<double> eps_M;  // unset: optimal repeated readout
  std::optional<int> n_b, n_p;  // unset: optimized schedule
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> samples;
  int k = 3;
  std::vector<double> p_values{0.01, 0.02, 0.04};
  std::string grid;
  double perturb = 0.0;
  TimingParams timing;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{"figure", "model",   "F",        "p_L",  "p_I",  "p_M", "eps_M",
                                            "n_b",    "n_p",     "seed",     "samples", "k", "p_values", "grid",
                                            "perturb", "t_L",    "tau",      "C",    "eta",  "t_mem"};
    return k;
  }

  json to_json() const {
    json j;
    j["figure"] = figure;
    j["model"] = model ? json(*model) : json(nullptr);
    j["F"] = F;
    j["p_L"] = p_L;
    j["p_I"] = p_I;
    j["p_M"] = p_M;
    j["eps_M"] = eps_M ? json(*eps_M) : json(nullptr);
    j["n_b"] = n_b ? json(*n_b) : json(nullptr);
    j["n_p"] = n_p ? json(*n_p) : json(nullptr);
    j["seed"] = seed;
    j["samples"] = samples ? json(*samples) : json(nullptr);
    j["k"] = k;
    j["p_values"] = p_values;
    j["grid"] = grid;
    j["perturb"] = perturb;
    j["t_L"] = timing.t_L;
    j["tau"] = timing.tau;
    j["C"] = timing.C;
    j["eta"] = timing.eta;
    j["t_mem"] = timing.t_mem;
    return j;
  }

  // Applies the keys present in `j` on top of this config.
  void merge(const json& j) {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (std::find(keys().begin(), keys().end(), key) == keys().end())
        throw InvalidArgument("unknown config key '" + key + "'");
      try {
        if (key == "figure") figure = v.get<std::string>();
        else if (key == "model") model = v.is_null() ? std::nullopt : std::optional(v.get<std::string>());
        else if (key == "F") F = v.get<double>();
        else if (key == "p_L") p_L = v.get<double>();
        else if (key == "p_I") p_I = v.get<double>();
        else if (key == "p_M") p_M = v.get<double>();
        else if (key == "eps_M") eps_M = v.is_null() ? std::nullopt : std::optional(v.get<double>());
        else if (key == "n_b") n_b = v.is_null() ? std::nullopt : std::optional(v.get<int>());
        else if (key == "n_p") n_p = v.is_null() ? std::nullopt : std::optional(v.get<int>());
        else if (key == "seed") seed = v.get<std::uint64_t>();
        else if (key == "samples") samples = v.is_null() ? std::nullopt : std::optional(v.get<std::uint64_t>());
        else if (key == "k") k = v.get<int>();
        else if (key == "p_values") p_values = v.get<std::vector<double>>();
        else if (key == "grid") grid = v.get<std::string>();
        else if (key == "perturb") perturb = v.get<double>();
        else if (key == "t_L") timing.t_L = v.get<double>();
        else if (key == "tau") timing.tau = v.get<double>();
        else if (key == "C") timing.C = v.get<double>();
        else if (key == "eta") timing.eta = v.get<double>();
        else if (key == "t_mem") timing.t_mem = v.get<double>();
      } catch (const json::exception& e) {
        throw InvalidArgument("bad value for config key '" + key + "': " + e.what());
      }
    }
    if (model) parse_raw_model(*model);
  }

  static RunConfig from_json(const json& j) {
    RunConfig c;
    c.merge(j);
    return c;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InvalidArgument("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }

  RawModel raw_model(RawModel fallback = RawModel::depolarizing) const {
    return model ? parse_raw_model(*model) : fallback;
  }

  NoiseParams noise(RawModel fallback = RawModel::depolarizing) const {
    NoiseParams n{raw_model(fallback), F, p_L, p_I, p_M};
    n.validate();
    return n;
  }
};

// ---- formatting ------------------------------------------------------------

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
inline std::string num(long v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }
inline std::string num(std::uint64_t v) { return std::to_string(v); }

inline double log10_or_nan(double v) { return v > 0.0 ? std::log10(v) : std::nan(""); }

using Row = std::vector<std::string>;

inline std::string render_csv(const json& config, const std::vector<std::string>& header, const std::vector<Row>& rows) {
  std::ostringstream os;
  os << "# config: " << config.dump() << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const Row& r : rows) {
    detail::require(r.size() == header.size(), "row width does not match header");
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
  return os.str();
}

// ---- fidelity-curve --------------------------------------------------------

inline const std::vector<std::string>& fidelity_curve_columns() {
  static const std::vector<std::string> c{"level", "step", "fidelity", "success_prob"};
  return c;
}

inline std::string cmd_fidelity_curve(const RunConfig& cfg) {
  const NoiseParams noise = cfg.noise();
  const double eps_M = cfg.eps_M ? *cfg.eps_M : optimal_m(noise.p_I, noise.p_M, noise.p_L).eps_M;
  PumpSchedule sched;
  if (cfg.n_b || cfg.n_p) {
    sched = {cfg.n_b.value_or(0), cfg.n_p.value_or(0)};
  } else {
    sched = optimize_schedule(noise, eps_M, default_caps(noise.raw_model)).sched;
  }
  const ScheduleRun run = run_schedule(noise, eps_M, sched);
  std::vector<Row> rows;
  for (std::size_t j = 0; j < run.level1.size(); ++j)
    rows.push_back({"1", num(static_cast<long>(j)), num(run.level1[j].fidelity()), num(j ? run.q[j - 1] : 1.0)});
  for (std::size_t k = 0; k < run.level2.size(); ++k)
    rows.push_back({"2", num(static_cast<long>(k)), num(run.level2[k].fidelity()), num(k ? run.Q[k - 1] : 1.0)});
  json c = cfg.to_json();
  c["model"] = std::string(to_string(noise.raw_model));
  c["eps_M"] = eps_M;
  c["n_b"] = sched.n_b;
  c["n_p"] = sched.n_p;
  return render_csv(c, fidelity_curve_columns(), rows);
}

// ---- contours ----------------------------------------------------------------

struct FigureSpec {
  std::string id;
  std::string description;
  std::vector<Axis> axes;  // defaults; --grid overrides by name
  std::vector<RawModel> models;
  std::vector<std::string> columns;
};

inline const std::vector<FigureSpec>& figure_specs() {
  using RM = RawModel;
  static const std::vector<FigureSpec> specs{
      {"fig7",
       "final infidelity over the schedule grid; eps_M = p_L",
       {{"F", 0.90, 0.95, 2, false}, {"p_L", 1e-6, 1e-4, 2, true}, {"n_b", 0, 8, 9, false}, {"n_p", 0, 8, 9, false}},
       {RM::depolarizing},
       {"model", "F", "p_L", "eps_M", "n_b", "n_p", "infidelity", "log10_infidelity"}},
      {"fig9",
       "failure probability against N_tot for schedules (2,3) and (3,4) (or n_b/n_p from the config); eps_M = p_L "
       "unless set",
       {{"N_tot", 1, 300, 300, false}},
       {RM::depolarizing},
       {"model", "F", "p_L", "eps_M", "n_b", "n_p", "N_tot", "fail_prob", "log10_fail_prob"}},
      {"fig10",
       "total error probability and average infidelity against N_tot, each minimized over schedules",
       {{"p_L", 1e-6, 1e-4, 2, true}, {"N_tot", 1, 400, 400, false}},
       {RM::depolarizing, RM::dephasing},
       {"model", "F", "p_L", "eps_M", "N_tot", "tep", "tep_n_b", "tep_n_p", "aif", "aif_n_b", "aif_n_p", "log10_tep",
        "log10_aif"}},
      {"fig11",
       "purified error and raw-pair budgets over (p_L, F)",
       {{"p_L", 1e-6, 1e-3, 13, true}, {"F", 0.80, 0.99, 20, false}},
       {RM::depolarizing, RM::dephasing},
       {"model", "p_L", "F", "m", "eps_M", "n_b", "n_p", "delta_min", "eps_E", "log10_eps_E", "n_tot_tep",
        "n_tot_aif", "log10_n_tot_tep", "log10_n_tot_aif", "tep_aif_ratio"}},
      {"fig13",
       "average-infidelity budget of the post-selective over the non-post-selective scheme",
       {{"p_L", 1e-6, 1e-3, 13, true}, {"F", 0.80, 0.99, 20, false}},
       {RM::dephasing},
       {"model", "p_L", "F", "n_b", "n_p", "n_tot_ps", "n_tot_nps", "ratio"}},
      {"fig14",
       "clock cycle over (p_L, tau/(t_L C)) and gamma, with 1-F = p_I = p_M",
       {{"one_minus_F", 0.01, 0.05, 2, false}, {"p_L", 1e-6, 1e-3, 13, true}, {"tau_over_tLC", 1e-3, 10, 9, true}},
       {RM::depolarizing},
       {"model", "one_minus_F", "p_L", "tau_over_tLC", "m", "eps_M", "n_b", "n_p", "n_tot", "t_C", "tc_over_tl",
        "log10_tc_over_tl", "gamma", "log10_gamma"}},
      {"fig15",
       "as fig14 for dephasing raw pairs",
       {{"one_minus_F", 0.01, 0.05, 2, false}, {"p_L", 1e-6, 1e-3, 13, true}, {"tau_over_tLC", 1e-3, 10, 9, true}},
       {RM::dephasing},
       {"model", "one_minus_F", "p_L", "tau_over_tLC", "m", "eps_M", "n_b", "n_p", "n_tot", "t_C", "tc_over_tl",
        "log10_tc_over_tl", "gamma", "log10_gamma"}},
      {"fig16",
       "required t_mem/t_L and gamma over (p_L, 1-F), p_I = p_M = 1-F, tau/C = 0",
       {{"p_L", 1e-6, 1e-3, 13, true}, {"one_minus_F", 1e-3, 1e-1, 13, true}},
       {RM::depolarizing, RM::dephasing},
       {"model", "p_L", "one_minus_F", "m", "eps_M", "n_b", "n_p", "n_tot", "gamma", "log10_gamma", "tmem_over_tl",
        "log10_tmem_over_tl"}},
  };
  return specs;
}

inline const FigureSpec& figure_spec(const std::string& id) {
  for (const auto& s : figure_specs())
    if (s.id == id) return s;
  throw InvalidArgument("unknown figure id '" + id + "'");
}

namespace detail {

using regsim::detail::require;

struct ResolvedAxes {
  std::vector<Axis> axes;
  std::map<std::string, std::vector<double>> values;

  const std::vector<double>& operator[](const std::string& name) const { return values.at(name); }
  std::string spec() const {
    std::string s;
    for (const auto& a : axes) s += (s.empty() ? "" : ";") + a.spec();
    return s;
  }
};

inline ResolvedAxes resolve_axes(const FigureSpec& fig, const std::string& grid) {
  ResolvedAxes r;
  r.axes = fig.axes;
  for (const Axis& a : parse_grid(grid)) {
    auto it = std::find_if(r.axes.begin(), r.axes.end(), [&](const Axis& d) { return d.name == a.name; });
    if (it == r.axes.end()) throw InvalidArgument("figure " + fig.id + " has no axis '" + a.name + "'");
    *it = a;
  }
  for (const auto& a : r.axes) r.values[a.name] = a.values();
  return r;
}

inline std::vector<RawModel> resolve_models(const FigureSpec& fig, const RunConfig& cfg) {
  if (cfg.model) return {parse_raw_model(*cfg.model)};
  return fig.models;
}

inline int as_count(double v, const std::string& what) {
  const double r = std::round(v);
  require(r >= 0.0 && std::abs(r - v) < 1e-9, what + " axis values must be non-negative integers");
  return static_cast<int>(r);
}

// Calls fn(i) for every i and concatenates the returned rows in index order.
template <class Fn>
std::vector<Row> gather(std::size_t n, Fn&& fn) {
  std::vector<std::vector<Row>> parts(n);
  parallel_for(n, [&](std::size_t i) { parts[i] = fn(i); });
  std::vector<Row> out;
  for (auto& p : parts)
    for (auto& r : p) out.push_back(std::move(r));
  return out;
}

inline std::string model_name(RawModel m) { return std::string(to_string(m)); }

inline std::vector<Row> fig7_rows(const RunConfig& cfg, const ResolvedAxes& ax, RawModel model) {
  const auto& Fs = ax["F"];
  const auto& pLs = ax["p_L"];
  std::vector<int> nbs, nps;
  for (double v : ax["n_b"]) nbs.push_back(as_count(v, "n_b"));
  for (double v : ax["n_p"]) nps.push_back(as_count(v, "n_p"));
  const PumpSchedule caps{*std::max_element(nbs.begin(), nbs.end()), *std::max_element(nps.begin(), nps.end())};
  return gather(Fs.size() * pLs.size(), [&](std::size_t i) {
    const double F = Fs[i / pLs.size()], p_L = pLs[i % pLs.size()];
    const NoiseParams noise{model, F, p_L, cfg.p_I, cfg.p_M};
    const InfidelityGrid g = infidelity_grid(noise, p_L, caps);
    std::vector<Row> rows;
    for (int nb : nbs)
      for (int np : nps) {
        const double v = g.at(nb, np);
        rows.push_back({model_name(model), num(F), num(p_L), num(p_L), num(nb), num(np), num(v), num(log10_or_nan(v))});
      }
    return rows;
  });
}

inline std::vector<Row> fig9_rows(const RunConfig& cfg, const ResolvedAxes& ax, RawModel model) {
  std::vector<long> Ns;
  for (double v : ax["N_tot"]) Ns.push_back(as_count(v, "N_tot"));
  std::vector<PumpSchedule> scheds{{2, 3}, {3, 4}};
  if (cfg.n_b || cfg.n_p) scheds = {{cfg.n_b.value_or(0), cfg.n_p.value_or(0)}};
  const NoiseParams noise = cfg.noise(model);
  const double eps_M = cfg.eps_M.value_or(cfg.p_L);
  return gather(scheds.size(), [&](std::size_t i) {
    const PumpSchedule s = scheds[i];
    const InfidelityGrid g = infidelity_grid(noise, eps_M, s);
    const PumpChain ch = build_two_level_ps(g.level1_probs(s.n_b), g.level2_probs(s.n_b, s.n_p), s.n_b, s.n_p);
    const auto series = analyze_series(ch, *std::max_element(Ns.begin(), Ns.end()), g.at(s.n_b, s.n_p));
    std::vector<Row> rows;
    for (long N : Ns) {
      const double f = series[static_cast<std::size_t>(N)].fail_prob;
      rows.push_back({model_name(model), num(noise.F), num(noise.p_L), num(eps_M), num(s.n_b), num(s.n_p), num(N),
                      num(f), num(log10_or_nan(f))});
    }
    return rows;
  });
}

inline std::vector<Row> fig10_rows(const RunConfig& cfg, const ResolvedAxes& ax, RawModel model) {
  std::vector<long> Ns;
  for (double v : ax["N_tot"]) Ns.push_back(as_count(v, "N_tot"));
  const long n_max = *std::max_element(Ns.begin(), Ns.end());
  const auto& pLs = ax["p_L"];
  return gather(pLs.size(), [&](std::size_t i) {
    const NoiseParams noise{model, cfg.F, pLs[i], cfg.p_I, cfg.p_M};
    noise.validate();
    const double eps_M = cfg.eps_M.value_or(optimal_m(noise.p_I, noise.p_M, noise.p_L).eps_M);
    const PumpSchedule caps = default_caps(model);
    const InfidelityGrid g = infidelity_grid(noise, eps_M, caps);
    struct Best {
      double v = std::numeric_limits<double>::infinity();
      PumpSchedule s;
    };
    std::vector<Best> best_tep(static_cast<std::size_t>(n_max + 1)), best_aif(static_cast<std::size_t>(n_max + 1));
    for (int nb = 0; nb <= caps.n_b; ++nb)
      for (int np = 0; np <= caps.n_p; ++np) {
        const PumpSchedule s{nb, np};
        PumpChain ch = build_two_level_ps(g.level1_probs(nb), g.level2_probs(nb, np), nb, np);
        attach_infidelities(ch, g, s);
        const auto series = analyze_series(ch, n_max, g.at(nb, np));
        for (long N = 0; N <= n_max; ++N) {
          const auto& a = series[static_cast<std::size_t>(N)];
          auto& bt = best_tep[static_cast<std::size_t>(N)];
          auto& ba = best_aif[static_cast<std::size_t>(N)];
          if (a.tep < bt.v) bt = {a.tep, s};
          if (a.aif < ba.v) ba = {a.aif, s};
        }
      }
    std::vector<Row> rows;
    for (long N : Ns) {
      const auto& bt = best_tep[static_cast<std::size_t>(N)];
      const auto& ba = best_aif[static_cast<std::size_t>(N)];
      rows.push_back({model_name(model), num(noise.F), num(noise.p_L), num(eps_M), num(N), num(bt.v), num(bt.s.n_b),
                      num(bt.s.n_p), num(ba.v), num(ba.s.n_b), num(ba.s.n_p), num(log10_or_nan(bt.v)),
                      num(log10_or_nan(ba.v))});
    }
    return rows;
  });
}

inline std::vector<Row> fig11_rows(const RunConfig& cfg, const ResolvedAxes& ax, RawModel model) {
  const auto& pLs = ax["p_L"];
  const auto& Fs = ax["F"];
  const double nan = std::nan("");
  return gather(pLs.size() * Fs.size(), [&](std::size_t i) {
    const NoiseParams noise{model, Fs[i % Fs.size()], pLs[i / Fs.size()], cfg.p_I, cfg.p_M};
    Row r{model_name(model), num(noise.p_L), num(noise.F)};
    try {
      const OperatingPoint op = solve_operating_point(noise);
      const double eps_E = 2.0 * op.delta_min;
      r.insert(r.end(), {num(op.plan.m), num(op.plan.eps_M), num(op.sched.n_b), num(op.sched.n_p),
                         num(op.delta_min), num(eps_E), num(log10_or_nan(eps_E)), num(op.n_tot_tep),
                         num(op.n_tot_aif), num(std::log10(static_cast<double>(op.n_tot_tep))),
                         num(std::log10(static_cast<double>(op.n_tot_aif))),
                         num(static_cast<double>(op.n_tot_tep) / static_cast<double>(op.n_tot_aif))});
    } catch (const std::exception&) {
      while (r.size() < 15) r.push_back(num(nan));
    }
    return std::vector<Row>{r};
  });
}

inline std::vector<Row> fig13_rows(const RunConfig& cfg, const ResolvedAxes& ax, RawModel model) {
  const auto& pLs = ax["p_L"];
  const auto& Fs = ax["F"];
  const double nan = std::nan("");
  return gather(pLs.size() * Fs.size(), [&](std::size_t i) {
    const NoiseParams noise{model, Fs[i % Fs.size()], pLs[i / Fs.size()], cfg.p_I, cfg.p_M};
    Row r{model_name(model), num(noise.p_L), num(noise.F)};
    try {
      const double eps_M = cfg.eps_M.value_or(optimal_m(noise.p_I, noise.p_M, noise.p_L).eps_M);
      const NtotSolution ps = solve_ntot(noise, eps_M, TargetMode::aif, PumpScheme::ps);
      const NtotSolution nps = solve_ntot(noise, eps_M, TargetMode::aif, PumpScheme::nps);
      r.insert(r.end(), {num(ps.sched.n_b), num(ps.sched.n_p), num(ps.N_tot), num(nps.N_tot),
                         num(static_cast<double>(ps.N_tot) / static_cast<double>(nps.N_tot))});
    } catch (const std::exception&) {
      while (r.size() < 8) r.push_back(num(nan));
    }
    return std::vector<Row>{r};
  });
}

inline std::vector<Row> clock_rows(const RunConfig& cfg, const ResolvedAxes& ax, RawModel model) {
  const auto& omfs = ax["one_minus_F"];
  const auto& pLs = ax["p_L"];
  const auto& taus = ax["tau_over_tLC"];
  const double nan = std::nan("");
  return gather(omfs.size() * pLs.size(), [&](std::size_t i) {
    const double e = omfs[i / pLs.size()];
    const NoiseParams noise{model, 1.0 - e, pLs[i % pLs.size()], e, e};
    std::vector<Row> rows;
    std::optional<OperatingPoint> op;
    try {
      op = solve_operating_point(noise);
    } catch (const std::exception&) {
    }
    for (double x : taus) {
      Row r{model_name(model), num(e), num(noise.p_L), num(x)};
      if (op) {
        TimingParams tp = cfg.timing;
        tp.C = 1.0;
        tp.tau = x * tp.t_L;
        const GateMetrics g = metrics_for(*op, tp);
        const double ratio = g.t_C / tp.t_L;
        r.insert(r.end(), {num(op->plan.m), num(op->plan.eps_M), num(op->sched.n_b), num(op->sched.n_p),
                           num(op->n_tot_tep), num(g.t_C), num(ratio), num(log10_or_nan(ratio)), num(g.gamma),
                           num(log10_or_nan(g.gamma))});
      } else {
        while (r.size() < 14) r.push_back(num(nan));
      }
      rows.push_back(std::move(r));
    }
    return rows;
  });
}

inline std::vector<Row> fig16_rows(const RunConfig&, const ResolvedAxes& ax, RawModel model) {
  const auto& pLs = ax["p_L"];
  const auto& omfs = ax["one_minus_F"];
  const double nan = std::nan("");
  return gather(pLs.size() * omfs.size(), [&](std::size_t i) {
    const double e = omfs[i % omfs.size()];
    const NoiseParams noise{model, 1.0 - e, pLs[i / omfs.size()], e, e};
    Row r{model_name(model), num(noise.p_L), num(e)};
    try {
      const OperatingPoint op = solve_operating_point(noise);
      const double gamma = 2.0 * op.delta_min + 2.0 * noise.p_L + 2.0 * op.plan.eps_M;
      const double req = memory_requirement(op.plan.m, op.n_tot_tep, gamma);
      r.insert(r.end(), {num(op.plan.m), num(op.plan.eps_M), num(op.sched.n_b), num(op.sched.n_p),
                         num(op.n_tot_tep), num(gamma), num(log10_or_nan(gamma)), num(req),
                         num(log10_or_nan(req))});
    } catch (const std::exception&) {
      while (r.size() < 12) r.push_back(num(nan));
    }
    return std::vector<Row>{r};
  });
}

}  // namespace detail

inline std::string cmd_contours(const RunConfig& cfg) {
  if (cfg.figure.empty()) throw InvalidArgument("contours needs a figure id");
  const FigureSpec& fig = figure_spec(cfg.figure);
  const detail::ResolvedAxes ax = detail::resolve_axes(fig, cfg.grid);
  const auto models = detail::resolve_models(fig, cfg);
  std::vector<Row> rows;
  for (RawModel m : models) {
    std::vector<Row> part;
    if (fig.id == "fig7") part = detail::fig7_rows(cfg, ax, m);
    else if (fig.id == "fig9") part = detail::fig9_rows(cfg, ax, m);
    else if (fig.id == "fig10") part = detail::fig10_rows(cfg, ax, m);
    else if (fig.id == "fig11") part = detail::fig11_rows(cfg, ax, m);
    else if (fig.id == "fig13") part = detail::fig13_rows(cfg, ax, m);
    else if (fig.id == "fig14" || fig.id == "fig15") part = detail::clock_rows(cfg, ax, m);
    else part = detail::fig16_rows(cfg, ax, m);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  json c = cfg.to_json();
  c["grid"] = ax.spec();
  std::vector<std::string> names;
  for (RawModel m : models) names.push_back(detail::model_name(m));
  c["model"] = names;
  return render_csv(c, fig.columns, rows);
}

// ---- table1 ------------------------------------------------------------------

struct Table1Cell {
  RawModel model = RawModel::depolarizing;
  double F = 0.0;
  double p_L = 0.0;
  OperatingPoint op;
  GateMetrics tep;
  GateMetrics aif;
};

inline std::vector<Table1Cell> table1_cells(const TimingParams& tp = {}) {
  std::vector<Table1Cell> cells;
  for (RawModel m : {RawModel::depolarizing, RawModel::dephasing})
    for (double F : {0.95, 0.99})
      for (double p_L : {1e-3, 1e-4, 1e-5, 1e-6}) cells.push_back({m, F, p_L, {}, {}, {}});
  parallel_for(cells.size(), [&](std::size_t i) {
    Table1Cell& c = cells[i];
    const double e = 1.0 - c.F;
    c.op = solve_operating_point({c.model, c.F, c.p_L, e, e});
    c.tep = metrics_for(c.op, tp, TargetMode::tep);
    c.aif = metrics_for(c.op, tp, TargetMode::aif);
  });
  return cells;
}

inline const std::vector<std::string>& table1_columns() {
  static const std::vector<std::string> c{"model", "F",         "p_L",       "m",        "eps_M",
                                          "n_b",   "n_p",       "delta_min", "n_tot_tep", "n_tot_aif",
                                          "t_C_us", "t_C_aif_us", "gamma",   "tc_over_tl_limit"};
  return c;
}

inline std::string cmd_table1(const RunConfig& cfg, bool as_csv) {
  const auto cells = table1_cells(cfg.timing);
  if (as_csv) {
    std::vector<Row> rows;
    for (const auto& c : cells)
      rows.push_back({detail::model_name(c.model), num(c.F), num(c.p_L), num(c.op.plan.m), num(c.op.plan.eps_M),
                      num(c.op.sched.n_b), num(c.op.sched.n_p), num(c.op.delta_min), num(c.op.n_tot_tep),
                      num(c.op.n_tot_aif), num(c.tep.t_C * 1e6), num(c.aif.t_C * 1e6), num(c.tep.gamma),
                      num(c.tep.tc_over_tl_limit)});
    return render_csv(cfg.to_json(), table1_columns(), rows);
  }
  json out;
  out["config"] = cfg.to_json();
  out["cells"] = json::array();
  for (const auto& c : cells) {
    out["cells"].push_back({{"model", detail::model_name(c.model)},
                            {"F", c.F},
                            {"p_L", c.p_L},
                            {"m", c.op.plan.m},
                            {"eps_M", c.op.plan.eps_M},
                            {"n_b", c.op.sched.n_b},
                            {"n_p", c.op.sched.n_p},
                            {"delta_min", c.op.delta_min},
                            {"n_tot_tep", c.op.n_tot_tep},
                            {"n_tot_aif", c.op.n_tot_aif},
                            {"t_C_us", c.tep.t_C * 1e6},
                            {"t_C_aif_us", c.aif.t_C * 1e6},
                            {"gamma", c.tep.gamma},
                            {"tc_over_tl_limit", c.tep.tc_over_tl_limit}});
  }
  return out.dump(2) + "\n";
}

// ---- ghz ---------------------------------------------------------------------

inline json ghz_circuit_json(const GhzCircuit& c) {
  auto pairs = [](const std::vector<RegisterPair>& v) {
    json a = json::array();
    for (auto [x, y] : v) a.push_back({x, y});
    return a;
  };
  json j;
  j["k"] = c.k;
  j["registers"] = c.n;
  j["depth"] = c.depth();
  j["pbm_count"] = c.pbm_count();
  j["cycles"] = json::array();
  for (const auto& cyc : c.cycles) j["cycles"].push_back(pairs(cyc));
  j["tree"] = pairs(c.tree);
  j["redundancy"] = pairs(c.redundancy_pbms);
  return j;
}

inline json cmd_ghz(const RunConfig& cfg) {
  const GhzCircuit circ = ghz_schedule(cfg.k);
  const std::uint64_t n = cfg.samples.value_or(1'000'000);
  json out;
  out["config"] = cfg.to_json();
  out["circuit"] = ghz_circuit_json(circ);
  out["points"] = json::array();
  std::vector<double> ps, rates;
  for (std::size_t i = 0; i < cfg.p_values.size(); ++i) {
    const double p = cfg.p_values[i];
    const GhzFaultStats st = ghz_fault_injection(circ, p, n, splitmix64(cfg.seed + i));
    out["points"].push_back({{"p", p},
                             {"samples", st.n_samples},
                             {"detected", st.detected},
                             {"undetected_multi", st.undetected_multi},
                             {"undetected_single", st.undetected_single},
                             {"multi_rate", st.multi_rate},
                             {"multi_rate_all", st.multi_rate_all},
                             {"per_register_rate", st.per_register_rate},
                             {"per_register_over_p", p > 0.0 ? json(st.per_register_rate / p) : json(nullptr)}});
    if (p > 0.0 && st.multi_rate > 0.0) {
      ps.push_back(p);
      rates.push_back(st.multi_rate);
    }
  }
  out["multi_rate_slope"] = ps.size() >= 2 ? json(loglog_slope(ps, rates)) : json(nullptr);
  return out;
}

// ---- validate ----------------------------------------------------------------

struct ValidationCase {
  std::string name;
  NoiseParams noise;
  double eps_M = 0.0;
  PumpSchedule sched;
  long n_tot = 0;
  PumpScheme scheme = PumpScheme::ps;
  double p_gen = 1.0;
};

inline std::vector<ValidationCase> default_validation_suite() {
  using RM = RawModel;
  return {
      {"ps/depolarizing/(2,3)/N=40", {RM::depolarizing, 0.95, 1e-4, 0.05, 0.05}, 1e-4, {2, 3}, 40},
      {"ps/depolarizing/(3,4)/N=80", {RM::depolarizing, 0.95, 1e-4, 0.05, 0.05}, 1e-4, {3, 4}, 80},
      {"ps/dephasing/(0,4)/N=20", {RM::dephasing, 0.90, 1e-4, 0.05, 0.05}, 1e-3, {0, 4}, 20},
      // The level-2 score chain is exact for noiseless steps only; keep the noise small here.
      {"nps/depolarizing/(1,3)/N=30", {RM::depolarizing, 0.90, 1e-5, 0.05, 0.05}, 1e-5, {1, 3}, 30, PumpScheme::nps},
      {"nps/dephasing/(0,5)/N=25", {RM::dephasing, 0.85, 1e-5, 0.05, 0.05}, 1e-5, {0, 5}, 25, PumpScheme::nps},
      {"generation/depolarizing/(1,2)/N=40",
       {RM::depolarizing, 0.95, 1e-4, 0.05, 0.05},
       1e-4,
       {1, 2},
       40,
       PumpScheme::ps,
       0.5},
  };
}

struct ValidationReport {
  json report;
  bool pass = true;
};

// Chain prediction of the failure probability, with every step success
// probability scaled by (1 - perturb).
inline double chain_failure(const ValidationCase& vc, double perturb) {
  const InfidelityGrid g = infidelity_grid(vc.noise, vc.eps_M, vc.sched);
  auto q = g.level1_probs(vc.sched.n_b);
  auto Q = g.level2_probs(vc.sched.n_b, vc.sched.n_p);
  for (double& v : q) v *= 1.0 - perturb;
  for (double& v : Q) v *= 1.0 - perturb;
  PumpChain ch = build_chain(vc.scheme, q, Q, vc.sched);
  if (vc.p_gen < 1.0) ch = add_generation_sublevel(ch, vc.p_gen);
  return fail_prob(ch, vc.n_tot);
}

inline ValidationReport cmd_validate(const RunConfig& cfg) {
  regsim::detail::require(cfg.perturb >= 0.0 && cfg.perturb < 1.0, "perturb must lie in [0,1)");
  const std::uint64_t n = cfg.samples.value_or(200'000);
  const auto suite = default_validation_suite();
  ValidationReport vr;
  vr.report["config"] = cfg.to_json();
  vr.report["checks"] = json::array();
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const ValidationCase& vc = suite[i];
    const double expected = chain_failure(vc, cfg.perturb);
    const TrajectoryStats st =
        simulate({vc.noise, vc.eps_M, vc.sched, vc.n_tot, n, splitmix64(cfg.seed + i), vc.scheme, vc.p_gen});
    const double z = binomial_z(st.fail_prob, expected, n);
    const bool ok = z <= 3.0;
    vr.pass = vr.pass && ok;
    vr.report["checks"].push_back({{"name", vc.name},
                                   {"expected_fail_prob", expected},
                                   {"empirical_fail_prob", st.fail_prob},
                                   {"samples", n},
                                   {"z", z},
                                   {"pass", ok}});
  }
  vr.report["pass"] = vr.pass;
  return vr;
}

}  // namespace regsim::cli
