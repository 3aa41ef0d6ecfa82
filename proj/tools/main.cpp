// Command line front end: pulse transmission, photon correlations, Raman
// counting statistics, the reduced rate model, ion detection statistics,
// parameter fits and two-parameter sweeps, all driven by one JSON config.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sasim/counting.hpp"
#include "sasim/detection.hpp"
#include "sasim/fit.hpp"
#include "sasim/harness.hpp"
#include "sasim/observables.hpp"
#include "sasim/propagator.hpp"
#include "sasim/reduced.hpp"

namespace {

using nlohmann::json;
using namespace sasim;

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& def_out) {
  cmd->add_option("-c,--config", args.config_path, "JSON config file")
      ->required();
  cmd->add_option("-o,--out", args.out_path, "output file")
      ->default_val(def_out);
  cmd->add_option("--seed", args.seed, "override solver.seed");
  cmd->add_option("--threads", args.threads, "override solver.threads");
}

/// Loads the config and folds the CLI overrides into the JSON itself, so the
/// echoed config and its hash describe the run as executed.
json resolved_config(const CommonArgs& args) {
  json j = load_config_file(args.config_path);
  if (args.seed) j["solver"]["seed"] = *args.seed;
  if (args.threads) j["solver"]["threads"] = *args.threads;
  return j;
}

void write_meta(const std::string& out_path, const std::string& command,
                const json& config, const ChainConfig& cfg,
                json extra = json::object()) {
  json meta;
  meta["tool_version"] = kToolVersion;
  meta["command"] = command;
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  meta["config_hash"] = hex;
  meta["seed"] = cfg.solver.seed;
  meta["threads"] = cfg.solver.threads;
  meta["config"] = config;
  for (auto it = extra.begin(); it != extra.end(); ++it)
    meta[it.key()] = it.value();
  std::ofstream out(out_path + ".meta.json");
  if (!out) throw ConfigError("cannot write " + out_path + ".meta.json");
  out << meta.dump(2) << "\n";
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const CommonArgs& args) {
  const json j = resolved_config(args);
  const ChainConfig cfg = config_from_json(j);
  const DensityState st = evolve_me(cfg);
  const RateTrace tr = output_rate(st, cfg);
  const PulseMetrics pm = exact_metrics(st);

  std::vector<std::string> header{"time_us", "r_in_per_us", "r_out_per_us"};
  std::vector<Eigen::MatrixXd> pops;
  for (int s = 0; s < cfg.n_sub; ++s) {
    pops.push_back(populations(st, s));
    const std::string suffix = std::to_string(s);
    header.push_back("p_g_" + suffix);
    header.push_back("p_w_" + suffix);
    header.push_back("p_d_" + suffix);
  }
  header.push_back("p_ryd_total");
  header.push_back("raman_loss_integral");

  std::vector<std::vector<double>> rows;
  rows.reserve(st.times.size());
  const std::vector<double> ryd = total_rydberg(st);
  for (std::size_t i = 0; i < st.times.size(); ++i) {
    std::vector<double> row{st.times[i], tr.r_in[i], tr.r_out[i]};
    for (int s = 0; s < cfg.n_sub; ++s)
      for (int a = 0; a < 3; ++a)
        row.push_back(pops[static_cast<std::size_t>(s)](
            static_cast<Eigen::Index>(i), a));
    row.push_back(ryd[i]);
    row.push_back(st.raman_integral[i]);
    rows.push_back(std::move(row));
  }
  write_csv(args.out_path, header, rows);

  json extra;
  extra["n_in"] = pm.n_in;
  extra["n_out"] = pm.n_out;
  extra["n_subtracted"] = pm.n_subtracted;
  extra["conservation_residual"] = conservation_residual(st, cfg);
  write_meta(args.out_path, "simulate", j, cfg, extra);
  std::printf("n_in %.6f  n_out %.6f  subtracted %.6f\n", pm.n_in, pm.n_out,
              pm.n_subtracted);
  return 0;
}

// ---- g2 ---------------------------------------------------------------

std::vector<double> thin_grid(const std::vector<double>& tg, int npts) {
  const std::size_t n = tg.size();
  const std::size_t want = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::max(2, npts)));
  std::vector<double> out;
  std::size_t last = n; // invalid
  for (std::size_t k = 0; k < want; ++k) {
    const std::size_t i = (k * (n - 1)) / (want - 1);
    if (i != last) out.push_back(tg[i]);
    last = i;
  }
  return out;
}

int cmd_g2(const CommonArgs& args, int points) {
  const json j = resolved_config(args);
  const ChainConfig cfg = config_from_json(j);
  const std::vector<double> grid = thin_grid(cfg.t_grid, points);
  const G2Map map = g2_map(cfg, grid, cfg.solver.threads);

  std::vector<std::vector<double>> rows;
  rows.reserve(grid.size() * grid.size());
  for (std::size_t i1 = 0; i1 < grid.size(); ++i1)
    for (std::size_t i2 = 0; i2 < grid.size(); ++i2)
      rows.push_back({grid[i1], grid[i2],
                      map.g2(static_cast<Eigen::Index>(i1),
                             static_cast<Eigen::Index>(i2)),
                      map.masked(static_cast<Eigen::Index>(i1),
                                 static_cast<Eigen::Index>(i2))
                          ? 1.0
                          : 0.0});
  write_csv(args.out_path, {"t1_us", "t2_us", "g2", "masked"}, rows);
  write_meta(args.out_path, "g2", j, cfg,
             {{"grid_points", grid.size()}});
  return 0;
}

// ---- count ------------------------------------------------------------

int cmd_count(const CommonArgs& args, int max_count) {
  const json j = resolved_config(args);
  const ChainConfig cfg = config_from_json(j);
  const CountingState cs = evolve_counting(cfg, max_count);
  const RamanMoments rm = raman_moments(cs);

  std::vector<std::string> header{"time_us"};
  for (int m = 0; m <= cs.max_count; ++m)
    header.push_back("p" + std::to_string(m));
  header.push_back("mean");
  header.push_back("variance");
  header.push_back("raman_loss_integral");

  std::vector<std::vector<double>> rows;
  rows.reserve(cs.times.size());
  for (std::size_t i = 0; i < cs.times.size(); ++i) {
    std::vector<double> row{cs.times[i]};
    for (int m = 0; m <= cs.max_count; ++m)
      row.push_back(cs.prob(m, static_cast<Eigen::Index>(i)));
    row.push_back(rm.mean[i]);
    row.push_back(rm.variance[i]);
    row.push_back(cs.loss_integral[i]);
    rows.push_back(std::move(row));
  }
  write_csv(args.out_path, header, rows);
  write_meta(args.out_path, "count", j, cfg,
             {{"max_count", cs.max_count}, {"overflow", cs.overflow}});
  if (cs.overflow)
    std::fprintf(stderr,
                 "warning: count register overflowed (P(max) > 1e-6); "
                 "rerun with a larger --max-count\n");
  return 0;
}

// ---- adiabatic ----------------------------------------------------------

int cmd_adiabatic(const CommonArgs& args) {
  const json j = resolved_config(args);
  const ChainConfig cfg = config_from_json(j);
  const RateModelResult rm = evolve_rate_equation(cfg);
  const DensityState st = evolve_me(cfg);
  const Eigen::MatrixXd pop = populations(st, 0);

  std::vector<std::vector<double>> rows;
  rows.reserve(rm.times.size());
  for (std::size_t i = 0; i < rm.times.size(); ++i)
    rows.push_back({rm.times[i], rm.rho_gg[i], rm.rho_dd[i],
                    pop(static_cast<Eigen::Index>(i), 0),
                    pop(static_cast<Eigen::Index>(i), 1),
                    pop(static_cast<Eigen::Index>(i), 2)});
  write_csv(args.out_path,
            {"time_us", "p_g_reduced", "p_d_reduced", "p_g_me", "p_w_me",
             "p_d_me"},
            rows);

  const SuperatomParams& p = cfg.site(0);
  json extra;
  extra["gamma_eff_peak_per_us"] =
      gamma_eff(p.kappa, cfg.pulse.peak_rate(), p.gamma_d, p.gamma_raman);
  write_meta(args.out_path, "adiabatic", j, cfg, extra);
  return 0;
}

// ---- ions ---------------------------------------------------------------

int cmd_ions(const CommonArgs& args, double n_in_override, int samples) {
  const json j = resolved_config(args);
  const ChainConfig cfg = config_from_json(j);
  const std::vector<DetectionParams> det = detection_from_json(
      j.contains("detection") ? j["detection"] : json::object(), cfg.n_sub);

  const DensityState st = evolve_me(cfg);
  std::vector<double> p_ryd(static_cast<std::size_t>(cfg.n_sub));
  for (int s = 0; s < cfg.n_sub; ++s) {
    const Eigen::MatrixXd pop = populations(st, s);
    p_ryd[static_cast<std::size_t>(s)] =
        pop(pop.rows() - 1, 1) + pop(pop.rows() - 1, 2);
  }
  const double n_in = n_in_override > 0.0 ? n_in_override
                                          : cfg.pulse.mean_photons;
  const IonStats stats = ion_statistics(p_ryd, n_in, det);

  std::vector<std::vector<double>> rows;
  for (std::size_t s = 0; s < p_ryd.size(); ++s)
    rows.push_back({static_cast<double>(s), p_ryd[s],
                    stats.per_absorber[s].mean, stats.per_absorber[s].variance,
                    stats.per_absorber[s].mandel_q});
  double ryd_sum = 0.0;
  for (double p : p_ryd) ryd_sum += p;
  rows.push_back({-1.0, ryd_sum, stats.total.mean, stats.total.variance,
                  stats.total.mandel_q});
  write_csv(args.out_path, {"absorber", "p_ryd", "mean", "variance", "mandel_q"},
            rows);

  if (samples > 0) {
    Rng rng(cfg.solver.seed);
    std::vector<std::vector<long>> per(p_ryd.size());
    for (int k = 0; k < samples; ++k) {
      const std::vector<long> c = sample_ion_counts(rng, p_ryd, n_in, det);
      for (std::size_t s = 0; s < c.size(); ++s) per[s].push_back(c[s]);
    }
    std::vector<std::vector<double>> erows;
    for (std::size_t s = 0; s < per.size(); ++s) {
      const IonChannelStats e = mandel_q_empirical(per[s]);
      erows.push_back({static_cast<double>(s), e.mean, e.variance, e.mandel_q});
    }
    write_csv(args.out_path + ".samples.csv",
              {"absorber", "emp_mean", "emp_variance", "emp_mandel_q"}, erows);
  }

  write_meta(args.out_path, "ions", j, cfg,
             {{"n_in", n_in}, {"samples", samples}});
  return 0;
}

// ---- fit ----------------------------------------------------------------

int cmd_fit(const CommonArgs& args, const std::string& data_path,
            int max_iterations) {
  const json j = resolved_config(args);
  const ChainConfig base = config_from_json(j);
  const TransmissionDataset data = load_dataset(data_path);

  FitOptions opts;
  if (max_iterations > 0) opts.max_iterations = max_iterations;
  const FitResult res = fit_params(data, base, base.site(0), opts);

  json out;
  out["kappa_per_us"] = res.params.kappa;
  out["gamma_raman_per_us"] = res.params.gamma_raman;
  out["gamma_d_per_us"] = res.params.gamma_d;
  out["residual"] = res.residual;
  out["iterations"] = res.iterations;
  out["converged"] = res.converged;
  std::ofstream f(args.out_path);
  if (!f) throw ConfigError("cannot write " + args.out_path);
  f << out.dump(2) << "\n";

  write_meta(args.out_path, "fit", j, base, {{"data", data_path}});
  std::printf("kappa %.6g  gamma_raman %.6g  gamma_d %.6g  (residual %.6g, "
              "%d iterations%s)\n",
              res.params.kappa, res.params.gamma_raman, res.params.gamma_d,
              res.residual, res.iterations,
              res.converged ? "" : ", not converged");
  return res.converged ? 0 : 4;
}

// ---- sweep ----------------------------------------------------------------

int cmd_sweep(const CommonArgs& args, const std::string& format) {
  const json j = resolved_config(args);
  SweepSpec spec = sweep_from_json(j);
  ResultTable table = run_sweep(spec, spec.base.solver.threads);
  table.config_hash = config_hash(j);
  for (const std::string& d : table.diagnostics)
    std::fprintf(stderr, "warning: sweep point failed: %s\n", d.c_str());
  if (format == "json")
    write_result_table_json(table, args.out_path);
  else
    write_result_table_csv(table, args.out_path);
  write_meta(args.out_path, "sweep", j, spec.base,
             {{"rows", table.rows.size()}});
  return 0;
}

// ---- chain ---------------------------------------------------------------

int cmd_chain(const CommonArgs& args, int n_traj_override,
              const std::string& counts_out) {
  const json j = resolved_config(args);
  ChainConfig cfg = config_from_json(j);
  if (n_traj_override > 0) cfg.solver.n_traj = n_traj_override;
  if (cfg.solver.n_traj < 1)
    throw ConfigError("chain needs solver.n_traj >= 1");

  const TrajectoryEnsemble ens =
      run_trajectories(cfg, cfg.solver.n_traj, cfg.solver.seed);

  std::vector<std::string> header{"time_us"};
  for (int s = 0; s < cfg.n_sub; ++s) {
    const std::string suffix = std::to_string(s);
    header.push_back("p_g_" + suffix);
    header.push_back("p_w_" + suffix);
    header.push_back("p_d_" + suffix);
  }
  header.push_back("p_ryd_total");
  std::vector<std::vector<double>> rows;
  rows.reserve(ens.sample_times.size());
  for (std::size_t i = 0; i < ens.sample_times.size(); ++i) {
    std::vector<double> row{ens.sample_times[i]};
    double ryd = 0.0;
    for (int s = 0; s < cfg.n_sub; ++s)
      for (int a = 0; a < 3; ++a) {
        const double p = ens.mean_populations(s * 3 + a,
                                              static_cast<Eigen::Index>(i));
        row.push_back(p);
        if (a != 0) ryd += p;
      }
    row.push_back(ryd);
    rows.push_back(std::move(row));
  }
  write_csv(args.out_path, header, rows);

  const double t_end = ens.sample_times.back();
  if (!counts_out.empty()) {
    const CountDistribution cd = trajectory_count_distribution(ens, t_end);
    std::vector<std::vector<double>> crow;
    for (std::size_t i = 0; i < cd.m.size(); ++i)
      crow.push_back({static_cast<double>(cd.m[i]), cd.prob[i], cd.stderr_[i]});
    write_csv(counts_out, {"m", "prob", "stderr"}, crow);
  }

  json extra;
  extra["n_traj"] = cfg.solver.n_traj;
  extra["raman_mean"] = ens.raman_mean(t_end);
  extra["raman_mean_stderr"] = ens.raman_mean_stderr(t_end);
  write_meta(args.out_path, "chain", j, cfg, extra);
  std::printf("%d trajectories, mean raman count %.4f +- %.4f\n",
              cfg.solver.n_traj, ens.raman_mean(t_end),
              ens.raman_mean_stderr(t_end));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon subtraction by chained saturable absorbers"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonArgs a_sim, a_g2, a_count, a_adia, a_ions, a_fit, a_sweep, a_chain;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Master equation run: rates, populations, conservation");
  add_common(sim, a_sim, "simulate.csv");

  CLI::App* g2 = app.add_subcommand(
      "g2", "Two-time correlation map of the transmitted field");
  add_common(g2, a_g2, "g2.csv");
  int g2_points = 60;
  g2->add_option("--points", g2_points, "correlation grid size per axis")
      ->check(CLI::Range(2, 2000));

  CLI::App* count = app.add_subcommand(
      "count", "Raman jump counting statistics P(m, t)");
  add_common(count, a_count, "count.csv");
  int max_count = -1;
  count->add_option("--max-count", max_count,
                    "count register size (default: auto)");

  CLI::App* adia = app.add_subcommand(
      "adiabatic", "Reduced two-level rate model against the master equation");
  add_common(adia, a_adia, "adiabatic.csv");

  CLI::App* ions = app.add_subcommand(
      "ions", "Ion detection statistics at the end of the pulse");
  add_common(ions, a_ions, "ions.csv");
  double n_in = 0.0;
  int samples = 0;
  ions->add_option("--n-in", n_in,
                   "input photon number for the false-positive terms "
                   "(default: pulse mean)");
  ions->add_option("--samples", samples,
                   "also draw this many Monte Carlo readouts");

  CLI::App* fit = app.add_subcommand(
      "fit", "Fit kappa, gamma_raman, gamma_d to transmission traces");
  add_common(fit, a_fit, "fit.json");
  std::string data_path;
  int fit_iters = 0;
  fit->add_option("--data", data_path, "dataset manifest CSV")->required();
  fit->add_option("--max-iterations", fit_iters, "simplex iteration cap");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Two-parameter grid scan of a scalar observable");
  add_common(sweep, a_sweep, "sweep.csv");
  std::string format = "csv";
  sweep->add_option("--format", format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* chain = app.add_subcommand(
      "chain", "Quantum trajectory ensemble of the absorber chain");
  add_common(chain, a_chain, "chain.csv");
  int n_traj = 0;
  std::string counts_out;
  chain->add_option("--traj", n_traj, "override solver.n_traj");
  chain->add_option("--counts-out", counts_out,
                    "also write the trajectory Raman count histogram here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(a_sim);
    if (g2->parsed()) return cmd_g2(a_g2, g2_points);
    if (count->parsed()) return cmd_count(a_count, max_count);
    if (adia->parsed()) return cmd_adiabatic(a_adia);
    if (ions->parsed()) return cmd_ions(a_ions, n_in, samples);
    if (fit->parsed()) return cmd_fit(a_fit, data_path, fit_iters);
    if (sweep->parsed()) return cmd_sweep(a_sweep, format);
    if (chain->parsed()) return cmd_chain(a_chain, n_traj, counts_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    // exit code 4 is reserved for fit non-convergence; anything else
    // unexpected is reported as a numerical failure
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
