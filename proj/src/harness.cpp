#include "sasim/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sasim/observables.hpp"
#include "sasim/propagator.hpp"

namespace sasim {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const char* section) {
  const auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(section) + " is missing \"" + key + "\"");
  return *it;
}

double num(const json& v, const char* what) {
  if (!v.is_number())
    throw ConfigError(std::string(what) + " must be a number");
  return v.get<double>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* section) {
  if (!j.is_object())
    throw ConfigError(std::string(section) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("unknown key \"" + it.key() + "\" in " + section);
  }
}

std::vector<double> number_array(const json& v, const char* what) {
  if (!v.is_array())
    throw ConfigError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(num(x, what));
  return out;
}

}  // namespace

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return j;
}

ChainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ChainConfig cfg;

  const json& chain = require(j, "chain", "config");
  check_keys(chain,
             {"n_sub", "kappa_per_us", "gamma_raman_per_us", "gamma_d_per_us",
              "absorbers", "microscopic"},
             "chain");
  cfg.n_sub = chain.value("n_sub", 1);

  const bool inline_rates = chain.contains("kappa_per_us");
  const int sources = (inline_rates ? 1 : 0) +
                      (chain.contains("absorbers") ? 1 : 0) +
                      (chain.contains("microscopic") ? 1 : 0);
  if (sources != 1)
    throw ConfigError(
        "chain needs exactly one rate source: kappa_per_us (shared), "
        "absorbers, or microscopic");

  if (chain.contains("absorbers")) {
    const json& arr = chain["absorbers"];
    if (!arr.is_array() || arr.empty())
      throw ConfigError("absorbers must be a non-empty array");
    for (const auto& a : arr) {
      check_keys(a, {"kappa_per_us", "gamma_raman_per_us", "gamma_d_per_us"},
                 "absorbers[]");
      SuperatomParams p;
      p.kappa = num(require(a, "kappa_per_us", "absorbers[]"), "kappa_per_us");
      p.gamma_raman = a.value("gamma_raman_per_us", 0.0);
      p.gamma_d = a.value("gamma_d_per_us", 0.0);
      cfg.params.push_back(p);
    }
  } else if (chain.contains("microscopic")) {
    const json& m = chain["microscopic"];
    check_keys(m,
               {"gamma_e_per_us", "omega_c_rad_per_us", "delta_rad_per_us",
                "g0_rad_per_us", "n_atoms", "c6", "linewidth",
                "gamma_d_per_us"},
               "microscopic");
    MicroscopicParams mp;
    mp.gamma_e = num(require(m, "gamma_e_per_us", "microscopic"), "gamma_e_per_us");
    mp.omega_c = num(require(m, "omega_c_rad_per_us", "microscopic"), "omega_c_rad_per_us");
    mp.delta = num(require(m, "delta_rad_per_us", "microscopic"), "delta_rad_per_us");
    mp.g0 = num(require(m, "g0_rad_per_us", "microscopic"), "g0_rad_per_us");
    mp.n_atoms = m.value("n_atoms", 0L);
    mp.c6 = m.value("c6", 1.0);
    mp.linewidth = m.value("linewidth", 1.0);
    SuperatomParams p = effective_rates(mp);
    p.gamma_d = m.value("gamma_d_per_us", 0.0); // dephasing is not derived
    cfg.params.assign(1, p);
  } else {
    SuperatomParams p;
    p.kappa = num(require(chain, "kappa_per_us", "chain"), "kappa_per_us");
    p.gamma_raman = chain.value("gamma_raman_per_us", 0.0);
    p.gamma_d = chain.value("gamma_d_per_us", 0.0);
    cfg.params.assign(1, p);
  }

  const json& pj = require(j, "pulse", "config");
  check_keys(pj,
             {"shape", "mean_photons", "fwhm_us", "ramp_us", "start_us",
              "times_us", "rates_per_us"},
             "pulse");
  const std::string shape = pj.value("shape", std::string("tukey"));
  if (shape == "flat")
    cfg.pulse.shape = PulseSpec::Shape::Flat;
  else if (shape == "tukey")
    cfg.pulse.shape = PulseSpec::Shape::Tukey;
  else if (shape == "samples")
    cfg.pulse.shape = PulseSpec::Shape::Samples;
  else
    throw ConfigError("pulse shape must be flat, tukey or samples");
  if (cfg.pulse.shape == PulseSpec::Shape::Samples) {
    cfg.pulse.times_us = number_array(require(pj, "times_us", "pulse"), "times_us");
    cfg.pulse.rates_per_us =
        number_array(require(pj, "rates_per_us", "pulse"), "rates_per_us");
    cfg.pulse.mean_photons = pj.value("mean_photons", 0.0);
  } else {
    cfg.pulse.mean_photons =
        num(require(pj, "mean_photons", "pulse"), "mean_photons");
    cfg.pulse.fwhm_us = num(require(pj, "fwhm_us", "pulse"), "fwhm_us");
    cfg.pulse.ramp_us = pj.value("ramp_us", 0.0);
  }
  cfg.pulse.start_us = pj.value("start_us", 0.0);

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, {"rtol", "atol", "max_step_us", "n_traj", "seed", "threads"},
               "solver");
    cfg.solver.rtol = s.value("rtol", cfg.solver.rtol);
    cfg.solver.atol = s.value("atol", cfg.solver.atol);
    cfg.solver.max_step_us = s.value("max_step_us", cfg.solver.max_step_us);
    cfg.solver.n_traj = s.value("n_traj", cfg.solver.n_traj);
    cfg.solver.seed = s.value("seed", cfg.solver.seed);
    cfg.solver.threads = s.value("threads", cfg.solver.threads);
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"times_us", "t_end_us", "points_per_unit"}, "grid");
    if (g.contains("times_us")) {
      cfg.t_grid = number_array(g["times_us"], "grid times_us");
    } else {
      cfg.t_grid = make_time_grid(cfg.pulse, cfg.params,
                                  g.value("t_end_us", -1.0),
                                  g.value("points_per_unit", 40.0));
    }
  } else {
    cfg.t_grid = make_time_grid(cfg.pulse, cfg.params);
  }

  cfg.validate();
  return cfg;
}

std::vector<DetectionParams> detection_from_json(const nlohmann::json& j,
                                                 int n_sub) {
  auto parse_one = [](const json& d) {
    check_keys(d, {"eta", "p2", "dark_mean", "noise_scale"}, "detection");
    DetectionParams p;
    p.eta = d.value("eta", p.eta);
    p.p2 = d.value("p2", p.p2);
    p.dark_mean = d.value("dark_mean", p.dark_mean);
    p.noise_scale = d.value("noise_scale", p.noise_scale);
    p.validate();
    return p;
  };
  std::vector<DetectionParams> out;
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != n_sub)
      throw ConfigError("detection array must have one entry per absorber");
    for (const auto& d : j) out.push_back(parse_one(d));
  } else {
    out.assign(static_cast<std::size_t>(n_sub), parse_one(j));
  }
  return out;
}

std::uint64_t config_hash(const nlohmann::json& j) {
  const std::string s = j.dump(); // object keys serialize sorted
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

const char* const kSweepParams[] = {"gamma_d", "r_in",  "kappa",
                                    "gamma_raman", "n_sub", "tau"};

bool is_sweep_param(const std::string& name) {
  for (const char* p : kSweepParams)
    if (name == p) return true;
  return false;
}

std::vector<double> grid_from_json(const json& g, const char* what) {
  if (g.is_array()) return number_array(g, what);
  check_keys(g, {"from", "to", "points", "log"}, what);
  const double a = num(require(g, "from", what), "from");
  const double b = num(require(g, "to", what), "to");
  const int n = require(g, "points", what).get<int>();
  if (n < 2) throw ConfigError(std::string(what) + " needs at least 2 points");
  const bool logspace = g.value("log", false);
  if (logspace && (a <= 0.0 || b <= 0.0))
    throw ConfigError(std::string(what) + ": log grids need positive bounds");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / (n - 1);
    out[static_cast<std::size_t>(i)] =
        logspace ? a * std::pow(b / a, f) : a + f * (b - a);
  }
  return out;
}

ChainConfig point_config(const SweepSpec& spec, double v1, double v2) {
  ChainConfig cfg = spec.base;
  std::map<std::string, double> m;
  m[spec.param1] = v1;
  m[spec.param2] = v2;

  if (const auto it = m.find("n_sub"); it != m.end()) {
    if (cfg.params.size() > 1)
      throw ConfigError("sweeping n_sub requires shared absorber rates");
    cfg.n_sub = static_cast<int>(std::llround(it->second));
  }
  const auto set_rate = [&](const char* k, double SuperatomParams::*field) {
    if (const auto it = m.find(k); it != m.end())
      for (auto& p : cfg.params) p.*field = it->second;
  };
  set_rate("kappa", &SuperatomParams::kappa);
  set_rate("gamma_raman", &SuperatomParams::gamma_raman);
  set_rate("gamma_d", &SuperatomParams::gamma_d);

  if (m.count("tau") || m.count("r_in")) {
    if (spec.base.pulse.shape == PulseSpec::Shape::Samples)
      throw ConfigError("r_in/tau sweeps need a flat or tukey base pulse");
    const double tau = m.count("tau") ? m.at("tau") : spec.base.pulse.fwhm_us;
    const double r = m.count("r_in")
                         ? m.at("r_in")
                         : spec.base.pulse.mean_photons / spec.base.pulse.fwhm_us;
    cfg.pulse.shape = PulseSpec::Shape::Flat;
    cfg.pulse.fwhm_us = tau;
    cfg.pulse.ramp_us = 0.0;
    cfg.pulse.mean_photons = r * tau;
  }

  // Only a tau sweep re-times the pulse; every other parameter leaves the
  // support alone, so the grid the user asked for is still valid and is kept.
  // When tau changes, rebuild but keep the requested end time if it still
  // covers the pulse.
  if (m.count("tau")) {
    double t_end = -1.0;
    if (!spec.base.t_grid.empty() &&
        spec.base.t_grid.back() >= cfg.pulse.support_end())
      t_end = spec.base.t_grid.back();
    cfg.t_grid = make_time_grid(cfg.pulse, cfg.params, t_end);
  } else if (cfg.t_grid.empty()) {
    cfg.t_grid = make_time_grid(cfg.pulse, cfg.params);
  }
  return cfg;
}

double eval_observable(const ChainConfig& cfg, const std::string& name) {
  const DensityState st = evolve_me(cfg);
  if (name == "dark_population") {
    double acc = 0.0;
    for (int s = 0; s < cfg.n_sub; ++s) {
      const Eigen::MatrixXd p = populations(st, s);
      acc += p(p.rows() - 1, 2);
    }
    return acc;
  }
  if (name == "final_p_ryd") return total_rydberg(st).back();
  if (name == "conservation_residual") return conservation_residual(st, cfg);
  const PulseMetrics pm = exact_metrics(st);
  if (name == "n_in") return pm.n_in;
  if (name == "n_out") return pm.n_out;
  if (name == "n_subtracted") return pm.n_subtracted;
  throw ConfigError("unknown observable: " + name);
}

}  // namespace

SweepSpec sweep_from_json(const nlohmann::json& j) {
  SweepSpec spec;
  spec.base = config_from_json(j);
  const json& s = require(j, "sweep", "config");
  check_keys(s,
             {"param1", "grid1", "param2", "grid2", "observable",
              "boundary_curves"},
             "sweep");
  spec.param1 = require(s, "param1", "sweep").get<std::string>();
  spec.param2 = require(s, "param2", "sweep").get<std::string>();
  spec.grid1 = grid_from_json(require(s, "grid1", "sweep"), "grid1");
  spec.grid2 = grid_from_json(require(s, "grid2", "sweep"), "grid2");
  spec.observable = s.value("observable", spec.observable);
  spec.boundary_curves = s.value("boundary_curves", spec.boundary_curves);
  return spec;
}

double boundary_pulse_area_r_in(double kappa, double tau) {
  const double pi = 3.14159265358979323846;
  return pi * pi / (4.0 * kappa * tau * tau);
}

double boundary_dephasing_gamma_d(double tau) {
  return std::log(10.0) / tau;
}

double boundary_transfer_gamma_d(double kappa, double r_in, double tau) {
  return 4.0 * kappa * r_in * tau / std::log(10.0);
}

ResultTable run_sweep(const SweepSpec& spec, int threads) {
  if (!is_sweep_param(spec.param1) || !is_sweep_param(spec.param2))
    throw ConfigError("sweep parameters must be one of gamma_d, r_in, kappa, "
                      "gamma_raman, n_sub, tau");
  if (spec.param1 == spec.param2)
    throw ConfigError("sweep parameters must differ");
  if (spec.grid1.empty() || spec.grid2.empty())
    throw ConfigError("sweep grids must be non-empty");
  const auto increasing = [](const std::vector<double>& g) {
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1])) return false;
    return true;
  };
  if (!increasing(spec.grid1) || !increasing(spec.grid2))
    throw ConfigError("sweep grids must be strictly increasing");
  // reject bad observable names before spawning workers
  static const char* const kObs[] = {"dark_population", "final_p_ryd",
                                     "conservation_residual", "n_in", "n_out",
                                     "n_subtracted"};
  bool obs_ok = false;
  for (const char* o : kObs) obs_ok = obs_ok || spec.observable == o;
  if (!obs_ok) throw ConfigError("unknown observable: " + spec.observable);

  const std::size_t n1 = spec.grid1.size(), n2 = spec.grid2.size();
  std::vector<double> values(n1 * n2);
  std::vector<std::string> errors(n1 * n2);
  // A failed point must not abort the sweep: it becomes a NaN row plus a
  // diagnostic line, and the remaining points still run.
  parallel_for(n1 * n2, threads, [&](std::size_t k) {
    const std::size_t i1 = k % n1, i2 = k / n1;
    try {
      const ChainConfig cfg =
          point_config(spec, spec.grid1[i1], spec.grid2[i2]);
      values[k] = eval_observable(cfg, spec.observable);
    } catch (const std::exception& e) {
      values[k] = std::numeric_limits<double>::quiet_NaN();
      errors[k] = e.what();
    }
  });

  ResultTable table;
  table.axis1_name = spec.param1;
  table.axis2_name = spec.param2;
  table.seed = spec.base.solver.seed;
  table.rows.reserve(n1 * n2);
  for (std::size_t k = 0; k < n1 * n2; ++k)
    if (!errors[k].empty())
      table.diagnostics.push_back(
          spec.param1 + "=" + format_value(spec.grid1[k % n1]) + " " +
          spec.param2 + "=" + format_value(spec.grid2[k / n1]) + ": " +
          errors[k]);
  for (std::size_t i2 = 0; i2 < n2; ++i2)
    for (std::size_t i1 = 0; i1 < n1; ++i1)
      table.rows.push_back(
          {spec.grid1[i1], spec.grid2[i2], spec.observable, values[i2 * n1 + i1]});

  const bool gd_first = spec.param1 == "gamma_d" && spec.param2 == "r_in";
  const bool gd_second = spec.param1 == "r_in" && spec.param2 == "gamma_d";
  if (spec.boundary_curves && (gd_first || gd_second)) {
    const double kappa = spec.base.site(0).kappa;
    const double tau = spec.base.pulse.fwhm_us;
    const std::vector<double>& gd_grid = gd_first ? spec.grid1 : spec.grid2;
    const std::vector<double>& r_grid = gd_first ? spec.grid2 : spec.grid1;
    const auto brow = [&](double gd, double r, const char* name, double value) {
      ResultRow row;
      row.axis1 = gd_first ? gd : r;
      row.axis2 = gd_first ? r : gd;
      row.observable = name;
      row.value = value;
      table.rows.push_back(row);
    };
    const double r_star = boundary_pulse_area_r_in(kappa, tau);
    for (double gd : gd_grid) brow(gd, r_star, "boundary_pulse_area", r_star);
    const double gd_star = boundary_dephasing_gamma_d(tau);
    for (double r : r_grid) brow(gd_star, r, "boundary_dephasing", gd_star);
    for (double r : r_grid) {
      const double gd = boundary_transfer_gamma_d(kappa, r, tau);
      brow(gd, r, "boundary_transfer", gd);
    }
  }
  return table;
}

// ---- formatting / io ------------------------------------------------------

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  return out;
}

}  // namespace

void write_result_table_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# tool_version=" << table.tool_version << "\n";
  out << "# config_hash=" << hash_hex(table.config_hash) << "\n";
  out << "# seed=" << table.seed << "\n";
  out << table.axis1_name << "," << table.axis2_name << ",observable,value\n";
  for (const auto& r : table.rows)
    out << format_value(r.axis1) << "," << format_value(r.axis2) << ","
        << r.observable << "," << format_value(r.value) << "\n";
  if (!out) throw ConfigError("failed writing " + path);
}

void write_result_table_json(const ResultTable& table, const std::string& path) {
  json j;
  j["axis1"] = table.axis1_name;
  j["axis2"] = table.axis2_name;
  j["tool_version"] = table.tool_version;
  j["config_hash"] = hash_hex(table.config_hash);
  j["seed"] = table.seed;
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"axis1", r.axis1},
                    {"axis2", r.axis2},
                    {"observable", r.observable},
                    {"value", r.value}});
  j["rows"] = std::move(rows);
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("failed writing " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw ConfigError("csv row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << format_value(row[i]) << (i + 1 < row.size() ? "," : "");
    out << "\n";
  }
  if (!out) throw ConfigError("failed writing " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number \"" + s + "\" in " + where);
  }
}

}  // namespace

TransmissionDataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest: " + manifest_path);
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();

  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"file", "mean_photons_in"})
    throw ConfigError("manifest must start with the header file,mean_photons_in");

  TransmissionDataset ds;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2)
      throw ConfigError("manifest rows need exactly file,mean_photons_in");
    TransmissionTrace tr;
    tr.mean_photons_in = parse_num(cells[1], manifest_path);

    const std::string tpath = (base / cells[0]).string();
    std::ifstream tin(tpath);
    if (!tin) throw ConfigError("cannot open trace file: " + tpath);
    std::string tline;
    if (!std::getline(tin, tline))
      throw ConfigError("empty trace file: " + tpath);
    const auto head = split_csv_line(tline);
    bool with_weight = false;
    if (head == std::vector<std::string>{"time_us", "rate_out_per_us"})
      with_weight = false;
    else if (head ==
             std::vector<std::string>{"time_us", "rate_out_per_us", "weight"})
      with_weight = true;
    else
      throw ConfigError("unexpected trace header in " + tpath);
    while (std::getline(tin, tline)) {
      if (tline.empty() || tline == "\r") continue;
      const auto c = split_csv_line(tline);
      if (c.size() != (with_weight ? 3u : 2u))
        throw ConfigError("bad row width in " + tpath);
      tr.times.push_back(parse_num(c[0], tpath));
      tr.r_out.push_back(parse_num(c[1], tpath));
      if (with_weight) tr.weight.push_back(parse_num(c[2], tpath));
    }
    if (tr.times.size() < 2)
      throw ConfigError("trace needs at least two samples: " + tpath);
    ds.traces.push_back(std::move(tr));
  }
  if (ds.traces.empty()) throw ConfigError("manifest lists no traces");
  return ds;
}

void save_dataset(const TransmissionDataset& data, const std::string& dir,
                  const std::string& stem) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream man = open_out((fs::path(dir) / (stem + "_manifest.csv")).string());
  man << "file,mean_photons_in\n";
  for (std::size_t k = 0; k < data.traces.size(); ++k) {
    const TransmissionTrace& tr = data.traces[k];
    const std::string fname = stem + "_trace" + std::to_string(k) + ".csv";
    man << fname << "," << format_value(tr.mean_photons_in) << "\n";
    std::ofstream out = open_out((fs::path(dir) / fname).string());
    const bool with_weight = !tr.weight.empty();
    out << (with_weight ? "time_us,rate_out_per_us,weight"
                        : "time_us,rate_out_per_us")
        << "\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      out << format_value(tr.times[i]) << "," << format_value(tr.r_out[i]);
      if (with_weight) out << "," << format_value(tr.weight[i]);
      out << "\n";
    }
    if (!out) throw ConfigError("failed writing trace " + fname);
  }
  if (!man) throw ConfigError("failed writing the manifest");
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t nw =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), n);
  if (nw <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mtx;
  std::exception_ptr err;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lk(err_mtx);
          if (!err) err = std::current_exception();
        }
        next.store(n); // stop handing out work
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace sasim
