#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sasim/detection.hpp"
#include "sasim/fit.hpp"
#include "sasim/model.hpp"

namespace sasim {

inline constexpr const char* kToolVersion = "sasim 1.0.0";

/// Reads a JSON config file. Keys carry explicit units (kappa_per_us,
/// fwhm_us, ...); see README for the schema.
nlohmann::json load_config_file(const std::string& path);

/// Builds the run description from the "chain" / "pulse" / "grid" / "solver"
/// sections. Omitted solver fields keep their defaults; the grid defaults to
/// make_time_grid over the pulse support.
ChainConfig config_from_json(const nlohmann::json& j);

std::vector<DetectionParams> detection_from_json(const nlohmann::json& j,
                                                 int n_sub);

/// FNV-1a over the canonical (sorted-key) serialization. Stable across runs
/// and platforms; used as the config hash in provenance headers.
std::uint64_t config_hash(const nlohmann::json& j);

/// Two-parameter grid scan. Parameters come from a fixed whitelist:
/// gamma_d, r_in, kappa, gamma_raman, n_sub, tau. r_in and tau act on a
/// flat pulse (rate and duration); mean_photons follows as rate * duration.
struct SweepSpec {
  std::string param1;
  std::vector<double> grid1;
  std::string param2;
  std::vector<double> grid2;
  std::string observable = "dark_population";
  ChainConfig base;
  bool boundary_curves = true; // emit the analytic guide curves when the
                               // axes are {gamma_d, r_in}
};

struct ResultRow {
  double axis1 = 0.0;
  double axis2 = 0.0;
  std::string observable;
  double value = 0.0;
};

/// Long-format table; main rows in axis-2-major order (axis 2 outermost),
/// boundary series appended after them.
struct ResultTable {
  std::string axis1_name, axis2_name;
  std::vector<ResultRow> rows;
  /// One entry per failed grid point (its value is NaN in rows).
  std::vector<std::string> diagnostics;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
};

SweepSpec sweep_from_json(const nlohmann::json& j);

/// Observables: dark_population (total P_D at the final grid time),
/// n_subtracted, n_in, n_out, final_p_ryd, conservation_residual.
ResultTable run_sweep(const SweepSpec& spec, int threads = 1);

/// Boundary guide curves in the (gamma_d, r_in) plane for a flat pulse of
/// duration tau: pulse area sqrt(kappa r_in) tau = pi/2, dephasing depth
/// exp(-gamma_d tau) = 0.1, and transfer depth exp(-4 kappa r_in tau /
/// gamma_d) = 0.1.
double boundary_pulse_area_r_in(double kappa, double tau);
double boundary_dephasing_gamma_d(double tau);
double boundary_transfer_gamma_d(double kappa, double r_in, double tau);

// ---- formatting / io ----------------------------------------------------

/// Shortest representation with 12 significant digits.
std::string format_value(double v);

void write_result_table_csv(const ResultTable& table, const std::string& path);
void write_result_table_json(const ResultTable& table, const std::string& path);

/// Generic CSV writer: header row then rows of 12-digit values.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Fit input: per-trace CSV with a `time_us,rate_out_per_us[,weight]` header
/// plus a manifest CSV `file,mean_photons_in` with paths relative to the
/// manifest.
TransmissionDataset load_dataset(const std::string& manifest_path);
void save_dataset(const TransmissionDataset& data, const std::string& dir,
                  const std::string& stem);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the helper makes no ordering promises beyond
/// completion.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace sasim
