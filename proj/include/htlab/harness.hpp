#pragma once

#include <map>
#include <string>
#include <vector>

#include "htlab/common.hpp"
#include "htlab/fitting.hpp"

namespace htlab {

/// One experiment configuration: group, multiplier, grid, parameter ranges,
/// tolerances, output locations. Flat JSON on disk.
struct ExperimentConfig {
  std::string group = "heisenberg-1";
  std::string multiplier = "osc:theta=2,beta=3";
  std::vector<std::string> suites;  // growth, decay, subordination, dyadic, atoms
  std::vector<double> tau_range = {8, 16, 32, 64};
  std::vector<double> k_range = {1, 2, 3, 4, 6, 8, 11, 16};
  std::vector<double> n_range = {0, 1, 2, 3, 4, 5};
  std::vector<double> r_atoms = {1.0, 0.5, 0.25, 0.125};
  double tau_fixed = 32.0;
  int sub_order = 2;
  double slope_tol = 0.3;
  double res_factor = 1.0;
  double eps = 1.0 / 512.0;
  std::uint64_t seed = 12345;
  std::string cache_dir;   // empty: HTLAB_CACHE or .htlab-cache
  std::string out_dir = "htlab-out";
  int workers = 0;

  std::string canonical_json() const;
  std::uint64_t hash() const { return fnv1a(canonical_json()); }
};

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// One sweep's outcome: raw measurements, fitted exponent, pass flag.
struct ExperimentRecord {
  std::string suite;
  std::string name;
  std::uint64_t config_hash = 0;
  std::vector<double> params;
  std::vector<double> values;
  FitResult fit;
  double band_lo = 0.0, band_hi = 0.0;  // declared pass band for the slope
  bool pass = false;
  bool fit_valid = false;
  std::string error;  // structured failure, suite aborted
  double wall_seconds = 0.0;
};

std::string record_to_json(const ExperimentRecord& r);
ExperimentRecord record_from_json(const std::string& json_text);

/// Execute the named suites of the config. Deterministic given config + seed;
/// a suite's convergence-guard failure produces an error record, not a crash.
std::vector<ExperimentRecord> run(const ExperimentConfig& cfg);

enum class EmitFormat { csv, json, plotdata };

/// csv: one file per suite; json: one manifest; plotdata: two-column files.
/// Returns the written file paths.
std::vector<std::string> emit(const std::vector<ExperimentRecord>& records,
                              const ExperimentConfig& cfg, EmitFormat format);

/// Resolve the cache directory: config override, HTLAB_CACHE, or default.
std::string cache_directory(const std::string& override_dir = "");

}  // namespace htlab
