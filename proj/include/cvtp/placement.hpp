#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvtp/correlation.hpp"
#include "cvtp/cvt.hpp"
#include "cvtp/density.hpp"
#include "cvtp/grid.hpp"

namespace cvtp {

enum class SolverKind { lloyd, tn };
enum class InitKind { uniform, weighted };

struct PipelineConfig {
  double c_tol = 0.1;
  long k_g = 1;
  double r = 1e-6;
  double R = 1.0;
  int mc_samples = 100;
  double annulus_halfwidth = 1.0;
  int interpolation_factor = 4;
  int max_lag = 0;  ///< 0: use max(nx, ny) / 2
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::tn;
  InitKind init = InitKind::uniform;
  LloydConfig lloyd;
  TnConfig tn;
  std::optional<int> alpha_override;
  int alpha_max = 32;

  void validate() const;
};

struct PlacementReport {
  DecorrelationDistance d0;
  double d0_km = 0.0;
  Correlogram curve;
  ScalarField corr_map_raw;   ///< single-lag map on the input grid (may hold missing cells)
  ScalarField corr_map;       ///< interpolated map the density is built on
  AlphaSelection alpha;
  ScalarField density;
  GeneratorSet initial;
  CvtResult result;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  std::string input_digest;
  PipelineConfig config;
};

/// Full pipeline: lag-sweep correlogram -> decorrelation distance -> single-lag
/// correlation map -> interpolation -> alpha selection -> density -> CVT solve.
/// Deterministic given (input, config, seed). Errors carry the failing stage
/// in their message.
PlacementReport gauge_optim(const ObservationMatrix& obs, const PipelineConfig& config);

/// Writes config.json, correlogram.csv, corrmap.bin, density.bin,
/// generators.csv, trace.csv and report.json into `dir` (created if needed).
/// Bytes are a pure function of the report.
void write_report(const PlacementReport& report, const std::string& dir);

struct ComparisonReport {
  std::vector<double> radii_km;
  std::vector<long> counts_within;
  std::vector<long> counts_outside;
  std::vector<double> per_gauge_nearest_km;
};

/// Distance from each real gauge to its nearest optimal location (km =
/// position distance x cell_size_km), counted against each radius threshold.
ComparisonReport compare_placements(const GeneratorSet& real, const GeneratorSet& optimal,
                                    const std::vector<double>& radii_km, double cell_size_km);

void write_comparison_csv(const ComparisonReport& report, const std::string& path);
void write_per_gauge_csv(const ComparisonReport& report, const std::string& path);

/// CVT energy of an arbitrary generator set against a density field.
double energy_of_placement(const ScalarField& density, const GeneratorSet& gens);

/// Resolved-config JSON, byte-deterministic; also what config.json holds.
std::string config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const std::string& text);

}  // namespace cvtp
