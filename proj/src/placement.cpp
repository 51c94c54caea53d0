#include "cvtp/placement.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "cvtp/io.hpp"
#include "cvtp/rng.hpp"

namespace cvtp {

namespace {

using nlohmann::json;

/// Rethrows the current library exception with a stage label prepended,
/// preserving its dynamic type (the CLI maps types to exit codes).
[[noreturn]] void rethrow_with_stage(const char* stage) {
  const std::string tag = std::string("stage ") + stage + ": ";
  try {
    throw;
  } catch (const FormatError& e) {
    throw FormatError(tag + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(tag + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(tag + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const DegenerateError& e) {
    throw DegenerateError(tag + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const IoError& e) {
    throw IoError(tag + e.what());
  } catch (const Error& e) {
    throw Error(tag + e.what());
  }
}

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    rethrow_with_stage(stage);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(c_tol > 0.0 && c_tol < 1.0)) throw ConfigError("config: c_tol must be in (0,1)");
  if (k_g < 1) throw ConfigError("config: k_g must be >= 1");
  if (!(r > 0.0)) throw ConfigError("config: r must be > 0");
  if (!(R > 0.0)) throw ConfigError("config: R must be > 0");
  if (mc_samples < 1) throw ConfigError("config: mc_samples must be >= 1");
  if (!(annulus_halfwidth >= 0.5)) throw ConfigError("config: annulus_halfwidth must be >= 0.5");
  if (interpolation_factor < 1) throw ConfigError("config: interpolation_factor must be >= 1");
  if (max_lag < 0) throw ConfigError("config: max_lag must be >= 0");
  if (alpha_max < 1) throw ConfigError("config: alpha_max must be >= 1");
  if (alpha_override && *alpha_override < 1) throw ConfigError("config: alpha override must be >= 1");
}

PlacementReport gauge_optim(const ObservationMatrix& obs, const PipelineConfig& config) {
  config.validate();
  const Grid& grid = obs.grid();
  if (config.k_g > grid.n_cells())
    throw ConfigError("config: k_g = " + std::to_string(config.k_g) + " exceeds the " +
                      std::to_string(grid.n_cells()) + " in-mask cells");

  const int max_lag =
      config.max_lag > 0 ? config.max_lag : std::max(grid.nx(), grid.ny()) / 2;

  Correlogram curve = run_stage("correlogram", [&] {
    return correlogram(obs, max_lag, config.mc_samples, derive_seed(config.seed, 1));
  });

  const DecorrelationDistance d0 = run_stage("decorrelation", [&] {
    return decorrelation_distance(curve);
  });

  ScalarField corr_raw = run_stage("correlation-map", [&] {
    return effective_correlation_map(obs, d0.distance, config.mc_samples,
                                     config.annulus_halfwidth, derive_seed(config.seed, 2));
  });

  ScalarField corr_fine = run_stage("interpolation", [&] {
    return interpolate_field(corr_raw, config.interpolation_factor);
  });

  AlphaSelection alpha;
  if (!config.alpha_override) {
    alpha = run_stage("alpha-selection", [&] {
      return select_alpha(corr_fine, config.c_tol, config.k_g, config.alpha_max);
    });
  } else {
    alpha.alpha = *config.alpha_override;
  }

  ScalarField density = run_stage("density", [&] {
    return build_density(corr_fine, config.r, config.R, alpha.alpha);
  });

  if (config.alpha_override) {
    // the field is non-degenerate once the density stage has passed
    alpha.k_at_alpha = run_stage("alpha-selection", [&] {
      return count_below_threshold(corr_fine, alpha.alpha, config.c_tol);
    });
    alpha.trace = {{alpha.alpha, alpha.k_at_alpha}};
  }

  return run_stage("solver", [&]() -> PlacementReport {
    DiscreteProblem problem = DiscreteProblem::from_field(density);
    const GeneratorSet init =
        config.init == InitKind::weighted
            ? init_weighted(problem, static_cast<int>(config.k_g), derive_seed(config.seed, 3))
            : init_uniform(problem, static_cast<int>(config.k_g), derive_seed(config.seed, 3));
    const double initial_energy = energy(problem, init);

    CvtResult result;
    if (config.solver == SolverKind::lloyd) {
      LloydConfig lc = config.lloyd;
      lc.seed = derive_seed(config.seed, 4);
      result = lloyd_solve(problem, init, lc);
    } else {
      TnConfig tc = config.tn;
      tc.seed = derive_seed(config.seed, 4);
      result = tn_solve(problem, init, tc);
    }

    PlacementReport report{
        .d0 = d0,
        .d0_km = grid.grid_to_km(d0.distance),
        .curve = std::move(curve),
        .corr_map_raw = std::move(corr_raw),
        .corr_map = std::move(corr_fine),
        .alpha = std::move(alpha),
        .density = std::move(density),
        .initial = init,
        .result = std::move(result),
        .initial_energy = initial_energy,
        .final_energy = 0.0,
        .input_digest = fnv1a64_hex(observation_bytes(obs)),
        .config = config,
    };
    report.final_energy = report.result.final_energy;
    return report;
  });
}

namespace {

json config_json(const PipelineConfig& c) {
  json j;
  j["c_tol"] = c.c_tol;
  j["k_g"] = c.k_g;
  j["r"] = c.r;
  j["R"] = c.R;
  j["mc_samples"] = c.mc_samples;
  j["annulus_halfwidth"] = c.annulus_halfwidth;
  j["interpolation_factor"] = c.interpolation_factor;
  j["max_lag"] = c.max_lag;
  j["seed"] = c.seed;
  j["solver"] = c.solver == SolverKind::lloyd ? "lloyd" : "tn";
  j["init"] = c.init == InitKind::weighted ? "weighted" : "uniform";
  j["lloyd"] = {{"move_tol", c.lloyd.move_tol},
                {"max_iter", c.lloyd.max_iter},
                {"grad_tol", c.lloyd.grad_tol}};
  j["tn"] = {{"max_outer", c.tn.max_outer},   {"grad_tol", c.tn.grad_tol},
             {"cg_max", c.tn.cg_max},         {"cg_rtol", c.tn.cg_rtol},
             {"armijo_c", c.tn.armijo_c},     {"backtrack", c.tn.backtrack},
             {"max_backtracks", c.tn.max_backtracks}};
  if (c.alpha_override)
    j["alpha_override"] = *c.alpha_override;
  else
    j["alpha_override"] = nullptr;
  j["alpha_max"] = c.alpha_max;
  return j;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) {
  return config_json(config).dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  PipelineConfig c;
  try {
    if (j.contains("c_tol")) c.c_tol = j["c_tol"].get<double>();
    if (j.contains("k_g")) c.k_g = j["k_g"].get<long>();
    if (j.contains("r")) c.r = j["r"].get<double>();
    if (j.contains("R")) c.R = j["R"].get<double>();
    if (j.contains("mc_samples")) c.mc_samples = j["mc_samples"].get<int>();
    if (j.contains("annulus_halfwidth"))
      c.annulus_halfwidth = j["annulus_halfwidth"].get<double>();
    if (j.contains("interpolation_factor"))
      c.interpolation_factor = j["interpolation_factor"].get<int>();
    if (j.contains("max_lag")) c.max_lag = j["max_lag"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("solver")) {
      const std::string s = j["solver"].get<std::string>();
      if (s == "lloyd")
        c.solver = SolverKind::lloyd;
      else if (s == "tn")
        c.solver = SolverKind::tn;
      else
        throw ConfigError("config: unknown solver \"" + s + "\"");
    }
    if (j.contains("init")) {
      const std::string s = j["init"].get<std::string>();
      if (s == "weighted")
        c.init = InitKind::weighted;
      else if (s == "uniform")
        c.init = InitKind::uniform;
      else
        throw ConfigError("config: unknown init \"" + s + "\"");
    }
    if (j.contains("lloyd")) {
      const json& l = j["lloyd"];
      if (l.contains("move_tol")) c.lloyd.move_tol = l["move_tol"].get<double>();
      if (l.contains("max_iter")) c.lloyd.max_iter = l["max_iter"].get<int>();
      if (l.contains("grad_tol")) c.lloyd.grad_tol = l["grad_tol"].get<double>();
    }
    if (j.contains("tn")) {
      const json& t = j["tn"];
      if (t.contains("max_outer")) c.tn.max_outer = t["max_outer"].get<int>();
      if (t.contains("grad_tol")) c.tn.grad_tol = t["grad_tol"].get<double>();
      if (t.contains("cg_max")) c.tn.cg_max = t["cg_max"].get<int>();
      if (t.contains("cg_rtol")) c.tn.cg_rtol = t["cg_rtol"].get<double>();
      if (t.contains("armijo_c")) c.tn.armijo_c = t["armijo_c"].get<double>();
      if (t.contains("backtrack")) c.tn.backtrack = t["backtrack"].get<double>();
      if (t.contains("max_backtracks")) c.tn.max_backtracks = t["max_backtracks"].get<int>();
    }
    if (j.contains("alpha_override") && !j["alpha_override"].is_null())
      c.alpha_override = j["alpha_override"].get<int>();
    if (j.contains("alpha_max")) c.alpha_max = j["alpha_max"].get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

void write_report(const PlacementReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  const fs::path base(dir);

  {
    std::ofstream out(base / "config.json", std::ios::binary);
    if (!out) throw IoError("cannot write config.json");
    out << config_to_json(report.config);
  }
  save_correlogram_csv(report.curve, (base / "correlogram.csv").string());
  save_field(report.corr_map, (base / "corrmap.bin").string(), FileFormat::binary);
  save_field(report.density, (base / "density.bin").string(), FileFormat::binary);
  save_generators_csv(report.result.generators, (base / "generators.csv").string(),
                      report.density.grid().cell_size_km());
  save_trace_csv(report.result.trace, (base / "trace.csv").string());

  json summary;
  summary["d0_grid_units"] = report.d0.distance;
  summary["d0_km"] = report.d0_km;
  summary["decorrelated"] = report.d0.decorrelated;
  summary["alpha"] = report.alpha.alpha;
  summary["alpha_k"] = report.alpha.k_at_alpha;
  summary["alpha_over_threshold"] = report.alpha.over_threshold;
  json trace = json::array();
  for (const auto& [a, k] : report.alpha.trace) trace.push_back({{"alpha", a}, {"k", k}});
  summary["alpha_trace"] = trace;
  summary["initial_energy"] = report.initial_energy;
  summary["final_energy"] = report.final_energy;
  summary["final_grad_norm"] = report.result.final_grad_norm;
  summary["status"] = to_string(report.result.status);
  summary["iterations"] = report.result.iterations;
  summary["input_digest"] = report.input_digest;
  summary["corrmap_grid"] = "interpolated";  // energies are evaluated on the fine grid
  summary["config"] = config_json(report.config);
  {
    std::ofstream out(base / "report.json", std::ios::binary);
    if (!out) throw IoError("cannot write report.json");
    out << summary.dump(2) << "\n";
  }
}

ComparisonReport compare_placements(const GeneratorSet& real, const GeneratorSet& optimal,
                                    const std::vector<double>& radii_km, double cell_size_km) {
  real.validate();
  optimal.validate();
  if (radii_km.empty()) throw ValidationError("compare: need at least one radius");
  for (std::size_t k = 0; k < radii_km.size(); ++k) {
    if (!(radii_km[k] > 0.0)) throw ValidationError("compare: radii must be positive");
    if (k > 0 && !(radii_km[k] > radii_km[k - 1]))
      throw ValidationError("compare: radii must be strictly increasing");
  }
  if (!(cell_size_km > 0.0)) throw ValidationError("compare: cell size must be positive");

  ComparisonReport out;
  out.radii_km = radii_km;
  out.per_gauge_nearest_km.reserve(real.positions.size());
  for (const Vec2& g : real.positions) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& o : optimal.positions) best = std::min(best, distance(g, o));
    out.per_gauge_nearest_km.push_back(best * cell_size_km);
  }
  for (double radius : radii_km) {
    long within = 0;
    for (double d : out.per_gauge_nearest_km)
      if (d <= radius) ++within;
    out.counts_within.push_back(within);
    out.counts_outside.push_back(static_cast<long>(out.per_gauge_nearest_km.size()) - within);
  }
  return out;
}

void write_comparison_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "radius_km,within,outside\n";
  for (std::size_t k = 0; k < report.radii_km.size(); ++k)
    out << format_double(report.radii_km[k]) << ',' << report.counts_within[k] << ','
        << report.counts_outside[k] << '\n';
  if (!out) throw IoError("write failure on " + path);
}

void write_per_gauge_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "gauge,nearest_km\n";
  for (std::size_t k = 0; k < report.per_gauge_nearest_km.size(); ++k)
    out << k << ',' << format_double(report.per_gauge_nearest_km[k]) << '\n';
  if (!out) throw IoError("write failure on " + path);
}

double energy_of_placement(const ScalarField& density, const GeneratorSet& gens) {
  return energy(DiscreteProblem::from_field(density), gens);
}

}  // namespace cvtp
