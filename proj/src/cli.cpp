#include "cvtp/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "cvtp/correlation.hpp"
#include "cvtp/cvt.hpp"
#include "cvtp/density.hpp"
#include "cvtp/grf.hpp"
#include "cvtp/io.hpp"
#include "cvtp/placement.hpp"
#include "cvtp/svg.hpp"

namespace cvtp::cli {

namespace {

using nlohmann::json;

void echo_config(const json& j) { std::cerr << "resolved config: " << j.dump() << "\n"; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Pulls --config out of the argument list (handles "--config path" and
/// "--config=path") so the file can seed the defaults before CLI11 parses
/// the overriding flags.
std::optional<std::string> peek_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

std::vector<double> parse_radii(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("--radii: malformed number \"" + tok + "\"");
    }
  }
  return out;
}

struct PipelineFlags {
  PipelineConfig cfg;
  std::string solver_name = "tn";
  std::string init_name = "uniform";
  int alpha_override = 0;  // 0 = none

  void apply_names() {
    if (solver_name == "lloyd")
      cfg.solver = SolverKind::lloyd;
    else if (solver_name == "tn")
      cfg.solver = SolverKind::tn;
    else
      throw ConfigError("--solver must be lloyd or tn");
    if (init_name == "weighted")
      cfg.init = InitKind::weighted;
    else if (init_name == "uniform")
      cfg.init = InitKind::uniform;
    else
      throw ConfigError("--init must be uniform or weighted");
    if (alpha_override > 0) cfg.alpha_override = alpha_override;
  }
};

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"cvtp: correlation-driven CVT placement of observation gauges"};
  app.require_subcommand(1);

  // gen-grf ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-grf", "synthesize a Gaussian-random-field dataset");
  int g_nx = 40, g_ny = 40, g_nt = 1000;
  double g_c0 = 1.0, g_d0 = 9.0, g_s0 = 1.0, g_cell = 1.0;
  std::uint64_t g_seed = 0;
  std::string g_out;
  gen->add_option("--nx", g_nx);
  gen->add_option("--ny", g_ny);
  gen->add_option("--n-time", g_nt);
  gen->add_option("--c0", g_c0);
  gen->add_option("--d0", g_d0);
  gen->add_option("--s0", g_s0);
  gen->add_option("--seed", g_seed);
  gen->add_option("--cell-size-km", g_cell);
  gen->add_option("--out", g_out)->required();

  // corr-map ---------------------------------------------------------------
  auto* cmap = app.add_subcommand("corr-map", "effective-correlation map at one distance");
  std::string m_in, m_out;
  double m_d = 1.0, m_hw = 1.0, m_cell = 1.0;
  int m_samples = 100;
  std::uint64_t m_seed = 0;
  cmap->add_option("--input", m_in)->required();
  cmap->add_option("--d", m_d)->required();
  cmap->add_option("--samples", m_samples);
  cmap->add_option("--halfwidth", m_hw);
  cmap->add_option("--seed", m_seed);
  cmap->add_option("--cell-size-km", m_cell);
  cmap->add_option("--out", m_out)->required();

  // correlogram ------------------------------------------------------------
  auto* cgram = app.add_subcommand("correlogram", "domain correlogram over integer lags");
  std::string q_in, q_out;
  int q_maxlag = 0, q_samples = 100;
  std::uint64_t q_seed = 0;
  double q_cell = 1.0;
  cgram->add_option("--input", q_in)->required();
  cgram->add_option("--max-lag", q_maxlag);
  cgram->add_option("--samples", q_samples);
  cgram->add_option("--seed", q_seed);
  cgram->add_option("--cell-size-km", q_cell);
  cgram->add_option("--out", q_out)->required();

  // density ----------------------------------------------------------------
  auto* dens = app.add_subcommand("density", "build the CVT density from a correlation map");
  std::string d_in, d_out, d_trace;
  int d_alpha = 0;
  long d_kg = 0;
  double d_ctol = 0.1, d_r = 1e-6, d_R = 1.0, d_cell = 1.0;
  dens->add_option("--input", d_in)->required();
  dens->add_option("--alpha", d_alpha);
  dens->add_option("--k-g", d_kg);
  dens->add_option("--c-tol", d_ctol);
  dens->add_option("--r", d_r);
  dens->add_option("--R", d_R);
  dens->add_option("--alpha-trace", d_trace);
  dens->add_option("--cell-size-km", d_cell);
  dens->add_option("--out", d_out)->required();

  // optimize ---------------------------------------------------------------
  auto* opt = app.add_subcommand("optimize", "CVT solve against an existing density field");
  std::string o_in, o_out, o_solver = "tn", o_init = "uniform";
  long o_kg = 0;
  std::uint64_t o_seed = 0;
  double o_cell = 1.0;
  opt->add_option("--input", o_in)->required();
  opt->add_option("--k-g", o_kg)->required();
  opt->add_option("--solver", o_solver);
  opt->add_option("--init", o_init);
  opt->add_option("--seed", o_seed);
  opt->add_option("--cell-size-km", o_cell);
  opt->add_option("--out", o_out)->required();

  // pipeline ---------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "full placement pipeline");
  PipelineFlags pf;
  if (auto cfg_path = peek_config(args)) pf.cfg = config_from_json(slurp(*cfg_path));
  pf.solver_name = pf.cfg.solver == SolverKind::lloyd ? "lloyd" : "tn";
  pf.init_name = pf.cfg.init == InitKind::weighted ? "weighted" : "uniform";
  if (pf.cfg.alpha_override) pf.alpha_override = *pf.cfg.alpha_override;
  std::string p_in, p_out, p_config;
  double p_cell = 1.0;
  pipe->add_option("--input", p_in)->required();
  pipe->add_option("--out", p_out)->required();
  pipe->add_option("--config", p_config);
  pipe->add_option("--k-g", pf.cfg.k_g);
  pipe->add_option("--c-tol", pf.cfg.c_tol);
  pipe->add_option("--seed", pf.cfg.seed);
  pipe->add_option("--samples", pf.cfg.mc_samples);
  pipe->add_option("--halfwidth", pf.cfg.annulus_halfwidth);
  pipe->add_option("--interp-factor", pf.cfg.interpolation_factor);
  pipe->add_option("--max-lag", pf.cfg.max_lag);
  pipe->add_option("--r", pf.cfg.r);
  pipe->add_option("--R", pf.cfg.R);
  pipe->add_option("--alpha", pf.alpha_override);
  pipe->add_option("--solver", pf.solver_name);
  pipe->add_option("--init", pf.init_name);
  pipe->add_option("--cell-size-km", p_cell);

  // compare ----------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "existing network vs optimal locations");
  std::string c_real, c_optimal, c_radii, c_out;
  double c_cell = 1.0;
  cmp->add_option("--real", c_real)->required();
  cmp->add_option("--optimal", c_optimal)->required();
  cmp->add_option("--radii", c_radii)->required();
  cmp->add_option("--cell-size-km", c_cell);
  cmp->add_option("--out", c_out);

  // render -----------------------------------------------------------------
  auto* ren = app.add_subcommand("render", "SVG drawing of a result directory");
  std::string r_in, r_out, r_overlay;
  double r_cell = 1.0;
  ren->add_option("--input", r_in)->required();
  ren->add_option("--out", r_out)->required();
  ren->add_option("--overlay", r_overlay);
  ren->add_option("--cell-size-km", r_cell);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  }

  if (*gen) {
    echo_config({{"subcommand", "gen-grf"}, {"nx", g_nx}, {"ny", g_ny}, {"n_time", g_nt},
                 {"c0", g_c0}, {"d0", g_d0}, {"s0", g_s0}, {"seed", g_seed},
                 {"cell_size_km", g_cell}, {"out", g_out}});
    FieldSpec spec{Grid::full(g_nx, g_ny, g_cell), g_nt, {g_c0, g_d0, g_s0}, g_seed};
    const ObservationMatrix obs = generate_grf(spec);
    save_observations(obs, g_out, format_from_path(g_out));
    std::cerr << "wrote " << g_out << " (" << obs.grid().n_cells() << " cells x " << obs.n_time()
              << " steps)\n";
  } else if (*cmap) {
    echo_config({{"subcommand", "corr-map"}, {"input", m_in}, {"d", m_d},
                 {"samples", m_samples}, {"halfwidth", m_hw}, {"seed", m_seed},
                 {"cell_size_km", m_cell}, {"out", m_out}});
    const ObservationMatrix obs = load_observations(m_in, format_from_path(m_in), m_cell);
    ScalarField map = effective_correlation_map(obs, m_d, m_samples, m_hw, m_seed);
    if (map.count_missing() > 0) map = interpolate_field(map, 1);
    save_field(map, m_out, format_from_path(m_out));
    std::cerr << "wrote " << m_out << "\n";
  } else if (*cgram) {
    const ObservationMatrix obs = load_observations(q_in, format_from_path(q_in), q_cell);
    if (q_maxlag <= 0) q_maxlag = std::max(obs.grid().nx(), obs.grid().ny()) / 2;
    echo_config({{"subcommand", "correlogram"}, {"input", q_in}, {"max_lag", q_maxlag},
                 {"samples", q_samples}, {"seed", q_seed}, {"out", q_out}});
    save_correlogram_csv(correlogram(obs, q_maxlag, q_samples, q_seed), q_out);
    std::cerr << "wrote " << q_out << "\n";
  } else if (*dens) {
    echo_config({{"subcommand", "density"}, {"input", d_in}, {"alpha", d_alpha},
                 {"k_g", d_kg}, {"c_tol", d_ctol}, {"r", d_r}, {"R", d_R}, {"out", d_out}});
    const ScalarField corr = load_field(d_in, format_from_path(d_in), d_cell);
    int alpha = d_alpha;
    if (alpha <= 0) {
      if (d_kg <= 0)
        throw ConfigError("density: pass --alpha, or --k-g (with optional --c-tol) to select it");
      const AlphaSelection sel = select_alpha(corr, d_ctol, d_kg);
      alpha = sel.alpha;
      std::cerr << "selected alpha = " << alpha << " (k = " << sel.k_at_alpha << ")\n";
      if (!d_trace.empty()) {
        std::ofstream out(d_trace, std::ios::binary);
        if (!out) throw IoError("cannot open " + d_trace + " for writing");
        out << "alpha,k\n";
        for (const auto& [a, k] : sel.trace) out << a << ',' << k << '\n';
      }
    }
    save_field(build_density(corr, d_r, d_R, alpha), d_out, format_from_path(d_out));
    std::cerr << "wrote " << d_out << "\n";
  } else if (*opt) {
    echo_config({{"subcommand", "optimize"}, {"input", o_in}, {"k_g", o_kg},
                 {"solver", o_solver}, {"init", o_init}, {"seed", o_seed}, {"out", o_out}});
    const ScalarField density = load_field(o_in, format_from_path(o_in), o_cell);
    DiscreteProblem problem = DiscreteProblem::from_field(density);
    const GeneratorSet init = o_init == "weighted"
                                  ? init_weighted(problem, static_cast<int>(o_kg), o_seed)
                                  : init_uniform(problem, static_cast<int>(o_kg), o_seed);
    CvtResult result;
    if (o_solver == "lloyd") {
      LloydConfig lc;
      lc.seed = o_seed;
      result = lloyd_solve(problem, init, lc);
    } else if (o_solver == "tn") {
      TnConfig tc;
      tc.seed = o_seed;
      result = tn_solve(problem, init, tc);
    } else {
      throw ConfigError("--solver must be lloyd or tn");
    }
    std::filesystem::create_directories(o_out);
    save_generators_csv(result.generators, o_out + "/generators.csv",
                        density.grid().cell_size_km());
    save_trace_csv(result.trace, o_out + "/trace.csv");
    json summary{{"status", to_string(result.status)},
                 {"iterations", result.iterations},
                 {"initial_energy", energy(problem, init)},
                 {"final_energy", result.final_energy}};
    std::ofstream rep(o_out + "/report.json", std::ios::binary);
    rep << summary.dump(2) << "\n";
    std::cerr << "status " << to_string(result.status) << ", final energy "
              << format_double(result.final_energy) << "\n";
  } else if (*pipe) {
    pf.apply_names();
    const std::string resolved = config_to_json(pf.cfg);
    std::cerr << "resolved config: " << resolved;
    const ObservationMatrix obs = load_observations(p_in, format_from_path(p_in), p_cell);
    const PlacementReport report = gauge_optim(obs, pf.cfg);
    write_report(report, p_out);
    std::cerr << "d0 = " << report.d0.distance << " grid units (" << format_double(report.d0_km)
              << " km), alpha = " << report.alpha.alpha << ", energy "
              << format_double(report.initial_energy) << " -> "
              << format_double(report.final_energy) << ", status "
              << to_string(report.result.status) << "\n";
  } else if (*cmp) {
    echo_config({{"subcommand", "compare"}, {"real", c_real}, {"optimal", c_optimal},
                 {"radii", c_radii}, {"cell_size_km", c_cell}});
    GeneratorSet real{load_points_csv(c_real)};
    GeneratorSet optimal{load_points_csv(c_optimal)};
    const ComparisonReport report =
        compare_placements(real, optimal, parse_radii(c_radii), c_cell);
    if (c_out.empty()) {
      std::cout << "radius_km,within,outside\n";
      for (std::size_t k = 0; k < report.radii_km.size(); ++k)
        std::cout << format_double(report.radii_km[k]) << ',' << report.counts_within[k] << ','
                  << report.counts_outside[k] << '\n';
    } else {
      std::filesystem::create_directories(c_out);
      write_comparison_csv(report, c_out + "/comparison.csv");
      write_per_gauge_csv(report, c_out + "/per_gauge.csv");
      std::cerr << "wrote " << c_out << "/comparison.csv and per_gauge.csv\n";
    }
  } else if (*ren) {
    echo_config({{"subcommand", "render"}, {"input", r_in}, {"out", r_out},
                 {"overlay", r_overlay}});
    const std::string dens_path = r_in + "/density.bin";
    const std::string gens_path = r_in + "/generators.csv";
    if (!std::filesystem::exists(dens_path) || !std::filesystem::exists(gens_path))
      throw IoError(r_in + " does not hold density.bin and generators.csv");
    const ScalarField density = load_field(dens_path, FileFormat::binary, r_cell);
    // generators.csv carries both coordinate frames; the drawing is in grid
    // units, so take x_grid/y_grid directly.
    GeneratorSet gens{load_points_csv(gens_path, PointColumns::grid)};
    std::optional<std::vector<Vec2>> overlay;
    if (!r_overlay.empty()) {
      // overlay files hold km; --cell-size-km names the rendered grid's cell
      overlay.emplace();
      for (Vec2 p : load_points_csv(r_overlay, PointColumns::km))
        overlay->push_back({p.x / r_cell, p.y / r_cell});
    }
    render_svg(density, gens, overlay, r_out);
    std::cerr << "wrote " << r_out << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate data: " << e.what() << "\n";
    return 4;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cvtp::cli
