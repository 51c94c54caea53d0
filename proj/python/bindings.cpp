#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cvtp/correlation.hpp"
#include "cvtp/cvt.hpp"
#include "cvtp/density.hpp"
#include "cvtp/grf.hpp"
#include "cvtp/io.hpp"
#include "cvtp/placement.hpp"
#include "cvtp/svg.hpp"

namespace py = pybind11;
using namespace cvtp;

namespace {

Grid make_grid(int nx, int ny, double cell_size_km, py::object mask) {
  if (mask.is_none()) return Grid::full(nx, ny, cell_size_km);
  auto arr = py::array_t<bool, py::array::c_style | py::array::forcecast>::ensure(mask);
  if (!arr || arr.ndim() != 2 || arr.shape(0) != ny || arr.shape(1) != nx)
    throw ValidationError("mask must be a (ny, nx) boolean array");
  std::vector<std::uint8_t> m(static_cast<std::size_t>(nx) * ny);
  auto r = arr.unchecked<2>();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) m[static_cast<std::size_t>(j) * nx + i] = r(j, i) ? 1 : 0;
  return Grid(nx, ny, cell_size_km, std::move(m));
}

py::array_t<double> field_values(const ScalarField& f) {
  py::array_t<double> out(f.grid().n_cells());
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> field_as_grid(const ScalarField& f) {
  const Grid& g = f.grid();
  py::array_t<double> out({g.ny(), g.nx()});
  auto w = out.mutable_unchecked<2>();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const int c = g.cell_at(i, j);
      w(j, i) = c < 0 ? std::nan("") : f.value(c);
    }
  return out;
}

std::vector<Vec2> points_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> pts) {
  if (pts.ndim() != 2 || pts.shape(1) != 2)
    throw ValidationError("points must be an (n, 2) array");
  auto r = pts.unchecked<2>();
  std::vector<Vec2> out(pts.shape(0));
  for (py::ssize_t i = 0; i < pts.shape(0); ++i) out[i] = {r(i, 0), r(i, 1)};
  return out;
}

py::array_t<double> points_to_array(const std::vector<Vec2>& pts) {
  py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t(2)});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(static_cast<py::ssize_t>(i), 0) = pts[i].x;
    w(static_cast<py::ssize_t>(i), 1) = pts[i].y;
  }
  return out;
}

std::vector<double> series_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 1) throw ValidationError("series must be one-dimensional");
  return std::vector<double>(a.data(), a.data() + a.shape(0));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Correlation-driven CVT placement of observation gauges";

  py::register_exception<Error>(m, "CvtpError");

  py::class_<Grid>(m, "Grid")
      .def(py::init(&make_grid), py::arg("nx"), py::arg("ny"), py::arg("cell_size_km") = 1.0,
           py::arg("mask") = py::none())
      .def_property_readonly("nx", &Grid::nx)
      .def_property_readonly("ny", &Grid::ny)
      .def_property_readonly("cell_size_km", &Grid::cell_size_km)
      .def_property_readonly("n_cells", &Grid::n_cells)
      .def("cell_center",
           [](const Grid& g, int cell) {
             const Vec2 p = g.center(cell);
             return py::make_tuple(p.x, p.y);
           })
      .def("__repr__", [](const Grid& g) {
        return "Grid(" + std::to_string(g.nx()) + "x" + std::to_string(g.ny()) + ", " +
               std::to_string(g.n_cells()) + " cells)";
      });

  py::class_<ObservationMatrix>(m, "ObservationMatrix")
      .def(py::init([](const Grid& grid, py::array_t<double, py::array::c_style | py::array::forcecast> values) {
             if (values.ndim() != 2 || values.shape(0) != grid.n_cells())
               throw ValidationError("values must be an (n_cells, n_time) array");
             const int nt = static_cast<int>(values.shape(1));
             std::vector<double> v(values.data(), values.data() + values.size());
             return ObservationMatrix(grid, nt, std::move(v));
           }),
           py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &ObservationMatrix::grid)
      .def_property_readonly("n_time", &ObservationMatrix::n_time)
      .def_property_readonly("values", [](const ObservationMatrix& o) {
        py::array_t<double> out({o.grid().n_cells(), o.n_time()});
        std::copy(o.values().begin(), o.values().end(), out.mutable_data());
        return out;
      });

  py::class_<ScalarField>(m, "ScalarField")
      .def(py::init([](const Grid& grid, py::array_t<double, py::array::c_style | py::array::forcecast> values) {
             std::vector<double> v(values.data(), values.data() + values.size());
             return ScalarField(grid, std::move(v));
           }),
           py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &ScalarField::grid)
      .def_property_readonly("values", &field_values)
      .def("as_grid", &field_as_grid, "values on the full (ny, nx) lattice, NaN outside the mask")
      .def("min_max", &ScalarField::min_max);

  py::class_<Correlogram>(m, "Correlogram")
      .def(py::init([](std::vector<double> lags, std::vector<double> mean_corr,
                       std::vector<long> counts) {
             Correlogram c{std::move(lags), std::move(mean_corr), std::move(counts)};
             c.validate();
             return c;
           }),
           py::arg("lags"), py::arg("mean_corr"), py::arg("sample_counts"))
      .def_readonly("lags", &Correlogram::lags)
      .def_readonly("mean_corr", &Correlogram::mean_corr)
      .def_readonly("sample_counts", &Correlogram::sample_counts);

  py::class_<DecorrelationDistance>(m, "DecorrelationDistance")
      .def_readonly("distance", &DecorrelationDistance::distance)
      .def_readonly("decorrelated", &DecorrelationDistance::decorrelated);

  py::class_<VariogramFit>(m, "VariogramFit")
      .def_readonly("c0", &VariogramFit::c0)
      .def_readonly("d0", &VariogramFit::d0)
      .def_readonly("s0", &VariogramFit::s0)
      .def_readonly("rmse", &VariogramFit::rmse);

  py::class_<AlphaSelection>(m, "AlphaSelection")
      .def_readonly("alpha", &AlphaSelection::alpha)
      .def_readonly("k_at_alpha", &AlphaSelection::k_at_alpha)
      .def_readonly("trace", &AlphaSelection::trace)
      .def_readonly("over_threshold", &AlphaSelection::over_threshold);

  py::class_<GeneratorSet>(m, "GeneratorSet")
      .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> pts) {
             GeneratorSet g{points_from_array(pts)};
             g.validate();
             return g;
           }),
           py::arg("positions"))
      .def_property_readonly("positions",
                             [](const GeneratorSet& g) { return points_to_array(g.positions); })
      .def_property_readonly("k", &GeneratorSet::k);

  py::class_<DiscreteProblem>(m, "DiscreteProblem")
      .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> pts,
                       std::vector<double> weights) {
             DiscreteProblem p{points_from_array(pts), std::move(weights)};
             p.validate();
             return p;
           }),
           py::arg("points"), py::arg("weights"))
      .def_static("from_field", &DiscreteProblem::from_field, py::arg("density"))
      .def_property_readonly("points",
                             [](const DiscreteProblem& p) { return points_to_array(p.points); })
      .def_readonly("weights", &DiscreteProblem::weights);

  py::enum_<SolveStatus>(m, "SolveStatus")
      .value("converged", SolveStatus::converged)
      .value("max_iterations", SolveStatus::max_iterations)
      .value("stalled", SolveStatus::stalled);

  py::class_<CvtResult>(m, "CvtResult")
      .def_readonly("generators", &CvtResult::generators)
      .def_readonly("status", &CvtResult::status)
      .def_readonly("iterations", &CvtResult::iterations)
      .def_readonly("final_energy", &CvtResult::final_energy)
      .def_readonly("final_grad_norm", &CvtResult::final_grad_norm)
      .def_property_readonly("trace", [](const CvtResult& r) {
        py::array_t<double> out({static_cast<py::ssize_t>(r.trace.size()), py::ssize_t(3)});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
          w(static_cast<py::ssize_t>(i), 0) = r.trace[i].iter;
          w(static_cast<py::ssize_t>(i), 1) = r.trace[i].energy;
          w(static_cast<py::ssize_t>(i), 2) = r.trace[i].grad_norm;
        }
        return out;
      });

  m.def("generate_grf",
        [](const Grid& grid, int n_time, double c0, double d0, double s0, std::uint64_t seed) {
          return generate_grf(FieldSpec{grid, n_time, {c0, d0, s0}, seed});
        },
        py::arg("grid"), py::arg("n_time"), py::arg("c0") = 1.0, py::arg("d0") = 9.0,
        py::arg("s0") = 1.0, py::arg("seed") = 0);

  m.def("load_observations",
        [](const std::string& path, double cell_size_km) {
          return load_observations(path, format_from_path(path), cell_size_km);
        },
        py::arg("path"), py::arg("cell_size_km") = 1.0);
  m.def("save_observations",
        [](const ObservationMatrix& obs, const std::string& path) {
          save_observations(obs, path, format_from_path(path));
        },
        py::arg("obs"), py::arg("path"));
  m.def("load_field",
        [](const std::string& path, double cell_size_km) {
          return load_field(path, format_from_path(path), cell_size_km);
        },
        py::arg("path"), py::arg("cell_size_km") = 1.0);
  m.def("save_field",
        [](const ScalarField& f, const std::string& path) {
          save_field(f, path, format_from_path(path));
        },
        py::arg("field"), py::arg("path"));

  m.def("pearson",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
           py::array_t<double, py::array::c_style | py::array::forcecast> b) -> py::object {
          const auto va = series_from_array(a);
          const auto vb = series_from_array(b);
          const auto r = pearson(va, vb);
          if (!r) return py::none();
          return py::float_(*r);
        },
        py::arg("a"), py::arg("b"),
        "Pearson correlation in [-1, 1]; None when a series has zero variance");

  m.def("effective_correlation_map", &effective_correlation_map, py::arg("obs"), py::arg("d"),
        py::arg("n_samples") = 100, py::arg("annulus_halfwidth") = 1.0, py::arg("seed") = 0);
  m.def("effective_correlation_exhaustive", &effective_correlation_exhaustive, py::arg("obs"),
        py::arg("d"), py::arg("annulus_halfwidth") = 1.0);
  m.def("correlogram", &correlogram, py::arg("obs"), py::arg("max_lag"),
        py::arg("n_samples") = 100, py::arg("seed") = 0);
  m.def("decorrelation_distance", &decorrelation_distance, py::arg("correlogram"));
  m.def("fit_exponential_nugget", &fit_exponential_nugget, py::arg("correlogram"));
  m.def("interpolate_field", &interpolate_field, py::arg("field"), py::arg("factor"));

  m.def("build_density", &build_density, py::arg("corr"), py::arg("r") = 1e-6,
        py::arg("R") = 1.0, py::arg("alpha") = 1);
  m.def("count_below_threshold", &count_below_threshold, py::arg("corr"), py::arg("alpha"),
        py::arg("c_tol"));
  m.def("select_alpha", &select_alpha, py::arg("corr"), py::arg("c_tol"), py::arg("k_g"),
        py::arg("alpha_max") = 32);

  m.def("assign", &assign, py::arg("problem"), py::arg("generators"));
  m.def("energy", py::overload_cast<const DiscreteProblem&, const GeneratorSet&>(&energy),
        py::arg("problem"), py::arg("generators"));
  m.def("lloyd_solve",
        [](const DiscreteProblem& p, const GeneratorSet& init, double move_tol, int max_iter,
           double grad_tol, std::uint64_t seed) {
          return lloyd_solve(p, init, LloydConfig{move_tol, max_iter, grad_tol, seed});
        },
        py::arg("problem"), py::arg("init"), py::arg("move_tol") = 1e-7,
        py::arg("max_iter") = 1000, py::arg("grad_tol") = 0.0, py::arg("seed") = 0);
  m.def("tn_solve",
        [](const DiscreteProblem& p, const GeneratorSet& init, int max_outer, double grad_tol,
           int cg_max, double cg_rtol, std::uint64_t seed) {
          TnConfig cfg;
          cfg.max_outer = max_outer;
          cfg.grad_tol = grad_tol;
          cfg.cg_max = cg_max;
          cfg.cg_rtol = cg_rtol;
          cfg.seed = seed;
          return tn_solve(p, init, cfg);
        },
        py::arg("problem"), py::arg("init"), py::arg("max_outer") = 200,
        py::arg("grad_tol") = 1e-8, py::arg("cg_max") = 30, py::arg("cg_rtol") = 1e-2,
        py::arg("seed") = 0);
  m.def("init_uniform", &init_uniform, py::arg("problem"), py::arg("k"), py::arg("seed") = 0);
  m.def("init_weighted", &init_weighted, py::arg("problem"), py::arg("k"), py::arg("seed") = 0);
  m.def("correlation_energy", &correlation_energy, py::arg("obs"), py::arg("generators"),
        py::arg("epsilon") = 1.0);

  py::enum_<SolverKind>(m, "SolverKind")
      .value("lloyd", SolverKind::lloyd)
      .value("tn", SolverKind::tn);
  py::enum_<InitKind>(m, "InitKind")
      .value("uniform", InitKind::uniform)
      .value("weighted", InitKind::weighted);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("c_tol", &PipelineConfig::c_tol)
      .def_readwrite("k_g", &PipelineConfig::k_g)
      .def_readwrite("r", &PipelineConfig::r)
      .def_readwrite("R", &PipelineConfig::R)
      .def_readwrite("mc_samples", &PipelineConfig::mc_samples)
      .def_readwrite("annulus_halfwidth", &PipelineConfig::annulus_halfwidth)
      .def_readwrite("interpolation_factor", &PipelineConfig::interpolation_factor)
      .def_readwrite("max_lag", &PipelineConfig::max_lag)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("solver", &PipelineConfig::solver)
      .def_readwrite("init", &PipelineConfig::init)
      .def_readwrite("alpha_override", &PipelineConfig::alpha_override)
      .def_readwrite("alpha_max", &PipelineConfig::alpha_max);

  py::class_<PlacementReport>(m, "PlacementReport")
      .def_readonly("d0", &PlacementReport::d0)
      .def_readonly("d0_km", &PlacementReport::d0_km)
      .def_readonly("correlogram", &PlacementReport::curve)
      .def_readonly("corr_map", &PlacementReport::corr_map)
      .def_readonly("alpha", &PlacementReport::alpha)
      .def_readonly("density", &PlacementReport::density)
      .def_readonly("result", &PlacementReport::result)
      .def_readonly("initial_energy", &PlacementReport::initial_energy)
      .def_readonly("final_energy", &PlacementReport::final_energy)
      .def_readonly("input_digest", &PlacementReport::input_digest);

  m.def("gauge_optim", &gauge_optim, py::arg("obs"), py::arg("config"));
  m.def("write_report", &write_report, py::arg("report"), py::arg("dir"));

  py::class_<ComparisonReport>(m, "ComparisonReport")
      .def_readonly("radii_km", &ComparisonReport::radii_km)
      .def_readonly("counts_within", &ComparisonReport::counts_within)
      .def_readonly("counts_outside", &ComparisonReport::counts_outside)
      .def_readonly("per_gauge_nearest_km", &ComparisonReport::per_gauge_nearest_km);

  m.def("compare_placements", &compare_placements, py::arg("real"), py::arg("optimal"),
        py::arg("radii_km"), py::arg("cell_size_km") = 1.0);
  m.def("energy_of_placement", &energy_of_placement, py::arg("density"), py::arg("generators"));

  m.def("render_svg",
        [](const ScalarField& density, const GeneratorSet& gens, py::object overlay,
           const std::string& path) {
          std::optional<std::vector<Vec2>> ov;
          if (!overlay.is_none())
            ov = points_from_array(
                py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(overlay));
          render_svg(density, gens, ov, path);
        },
        py::arg("density"), py::arg("generators"), py::arg("overlay") = py::none(),
        py::arg("path"));

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
