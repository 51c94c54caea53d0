#include "cvtp/cvt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "cvtp/correlation.hpp"
#include "cvtp/io.hpp"
#include "cvtp/rng.hpp"

namespace cvtp {

void GeneratorSet::validate() const {
  if (positions.empty()) throw ValidationError("generators: need k >= 1");
  for (const Vec2& p : positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw ValidationError("generators: non-finite coordinate");
}

void DiscreteProblem::validate() const {
  if (points.empty()) throw ValidationError("problem: no data points");
  if (points.size() != weights.size())
    throw DimensionError("problem: " + std::to_string(points.size()) + " points vs " +
                         std::to_string(weights.size()) + " weights");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("problem: weights must be positive and finite");
}

DiscreteProblem DiscreteProblem::from_field(const ScalarField& density) {
  DiscreteProblem p;
  const Grid& g = density.grid();
  p.points.reserve(g.n_cells());
  p.weights.reserve(g.n_cells());
  for (int c = 0; c < g.n_cells(); ++c) {
    p.points.push_back(g.center(c));
    p.weights.push_back(density.value(c));
  }
  p.validate();
  return p;
}

double DiscreteProblem::diagonal() const {
  double lo_x = points[0].x, hi_x = points[0].x;
  double lo_y = points[0].y, hi_y = points[0].y;
  for (const Vec2& p : points) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  return std::hypot(hi_x - lo_x, hi_y - lo_y);
}

std::vector<int> assign(const DiscreteProblem& problem, const GeneratorSet& gens) {
  gens.validate();
  const int k = gens.k();
  std::vector<int> a(problem.points.size());
  for (std::size_t j = 0; j < problem.points.size(); ++j) {
    const Vec2 y = problem.points[j];
    int best = 0;
    double best_d2 = distance2(y, gens.positions[0]);
    for (int i = 1; i < k; ++i) {
      const double d2 = distance2(y, gens.positions[i]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    a[j] = best;
  }
  return a;
}

double energy(const DiscreteProblem& problem, const GeneratorSet& gens,
              const std::vector<int>& assignment) {
  double e = 0.0;
  for (std::size_t j = 0; j < problem.points.size(); ++j)
    e += problem.weights[j] * distance2(problem.points[j], gens.positions[assignment[j]]);
  return e;
}

double energy(const DiscreteProblem& problem, const GeneratorSet& gens) {
  return energy(problem, gens, assign(problem, gens));
}

CvtGradient gradient(const DiscreteProblem& problem, const GeneratorSet& gens,
                     const std::vector<int>& assignment) {
  const int k = gens.k();
  CvtGradient out;
  out.g.assign(k, Vec2());
  out.empty_cell.assign(k, 1);
  for (std::size_t j = 0; j < problem.points.size(); ++j) {
    const int i = assignment[j];
    const double w2 = 2.0 * problem.weights[j];
    out.g[i] += (gens.positions[i] - problem.points[j]) * w2;
    out.empty_cell[i] = 0;
  }
  for (int i = 0; i < k; ++i) {
    if (out.empty_cell[i]) out.g[i] = Vec2();
    out.max_norm = std::max({out.max_norm, std::abs(out.g[i].x), std::abs(out.g[i].y)});
  }
  return out;
}

CvtGradient gradient(const DiscreteProblem& problem, const GeneratorSet& gens) {
  return gradient(problem, gens, assign(problem, gens));
}

namespace {

struct Centroids {
  std::vector<Vec2> c;
  std::vector<std::uint8_t> empty;
  double max_dist_to_centroid = 0.0;  // over non-empty generators
};

Centroids centroids(const DiscreteProblem& problem, const GeneratorSet& gens,
                    const std::vector<int>& assignment) {
  const int k = gens.k();
  std::vector<double> mass(k, 0.0);
  Centroids out;
  out.c.assign(k, Vec2());
  out.empty.assign(k, 1);
  for (std::size_t j = 0; j < problem.points.size(); ++j) {
    const int i = assignment[j];
    const double w = problem.weights[j];
    out.c[i] += problem.points[j] * w;
    mass[i] += w;
  }
  for (int i = 0; i < k; ++i) {
    if (mass[i] > 0.0) {
      out.empty[i] = 0;
      out.c[i] = out.c[i] * (1.0 / mass[i]);
      out.max_dist_to_centroid =
          std::max(out.max_dist_to_centroid, distance(out.c[i], gens.positions[i]));
    } else {
      out.c[i] = gens.positions[i];
    }
  }
  return out;
}

/// Moves every empty generator onto a distinct unoccupied data point drawn
/// with probability proportional to weight. Moving an empty generator never
/// raises the energy: it owns no points, and the new position can only offer
/// points a closer generator.
bool relocate_empty(const DiscreteProblem& problem, GeneratorSet& gens,
                    const std::vector<std::uint8_t>& empty, Rng& rng) {
  bool any = false;
  std::vector<double> cumulative(problem.weights.size());
  std::partial_sum(problem.weights.begin(), problem.weights.end(), cumulative.begin());
  const double total = cumulative.back();
  for (int i = 0; i < gens.k(); ++i) {
    if (!empty[i]) continue;
    any = true;
    for (int attempt = 0; attempt < problem.n(); ++attempt) {
      const double u = rng.uniform() * total;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const std::size_t j = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                     problem.points.size() - 1);
      const Vec2 cand = problem.points[j];
      bool occupied = false;
      for (int q = 0; q < gens.k(); ++q)
        if (q != i && gens.positions[q].x == cand.x && gens.positions[q].y == cand.y)
          occupied = true;
      if (!occupied) {
        gens.positions[i] = cand;
        break;
      }
    }
  }
  return any;
}

GeneratorSet sample_points(const DiscreteProblem& problem, int k, std::uint64_t seed,
                           bool weighted) {
  problem.validate();
  if (k < 1 || k > problem.n())
    throw ConfigError("init: k must be in [1, " + std::to_string(problem.n()) + "], got " +
                      std::to_string(k));
  Rng rng(derive_seed(seed, 0x696e6974ULL));
  std::vector<double> w(problem.weights.size(), 1.0);
  if (weighted) w = problem.weights;
  GeneratorSet gens;
  gens.positions.reserve(k);
  // Sampling without replacement: zero out the weight of chosen points.
  std::vector<double> cumulative(w.size());
  for (int pick = 0; pick < k; ++pick) {
    std::partial_sum(w.begin(), w.end(), cumulative.begin());
    const double total = cumulative.back();
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t j =
        std::min(static_cast<std::size_t>(it - cumulative.begin()), w.size() - 1);
    while (w[j] == 0.0 && j + 1 < w.size()) ++j;  // guard against rounding at block edges
    gens.positions.push_back(problem.points[j]);
    w[j] = 0.0;
  }
  return gens;
}

/// Fixed-point tolerance used to certify a converged result: every non-empty
/// generator within this fraction of the bounding-box diagonal of its cell's
/// weighted centroid.
constexpr double kFixedPointFrac = 5e-7;

void finish_result(CvtResult& result, double e, const CvtGradient& grad, int iters) {
  result.iterations = iters;
  result.final_energy = e;
  result.final_grad_norm = grad.max_norm;
  result.trace.push_back({iters, e, grad.max_norm});
}

/// Trailing Lloyd polish: drives generators onto their cell centroids when a
/// gradient-based exit left the fixed-point condition slack (a cell of tiny
/// total weight can have a small gradient while sitting far from its
/// centroid). Each step is a plain Lloyd update, so the energy trace stays
/// nonincreasing.
void polish_to_fixed_point(const DiscreteProblem& problem, GeneratorSet& gens, double& e,
                           std::vector<int>& a, CvtGradient& grad, int& iter,
                           std::vector<TraceRow>& trace, Rng& rng) {
  const double tol = kFixedPointFrac * problem.diagonal();
  for (int extra = 0; extra < 500; ++extra) {
    Centroids cen = centroids(problem, gens, a);
    bool any_empty = std::find(cen.empty.begin(), cen.empty.end(), 1) != cen.empty.end();
    if (cen.max_dist_to_centroid <= tol && !any_empty) return;
    trace.push_back({iter, e, grad.max_norm});
    ++iter;
    for (int i = 0; i < gens.k(); ++i)
      if (!cen.empty[i]) gens.positions[i] = cen.c[i];
    if (any_empty) relocate_empty(problem, gens, cen.empty, rng);
    a = assign(problem, gens);
    e = energy(problem, gens, a);
    grad = gradient(problem, gens, a);
  }
}

}  // namespace

GeneratorSet lloyd_step(const DiscreteProblem& problem, const GeneratorSet& gens,
                        std::uint64_t seed) {
  problem.validate();
  gens.validate();
  const std::vector<int> a = assign(problem, gens);
  const Centroids cen = centroids(problem, gens, a);
  GeneratorSet next = gens;
  for (int i = 0; i < gens.k(); ++i)
    if (!cen.empty[i]) next.positions[i] = cen.c[i];
  if (std::find(cen.empty.begin(), cen.empty.end(), 1) != cen.empty.end()) {
    Rng rng(derive_seed(seed, 0x656d7074ULL));
    relocate_empty(problem, next, cen.empty, rng);
  }
  return next;
}

CvtResult lloyd_solve(const DiscreteProblem& problem, const GeneratorSet& init,
                      const LloydConfig& config) {
  problem.validate();
  init.validate();
  if (!(config.move_tol > 0.0)) throw ValidationError("lloyd: move_tol must be positive");

  CvtResult result;
  result.generators = init;
  Rng reloc_rng(derive_seed(config.seed, 0x6c6c6f79ULL));

  std::vector<int> a = assign(problem, result.generators);
  double e = energy(problem, result.generators, a);
  CvtGradient grad = gradient(problem, result.generators, a);

  int iter = 0;
  result.status = SolveStatus::max_iterations;
  for (; iter < config.max_iter; ++iter) {
    Centroids cen = centroids(problem, result.generators, a);
    const bool any_empty =
        std::find(cen.empty.begin(), cen.empty.end(), 1) != cen.empty.end();

    const bool grad_ok = config.grad_tol > 0.0
                             ? grad.max_norm < config.grad_tol * (1.0 + std::abs(e))
                             : cen.max_dist_to_centroid < config.move_tol;
    if (grad_ok && !any_empty) {
      result.status = SolveStatus::converged;
      break;
    }

    result.trace.push_back({iter, e, grad.max_norm});
    for (int i = 0; i < result.generators.k(); ++i)
      if (!cen.empty[i]) result.generators.positions[i] = cen.c[i];
    if (any_empty) relocate_empty(problem, result.generators, cen.empty, reloc_rng);

    a = assign(problem, result.generators);
    e = energy(problem, result.generators, a);
    grad = gradient(problem, result.generators, a);
  }

  if (result.status == SolveStatus::converged && config.grad_tol > 0.0)
    polish_to_fixed_point(problem, result.generators, e, a, grad, iter, result.trace, reloc_rng);
  finish_result(result, e, grad, iter);
  return result;
}

namespace {

using Flat = std::vector<double>;

Flat flatten(const GeneratorSet& gens) {
  Flat x(2 * gens.k());
  for (int i = 0; i < gens.k(); ++i) {
    x[2 * i] = gens.positions[i].x;
    x[2 * i + 1] = gens.positions[i].y;
  }
  return x;
}

GeneratorSet unflatten(const Flat& x) {
  GeneratorSet gens;
  gens.positions.resize(x.size() / 2);
  for (std::size_t i = 0; i < gens.positions.size(); ++i)
    gens.positions[i] = {x[2 * i], x[2 * i + 1]};
  return gens;
}

double fdot(const Flat& a, const Flat& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double fnorm2(const Flat& a) { return std::sqrt(fdot(a, a)); }

Flat grad_flat(const DiscreteProblem& problem, const Flat& x) {
  const GeneratorSet gens = unflatten(x);
  const CvtGradient g = gradient(problem, gens);
  Flat out(x.size());
  for (int i = 0; i < gens.k(); ++i) {
    out[2 * i] = g.g[i].x;
    out[2 * i + 1] = g.g[i].y;
  }
  return out;
}

/// Hessian-vector product by forward differencing of the gradient,
/// step sqrt(machine epsilon) * (1 + |x|) / |v|.
Flat hess_vec(const DiscreteProblem& problem, const Flat& x, const Flat& g, const Flat& v) {
  const double vn = fnorm2(v);
  const double h = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + fnorm2(x)) / vn;
  Flat xs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + h * v[i];
  Flat gs = grad_flat(problem, xs);
  for (std::size_t i = 0; i < x.size(); ++i) gs[i] = (gs[i] - g[i]) / h;
  return gs;
}

/// Linear CG on the Newton system H p = -g, truncated at cg_max iterations,
/// relative residual cg_rtol, or nonpositive curvature. Starting iterate
/// p0 = 0, so the first residual is -g.
Flat cg_direction(const DiscreteProblem& problem, const Flat& x, const Flat& g,
                  const TnConfig& cfg) {
  Flat p(x.size(), 0.0);
  Flat r(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) r[i] = -g[i];
  Flat v = r;
  double rr = fdot(r, r);
  const double r0 = std::sqrt(rr);
  if (r0 == 0.0) return p;

  for (int k = 0; k < cfg.cg_max; ++k) {
    const Flat hv = hess_vec(problem, x, g, v);
    const double curv = fdot(v, hv);
    if (curv <= 0.0) {
      if (k == 0)
        for (std::size_t i = 0; i < g.size(); ++i) p[i] = -g[i];
      return p;
    }
    const double alpha = rr / curv;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] += alpha * v[i];
      r[i] -= alpha * hv[i];
    }
    const double rr_new = fdot(r, r);
    if (std::sqrt(rr_new) <= cfg.cg_rtol * r0) break;
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = r[i] + beta * v[i];
    rr = rr_new;
  }
  return p;
}

}  // namespace

CvtResult tn_solve(const DiscreteProblem& problem, const GeneratorSet& init,
                   const TnConfig& config) {
  problem.validate();
  init.validate();

  CvtResult result;
  result.generators = init;
  Rng reloc_rng(derive_seed(config.seed, 0x746e736fULL));

  std::vector<int> a = assign(problem, result.generators);
  {
    const Centroids cen = centroids(problem, result.generators, a);
    if (std::find(cen.empty.begin(), cen.empty.end(), 1) != cen.empty.end()) {
      relocate_empty(problem, result.generators, cen.empty, reloc_rng);
      a = assign(problem, result.generators);
    }
  }
  double e = energy(problem, result.generators, a);
  CvtGradient grad = gradient(problem, result.generators, a);
  Flat x = flatten(result.generators);

  int iter = 0;
  int small_changes = 0;
  result.status = SolveStatus::max_iterations;
  bool converged_exit = false;

  for (; iter < config.max_outer; ++iter) {
    if (grad.max_norm < config.grad_tol * (1.0 + std::abs(e)) || small_changes >= 3) {
      result.status = SolveStatus::converged;
      converged_exit = true;
      break;
    }
    result.trace.push_back({iter, e, grad.max_norm});

    Flat g(2 * result.generators.k());
    for (int i = 0; i < result.generators.k(); ++i) {
      g[2 * i] = grad.g[i].x;
      g[2 * i + 1] = grad.g[i].y;
    }

    Flat p = cg_direction(problem, x, g, config);
    double gp = fdot(g, p);
    if (!(gp < 0.0)) {  // not a descent direction; fall back to steepest descent
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = -g[i];
      gp = fdot(g, p);
    }

    // Armijo backtracking.
    double step = 1.0;
    bool accepted = false;
    Flat xs(x.size());
    double e_new = e;
    for (int bt = 0; bt <= config.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] + step * p[i];
      e_new = energy(problem, unflatten(xs));
      if (e_new <= e + config.armijo_c * step * gp) {
        accepted = true;
        break;
      }
      step *= config.backtrack;
    }
    if (!accepted) {
      result.status = SolveStatus::stalled;
      break;
    }

    const double e_prev = e;
    x = xs;
    result.generators = unflatten(x);
    a = assign(problem, result.generators);
    e = energy(problem, result.generators, a);
    grad = gradient(problem, result.generators, a);

    {
      const Centroids cen = centroids(problem, result.generators, a);
      if (std::find(cen.empty.begin(), cen.empty.end(), 1) != cen.empty.end()) {
        relocate_empty(problem, result.generators, cen.empty, reloc_rng);
        a = assign(problem, result.generators);
        e = energy(problem, result.generators, a);
        grad = gradient(problem, result.generators, a);
        x = flatten(result.generators);
      }
    }

    if (std::abs(e_prev - e) <= 1e-12 * std::max(1.0, std::abs(e_prev)))
      ++small_changes;
    else
      small_changes = 0;
  }

  if (converged_exit) {
    polish_to_fixed_point(problem, result.generators, e, a, grad, iter, result.trace, reloc_rng);
    x = flatten(result.generators);
  }
  finish_result(result, e, grad, iter);
  return result;
}

GeneratorSet init_weighted(const DiscreteProblem& problem, int k, std::uint64_t seed) {
  return sample_points(problem, k, seed, true);
}

GeneratorSet init_uniform(const DiscreteProblem& problem, int k, std::uint64_t seed) {
  return sample_points(problem, k, seed, false);
}

double correlation_energy(const ObservationMatrix& obs, const GeneratorSet& gens, double epsilon) {
  gens.validate();
  if (!(epsilon > 0.0)) throw ValidationError("correlation energy: epsilon must be positive");
  const Grid& grid = obs.grid();
  if (grid.n_cells() > 2500)
    throw CapacityError("correlation energy: " + std::to_string(grid.n_cells()) +
                        " cells exceeds the pairwise-correlation cap of 2500");

  // Snap generators to the nearest cell centers so each has a time series.
  std::vector<int> gen_cell(gens.k());
  for (int i = 0; i < gens.k(); ++i) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int c = 0; c < grid.n_cells(); ++c) {
      const double d2 = distance2(gens.positions[i], grid.center(c));
      if (d2 < best_d2) {
        best_d2 = d2;
        best = c;
      }
    }
    gen_cell[i] = best;
  }

  for (int i = 0; i < gens.k(); ++i)
    if (!pearson(obs.series(gen_cell[i]), obs.series(gen_cell[i])).has_value())
      throw DegenerateError("correlation energy: generator " + std::to_string(i) +
                            " sits on a zero-variance cell");

  double total = 0.0;
  for (int c = 0; c < grid.n_cells(); ++c) {
    int nearest = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < gens.k(); ++i) {
      const double d2 = distance2(grid.center(c), grid.center(gen_cell[i]));
      if (d2 < best_d2) {
        best_d2 = d2;
        nearest = i;
      }
    }
    if (c == gen_cell[nearest]) continue;  // corr(x, x) = 1 contributes nothing
    const auto r = pearson(obs.series(c), obs.series(gen_cell[nearest]));
    if (!r)
      throw DegenerateError("correlation energy: cell " + std::to_string(c) +
                            " has a zero-variance series");
    total += 2.0 * epsilon * epsilon * (1.0 - *r);
  }
  return total;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max-iterations";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

void save_generators_csv(const GeneratorSet& gens, const std::string& path, double cell_size_km) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "id,x_grid,y_grid,x_km,y_km\n";
  for (int i = 0; i < gens.k(); ++i) {
    const Vec2& p = gens.positions[i];
    out << i << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
        << format_double(p.x * cell_size_km) << ',' << format_double(p.y * cell_size_km) << '\n';
  }
  if (!out) throw IoError("write failure on " + path);
}

void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "iter,energy,grad_norm\n";
  for (const TraceRow& row : trace)
    out << row.iter << ',' << format_double(row.energy) << ',' << format_double(row.grad_norm)
        << '\n';
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace cvtp
