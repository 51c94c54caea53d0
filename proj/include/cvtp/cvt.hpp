#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvtp/geometry.hpp"
#include "cvtp/grid.hpp"

namespace cvtp {

struct GeneratorSet {
  std::vector<Vec2> positions;

  int k() const { return static_cast<int>(positions.size()); }
  void validate() const;
};

/// Fixed data sites with positive weights; the discrete domain the CVT energy
/// is evaluated on.
struct DiscreteProblem {
  std::vector<Vec2> points;
  std::vector<double> weights;

  int n() const { return static_cast<int>(points.size()); }
  void validate() const;

  /// Cell centers of a density field, weighted by its values.
  static DiscreteProblem from_field(const ScalarField& density);

  /// Axis-aligned bounding box diagonal of the points.
  double diagonal() const;
};

/// Nearest-generator index per point; ties go to the smallest index.
std::vector<int> assign(const DiscreteProblem& problem, const GeneratorSet& gens);

/// Sum over points of weight x squared distance to the assigned generator.
double energy(const DiscreteProblem& problem, const GeneratorSet& gens);
double energy(const DiscreteProblem& problem, const GeneratorSet& gens,
              const std::vector<int>& assignment);

struct CvtGradient {
  std::vector<Vec2> g;                  // per generator, assignment held fixed
  std::vector<std::uint8_t> empty_cell; // generators owning no points
  double max_norm = 0.0;                // max |component|
};

CvtGradient gradient(const DiscreteProblem& problem, const GeneratorSet& gens);
CvtGradient gradient(const DiscreteProblem& problem, const GeneratorSet& gens,
                     const std::vector<int>& assignment);

/// One Lloyd update: every generator with a non-empty cell moves to the
/// weighted centroid of its cell; empty generators are relocated to a data
/// point drawn with probability proportional to weight (seeded).
GeneratorSet lloyd_step(const DiscreteProblem& problem, const GeneratorSet& gens,
                        std::uint64_t seed = 0);

enum class SolveStatus { converged, max_iterations, stalled };

const char* to_string(SolveStatus s);

struct TraceRow {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
};

struct CvtResult {
  GeneratorSet generators;
  std::vector<TraceRow> trace;  // per outer iteration, energy nonincreasing
  SolveStatus status = SolveStatus::converged;
  int iterations = 0;
  double final_energy = 0.0;
  double final_grad_norm = 0.0;
};

struct LloydConfig {
  double move_tol = 1e-7;  ///< stop when the max generator movement drops below
  int max_iter = 1000;
  double grad_tol = 0.0;   ///< if > 0, stop instead on max-norm < grad_tol * (1 + |energy|)
  std::uint64_t seed = 0;  ///< empty-cell relocation stream
};

CvtResult lloyd_solve(const DiscreteProblem& problem, const GeneratorSet& init,
                      const LloydConfig& config = {});

/// Truncated-Newton solver: conjugate-gradient inner loop on the Newton
/// system with finite-difference Hessian-vector products, descent-direction
/// test with steepest-descent fallback, and Armijo backtracking. Converged
/// results additionally satisfy the centroid fixed-point condition (each
/// non-empty generator within 1e-6 x bounding-box diagonal of its cell's
/// weighted centroid); trailing Lloyd steps establish it when the gradient
/// test alone was too loose.
struct TnConfig {
  int max_outer = 200;
  double grad_tol = 1e-8;     ///< scaled: stop at max-norm < grad_tol * (1 + |energy|)
  int cg_max = 30;
  double cg_rtol = 1e-2;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
  std::uint64_t seed = 0;     ///< empty-cell relocation stream
};

CvtResult tn_solve(const DiscreteProblem& problem, const GeneratorSet& init,
                   const TnConfig& config = {});

/// Weight-proportional sampling of k distinct data points (the default,
/// better-conditioned initialization).
GeneratorSet init_weighted(const DiscreteProblem& problem, int k, std::uint64_t seed);

/// Uniform sampling of k distinct data points.
GeneratorSet init_uniform(const DiscreteProblem& problem, int k, std::uint64_t seed);

/// Correlation-metric energy of Eq.-(2) form: sum over in-mask cells of
/// 2 eps^2 (1 - corr(cell, assigned generator)), generators snapped to the
/// nearest cell centers. Small instances only (<= 2500 cells).
double correlation_energy(const ObservationMatrix& obs, const GeneratorSet& gens, double epsilon);

void save_generators_csv(const GeneratorSet& gens, const std::string& path, double cell_size_km);
void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace cvtp
