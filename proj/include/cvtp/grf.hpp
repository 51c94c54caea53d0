#pragma once

#include <cstdint>
#include <memory>

#include "cvtp/grid.hpp"

namespace cvtp {

/// Exponential correlogram with a nugget: rho(d) = c0 * exp(-(d/d0)^s0) for
/// d > 0 and rho(0) = 1. Distances are in grid units.
struct CorrelogramModel {
  double c0 = 1.0;   ///< nugget, in (0, 1]
  double d0 = 1.0;   ///< decorrelation scale, > 0
  double s0 = 1.0;   ///< shape, in (0, 2]

  double operator()(double d) const;
  void validate() const;
};

struct FieldSpec {
  Grid grid;
  int n_time = 3;
  CorrelogramModel model;
  std::uint64_t seed = 0;
};

/// Exact Gaussian-random-field sampler: factorizes the dense inter-cell
/// covariance once (Cholesky, with a diagonal jitter ladder of 1e-10 x 10^k,
/// k = 0..2, applied on failure) and draws independent zero-mean unit-variance
/// fields from it. Caps at 10,000 in-mask cells.
class GrfSampler {
 public:
  GrfSampler(const Grid& grid, const CorrelogramModel& model);
  ~GrfSampler();

  ObservationMatrix sample(int n_time, std::uint64_t seed) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around GrfSampler.
ObservationMatrix generate_grf(const FieldSpec& spec);

}  // namespace cvtp
