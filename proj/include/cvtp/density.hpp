#pragma once

#include <utility>
#include <vector>

#include "cvtp/grid.hpp"

namespace cvtp {

struct AlphaSelection {
  int alpha = 1;
  long k_at_alpha = 0;
  std::vector<std::pair<int, long>> trace;  // every examined (alpha, k)
  bool over_threshold = false;              // k(1) already exceeded k_g
};

/// Power-law density rho = r + R * ((c_max - corr) / (c_max - c_min))^alpha,
/// with c_min/c_max the field's in-mask extrema. Outputs lie in [r, r + R];
/// the minimum-correlation cell maps to r + R, the maximum to r. A constant
/// correlation field (extent < 1e-9) is a DegenerateError.
ScalarField build_density(const ScalarField& corr, double r, double R, int alpha);

/// Number of in-mask cells whose relative correlation
/// ((corr - c_min) / (c_max - c_min))^alpha falls strictly below c_tol.
long count_below_threshold(const ScalarField& corr, int alpha, double c_tol);

/// Largest integer alpha in [1, alpha_max] with k(alpha) <= k_g; k(alpha) is
/// nondecreasing, so the scan stops at the first exceeding alpha. When even
/// alpha = 1 exceeds k_g, returns alpha = 1 with over_threshold set.
AlphaSelection select_alpha(const ScalarField& corr, double c_tol, long k_g, int alpha_max = 32);

}  // namespace cvtp
