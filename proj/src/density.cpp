#include "cvtp/density.hpp"

#include <cmath>
#include <string>

namespace cvtp {

namespace {

std::pair<double, double> corr_extrema(const ScalarField& corr) {
  for (int c = 0; c < corr.grid().n_cells(); ++c)
    if (corr.missing(c))
      throw ValidationError("density: correlation field has missing cells; interpolate first");
  const auto [lo, hi] = corr.min_max();
  if (!(hi - lo > 1e-9))
    throw DegenerateError("density: correlation field is constant (extent " +
                          std::to_string(hi - lo) + "), density undefined");
  return {lo, hi};
}

}  // namespace

ScalarField build_density(const ScalarField& corr, double r, double R, int alpha) {
  if (!(r >= 0.0) || !(R > 0.0)) throw ValidationError("density: need r >= 0 and R > 0");
  if (alpha < 1) throw ValidationError("density: alpha must be a positive integer");
  const auto [c_min, c_max] = corr_extrema(corr);
  const double inv = 1.0 / (c_max - c_min);

  std::vector<double> rho(corr.grid().n_cells());
  for (int c = 0; c < corr.grid().n_cells(); ++c) {
    const double rel = (c_max - corr.value(c)) * inv;
    rho[c] = r + R * std::pow(rel, static_cast<double>(alpha));
  }
  return ScalarField(corr.grid(), std::move(rho));
}

long count_below_threshold(const ScalarField& corr, int alpha, double c_tol) {
  if (!(c_tol > 0.0 && c_tol < 1.0)) throw ValidationError("density: c_tol must be in (0,1)");
  if (alpha < 1) throw ValidationError("density: alpha must be a positive integer");
  const auto [c_min, c_max] = corr_extrema(corr);
  const double inv = 1.0 / (c_max - c_min);

  long k = 0;
  for (int c = 0; c < corr.grid().n_cells(); ++c) {
    const double rel = (corr.value(c) - c_min) * inv;
    if (std::pow(rel, static_cast<double>(alpha)) < c_tol) ++k;
  }
  return k;
}

AlphaSelection select_alpha(const ScalarField& corr, double c_tol, long k_g, int alpha_max) {
  if (k_g < 1) throw ValidationError("alpha selection: k_g must be >= 1");
  if (alpha_max < 1) throw ValidationError("alpha selection: alpha_max must be >= 1");

  AlphaSelection sel;
  for (int alpha = 1; alpha <= alpha_max; ++alpha) {
    const long k = count_below_threshold(corr, alpha, c_tol);
    sel.trace.emplace_back(alpha, k);
    if (k > k_g) {
      if (alpha == 1) {
        sel.alpha = 1;
        sel.k_at_alpha = k;
        sel.over_threshold = true;
        return sel;
      }
      break;  // k is nondecreasing in alpha; nothing larger can qualify
    }
    sel.alpha = alpha;
    sel.k_at_alpha = k;
  }
  return sel;
}

}  // namespace cvtp
