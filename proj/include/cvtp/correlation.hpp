#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvtp/grid.hpp"

namespace cvtp {

/// Pearson product-moment correlation, clamped to [-1, 1]. Returns nullopt
/// when either series has zero variance; callers decide how to treat the
/// degenerate case. Requires equal lengths >= 3 and finite values.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Per-cell series standardized to zero mean and unit Euclidean norm, so that
/// a Pearson coefficient is a plain dot product. Cells whose series has zero
/// variance are flagged degenerate.
struct StandardizedSeries {
  int n_cells = 0;
  int n_time = 0;
  std::vector<double> z;               // cell-major, like ObservationMatrix
  std::vector<std::uint8_t> degenerate;

  std::span<const double> series(int cell) const {
    return {z.data() + static_cast<std::size_t>(cell) * n_time,
            static_cast<std::size_t>(n_time)};
  }
};

StandardizedSeries standardize(const ObservationMatrix& obs);

/// Mean correlation versus separation distance (grid units).
struct Correlogram {
  std::vector<double> lags;          // strictly increasing, starting at 1
  std::vector<double> mean_corr;     // in [-1, 1]
  std::vector<long> sample_counts;   // samples (or pairs) behind each mean

  std::size_t size() const { return lags.size(); }
  void validate() const;
};

struct DecorrelationDistance {
  int distance = 0;        // grid units
  bool decorrelated = false;  // false: no lag dropped below 1/e
};

struct VariogramFit {
  double c0 = 1.0;
  double d0 = 1.0;
  double s0 = 1.0;
  double rmse = 0.0;
};

/// Monte Carlo map of the mean correlation between each in-mask cell and
/// cells at distance ~ d (annulus of the given halfwidth, clipped to the
/// mask). n_samples draws per cell, uniform with replacement; degenerate
/// pairs are skipped and resampled up to 10*n_samples attempts. Each cell's
/// randomness derives from (seed, cell index), so the result is identical
/// under any evaluation order. Cells with an empty annulus, an all-degenerate
/// annulus, or a degenerate own series come back as missing (NaN) and are
/// expected to be filled by interpolate_field; if every cell is missing the
/// call fails with DegenerateError.
ScalarField effective_correlation_map(const ObservationMatrix& obs, double d, int n_samples,
                                      double annulus_halfwidth, std::uint64_t seed);

/// Exhaustive counterpart of effective_correlation_map: averages over every
/// annulus cell instead of sampling. Serves as the oracle for the Monte Carlo
/// estimate.
ScalarField effective_correlation_exhaustive(const ObservationMatrix& obs, double d,
                                             double annulus_halfwidth);

/// Domain correlogram: for each integer lag 1..max_lag, the spatial mean of
/// the effective-correlation map at that lag (annulus halfwidth 1). Lags
/// where every cell is missing are dropped; fewer than two surviving lags is
/// an error.
Correlogram correlogram(const ObservationMatrix& obs, int max_lag, int n_samples,
                        std::uint64_t seed);

/// First lag whose mean correlation falls strictly below 1/e; when no lag
/// qualifies, the largest lag with decorrelated = false.
DecorrelationDistance decorrelation_distance(const Correlogram& c);

/// Weighted least-squares fit of the exponential-nugget model to a
/// correlogram: coarse grid search over (c0, d0, s0) followed by
/// coordinate-descent refinement to relative parameter tolerance 1e-4.
VariogramFit fit_exponential_nugget(const Correlogram& c);

/// Fills missing cells by nearest non-missing neighbor, then refines the grid
/// by an integer factor with bilinear interpolation of cell-center values.
/// A refined cell is in-mask iff its containing coarse cell is. Output values
/// stay within the input's [min, max].
ScalarField interpolate_field(const ScalarField& field, int factor);

void save_correlogram_csv(const Correlogram& c, const std::string& path);
Correlogram load_correlogram_csv(const std::string& path);

}  // namespace cvtp
