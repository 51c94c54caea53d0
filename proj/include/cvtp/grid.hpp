#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cvtp/errors.hpp"
#include "cvtp/geometry.hpp"

namespace cvtp {

/// Rectangular lattice of nx x ny cells with a validity mask selecting the
/// study region. Cell (i, j) has its center at grid coordinates
/// (i + 0.5, j + 0.5); physical coordinates are grid coordinates times
/// cell_size_km. "Site" refers to any lattice slot (index j*nx + i, row-major
/// with y outer); "cell" refers to an in-mask site under a dense index that
/// follows site scan order.
class Grid {
 public:
  Grid(int nx, int ny, double cell_size_km, std::vector<std::uint8_t> mask);

  /// Grid with every site in the mask.
  static Grid full(int nx, int ny, double cell_size_km);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size_km() const { return cell_size_km_; }

  int n_sites() const { return nx_ * ny_; }
  int n_cells() const { return static_cast<int>(sites_.size()); }

  bool in_mask(int i, int j) const { return mask_[static_cast<std::size_t>(j) * nx_ + i] != 0; }

  /// Dense cell index of site (i, j), or -1 when masked out.
  int cell_at(int i, int j) const { return cell_of_site_[static_cast<std::size_t>(j) * nx_ + i]; }

  /// Lattice coordinates (i, j) of a cell.
  std::pair<int, int> site_of(int cell) const {
    const int s = sites_[cell];
    return {s % nx_, s / nx_};
  }

  /// Cell center in grid coordinates.
  Vec2 center(int cell) const {
    auto [i, j] = site_of(cell);
    return {i + 0.5, j + 0.5};
  }

  double grid_to_km(double g) const { return g * cell_size_km_; }
  double km_to_grid(double km) const { return km / cell_size_km_; }

  /// Diagonal of the lattice bounding box, in grid units.
  double diagonal() const { return std::hypot(static_cast<double>(nx_), static_cast<double>(ny_)); }

  std::span<const std::uint8_t> mask() const { return mask_; }

  bool operator==(const Grid& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && cell_size_km_ == o.cell_size_km_ && mask_ == o.mask_;
  }

 private:
  int nx_;
  int ny_;
  double cell_size_km_;
  std::vector<std::uint8_t> mask_;       // nx*ny, row-major, y outer
  std::vector<std::int32_t> cell_of_site_;
  std::vector<std::int32_t> sites_;      // cell -> site
};

/// One value per in-mask cell. A NaN entry marks a cell whose value is not
/// yet known (correlation-map cells with an empty annulus); such fields must
/// pass through interpolate_field before export or density construction.
class ScalarField {
 public:
  ScalarField(Grid grid, std::vector<double> values);

  /// Constant field.
  ScalarField(Grid grid, double value);

  const Grid& grid() const { return grid_; }
  double value(int cell) const { return values_[cell]; }
  double& value(int cell) { return values_[cell]; }
  std::span<const double> values() const { return values_; }

  bool missing(int cell) const { return std::isnan(values_[cell]); }
  int count_missing() const;

  /// Extrema over non-missing cells; throws DegenerateError when every cell
  /// is missing.
  std::pair<double, double> min_max() const;

  bool operator==(const ScalarField& o) const { return grid_ == o.grid_ && values_ == o.values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// N in-mask cells x n_time scalar observations, stored per cell so that a
/// time series is contiguous.
class ObservationMatrix {
 public:
  /// `values` holds series cell-major: values[cell * n_time + t].
  ObservationMatrix(Grid grid, int n_time, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  int n_time() const { return n_time_; }

  std::span<const double> series(int cell) const {
    return {values_.data() + static_cast<std::size_t>(cell) * n_time_,
            static_cast<std::size_t>(n_time_)};
  }

  std::span<const double> values() const { return values_; }

  bool operator==(const ObservationMatrix& o) const {
    return grid_ == o.grid_ && n_time_ == o.n_time_ && values_ == o.values_;
  }

 private:
  Grid grid_;
  int n_time_;
  std::vector<double> values_;
};

}  // namespace cvtp
