#include "cvtp/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cvtp {

Grid::Grid(int nx, int ny, double cell_size_km, std::vector<std::uint8_t> mask)
    : nx_(nx), ny_(ny), cell_size_km_(cell_size_km), mask_(std::move(mask)) {
  if (nx_ < 2 || ny_ < 2)
    throw ValidationError("grid: nx and ny must both be >= 2, got " + std::to_string(nx_) + "x" +
                          std::to_string(ny_));
  if (!(cell_size_km_ > 0.0) || !std::isfinite(cell_size_km_))
    throw ValidationError("grid: cell_size_km must be positive and finite");
  if (mask_.size() != static_cast<std::size_t>(nx_) * ny_)
    throw DimensionError("grid: mask has " + std::to_string(mask_.size()) + " entries, expected " +
                         std::to_string(static_cast<std::size_t>(nx_) * ny_));

  cell_of_site_.assign(mask_.size(), -1);
  for (std::size_t s = 0; s < mask_.size(); ++s) {
    if (mask_[s]) {
      cell_of_site_[s] = static_cast<std::int32_t>(sites_.size());
      sites_.push_back(static_cast<std::int32_t>(s));
    }
  }
  if (sites_.empty()) throw ValidationError("grid: mask selects no cells");
}

Grid Grid::full(int nx, int ny, double cell_size_km) {
  if (nx < 2 || ny < 2) throw ValidationError("grid: nx and ny must both be >= 2");
  return Grid(nx, ny, cell_size_km,
              std::vector<std::uint8_t>(static_cast<std::size_t>(nx) * ny, 1));
}

ScalarField::ScalarField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(grid_.n_cells()))
    throw DimensionError("scalar field: " + std::to_string(values_.size()) + " values for " +
                         std::to_string(grid_.n_cells()) + " in-mask cells");
}

ScalarField::ScalarField(Grid grid, double value)
    : grid_(std::move(grid)), values_(static_cast<std::size_t>(grid_.n_cells()), value) {}

int ScalarField::count_missing() const {
  int n = 0;
  for (double v : values_)
    if (std::isnan(v)) ++n;
  return n;
}

std::pair<double, double> ScalarField::min_max() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values_) {
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo > hi) throw DegenerateError("scalar field: every cell is missing");
  return {lo, hi};
}

ObservationMatrix::ObservationMatrix(Grid grid, int n_time, std::vector<double> values)
    : grid_(std::move(grid)), n_time_(n_time), values_(std::move(values)) {
  if (n_time_ < 3)
    throw ValidationError("observations: n_time must be >= 3, got " + std::to_string(n_time_));
  const std::size_t expected = static_cast<std::size_t>(grid_.n_cells()) * n_time_;
  if (values_.size() != expected)
    throw DimensionError("observations: " + std::to_string(values_.size()) + " values, expected " +
                         std::to_string(expected));
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      const int cell = static_cast<int>(k / n_time_);
      const int t = static_cast<int>(k % n_time_);
      throw ValidationError("observations: non-finite value at cell " + std::to_string(cell) +
                            ", time step " + std::to_string(t));
    }
  }
}

}  // namespace cvtp
