#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvtp/geometry.hpp"
#include "cvtp/grid.hpp"

namespace cvtp {

enum class FileFormat { binary, csv };

/// Picks binary for ".bin" and csv for ".csv"; anything else is binary.
FileFormat format_from_path(const std::string& path);

// Binary observation format, little-endian:
//   magic "CVTP" | u32 version = 1 | u32 nx | u32 ny | u32 n_time |
//   u8 mask_present | [nx*ny mask bytes, row-major y outer] |
//   per time step, the in-mask cell values as f64 in mask scan order.
// A scalar field is the same layout with n_time = 1. The CSV long format has
// header "x,y,t,value" with zero-based indices; the mask is the set of (x, y)
// that appear, and every in-mask cell must appear at every t.
//
// Neither format carries a physical cell size; loaders default it to 1 km and
// callers (the CLI exposes --cell-size-km) rescale afterwards.

ObservationMatrix load_observations(const std::string& path, FileFormat format,
                                    double cell_size_km = 1.0);
void save_observations(const ObservationMatrix& obs, const std::string& path, FileFormat format);

ScalarField load_field(const std::string& path, FileFormat format, double cell_size_km = 1.0);
void save_field(const ScalarField& field, const std::string& path, FileFormat format);

/// Serialized binary-format bytes of an observation matrix (also what
/// save_observations writes in binary mode).
std::vector<std::uint8_t> observation_bytes(const ObservationMatrix& obs);

/// FNV-1a 64-bit digest, hex-encoded; used for report provenance.
std::string fnv1a64_hex(const std::vector<std::uint8_t>& bytes);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

enum class PointColumns { km, grid };

/// Reads a two-column point list from CSV. Accepts the generators.csv schema
/// (id,x_grid,y_grid,x_km,y_km) or a minimal header (x_km,y_km or x,y);
/// `columns` picks which coordinate pair of the full schema is wanted.
std::vector<Vec2> load_points_csv(const std::string& path,
                                  PointColumns columns = PointColumns::km);

}  // namespace cvtp
