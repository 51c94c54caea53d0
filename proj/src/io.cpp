#include "cvtp/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace cvtp {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'T', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return buf_[pos_++];
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(buf_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(buf_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      throw FormatError("byte offset " + std::to_string(pos_) + ": truncated " + what);
  }

  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path);
  return buf;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failure on " + path);
}

void check_finite_payload(const Grid& grid, int n_time, const std::vector<double>& cell_major) {
  for (std::size_t k = 0; k < cell_major.size(); ++k) {
    if (!std::isfinite(cell_major[k])) {
      const int cell = static_cast<int>(k / n_time);
      const int t = static_cast<int>(k % n_time);
      auto [i, j] = grid.site_of(cell);
      throw ValidationError("non-finite value at cell (" + std::to_string(i) + "," +
                            std::to_string(j) + "), time step " + std::to_string(t));
    }
  }
}

std::vector<std::uint8_t> encode_binary(const Grid& grid, int n_time,
                                        const std::vector<double>& cell_major) {
  std::vector<std::uint8_t> out;
  out.reserve(18 + grid.n_sites() + cell_major.size() * 8);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(grid.nx()));
  put_u32(out, static_cast<std::uint32_t>(grid.ny()));
  put_u32(out, static_cast<std::uint32_t>(n_time));
  const bool full = grid.n_cells() == grid.n_sites();
  out.push_back(full ? 0 : 1);
  if (!full) out.insert(out.end(), grid.mask().begin(), grid.mask().end());
  // Mask scan order equals dense cell order.
  for (int t = 0; t < n_time; ++t)
    for (int c = 0; c < grid.n_cells(); ++c)
      put_f64(out, cell_major[static_cast<std::size_t>(c) * n_time + t]);
  return out;
}

struct DecodedGrid {
  Grid grid;
  int n_time;
  std::vector<double> cell_major;
};

DecodedGrid decode_binary(const std::vector<std::uint8_t>& buf, double cell_size_km) {
  ByteReader r(buf);
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("byte offset 0: bad magic, expected \"CVTP\"");
  r.u32("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("byte offset 4: unsupported format version " + std::to_string(version));
  const std::uint32_t nx = r.u32("nx");
  const std::uint32_t ny = r.u32("ny");
  const std::uint32_t n_time = r.u32("n_time");
  if (nx < 2 || ny < 2 ||
      static_cast<std::uint64_t>(nx) * ny > (1ULL << 26))  // keep allocations sane
    throw FormatError("byte offset 8: implausible grid dimensions " + std::to_string(nx) + "x" +
                      std::to_string(ny));
  const std::uint8_t mask_present = r.u8("mask flag");
  if (mask_present > 1)
    throw FormatError("byte offset 16: mask-present flag must be 0 or 1, got " +
                      std::to_string(mask_present));
  std::vector<std::uint8_t> mask;
  const std::size_t n_sites = static_cast<std::size_t>(nx) * ny;
  if (mask_present) {
    mask.resize(n_sites);
    for (std::size_t s = 0; s < n_sites; ++s) {
      const std::uint8_t m = r.u8("mask byte");
      if (m > 1)
        throw FormatError("byte offset " + std::to_string(r.offset() - 1) +
                          ": mask byte must be 0 or 1");
      mask[s] = m;
    }
  } else {
    mask.assign(n_sites, 1);
  }

  Grid grid(static_cast<int>(nx), static_cast<int>(ny), cell_size_km, std::move(mask));
  const std::size_t expected = static_cast<std::size_t>(grid.n_cells()) * n_time;
  const std::size_t actual = r.remaining() / 8;
  if (r.remaining() % 8 != 0 || actual != expected)
    throw DimensionError("payload holds " + std::to_string(actual) + " values (" +
                         std::to_string(r.remaining()) + " bytes), expected " +
                         std::to_string(expected) + " for " + std::to_string(grid.n_cells()) +
                         " cells x " + std::to_string(n_time) + " steps");

  std::vector<double> cell_major(expected);
  for (std::uint32_t t = 0; t < n_time; ++t)
    for (int c = 0; c < grid.n_cells(); ++c)
      cell_major[static_cast<std::size_t>(c) * n_time + t] = r.f64("value");
  return {std::move(grid), static_cast<int>(n_time), std::move(cell_major)};
}

std::string encode_csv(const Grid& grid, int n_time, const std::vector<double>& cell_major) {
  std::string out = "x,y,t,value\n";
  for (int t = 0; t < n_time; ++t) {
    for (int c = 0; c < grid.n_cells(); ++c) {
      auto [i, j] = grid.site_of(c);
      out += std::to_string(i);
      out += ',';
      out += std::to_string(j);
      out += ',';
      out += std::to_string(t);
      out += ',';
      out += format_double(cell_major[static_cast<std::size_t>(c) * n_time + t]);
      out += '\n';
    }
  }
  return out;
}

DecodedGrid decode_csv(const std::string& text, double cell_size_km) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& what) {
    throw FormatError("line " + std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) throw FormatError("line 1: empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,t,value") fail("expected header \"x,y,t,value\"");

  struct Rec {
    int t;
    double v;
  };
  std::map<std::pair<int, int>, std::vector<Rec>> per_site;
  int max_x = -1, max_y = -1, max_t = -1;
  std::size_t n_rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    long fields[3];
    for (int f = 0; f < 3; ++f) {
      auto [q, ec] = std::from_chars(p, end, fields[f]);
      if (ec != std::errc() || q == end || *q != ',') fail("malformed integer field");
      p = q + 1;
    }
    double v;
    auto [q, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || q != end) fail("malformed value field");
    if (fields[0] < 0 || fields[1] < 0 || fields[2] < 0) fail("negative index");
    if (fields[0] > 1000000 || fields[1] > 1000000 || fields[2] > 100000000)
      fail("implausibly large index");
    const int x = static_cast<int>(fields[0]);
    const int y = static_cast<int>(fields[1]);
    const int t = static_cast<int>(fields[2]);
    if (!std::isfinite(v))
      throw ValidationError("non-finite value at cell (" + std::to_string(x) + "," +
                            std::to_string(y) + "), time step " + std::to_string(t));
    per_site[{x, y}].push_back({t, v});
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
    max_t = std::max(max_t, t);
    ++n_rows;
  }
  if (per_site.empty()) throw FormatError("line 1: no data rows");

  const int nx = max_x + 1;
  const int ny = max_y + 1;
  const int n_time = max_t + 1;
  if (static_cast<std::uint64_t>(nx) * ny > (1ULL << 26))
    throw FormatError("grid inferred from indices is implausibly large (" + std::to_string(nx) +
                      "x" + std::to_string(ny) + ")");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny, 0);
  for (const auto& [site, recs] : per_site)
    mask[static_cast<std::size_t>(site.second) * nx + site.first] = 1;

  Grid grid(nx, ny, cell_size_km, std::move(mask));
  if (n_rows != static_cast<std::size_t>(grid.n_cells()) * n_time)
    throw DimensionError("csv holds " + std::to_string(n_rows) + " rows, expected " +
                         std::to_string(static_cast<std::size_t>(grid.n_cells()) * n_time) +
                         " for " + std::to_string(grid.n_cells()) + " cells x " +
                         std::to_string(n_time) + " steps");

  const double nan = std::nan("");
  std::vector<double> cell_major(static_cast<std::size_t>(grid.n_cells()) * n_time, nan);
  for (const auto& [site, recs] : per_site) {
    const int c = grid.cell_at(site.first, site.second);
    for (const Rec& rec : recs) {
      if (rec.t >= n_time) continue;
      double& slot = cell_major[static_cast<std::size_t>(c) * n_time + rec.t];
      if (!std::isnan(slot))
        throw DimensionError("duplicate entry for cell (" + std::to_string(site.first) + "," +
                             std::to_string(site.second) + "), time step " + std::to_string(rec.t));
      slot = rec.v;
    }
  }
  for (int c = 0; c < grid.n_cells(); ++c)
    for (int t = 0; t < n_time; ++t)
      if (std::isnan(cell_major[static_cast<std::size_t>(c) * n_time + t])) {
        auto [i, j] = grid.site_of(c);
        throw DimensionError("cell (" + std::to_string(i) + "," + std::to_string(j) +
                             ") missing at time step " + std::to_string(t));
      }
  return {std::move(grid), n_time, std::move(cell_major)};
}

}  // namespace

FileFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return FileFormat::csv;
  return FileFormat::binary;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

std::vector<std::uint8_t> observation_bytes(const ObservationMatrix& obs) {
  return encode_binary(obs.grid(), obs.n_time(),
                       std::vector<double>(obs.values().begin(), obs.values().end()));
}

ObservationMatrix load_observations(const std::string& path, FileFormat format,
                                    double cell_size_km) {
  DecodedGrid d = format == FileFormat::binary
                      ? decode_binary(read_file(path), cell_size_km)
                      : decode_csv([&] {
                          auto buf = read_file(path);
                          return std::string(buf.begin(), buf.end());
                        }(), cell_size_km);
  check_finite_payload(d.grid, d.n_time, d.cell_major);
  return ObservationMatrix(std::move(d.grid), d.n_time, std::move(d.cell_major));
}

void save_observations(const ObservationMatrix& obs, const std::string& path, FileFormat format) {
  const std::vector<double> cell_major(obs.values().begin(), obs.values().end());
  if (format == FileFormat::binary) {
    const auto bytes = encode_binary(obs.grid(), obs.n_time(), cell_major);
    write_file(path, std::string(bytes.begin(), bytes.end()));
  } else {
    write_file(path, encode_csv(obs.grid(), obs.n_time(), cell_major));
  }
}

ScalarField load_field(const std::string& path, FileFormat format, double cell_size_km) {
  DecodedGrid d = format == FileFormat::binary
                      ? decode_binary(read_file(path), cell_size_km)
                      : decode_csv([&] {
                          auto buf = read_file(path);
                          return std::string(buf.begin(), buf.end());
                        }(), cell_size_km);
  if (d.n_time != 1)
    throw DimensionError("scalar field file has n_time = " + std::to_string(d.n_time) +
                         ", expected 1");
  check_finite_payload(d.grid, 1, d.cell_major);
  return ScalarField(std::move(d.grid), std::move(d.cell_major));
}

void save_field(const ScalarField& field, const std::string& path, FileFormat format) {
  for (int c = 0; c < field.grid().n_cells(); ++c) {
    if (!std::isfinite(field.value(c))) {
      auto [i, j] = field.grid().site_of(c);
      throw ValidationError("field has non-finite value at in-mask cell (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
    }
  }
  const std::vector<double> values(field.values().begin(), field.values().end());
  if (format == FileFormat::binary) {
    const auto bytes = encode_binary(field.grid(), 1, values);
    write_file(path, std::string(bytes.begin(), bytes.end()));
  } else {
    write_file(path, encode_csv(field.grid(), 1, values));
  }
}

std::string fnv1a64_hex(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int k = 0; k < 16; ++k) buf[k] = hex[(h >> (60 - 4 * k)) & 0xf];
  buf[16] = '\0';
  return std::string(buf);
}

std::vector<Vec2> load_points_csv(const std::string& path, PointColumns columns) {
  const auto buf = read_file(path);
  std::istringstream in(std::string(buf.begin(), buf.end()));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  // Locate the two coordinate columns from the header.
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) comma = line.size();
    cols.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  const std::string want_x = columns == PointColumns::km ? "x_km" : "x_grid";
  const std::string want_y = columns == PointColumns::km ? "y_km" : "y_grid";
  int cx = -1, cy = -1;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] == want_x || (cx < 0 && cols[k] == "x")) cx = static_cast<int>(k);
    if (cols[k] == want_y || (cy < 0 && cols[k] == "y")) cy = static_cast<int>(k);
  }
  if (cx < 0 || cy < 0)
    throw FormatError(path + ": line 1: header must name x/y or " + want_x + "/" + want_y +
                      " columns");

  std::vector<Vec2> pts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (static_cast<int>(fields.size()) <= std::max(cx, cy))
      throw FormatError(path + ": line " + std::to_string(line_no) + ": too few fields");
    Vec2 p;
    for (auto [col, dest] : {std::pair<int, double*>{cx, &p.x}, {cy, &p.y}}) {
      const std::string& f = fields[col];
      auto [q, ec] = std::from_chars(f.data(), f.data() + f.size(), *dest);
      if (ec != std::errc() || q != f.data() + f.size())
        throw FormatError(path + ": line " + std::to_string(line_no) + ": malformed coordinate");
    }
    pts.push_back(p);
  }
  if (pts.empty()) throw FormatError(path + ": no points");
  return pts;
}

}  // namespace cvtp
