#include "cvtp/correlation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cvtp/io.hpp"
#include "cvtp/rng.hpp"

namespace cvtp {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double clamp_corr(double r) { return std::clamp(r, -1.0, 1.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// In-mask cells y != x with d - hw <= |y - x| <= d + hw, by bounding-box
/// scan. The cell itself never qualifies: the underlying circle has d > 0.
std::vector<int> annulus_cells(const Grid& grid, int cell, double d, double hw) {
  const Vec2 p = grid.center(cell);
  const double lo = std::max(0.0, d - hw);
  const double hi = d + hw;
  const double lo2 = lo * lo;
  const double hi2 = hi * hi;
  auto [ci, cj] = grid.site_of(cell);
  const int i0 = std::max(0, static_cast<int>(std::floor(ci - hi)));
  const int i1 = std::min(grid.nx() - 1, static_cast<int>(std::ceil(ci + hi)));
  const int j0 = std::max(0, static_cast<int>(std::floor(cj - hi)));
  const int j1 = std::min(grid.ny() - 1, static_cast<int>(std::ceil(cj + hi)));

  std::vector<int> out;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const int c = grid.cell_at(i, j);
      if (c < 0 || c == cell) continue;
      const double dist2 = distance2(p, Vec2(i + 0.5, j + 0.5));
      if (dist2 >= lo2 && dist2 <= hi2) out.push_back(c);
    }
  }
  return out;
}

struct MapResult {
  std::vector<double> values;
  long samples = 0;  // accepted pairs behind all non-missing cells
};

MapResult map_from_standardized(const Grid& grid, const StandardizedSeries& s, double d,
                                int n_samples, double hw, std::uint64_t seed) {
  const int n = grid.n_cells();
  MapResult res;
  res.values.assign(n, kNan);
  for (int c = 0; c < n; ++c) {
    if (s.degenerate[c]) continue;
    const std::vector<int> ring = annulus_cells(grid, c, d, hw);
    if (ring.empty()) continue;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const auto zc = s.series(c);
    double sum = 0.0;
    long accepted = 0;
    const long max_attempts = 10L * n_samples;
    for (long attempt = 0; attempt < max_attempts && accepted < n_samples; ++attempt) {
      const int y = ring[rng.below(ring.size())];
      if (s.degenerate[y]) continue;
      sum += clamp_corr(dot(zc, s.series(y)));
      ++accepted;
    }
    if (accepted == 0) continue;
    res.values[c] = clamp_corr(sum / accepted);
    res.samples += accepted;
  }
  return res;
}

double model_eval(double c0, double d0, double s0, double d) {
  return c0 * std::exp(-std::pow(d / d0, s0));
}

double fit_sse(const Correlogram& c, double c0, double d0, double s0) {
  double sse = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double r = c.mean_corr[k] - model_eval(c0, d0, s0, c.lags[k]);
    sse += static_cast<double>(c.sample_counts[k]) * r * r;
  }
  return sse;
}

/// Golden-section minimization on [lo, hi].
template <typename F>
double golden_min(F f, double lo, double hi, double rel_tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > rel_tol * (std::abs(a) + std::abs(b) + 1e-300)) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("pearson: series lengths differ (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.size() < 3) throw ValidationError("pearson: need at least 3 samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(b[k]))
      throw ValidationError("pearson: non-finite sample at index " + std::to_string(k));
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - ma;
    const double db = b[k] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return clamp_corr(sab / std::sqrt(saa * sbb));
}

StandardizedSeries standardize(const ObservationMatrix& obs) {
  const int n = obs.grid().n_cells();
  const int nt = obs.n_time();
  StandardizedSeries out;
  out.n_cells = n;
  out.n_time = nt;
  out.z.resize(static_cast<std::size_t>(n) * nt);
  out.degenerate.assign(n, 0);
  for (int c = 0; c < n; ++c) {
    const auto v = obs.series(c);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= nt;
    double ss = 0.0;
    for (double x : v) {
      const double d = x - mean;
      ss += d * d;
    }
    double* zc = out.z.data() + static_cast<std::size_t>(c) * nt;
    if (ss == 0.0) {
      out.degenerate[c] = 1;
      std::fill(zc, zc + nt, 0.0);
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (int t = 0; t < nt; ++t) zc[t] = (v[t] - mean) * inv;
  }
  return out;
}

void Correlogram::validate() const {
  if (lags.size() != mean_corr.size() || lags.size() != sample_counts.size())
    throw DimensionError("correlogram: column lengths differ");
  if (lags.size() < 2) throw ValidationError("correlogram: needs at least 2 lags");
  for (std::size_t k = 0; k < lags.size(); ++k) {
    if (k > 0 && !(lags[k] > lags[k - 1]))
      throw ValidationError("correlogram: lags must be strictly increasing");
    if (!(mean_corr[k] >= -1.0 && mean_corr[k] <= 1.0))
      throw ValidationError("correlogram: mean correlation outside [-1,1]");
    if (sample_counts[k] <= 0) throw ValidationError("correlogram: nonpositive sample count");
  }
}

ScalarField effective_correlation_map(const ObservationMatrix& obs, double d, int n_samples,
                                      double annulus_halfwidth, std::uint64_t seed) {
  if (!(d >= 1.0)) throw ValidationError("effective correlation: d must be >= 1");
  if (n_samples < 1) throw ValidationError("effective correlation: n_samples must be >= 1");
  if (!(annulus_halfwidth >= 0.5))
    throw ValidationError("effective correlation: annulus halfwidth must be >= 0.5");

  const StandardizedSeries s = standardize(obs);
  MapResult res =
      map_from_standardized(obs.grid(), s, d, n_samples, annulus_halfwidth, seed);
  if (res.samples == 0)
    throw DegenerateError("effective correlation: every cell has an empty or degenerate annulus at d = " +
                          format_double(d));
  return ScalarField(obs.grid(), std::move(res.values));
}

ScalarField effective_correlation_exhaustive(const ObservationMatrix& obs, double d,
                                             double annulus_halfwidth) {
  if (!(d >= 1.0)) throw ValidationError("effective correlation: d must be >= 1");
  const StandardizedSeries s = standardize(obs);
  const Grid& grid = obs.grid();
  std::vector<double> values(grid.n_cells(), kNan);
  long total = 0;
  for (int c = 0; c < grid.n_cells(); ++c) {
    if (s.degenerate[c]) continue;
    double sum = 0.0;
    long count = 0;
    for (int y : annulus_cells(grid, c, d, annulus_halfwidth)) {
      if (s.degenerate[y]) continue;
      sum += clamp_corr(dot(s.series(c), s.series(y)));
      ++count;
    }
    if (count == 0) continue;
    values[c] = clamp_corr(sum / count);
    total += count;
  }
  if (total == 0)
    throw DegenerateError("effective correlation: every cell has an empty or degenerate annulus");
  return ScalarField(grid, std::move(values));
}

Correlogram correlogram(const ObservationMatrix& obs, int max_lag, int n_samples,
                        std::uint64_t seed) {
  const int cap = std::max(obs.grid().nx(), obs.grid().ny());
  if (max_lag < 1 || max_lag > cap)
    throw ValidationError("correlogram: max_lag must be in [1, " + std::to_string(cap) + "]");
  const StandardizedSeries s = standardize(obs);

  Correlogram out;
  for (int lag = 1; lag <= max_lag; ++lag) {
    MapResult res = map_from_standardized(obs.grid(), s, lag, n_samples, 1.0,
                                          derive_seed(seed, 0x6c6167ULL, lag));
    double sum = 0.0;
    long cells = 0;
    for (double v : res.values) {
      if (std::isnan(v)) continue;
      sum += v;
      ++cells;
    }
    if (cells == 0) continue;  // lag entirely outside the mask's reach
    out.lags.push_back(lag);
    out.mean_corr.push_back(clamp_corr(sum / cells));
    out.sample_counts.push_back(res.samples);
  }
  if (out.lags.size() < 2)
    throw DegenerateError("correlogram: fewer than 2 lags have any annulus samples");
  return out;
}

DecorrelationDistance decorrelation_distance(const Correlogram& c) {
  if (c.lags.empty()) throw ValidationError("decorrelation distance: empty correlogram");
  const double threshold = std::exp(-1.0);
  for (std::size_t k = 0; k < c.size(); ++k)
    if (c.mean_corr[k] < threshold)
      return {static_cast<int>(std::lround(c.lags[k])), true};
  return {static_cast<int>(std::lround(c.lags.back())), false};
}

VariogramFit fit_exponential_nugget(const Correlogram& c) {
  c.validate();
  if (c.size() < 3) throw ValidationError("variogram fit: need at least 3 lags");
  const auto [lo, hi] = std::minmax_element(c.mean_corr.begin(), c.mean_corr.end());
  if (*hi - *lo < 1e-12)
    throw DegenerateError("variogram fit: correlogram is constant, model parameters undefined");

  const double max_lag = c.lags.back();

  // Coarse global search.
  double best_sse = std::numeric_limits<double>::infinity();
  double c0 = 1.0, d0 = 1.0, s0 = 1.0;
  for (int ic = 0; ic <= 10; ++ic) {
    const double tc = 0.5 + 0.05 * ic;
    for (int id = 0; id < 32; ++id) {
      const double td = std::exp(std::log(max_lag) * id / 31.0);
      for (int is = 1; is <= 8; ++is) {
        const double ts = 0.25 * is;
        const double sse = fit_sse(c, tc, td, ts);
        if (sse < best_sse) {
          best_sse = sse;
          c0 = tc;
          d0 = td;
          s0 = ts;
        }
      }
    }
  }

  // Coordinate-descent refinement: closed-form c0 (linear in the model),
  // golden-section line searches for d0 and s0. The sweep loop runs well
  // past the 1e-4 relative-change requirement so that noiseless curves come
  // back with near-zero residual.
  for (int sweep = 0; sweep < 400; ++sweep) {
    const double pc = c0, pd = d0, ps = s0;

    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double f = model_eval(1.0, d0, s0, c.lags[k]);
      num += static_cast<double>(c.sample_counts[k]) * c.mean_corr[k] * f;
      den += static_cast<double>(c.sample_counts[k]) * f * f;
    }
    if (den > 0.0) c0 = std::clamp(num / den, 1e-6, 1.0);

    d0 = std::exp(golden_min(
        [&](double ld) { return fit_sse(c, c0, std::exp(ld), s0); },
        std::log(std::max(1e-3, d0 / 4.0)), std::log(std::min(max_lag * 8.0, d0 * 4.0)), 1e-12));
    s0 = golden_min([&](double ts) { return fit_sse(c, c0, d0, ts); },
                    std::max(0.05, s0 / 2.0), std::min(2.0, s0 * 2.0), 1e-12);

    const double rel = std::max({std::abs(c0 - pc) / std::max(1e-12, std::abs(pc)),
                                 std::abs(d0 - pd) / std::max(1e-12, std::abs(pd)),
                                 std::abs(s0 - ps) / std::max(1e-12, std::abs(ps))});
    if (rel < 1e-11) break;
  }

  double wsum = 0.0;
  for (long w : c.sample_counts) wsum += static_cast<double>(w);
  VariogramFit fit;
  fit.c0 = c0;
  fit.d0 = d0;
  fit.s0 = s0;
  fit.rmse = std::sqrt(fit_sse(c, c0, d0, s0) / wsum);
  return fit;
}

ScalarField interpolate_field(const ScalarField& field, int factor) {
  if (factor < 1) throw ValidationError("interpolate: factor must be >= 1");
  const Grid& g = field.grid();
  if (static_cast<std::uint64_t>(g.n_sites()) * factor * factor > (1ULL << 26))
    throw CapacityError("interpolate: refined grid would exceed the size cap");
  const int n_known = g.n_cells() - field.count_missing();
  if (n_known < 1) throw ValidationError("interpolate: no non-missing values");

  // Support lattice over every site (masked-out sites included, so bilinear
  // stencils near mask boundaries have values): nearest non-missing cell.
  std::vector<double> support(static_cast<std::size_t>(g.n_sites()));
  std::vector<int> known;
  known.reserve(n_known);
  for (int c = 0; c < g.n_cells(); ++c)
    if (!field.missing(c)) known.push_back(c);
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const int c = g.cell_at(i, j);
      if (c >= 0 && !field.missing(c)) {
        support[static_cast<std::size_t>(j) * g.nx() + i] = field.value(c);
        continue;
      }
      const Vec2 p(i + 0.5, j + 0.5);
      double best = std::numeric_limits<double>::infinity();
      int best_cell = known.front();
      for (int k : known) {
        const double d2 = distance2(p, g.center(k));
        if (d2 < best) {
          best = d2;
          best_cell = k;
        }
      }
      support[static_cast<std::size_t>(j) * g.nx() + i] = field.value(best_cell);
    }
  }

  std::vector<std::uint8_t> fine_mask(static_cast<std::size_t>(g.n_sites()) * factor * factor);
  const int fnx = g.nx() * factor;
  const int fny = g.ny() * factor;
  for (int j = 0; j < fny; ++j)
    for (int i = 0; i < fnx; ++i)
      fine_mask[static_cast<std::size_t>(j) * fnx + i] = g.in_mask(i / factor, j / factor) ? 1 : 0;
  Grid fine(fnx, fny, g.cell_size_km() / factor, std::move(fine_mask));

  std::vector<double> values(fine.n_cells());
  for (int c = 0; c < fine.n_cells(); ++c) {
    auto [fi, fj] = fine.site_of(c);
    const double u = (fi + 0.5) / factor - 0.5;  // coarse cell-center frame
    const double v = (fj + 0.5) / factor - 0.5;
    const int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, g.nx() - 2);
    const int j0 = std::clamp(static_cast<int>(std::floor(v)), 0, g.ny() - 2);
    const double fu = std::clamp(u - i0, 0.0, 1.0);
    const double fv = std::clamp(v - j0, 0.0, 1.0);
    const double v00 = support[static_cast<std::size_t>(j0) * g.nx() + i0];
    const double v10 = support[static_cast<std::size_t>(j0) * g.nx() + i0 + 1];
    const double v01 = support[static_cast<std::size_t>(j0 + 1) * g.nx() + i0];
    const double v11 = support[static_cast<std::size_t>(j0 + 1) * g.nx() + i0 + 1];
    values[c] = (1.0 - fv) * ((1.0 - fu) * v00 + fu * v10) + fv * ((1.0 - fu) * v01 + fu * v11);
  }
  return ScalarField(std::move(fine), std::move(values));
}

void save_correlogram_csv(const Correlogram& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "lag,mean_corr,samples\n";
  for (std::size_t k = 0; k < c.size(); ++k)
    out << format_double(c.lags[k]) << ',' << format_double(c.mean_corr[k]) << ','
        << c.sample_counts[k] << '\n';
  if (!out) throw IoError("write failure on " + path);
}

Correlogram load_correlogram_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "lag,mean_corr,samples")
    throw FormatError(path + ": line 1: expected header \"lag,mean_corr,samples\"");
  Correlogram c;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f1, f2, f3;
    if (!std::getline(row, f1, ',') || !std::getline(row, f2, ',') || !std::getline(row, f3))
      throw FormatError(path + ": line " + std::to_string(line_no) + ": expected 3 fields");
    try {
      c.lags.push_back(std::stod(f1));
      c.mean_corr.push_back(std::stod(f2));
      c.sample_counts.push_back(std::stol(f3));
    } catch (const std::exception&) {
      throw FormatError(path + ": line " + std::to_string(line_no) + ": malformed number");
    }
  }
  c.validate();
  return c;
}

}  // namespace cvtp
