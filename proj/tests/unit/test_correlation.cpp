#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cvtp/correlation.hpp"
#include "cvtp/grf.hpp"
#include "cvtp/rng.hpp"

using namespace cvtp;

namespace {

/// Shared 40x40 benchmark field (c0=1, d0=9, s0=1), generated once.
const ObservationMatrix& benchmark_grf() {
  static const ObservationMatrix obs =
      generate_grf({Grid::full(40, 40, 1.0), 1000, {1.0, 9.0, 1.0}, 7});
  return obs;
}

ObservationMatrix constant_pattern_obs(int nx, int ny, int n_time) {
  const Grid g = Grid::full(nx, ny, 1.0);
  std::vector<double> values(static_cast<std::size_t>(g.n_cells()) * n_time);
  for (int c = 0; c < g.n_cells(); ++c)
    for (int t = 0; t < n_time; ++t)
      values[static_cast<std::size_t>(c) * n_time + t] = std::sin(0.7 * t) + 0.2 * t;
  return ObservationMatrix(g, n_time, std::move(values));
}

Correlogram curve_from(const std::vector<double>& mean_corr) {
  Correlogram c;
  for (std::size_t k = 0; k < mean_corr.size(); ++k) {
    c.lags.push_back(static_cast<double>(k + 1));
    c.mean_corr.push_back(mean_corr[k]);
    c.sample_counts.push_back(100);
  }
  return c;
}

}  // namespace

TEST_CASE("pearson on the worked examples") {
  const std::vector<double> a{1, 2, 3};
  CHECK(*pearson(a, std::vector<double>{1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*pearson(a, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  // direct evaluation: cov = 3, var_a = 2, var_b = 14/3, r = 3/sqrt(28/3)
  CHECK(*pearson(a, std::vector<double>{1, 2, 4}) ==
        doctest::Approx(0.981981).epsilon(1e-6));
}

TEST_CASE("pearson degenerate and precondition paths") {
  const std::vector<double> flat{2, 2, 2, 2};
  const std::vector<double> vary{1, 2, 3, 4};
  CHECK_FALSE(pearson(flat, vary).has_value());
  CHECK_FALSE(pearson(vary, flat).has_value());
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                  ValidationError);
  CHECK_THROWS_AS(pearson(vary, std::vector<double>{1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2, std::nan("")}, vary), ValidationError);
}

TEST_CASE("pearson symmetry is exact and affine invariance holds to 1e-12") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(30));
    std::vector<double> a(n), b(n);
    for (int t = 0; t < n; ++t) {
      a[t] = rng.normal();
      b[t] = rng.normal() + 0.3 * a[t];
    }
    const double r_ab = *pearson(a, b);
    CHECK(r_ab == *pearson(b, a));  // bitwise

    const double scale = 0.1 + 5.0 * rng.uniform();
    const double shift = 10.0 * (rng.uniform() - 0.5);
    std::vector<double> a2(n);
    for (int t = 0; t < n; ++t) a2[t] = scale * a[t] + shift;
    CHECK(*pearson(a2, b) == doctest::Approx(r_ab).epsilon(1e-12));
  }
}

TEST_CASE("identical series everywhere give a map of ones") {
  const ObservationMatrix obs = constant_pattern_obs(6, 6, 20);
  for (double d : {1.0, 2.0, 3.0}) {
    const ScalarField map = effective_correlation_map(obs, d, 25, 1.0, 99);
    for (int c = 0; c < map.grid().n_cells(); ++c) {
      REQUIRE_FALSE(map.missing(c));
      CHECK(map.value(c) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("map values stay within [-1, 1] and match the exhaustive oracle") {
  const ObservationMatrix& obs = benchmark_grf();
  const ScalarField mc = effective_correlation_map(obs, 9.0, 100, 1.0, 3);
  const ScalarField full = effective_correlation_exhaustive(obs, 9.0, 1.0);

  double mc_mean = 0.0, full_mean = 0.0;
  int n = 0;
  for (int c = 0; c < mc.grid().n_cells(); ++c) {
    REQUIRE_FALSE(mc.missing(c));
    CHECK(mc.value(c) >= -1.0);
    CHECK(mc.value(c) <= 1.0);
    mc_mean += mc.value(c);
    full_mean += full.value(c);
    ++n;
  }
  mc_mean /= n;
  full_mean /= n;
  // spatial mean near exp(-1) and near the oracle's mean
  CHECK(std::abs(full_mean - std::exp(-1.0)) < 0.08);
  CHECK(std::abs(mc_mean - full_mean) < 0.02);
}

TEST_CASE("monte carlo estimate converges to the exhaustive annulus mean") {
  const ObservationMatrix obs =
      generate_grf({Grid::full(20, 20, 1.0), 60, {1.0, 4.0, 1.0}, 21});
  const ScalarField full = effective_correlation_exhaustive(obs, 4.0, 1.0);
  const ScalarField mc = effective_correlation_map(obs, 4.0, 10000, 1.0, 17);
  for (int c = 0; c < full.grid().n_cells(); ++c) {
    REQUIRE_FALSE(mc.missing(c));
    CHECK(std::abs(mc.value(c) - full.value(c)) <= 0.02);
  }
}

TEST_CASE("map determinism is independent of sampling parameters order") {
  const ObservationMatrix obs = constant_pattern_obs(5, 5, 12);
  const ScalarField a = effective_correlation_map(obs, 2.0, 30, 1.0, 7);
  const ScalarField b = effective_correlation_map(obs, 2.0, 30, 1.0, 7);
  CHECK(a == b);
}

TEST_CASE("cells with an unreachable annulus are missing, all-missing is an error") {
  // two in-mask cells 11 apart: at d = 2 both annuli are empty
  std::vector<std::uint8_t> mask(12 * 2, 0);
  mask[0] = 1;
  mask[11] = 1;
  const Grid g(12, 2, 1.0, mask);
  std::vector<double> values;
  for (int c = 0; c < 2; ++c)
    for (int t = 0; t < 10; ++t) values.push_back(std::sin(c + 0.3 * t));
  const ObservationMatrix obs(g, 10, values);
  CHECK_THROWS_AS(effective_correlation_map(obs, 2.0, 10, 0.5, 1), DegenerateError);

  // a lone far cell next to a connected block: only that cell goes missing
  std::vector<std::uint8_t> mask2(12 * 3, 0);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) mask2[static_cast<std::size_t>(j) * 12 + i] = 1;
  mask2[11] = 1;  // (11, 0), far from the block
  const Grid g2(12, 3, 1.0, mask2);
  std::vector<double> values2;
  for (int c = 0; c < g2.n_cells(); ++c)
    for (int t = 0; t < 10; ++t) values2.push_back(std::sin(1.3 * c + 0.5 * t));
  const ObservationMatrix obs2(g2, 10, values2);
  const ScalarField map = effective_correlation_map(obs2, 1.0, 10, 1.0, 1);
  const int lone = g2.cell_at(11, 0);
  CHECK(map.missing(lone));
  CHECK(map.count_missing() == 1);
}

TEST_CASE("correlogram of a perfectly correlated field is flat at one") {
  const ObservationMatrix obs = constant_pattern_obs(8, 8, 15);
  const Correlogram c = correlogram(obs, 4, 20, 5);
  REQUIRE(c.size() == 4);
  for (double m : c.mean_corr) CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
  for (long s : c.sample_counts) CHECK(s > 0);
}

TEST_CASE("correlogram of white noise stays near zero") {
  const ObservationMatrix obs =
      generate_grf({Grid::full(8, 8, 1.0), 2000, {1.0, 1e-3, 1.0}, 13});
  const Correlogram c = correlogram(obs, 4, 40, 2);
  for (double m : c.mean_corr) CHECK(std::abs(m) < 0.1);
}

TEST_CASE("correlogram of the benchmark field tracks the generating model") {
  const Correlogram c = correlogram(benchmark_grf(), 15, 30, 11);
  REQUIRE(c.size() == 15);
  for (std::size_t k = 0; k < c.size(); ++k)
    CHECK(std::abs(c.mean_corr[k] - std::exp(-c.lags[k] / 9.0)) < 0.08);
}

TEST_CASE("decorrelation distance follows the strict 1/e rule") {
  // exp(-l/9) never goes strictly below 1/e at l = 9; the first qualifying
  // lag is 10
  std::vector<double> curve;
  for (int l = 1; l <= 20; ++l) curve.push_back(std::exp(-l / 9.0));
  const DecorrelationDistance d = decorrelation_distance(curve_from(curve));
  CHECK(d.distance == 10);
  CHECK(d.decorrelated);
}

TEST_CASE("a curve crossing between 8 and 9 grid points gives 45 km at 5 km cells") {
  std::vector<double> curve;
  for (int l = 1; l <= 12; ++l) curve.push_back(l < 9 ? 0.40 : 0.30);
  const DecorrelationDistance d = decorrelation_distance(curve_from(curve));
  CHECK(d.distance == 9);
  CHECK(d.decorrelated);
  const Grid adige_like = Grid::full(40, 40, 5.0);
  CHECK(adige_like.grid_to_km(d.distance) == doctest::Approx(45.0));
}

TEST_CASE("a curve that never decorrelates reports the largest lag") {
  std::vector<double> curve;
  for (int l = 1; l <= 7; ++l) curve.push_back(0.9 - 0.01 * l);
  const DecorrelationDistance d = decorrelation_distance(curve_from(curve));
  CHECK(d.distance == 7);
  CHECK_FALSE(d.decorrelated);
}

TEST_CASE("decorrelation distance is monotone under curve dominance") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(12));
    std::vector<double> lower(n), upper(n);
    double v = 0.8 + 0.2 * rng.uniform();
    for (int k = 0; k < n; ++k) {
      v *= 0.6 + 0.35 * rng.uniform();
      lower[k] = v;
      upper[k] = std::min(1.0, v + 0.3 * rng.uniform());
    }
    const auto d_low = decorrelation_distance(curve_from(lower));
    const auto d_up = decorrelation_distance(curve_from(upper));
    CHECK(d_up.distance >= d_low.distance);
  }
}

TEST_CASE("exponential-nugget fit recovers noiseless parameters") {
  std::vector<double> curve;
  for (int l = 1; l <= 20; ++l) curve.push_back(0.9 * std::exp(-l / 9.0));
  const VariogramFit fit = fit_exponential_nugget(curve_from(curve));
  CHECK(std::abs(fit.c0 - 0.9) / 0.9 < 0.05);
  CHECK(std::abs(fit.d0 - 9.0) / 9.0 < 0.05);
  CHECK(std::abs(fit.s0 - 1.0) / 1.0 < 0.05);
  CHECK(fit.rmse < 1e-6);
}

TEST_CASE("fitted scale agrees with the 1/e crossing for a pure exponential") {
  std::vector<double> curve;
  for (int l = 1; l <= 16; ++l) curve.push_back(std::exp(-l / 6.0));
  const VariogramFit fit = fit_exponential_nugget(curve_from(curve));
  const DecorrelationDistance d = decorrelation_distance(curve_from(curve));
  // the strict 1/e rule crosses one lag after an integer d0, so the gap is
  // exactly one lag here
  CHECK(std::abs(fit.d0 - d.distance) <= 1.0 + 1e-9);
}

TEST_CASE("degenerate fits are rejected") {
  CHECK_THROWS_AS(fit_exponential_nugget(curve_from({0.9, 0.9, 0.9, 0.9})), DegenerateError);
  CHECK_THROWS_AS(fit_exponential_nugget(curve_from({0.9, 0.8})), ValidationError);
}

TEST_CASE("interpolation with factor 1 is the identity after missing fill") {
  const Grid g = Grid::full(3, 3, 1.0);
  std::vector<double> values{0.1, 0.2, 0.3, 0.4, std::nan(""), 0.6, 0.7, 0.8, 0.9};
  const ScalarField field(g, values);
  const ScalarField out = interpolate_field(field, 1);
  CHECK(out.grid().nx() == 3);
  for (int c = 0; c < 9; ++c) {
    if (c == 4) continue;
    CHECK(out.value(c) == field.value(c));
  }
  // the missing center takes its nearest non-missing neighbor, ties to the
  // smallest cell index (cell 1)
  CHECK(out.value(4) == 0.2);
}

TEST_CASE("constant fields stay constant at any factor") {
  const ScalarField field(Grid::full(4, 3, 2.0), 0.7);
  for (int factor : {1, 2, 3}) {
    const ScalarField out = interpolate_field(field, factor);
    CHECK(out.grid().nx() == 4 * factor);
    CHECK(out.grid().ny() == 3 * factor);
    CHECK(out.grid().cell_size_km() == doctest::Approx(2.0 / factor).epsilon(1e-15));
    for (int c = 0; c < out.grid().n_cells(); ++c) CHECK(out.value(c) == 0.7);
  }
}

TEST_CASE("bilinear refinement of a 0..1 ramp is monotone with exact endpoints") {
  const Grid g = Grid::full(2, 2, 1.0);
  const ScalarField field(g, std::vector<double>{0.0, 1.0, 0.0, 1.0});
  const ScalarField out = interpolate_field(field, 2);
  REQUIRE(out.grid().nx() == 4);
  for (int j = 0; j < 4; ++j) {
    std::vector<double> row;
    for (int i = 0; i < 4; ++i) row.push_back(out.value(out.grid().cell_at(i, j)));
    CHECK(row.front() == 0.0);
    CHECK(row.back() == 1.0);
    CHECK(std::is_sorted(row.begin(), row.end()));
    CHECK(row[1] == doctest::Approx(0.25));
    CHECK(row[2] == doctest::Approx(0.75));
  }
}

TEST_CASE("interpolated values never leave the input range") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int nx = 2 + static_cast<int>(rng.below(6));
    const int ny = 2 + static_cast<int>(rng.below(6));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny);
    int live = 0;
    for (auto& m : mask) live += (m = rng.uniform() < 0.8 ? 1 : 0);
    if (live == 0) mask[0] = 1;
    const Grid g(nx, ny, 1.0, mask);
    std::vector<double> values(g.n_cells());
    for (auto& v : values) v = rng.uniform() < 0.15 ? std::nan("") : rng.normal();
    if (std::all_of(values.begin(), values.end(), [](double v) { return std::isnan(v); }))
      values[0] = 0.0;
    const ScalarField field(g, values);
    const auto [lo, hi] = field.min_max();
    const ScalarField out = interpolate_field(field, 1 + static_cast<int>(rng.below(4)));
    for (int c = 0; c < out.grid().n_cells(); ++c) {
      CHECK(out.value(c) >= lo - 1e-12);
      CHECK(out.value(c) <= hi + 1e-12);
    }
  }
}

TEST_CASE("absurd refinement factors hit the capacity guard") {
  const ScalarField field(Grid::full(100, 100, 1.0), 0.5);
  CHECK_THROWS_AS(interpolate_field(field, 1000), CapacityError);
}

TEST_CASE("correlogram csv round trip") {
  std::vector<double> values;
  for (int l = 1; l <= 9; ++l) values.push_back(std::exp(-l / 4.0));
  const Correlogram c = curve_from(values);
  const auto path =
      (std::filesystem::temp_directory_path() / "cvtp_correlogram_roundtrip.csv").string();
  save_correlogram_csv(c, path);
  const Correlogram back = load_correlogram_csv(path);
  CHECK(back.lags == c.lags);
  CHECK(back.mean_corr == c.mean_corr);
  CHECK(back.sample_counts == c.sample_counts);

  {
    std::ofstream bad(path);
    bad << "lag,mean,samples\n";
  }
  CHECK_THROWS_AS(load_correlogram_csv(path), FormatError);
}

TEST_CASE("refined mask follows the containing coarse cell") {
  std::vector<std::uint8_t> mask{1, 0, 1, 1};
  const Grid g(2, 2, 1.0, mask);
  const ScalarField field(g, std::vector<double>{0.5, 0.25, 0.75});
  const ScalarField out = interpolate_field(field, 3);
  const Grid& fine = out.grid();
  CHECK(fine.n_cells() == 3 * 9);
  for (int j = 0; j < fine.ny(); ++j)
    for (int i = 0; i < fine.nx(); ++i)
      CHECK(fine.in_mask(i, j) == g.in_mask(i / 3, j / 3));
}
