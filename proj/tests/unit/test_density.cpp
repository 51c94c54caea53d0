#include <doctest.h>

#include <cmath>

#include "cvtp/density.hpp"
#include "cvtp/rng.hpp"

using namespace cvtp;

namespace {

/// Field over a full grid large enough to hold `values` plus explicit 0 and 1
/// anchor cells, so the listed values ARE the relative correlations.
ScalarField anchored_field(const std::vector<std::pair<double, int>>& groups) {
  int total = 2;
  for (const auto& [value, count] : groups) total += count;
  int nx = 2;
  while (nx * nx < total) ++nx;
  const Grid g = Grid::full(nx, nx, 1.0);
  std::vector<double> values(g.n_cells(), 1.0);
  int c = 0;
  values[c++] = 0.0;
  values[c++] = 1.0;
  for (const auto& [value, count] : groups)
    for (int k = 0; k < count; ++k) values[c++] = value;
  // pad cells keep the max anchor value
  return ScalarField(g, values);
}

ScalarField random_field(Rng& rng, int nx, int ny) {
  const Grid g = Grid::full(nx, ny, 1.0);
  std::vector<double> values(g.n_cells());
  for (auto& v : values) v = 2.0 * rng.uniform() - 1.0;
  return ScalarField(g, values);
}

}  // namespace

TEST_CASE("alpha 1 density is affine in the correlation") {
  const Grid g = Grid::full(11, 2, 1.0);
  std::vector<double> corr(g.n_cells());
  for (int c = 0; c < g.n_cells(); ++c) {
    auto [i, j] = g.site_of(c);
    corr[c] = i / 10.0;  // 0 .. 1 across the row
  }
  const ScalarField rho = build_density(ScalarField(g, corr), 0.0, 1.0, 1);
  for (int c = 0; c < g.n_cells(); ++c) {
    auto [i, j] = g.site_of(c);
    CHECK(rho.value(c) == doctest::Approx(1.0 - i / 10.0).epsilon(1e-12));
  }
}

TEST_CASE("extreme cells map exactly to r + R and r") {
  Rng rng(8);
  const ScalarField corr = random_field(rng, 7, 5);
  const double r = 1e-6, R = 2.5;
  const ScalarField rho = build_density(corr, r, R, 3);
  const auto [c_lo, c_hi] = corr.min_max();
  const auto [rho_lo, rho_hi] = rho.min_max();
  CHECK(rho_hi == doctest::Approx(r + R).epsilon(1e-12));
  CHECK(rho_lo == doctest::Approx(r).epsilon(1e-12));
  for (int c = 0; c < corr.grid().n_cells(); ++c) {
    if (corr.value(c) == c_lo) CHECK(rho.value(c) == doctest::Approx(r + R).epsilon(1e-12));
    if (corr.value(c) == c_hi) CHECK(rho.value(c) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("direct substitution at a interior correlation value") {
  // field spanning [0, 1]; a cell at 0.5 with alpha = 2 gives 1e-6 + 0.25
  const Grid g = Grid::full(2, 2, 1.0);
  const ScalarField corr(g, std::vector<double>{0.0, 1.0, 0.5, 0.25});
  const ScalarField rho = build_density(corr, 1e-6, 1.0, 2);
  CHECK(rho.value(2) == doctest::Approx(1e-6 + 0.25).epsilon(1e-12));
}

TEST_CASE("constant correlation fields are degenerate for the density") {
  const ScalarField corr(Grid::full(3, 3, 1.0), 0.42);
  CHECK_THROWS_AS(build_density(corr, 1e-6, 1.0, 1), DegenerateError);
  CHECK_THROWS_AS(count_below_threshold(corr, 1, 0.1), DegenerateError);
  CHECK_THROWS_AS(select_alpha(corr, 0.1, 10), DegenerateError);
}

TEST_CASE("threshold counting on a constructed three-level field") {
  // relative correlations {0.05 x99, 0.3 x100, 0.95 x99} plus the two anchors
  const ScalarField corr = anchored_field({{0.05, 99}, {0.3, 100}, {0.95, 99}});
  // alpha = 1: the 0-anchor and the 0.05 group fall below 0.1
  CHECK(count_below_threshold(corr, 1, 0.1) == 100);
  // alpha = 2: 0.3^2 = 0.09 < 0.1 pulls in the 0.3 group
  CHECK(count_below_threshold(corr, 2, 0.1) == 200);
}

TEST_CASE("threshold near one counts everything except exact top cells") {
  const ScalarField corr = anchored_field({{0.05, 99}, {0.3, 100}, {0.95, 99}});
  const long n = corr.grid().n_cells();
  // pad cells sit at relative correlation 1 alongside the top anchor
  long top = 0;
  for (int c = 0; c < corr.grid().n_cells(); ++c)
    if (corr.value(c) == 1.0) ++top;
  CHECK(count_below_threshold(corr, 1, 1.0 - 1e-9) == n - top);
  CHECK(count_below_threshold(corr, 7, 1.0 - 1e-9) == n - top);
}

TEST_CASE("alpha selection picks the largest alpha within budget") {
  // k(1) = 40, k(2) = 55, k(3) = 70 against k_g = 60:
  //   thresholds 0.1^(1/alpha) are 0.1, 0.316, 0.464
  const ScalarField corr =
      anchored_field({{0.05, 39}, {0.2, 15}, {0.4, 15}, {0.9, 50}});
  CHECK(count_below_threshold(corr, 1, 0.1) == 40);
  CHECK(count_below_threshold(corr, 2, 0.1) == 55);
  CHECK(count_below_threshold(corr, 3, 0.1) == 70);

  const AlphaSelection sel = select_alpha(corr, 0.1, 60);
  CHECK(sel.alpha == 2);
  CHECK(sel.k_at_alpha == 55);
  CHECK_FALSE(sel.over_threshold);
  REQUIRE(sel.trace.size() == 3);
  CHECK(sel.trace[0] == std::pair<int, long>{1, 40});
  CHECK(sel.trace[1] == std::pair<int, long>{2, 55});
  CHECK(sel.trace[2] == std::pair<int, long>{3, 70});
}

TEST_CASE("selection runs to the cap when the budget is never exceeded") {
  // only the 0-anchor ever counts: 0.95^32 = 0.19 is still above 0.1
  const ScalarField corr = anchored_field({{0.95, 100}});
  const AlphaSelection sel = select_alpha(corr, 0.1, 1);
  CHECK(sel.alpha == 32);
  CHECK(sel.k_at_alpha == 1);
  CHECK(sel.trace.size() == 32);
  CHECK_FALSE(sel.over_threshold);
}

TEST_CASE("an over-budget alpha 1 returns with the warning flag") {
  const ScalarField corr = anchored_field({{0.01, 199}});
  const AlphaSelection sel = select_alpha(corr, 0.1, 100);
  CHECK(sel.alpha == 1);
  CHECK(sel.k_at_alpha == 200);
  CHECK(sel.over_threshold);
  CHECK(sel.trace.size() == 1);
}

TEST_CASE("density extrema are exact and k is monotone on random fields") {
  Rng rng(505);
  for (int trial = 0; trial < 100; ++trial) {
    const ScalarField corr = random_field(rng, 4 + static_cast<int>(rng.below(8)),
                                          4 + static_cast<int>(rng.below(8)));
    const double r = std::pow(10.0, -6.0 * rng.uniform());
    const double R = 0.5 + 2.0 * rng.uniform();
    const int alpha = 1 + static_cast<int>(rng.below(6));
    const ScalarField rho = build_density(corr, r, R, alpha);
    const auto [lo, hi] = rho.min_max();
    CHECK(lo == doctest::Approx(r).epsilon(1e-12));
    CHECK(hi == doctest::Approx(r + R).epsilon(1e-12));

    const double c_tol = 0.05 + 0.9 * rng.uniform();
    long prev = -1;
    for (int a = 1; a <= 8; ++a) {
      const long k = count_below_threshold(corr, a, c_tol);
      CHECK(k >= prev);
      prev = k;
    }
  }
}

TEST_CASE("density is monotone in the correlation value") {
  Rng rng(7);
  const ScalarField corr = random_field(rng, 8, 8);
  const ScalarField rho = build_density(corr, 1e-6, 1.0, 2);
  for (int a = 0; a < corr.grid().n_cells(); ++a)
    for (int b = a + 1; b < corr.grid().n_cells(); ++b)
      if (corr.value(a) < corr.value(b)) CHECK(rho.value(a) >= rho.value(b));
}

TEST_CASE("density is invariant under positive affine rescaling of the field") {
  Rng rng(12);
  const ScalarField corr = random_field(rng, 6, 7);
  const ScalarField rho = build_density(corr, 1e-6, 1.0, 3);
  std::vector<double> rescaled(corr.grid().n_cells());
  for (int c = 0; c < corr.grid().n_cells(); ++c) rescaled[c] = 0.37 * corr.value(c) + 0.21;
  const ScalarField rho2 = build_density(ScalarField(corr.grid(), rescaled), 1e-6, 1.0, 3);
  for (int c = 0; c < corr.grid().n_cells(); ++c)
    CHECK(rho2.value(c) == doctest::Approx(rho.value(c)).epsilon(1e-12));
}

TEST_CASE("parameter validation") {
  const ScalarField corr(Grid::full(2, 2, 1.0), std::vector<double>{0, 1, 0.5, 0.2});
  CHECK_THROWS_AS(build_density(corr, -1.0, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(build_density(corr, 0.1, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(build_density(corr, 0.1, 1.0, 0), ValidationError);
  CHECK_THROWS_AS(count_below_threshold(corr, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(count_below_threshold(corr, 1, 1.0), ValidationError);
  CHECK_THROWS_AS(select_alpha(corr, 0.1, 0), ValidationError);
}
