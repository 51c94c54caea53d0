#include <doctest.h>

#include <cmath>

#include "cvtp/correlation.hpp"
#include "cvtp/grf.hpp"

using namespace cvtp;

TEST_CASE("field spec validation") {
  const Grid g = Grid::full(4, 4, 1.0);
  CHECK_THROWS_AS(generate_grf({g, 10, {0.0, 1.0, 1.0}, 1}), ValidationError);
  CHECK_THROWS_AS(generate_grf({g, 10, {1.1, 1.0, 1.0}, 1}), ValidationError);
  CHECK_THROWS_AS(generate_grf({g, 10, {1.0, -1.0, 1.0}, 1}), ValidationError);
  CHECK_THROWS_AS(generate_grf({g, 10, {1.0, 1.0, 2.5}, 1}), ValidationError);
  CHECK_THROWS_AS(generate_grf({g, 2, {1.0, 1.0, 1.0}, 1}), ValidationError);
}

TEST_CASE("cell count above the cap is a capacity error") {
  const Grid g = Grid::full(101, 101, 1.0);
  CHECK_THROWS_AS(GrfSampler(g, CorrelogramModel{}), CapacityError);
}

TEST_CASE("identical specs give bit-identical draws") {
  const FieldSpec spec{Grid::full(6, 5, 1.0), 20, {0.8, 3.0, 1.0}, 42};
  CHECK(generate_grf(spec) == generate_grf(spec));
  // and a different seed does not
  FieldSpec other = spec;
  other.seed = 43;
  CHECK_FALSE(generate_grf(other) == generate_grf(spec));
}

TEST_CASE("d0 -> 0 limit behaves as white noise") {
  const FieldSpec spec{Grid::full(4, 4, 1.0), 2000, {1.0, 1e-3, 1.0}, 11};
  const ObservationMatrix obs = generate_grf(spec);
  for (int a = 0; a < obs.grid().n_cells(); ++a)
    for (int b = a + 1; b < obs.grid().n_cells(); ++b) {
      const auto r = pearson(obs.series(a), obs.series(b));
      REQUIRE(r.has_value());
      CHECK(std::abs(*r) < 0.1);
    }
}

TEST_CASE("sample correlogram at lag 9 matches the model") {
  // 40x40, c0=1, d0=9, s0=1: mean correlation over pairs at exact distance 9
  // should sit near exp(-1).
  const Grid g = Grid::full(40, 40, 1.0);
  const ObservationMatrix obs = generate_grf({g, 1000, {1.0, 9.0, 1.0}, 7});

  double sum = 0.0;
  long count = 0;
  for (int c = 0; c < g.n_cells(); ++c) {
    auto [i, j] = g.site_of(c);
    for (auto [di, dj] : {std::pair{9, 0}, {0, 9}}) {
      const int i2 = i + di;
      const int j2 = j + dj;
      if (i2 >= g.nx() || j2 >= g.ny()) continue;
      const auto r = pearson(obs.series(c), obs.series(g.cell_at(i2, j2)));
      REQUIRE(r.has_value());
      sum += *r;
      ++count;
    }
  }
  CHECK(count > 2000);
  CHECK(std::abs(sum / count - std::exp(-1.0)) < 0.08);
}

TEST_CASE("per-cell mean and variance converge to 0 and 1") {
  const int n_time = 4000;
  const FieldSpec spec{Grid::full(6, 6, 1.0), n_time, {0.9, 2.0, 1.0}, 5};
  const ObservationMatrix obs = generate_grf(spec);
  const double mean_bound = 4.0 / std::sqrt(static_cast<double>(n_time));
  const double var_bound = 8.0 / std::sqrt(static_cast<double>(n_time));
  for (int c = 0; c < obs.grid().n_cells(); ++c) {
    const auto v = obs.series(c);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n_time;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= (n_time - 1);
    CHECK(std::abs(mean) < mean_bound);
    CHECK(std::abs(var - 1.0) < var_bound);
  }
}

TEST_CASE("masked grids only produce in-mask series") {
  std::vector<std::uint8_t> mask(5 * 4, 1);
  mask[0] = 0;
  mask[7] = 0;
  const Grid g(5, 4, 1.0, mask);
  const ObservationMatrix obs = generate_grf({g, 50, {1.0, 2.0, 1.0}, 3});
  CHECK(obs.grid().n_cells() == 18);
  CHECK(obs.values().size() == 18 * 50);
}
