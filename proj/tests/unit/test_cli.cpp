#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "cvtp/cli.hpp"
#include "cvtp/io.hpp"

using namespace cvtp;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  static int counter = 0;
  const auto dir = fs::temp_directory_path() / ("cvtp_cli_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

std::string gen_small_obs(const fs::path& dir) {
  const std::string path = (dir / "obs.bin").string();
  REQUIRE(cli::run({"gen-grf", "--nx", "16", "--ny", "16", "--n-time", "200", "--d0", "3",
                    "--seed", "9", "--out", path}) == 0);
  return path;
}

}  // namespace

TEST_CASE("gen-grf writes a loadable dataset") {
  const auto dir = work_dir();
  const std::string path = gen_small_obs(dir);
  const ObservationMatrix obs = load_observations(path, FileFormat::binary);
  CHECK(obs.grid().n_cells() == 256);
  CHECK(obs.n_time() == 200);
}

TEST_CASE("corr-map runs are bit-identical") {
  const auto dir = work_dir();
  const std::string obs = gen_small_obs(dir);
  const std::string out1 = (dir / "c1.bin").string();
  const std::string out2 = (dir / "c2.bin").string();
  const std::vector<std::string> base{"corr-map", "--input", obs, "--d",       "3",
                                      "--samples", "50",      "--seed", "1"};
  auto args1 = base;
  args1.insert(args1.end(), {"--out", out1});
  auto args2 = base;
  args2.insert(args2.end(), {"--out", out2});
  REQUIRE(cli::run(args1) == 0);
  REQUIRE(cli::run(args2) == 0);
  CHECK(slurp(out1) == slurp(out2));
}

TEST_CASE("pipeline produces the full report directory") {
  const auto dir = work_dir();
  const std::string obs = gen_small_obs(dir);
  const std::string out = (dir / "run1").string();
  REQUIRE(cli::run({"pipeline", "--input", obs, "--k-g", "6", "--seed", "7", "--samples", "40",
                    "--max-lag", "6", "--interp-factor", "2", "--out", out}) == 0);
  for (const char* name : {"config.json", "correlogram.csv", "corrmap.bin", "density.bin",
                           "generators.csv", "trace.csv", "report.json"})
    CHECK(fs::exists(fs::path(out) / name));

  // a second identical run writes identical bytes
  const std::string out2 = (dir / "run2").string();
  REQUIRE(cli::run({"pipeline", "--input", obs, "--k-g", "6", "--seed", "7", "--samples", "40",
                    "--max-lag", "6", "--interp-factor", "2", "--out", out2}) == 0);
  for (const char* name : {"config.json", "correlogram.csv", "corrmap.bin", "density.bin",
                           "generators.csv", "trace.csv", "report.json"})
    CHECK(slurp(fs::path(out) / name) == slurp(fs::path(out2) / name));
}

TEST_CASE("config file values are overridden by flags") {
  const auto dir = work_dir();
  const std::string obs = gen_small_obs(dir);
  const std::string cfg_path = (dir / "config.json").string();
  {
    std::ofstream out(cfg_path);
    out << "{\"k_g\": 6, \"seed\": 123, \"mc_samples\": 40, \"max_lag\": 6, "
           "\"interpolation_factor\": 2}\n";
  }
  const std::string via_config = (dir / "via_config").string();
  REQUIRE(cli::run({"pipeline", "--input", obs, "--config", cfg_path, "--seed", "7",
                    "--out", via_config}) == 0);
  const std::string via_flags = (dir / "via_flags").string();
  REQUIRE(cli::run({"pipeline", "--input", obs, "--k-g", "6", "--seed", "7", "--samples", "40",
                    "--max-lag", "6", "--interp-factor", "2", "--out", via_flags}) == 0);
  CHECK(slurp(fs::path(via_config) / "report.json") == slurp(fs::path(via_flags) / "report.json"));
}

TEST_CASE("compare subcommand matches the library oracle") {
  const auto dir = work_dir();
  const std::string real = (dir / "real.csv").string();
  const std::string optimal = (dir / "optimal.csv").string();
  {
    std::ofstream out(real);
    out << "x_km,y_km\n0,0\n10,0\n0,7\n";
  }
  {
    std::ofstream out(optimal);
    out << "x_km,y_km\n0,1\n10,6\n";
  }
  const std::string out = (dir / "cmp").string();
  REQUIRE(cli::run({"compare", "--real", real, "--optimal", optimal, "--radii", "2,5,10",
                    "--out", out}) == 0);
  // nearest distances: 1, 6, 6 -> within {2,5,10} = {1, 1, 3}
  CHECK(slurp(fs::path(out) / "comparison.csv") ==
        "radius_km,within,outside\n2,1,2\n5,1,2\n10,3,0\n");
  const std::string per_gauge = slurp(fs::path(out) / "per_gauge.csv");
  CHECK(count_occurrences(per_gauge, "\n") == 4);  // header + 3 gauges
}

TEST_CASE("render draws one marker per generator plus overlay glyphs") {
  const auto dir = work_dir();
  const std::string obs = gen_small_obs(dir);
  const std::string run = (dir / "run").string();
  REQUIRE(cli::run({"pipeline", "--input", obs, "--k-g", "5", "--seed", "3", "--samples", "40",
                    "--max-lag", "6", "--interp-factor", "2", "--out", run}) == 0);

  const std::string svg_path = (dir / "out.svg").string();
  REQUIRE(cli::run({"render", "--input", run, "--out", svg_path}) == 0);
  const std::string svg = slurp(svg_path);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(count_occurrences(svg, "<circle class=\"generator\"") == 5);
  CHECK(count_occurrences(svg, "</svg>") == 1);

  // markers sit at the generators' grid coordinates (scaled by 4 svg units)
  const std::vector<Vec2> gens =
      load_points_csv((fs::path(run) / "generators.csv").string(), PointColumns::grid);
  for (const Vec2& g : gens) {
    char expected[64];
    std::snprintf(expected, sizeof(expected), "cx=\"%.3f\" cy=\"%.3f\"", g.x * 4.0, g.y * 4.0);
    CHECK(svg.find(expected) != std::string::npos);
  }

  const std::string overlay = (dir / "overlay.csv").string();
  {
    std::ofstream out(overlay);
    out << "x_km,y_km\n4,4\n12,12\n";
  }
  const std::string svg2_path = (dir / "out2.svg").string();
  REQUIRE(cli::run({"render", "--input", run, "--out", svg2_path, "--overlay", overlay}) == 0);
  const std::string svg2 = slurp(svg2_path);
  CHECK(count_occurrences(svg2, "<circle class=\"generator\"") == 5);
  CHECK(count_occurrences(svg2, "class=\"overlay\"") == 2);
}

TEST_CASE("exit codes: usage 2, input 3, degenerate 4") {
  const auto dir = work_dir();
  CHECK(cli::run({"no-such-command"}) == 2);
  CHECK(cli::run({"corr-map", "--bogus-flag"}) == 2);
  CHECK(cli::run({"corr-map", "--input", (dir / "missing.bin").string(), "--d", "3", "--out",
                  (dir / "x.bin").string()}) == 3);

  // constant series: the pipeline dies at the density stage with exit 4
  const std::string flat_csv = (dir / "flat.csv").string();
  {
    std::ofstream out(flat_csv);
    out << "x,y,t,value\n";
    for (int t = 0; t < 5; ++t)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
          out << x << ',' << y << ',' << t << ',' << (t * 7 % 5) << '\n';
  }
  CHECK(cli::run({"pipeline", "--input", flat_csv, "--k-g", "2", "--alpha", "1", "--max-lag",
                  "2", "--out", (dir / "flat_run").string()}) == 4);

  CHECK(cli::run({"pipeline", "--input", flat_csv, "--k-g", "999", "--max-lag", "2", "--out",
                  (dir / "big_run").string()}) == 2);

  const std::string truncated = (dir / "trunc.bin").string();
  {
    std::ofstream out(truncated, std::ios::binary);
    out << "CVTP";
  }
  CHECK(cli::run({"corr-map", "--input", truncated, "--d", "2", "--out",
                  (dir / "y.bin").string()}) == 3);
}

TEST_CASE("density subcommand selects alpha when asked") {
  const auto dir = work_dir();
  const std::string obs = gen_small_obs(dir);
  const std::string map_path = (dir / "map.bin").string();
  REQUIRE(cli::run({"corr-map", "--input", obs, "--d", "3", "--samples", "60", "--seed", "2",
                    "--out", map_path}) == 0);
  const std::string dens_path = (dir / "density.bin").string();
  const std::string trace_path = (dir / "alpha.csv").string();
  REQUIRE(cli::run({"density", "--input", map_path, "--k-g", "12", "--c-tol", "0.1",
                    "--alpha-trace", trace_path, "--out", dens_path}) == 0);
  const ScalarField density = load_field(dens_path, FileFormat::binary);
  const auto [lo, hi] = density.min_max();
  CHECK(lo == doctest::Approx(1e-6).epsilon(1e-9));
  CHECK(hi == doctest::Approx(1.0 + 1e-6).epsilon(1e-9));
  CHECK(slurp(trace_path).rfind("alpha,k", 0) == 0);

  const std::string opt_dir = (dir / "opt").string();
  REQUIRE(cli::run({"optimize", "--input", dens_path, "--k-g", "4", "--seed", "1", "--out",
                    opt_dir}) == 0);
  CHECK(fs::exists(fs::path(opt_dir) / "generators.csv"));
  CHECK(fs::exists(fs::path(opt_dir) / "trace.csv"));
  CHECK(fs::exists(fs::path(opt_dir) / "report.json"));
}
