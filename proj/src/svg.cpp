#include "cvtp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cvtp/io.hpp"

namespace cvtp {

namespace {

/// Five-stop blue-to-yellow ramp, interpolated componentwise.
std::string heat_color(double t) {
  static const int stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int s = std::min(3, static_cast<int>(t));
  const double f = t - s;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[s][0] + f * (stops[s + 1][0] - stops[s][0]))),
                static_cast<int>(std::lround(stops[s][1] + f * (stops[s + 1][1] - stops[s][1]))),
                static_cast<int>(std::lround(stops[s][2] + f * (stops[s + 1][2] - stops[s][2]))));
  return buf;
}

std::string region_color(int i) {
  // Well-spaced hues; repeats after 12 generators.
  static const char* palette[12] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                                    "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
                                    "#008080", "#9a6324", "#800000", "#000075"};
  return palette[i % 12];
}

std::string num(double v) {
  // Fixed short form keeps files small; 3 decimals at cell resolution.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void render_svg(const ScalarField& density, const GeneratorSet& gens,
                const std::optional<std::vector<Vec2>>& overlay, const std::string& path) {
  gens.validate();
  const Grid& g = density.grid();

  // Downsample the heat layer when the grid is large; one rect per block.
  const int max_side = 200;
  const int block = std::max(1, (std::max(g.nx(), g.ny()) + max_side - 1) / max_side);
  const double scale = 4.0;  // svg units per grid unit

  const auto [lo, hi] = density.min_max();
  const double inv = hi > lo ? 1.0 / (hi - lo) : 0.0;

  DiscreteProblem problem = DiscreteProblem::from_field(density);
  const std::vector<int> owner = assign(problem, gens);

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(g.nx() * scale) +
         "\" height=\"" + num(g.ny() * scale) + "\" viewBox=\"0 0 " + num(g.nx() * scale) + " " +
         num(g.ny() * scale) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  // Heat layer.
  svg += "<g stroke=\"none\">\n";
  for (int bj = 0; bj < g.ny(); bj += block) {
    for (int bi = 0; bi < g.nx(); bi += block) {
      double sum = 0.0;
      int count = 0;
      for (int j = bj; j < std::min(g.ny(), bj + block); ++j)
        for (int i = bi; i < std::min(g.nx(), bi + block); ++i) {
          const int c = g.cell_at(i, j);
          if (c < 0 || density.missing(c)) continue;
          sum += density.value(c);
          ++count;
        }
      if (count == 0) continue;
      const double t = (sum / count - lo) * inv;
      svg += "<rect x=\"" + num(bi * scale) + "\" y=\"" + num(bj * scale) + "\" width=\"" +
             num(std::min(block, g.nx() - bi) * scale) + "\" height=\"" +
             num(std::min(block, g.ny() - bj) * scale) + "\" fill=\"" + heat_color(t) + "\"/>\n";
    }
  }
  svg += "</g>\n";

  // Region boundaries: edges between cells owned by different generators.
  svg += "<g stroke-width=\"1\">\n";
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const int c = g.cell_at(i, j);
      if (c < 0) continue;
      if (i + 1 < g.nx()) {
        const int cr = g.cell_at(i + 1, j);
        if (cr >= 0 && owner[c] != owner[cr])
          svg += "<line x1=\"" + num((i + 1) * scale) + "\" y1=\"" + num(j * scale) +
                 "\" x2=\"" + num((i + 1) * scale) + "\" y2=\"" + num((j + 1) * scale) +
                 "\" stroke=\"" + region_color(owner[c]) + "\"/>\n";
      }
      if (j + 1 < g.ny()) {
        const int cd = g.cell_at(i, j + 1);
        if (cd >= 0 && owner[c] != owner[cd])
          svg += "<line x1=\"" + num(i * scale) + "\" y1=\"" + num((j + 1) * scale) +
                 "\" x2=\"" + num((i + 1) * scale) + "\" y2=\"" + num((j + 1) * scale) +
                 "\" stroke=\"" + region_color(owner[c]) + "\"/>\n";
      }
    }
  }
  svg += "</g>\n";

  // One marker per generator.
  for (int i = 0; i < gens.k(); ++i) {
    const Vec2& p = gens.positions[i];
    svg += "<circle class=\"generator\" cx=\"" + num(p.x * scale) + "\" cy=\"" +
           num(p.y * scale) + "\" r=\"" + num(0.6 * scale) + "\" fill=\"#000000\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
  }

  // Overlay points (e.g. an existing network) as crosses.
  if (overlay) {
    const double a = 0.6 * scale;
    for (const Vec2& p : *overlay) {
      const double cx = p.x * scale;
      const double cy = p.y * scale;
      svg += "<path class=\"overlay\" d=\"M " + num(cx - a) + " " + num(cy - a) + " L " +
             num(cx + a) + " " + num(cy + a) + " M " + num(cx - a) + " " + num(cy + a) + " L " +
             num(cx + a) + " " + num(cy - a) + "\" stroke=\"#d00000\" stroke-width=\"2\" fill=\"none\"/>\n";
    }
  }

  svg += "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << svg;
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace cvtp
