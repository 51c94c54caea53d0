#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvtp/cvt.hpp"
#include "cvtp/grid.hpp"

namespace cvtp {

/// Writes an SVG with a density heat layer, region boundaries colored by
/// nearest generator, one circle marker per generator, and (optionally) a
/// second point set drawn with a distinct cross glyph. Deterministic bytes.
void render_svg(const ScalarField& density, const GeneratorSet& gens,
                const std::optional<std::vector<Vec2>>& overlay, const std::string& path);

}  // namespace cvtp
