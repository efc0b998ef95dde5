#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "vitalcast/image.hpp"

namespace vitalcast {

inline constexpr int kGlyphWidth = 7;
inline constexpr int kGlyphHeight = 10;

// 7x10 digit bitmaps. Every digit's ink touches all four edges of its cell so
// that a glyph cropped to its bounding box maps back onto the full template.
inline constexpr std::array<std::array<std::string_view, kGlyphHeight>, 10> kDigitBitmaps = {{
    {".#####.", "##...##", "##...##", "##...##", "##...##", "##...##", "##...##", "##...##", "##...##", ".#####."},
    {"...##..", "..###..", ".####..", "...##..", "...##..", "...##..", "...##..", "...##..", "...##..", "#######"},
    {".#####.", "##...##", ".....##", ".....##", "....##.", "...##..", "..##...", ".##....", "##.....", "#######"},
    {".#####.", "##...##", ".....##", ".....##", "..####.", ".....##", ".....##", ".....##", "##...##", ".#####."},
    {"....##.", "...###.", "..####.", ".##.##.", "##..##.", "#######", "....##.", "....##.", "....##.", "....##."},
    {"#######", "##.....", "##.....", "######.", ".....##", ".....##", ".....##", ".....##", "##...##", ".#####."},
    {"..####.", ".##....", "##.....", "##.....", "######.", "##...##", "##...##", "##...##", "##...##", ".#####."},
    {"#######", ".....##", ".....##", "....##.", "....##.", "...##..", "...##..", "..##...", "..##...", "..##..."},
    {".#####.", "##...##", "##...##", "##...##", ".#####.", "##...##", "##...##", "##...##", "##...##", ".#####."},
    {".#####.", "##...##", "##...##", "##...##", "##...##", ".######", ".....##", ".....##", "....##.", ".####.."},
}};

struct GlyphTemplate {
  char symbol;
  BinaryImage image;
};

using GlyphSet = std::vector<GlyphTemplate>;

/// Builds a template set from '#'/'.' row strings, one entry per symbol.
inline GlyphSet make_glyph_set(std::string_view symbols, const std::vector<std::vector<std::string_view>>& rows) {
  GlyphSet set;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const auto& bitmap = rows.at(i);
    const int h = static_cast<int>(bitmap.size());
    const int w = h ? static_cast<int>(bitmap.front().size()) : 0;
    BinaryImage img(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) img.set(x, y, bitmap[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '#');
    }
    set.push_back({symbols[i], std::move(img)});
  }
  return set;
}

/// The shipped digit font, shared by the renderer and the template recognizer.
inline const GlyphSet& shipped_glyphs() {
  static const GlyphSet set = [] {
    std::vector<std::vector<std::string_view>> rows;
    for (const auto& digit : kDigitBitmaps) rows.emplace_back(digit.begin(), digit.end());
    return make_glyph_set("0123456789", rows);
  }();
  return set;
}

inline const BinaryImage& glyph_for(const GlyphSet& set, char symbol) {
  for (const auto& g : set) {
    if (g.symbol == symbol) return g.image;
  }
  throw Error(Errc::InvalidArgument, std::string("no glyph for '") + symbol + "'");
}

}  // namespace vitalcast
