#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <opencv2/core.hpp>

#include "protoexplain/attribution.hpp"
#include "protoexplain/encoder_explainer.hpp"

namespace protoexplain {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr std::size_t kPaletteSize = 20;

// Fixed segment palette; prototype k is drawn with entry k % 20 both on the
// explanation map and around its gallery patch.
const std::array<Rgb, kPaletteSize>& segment_palette();
Rgb palette_color(std::size_t prototype);

// Diverging blue (t = 0, low) -> white -> red (t = 1, high).
Rgb heat_color(double t);

cv::Mat load_image(const std::filesystem::path& path);

// PNG with pinned encoder settings so reruns are byte-identical.
void write_png(const std::filesystem::path& path, const cv::Mat& image);

// Segment colors blended over the image; grid cells are mapped to pixels by
// nearest neighbour.
cv::Mat overlay_explanation(const cv::Mat& image, const ExplanationMap& map, double alpha);

// Heatmap of the attribution normalized to [0, 1] with the map's own min/max.
cv::Mat overlay_attribution(const cv::Mat& image, const AttributionMap& map, double alpha);

// Square crop centred on a grid cell, side = cell size * context, clamped to
// the image.
cv::Rect patch_rect(cv::Size image, std::size_t grid_h, std::size_t grid_w, std::size_t cell,
                    double context = 2.0);

struct GalleryTile {
  cv::Mat patch;
  std::size_t prototype = 0;
};

// Tiles resized to tile_size, framed with their palette color, laid out in
// one row.
cv::Mat render_gallery(std::span<const GalleryTile> tiles, int tile_size = 96, int border = 6);

}  // namespace protoexplain
