#include "protoexplain/render.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace protoexplain {

const std::array<Rgb, kPaletteSize>& segment_palette() {
  static const std::array<Rgb, kPaletteSize> palette = {{
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {67, 99, 216},   {245, 130, 49},
      {145, 30, 180},  {66, 212, 244},  {240, 50, 230},  {191, 239, 69},  {250, 190, 212},
      {70, 153, 144},  {220, 190, 255}, {154, 99, 36},   {255, 250, 200}, {128, 0, 0},
      {170, 255, 195}, {128, 128, 0},   {255, 216, 177}, {0, 0, 117},     {169, 169, 169},
  }};
  return palette;
}

Rgb palette_color(std::size_t prototype) { return segment_palette()[prototype % kPaletteSize]; }

Rgb heat_color(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.5, 0.0, 1.0);
  auto channel = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
  if (t < 0.5) {
    const double s = t / 0.5;  // blue -> white
    return {channel(255.0 * s), channel(255.0 * s), 255};
  }
  const double s = (t - 0.5) / 0.5;  // white -> red
  return {255, channel(255.0 * (1.0 - s)), channel(255.0 * (1.0 - s))};
}

cv::Mat load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::Io, "image " + path.string() + " not found");
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) fail(ErrorKind::Io, "cannot decode image " + path.string());
  return img;
}

void write_png(const std::filesystem::path& path, const cv::Mat& image) {
  const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6, cv::IMWRITE_PNG_STRATEGY,
                                   cv::IMWRITE_PNG_STRATEGY_DEFAULT};
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), image, params);
  } catch (const cv::Exception& e) {
    fail(ErrorKind::Io, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) fail(ErrorKind::Io, "cannot write " + path.string());
}

namespace {

cv::Vec3b to_bgr(Rgb c) { return {c.b, c.g, c.r}; }

// Blends per-pixel colours chosen from the grid cell under each pixel.
template <typename ColorOf>
cv::Mat blend_grid(const cv::Mat& image, std::size_t grid_h, std::size_t grid_w, double alpha,
                   ColorOf&& color_of) {
  if (image.empty() || image.type() != CV_8UC3) {
    fail(ErrorKind::Validation, "overlay needs a non-empty 8-bit colour image");
  }
  alpha = std::clamp(alpha, 0.0, 1.0);
  cv::Mat out = image.clone();
  const auto rows = static_cast<std::size_t>(image.rows);
  const auto cols = static_cast<std::size_t>(image.cols);
  for (std::size_t y = 0; y < rows; ++y) {
    const std::size_t gy = std::min(grid_h - 1, y * grid_h / rows);
    auto* px = out.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < cols; ++x) {
      const std::size_t gx = std::min(grid_w - 1, x * grid_w / cols);
      const cv::Vec3b c = to_bgr(color_of(gy * grid_w + gx));
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1.0 - alpha) * px[x][ch] + alpha * c[ch];
        px[x][ch] = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return out;
}

}  // namespace

cv::Mat overlay_explanation(const cv::Mat& image, const ExplanationMap& map, double alpha) {
  return blend_grid(image, map.height, map.width, alpha, [&](std::size_t cell) {
    return palette_color(static_cast<std::size_t>(map.assignments[cell]));
  });
}

cv::Mat overlay_attribution(const cv::Mat& image, const AttributionMap& map, double alpha) {
  const double lo = map.min();
  const double hi = map.max();
  return blend_grid(image, map.height, map.width, alpha, [&](std::size_t cell) {
    const double t = hi > lo ? (map.values[cell] - lo) / (hi - lo) : 0.5;
    return heat_color(t);
  });
}

cv::Rect patch_rect(cv::Size image, std::size_t grid_h, std::size_t grid_w, std::size_t cell,
                    double context) {
  const double cell_h = static_cast<double>(image.height) / static_cast<double>(grid_h);
  const double cell_w = static_cast<double>(image.width) / static_cast<double>(grid_w);
  const double cy = (static_cast<double>(cell / grid_w) + 0.5) * cell_h;
  const double cx = (static_cast<double>(cell % grid_w) + 0.5) * cell_w;
  const double side = std::max(cell_h, cell_w) * context;
  int x0 = static_cast<int>(std::lround(cx - side / 2.0));
  int y0 = static_cast<int>(std::lround(cy - side / 2.0));
  int x1 = static_cast<int>(std::lround(cx + side / 2.0));
  int y1 = static_cast<int>(std::lround(cy + side / 2.0));
  x0 = std::clamp(x0, 0, image.width - 1);
  y0 = std::clamp(y0, 0, image.height - 1);
  x1 = std::clamp(x1, x0 + 1, image.width);
  y1 = std::clamp(y1, y0 + 1, image.height);
  return {x0, y0, x1 - x0, y1 - y0};
}

cv::Mat render_gallery(std::span<const GalleryTile> tiles, int tile_size, int border) {
  constexpr int kGap = 4;
  const int framed = tile_size + 2 * border;
  const int count = std::max<int>(1, static_cast<int>(tiles.size()));
  cv::Mat out(framed, count * framed + (count - 1) * kGap, CV_8UC3, cv::Scalar(255, 255, 255));
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    cv::Mat resized;
    cv::resize(tiles[i].patch, resized, cv::Size(tile_size, tile_size), 0, 0, cv::INTER_NEAREST);
    cv::Mat framed_tile;
    const Rgb c = palette_color(tiles[i].prototype);
    cv::copyMakeBorder(resized, framed_tile, border, border, border, border, cv::BORDER_CONSTANT,
                       cv::Scalar(c.b, c.g, c.r));
    const int x = static_cast<int>(i) * (framed + kGap);
    framed_tile.copyTo(out(cv::Rect(x, 0, framed, framed)));
  }
  return out;
}

}  // namespace protoexplain
