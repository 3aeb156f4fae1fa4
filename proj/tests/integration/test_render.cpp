#include <doctest.h>

#include <opencv2/core.hpp>

#include "protoexplain/render.hpp"

using namespace protoexplain;

TEST_CASE("palette wraps after twenty entries and its colors are distinct") {
  const auto& p = segment_palette();
  for (std::size_t i = 0; i < kPaletteSize; ++i) {
    CHECK(palette_color(i) == p[i]);
    CHECK(palette_color(i + kPaletteSize) == p[i]);
    for (std::size_t j = i + 1; j < kPaletteSize; ++j) CHECK_FALSE(p[i] == p[j]);
  }
}

TEST_CASE("heat colors run blue, white, red and clamp") {
  CHECK(heat_color(0.0) == Rgb{0, 0, 255});
  CHECK(heat_color(0.5) == Rgb{255, 255, 255});
  CHECK(heat_color(1.0) == Rgb{255, 0, 0});
  CHECK(heat_color(-3.0) == heat_color(0.0));
  CHECK(heat_color(7.0) == heat_color(1.0));
  CHECK(heat_color(0.25) == Rgb{128, 128, 255});
}

TEST_CASE("patch rectangles are centred on the cell and clamped") {
  const cv::Rect mid = patch_rect({224, 224}, 7, 7, 24);  // cell (3, 3)
  CHECK(mid == cv::Rect(80, 80, 64, 64));
  const cv::Rect corner = patch_rect({224, 224}, 7, 7, 0);
  CHECK(corner == cv::Rect(0, 0, 48, 48));
  const cv::Rect last = patch_rect({224, 224}, 7, 7, 48);
  CHECK(last.x + last.width == 224);
  CHECK(last.y + last.height == 224);
  const cv::Rect tight = patch_rect({100, 50}, 2, 2, 3, 1.0);
  CHECK(tight == cv::Rect(50, 13, 50, 37));
}

TEST_CASE("overlays keep the image size and honour alpha") {
  cv::Mat img(8, 8, CV_8UC3, cv::Scalar(10, 20, 30));
  ExplanationMap m;
  m.height = 2;
  m.width = 2;
  m.assignments = {0, 1, 2, 3};
  const cv::Mat none = overlay_explanation(img, m, 0.0);
  CHECK(cv::countNonZero(cv::Mat(none != img).reshape(1)) == 0);
  const cv::Mat full = overlay_explanation(img, m, 1.0);
  CHECK(full.size() == img.size());
  const Rgb c = palette_color(3);
  CHECK(full.at<cv::Vec3b>(7, 7) == cv::Vec3b(c.b, c.g, c.r));
  const Rgb c0 = palette_color(0);
  CHECK(full.at<cv::Vec3b>(0, 3) == cv::Vec3b(c0.b, c0.g, c0.r));

  AttributionMap a;
  a.height = 1;
  a.width = 2;
  a.values = {-1.0, 3.0};
  const cv::Mat heat = overlay_attribution(img, a, 1.0);
  CHECK(heat.at<cv::Vec3b>(0, 0) == cv::Vec3b(255, 0, 0));
  CHECK(heat.at<cv::Vec3b>(0, 7) == cv::Vec3b(0, 0, 255));
  a.values = {2.0, 2.0};
  CHECK(overlay_attribution(img, a, 1.0).at<cv::Vec3b>(0, 0) == cv::Vec3b(255, 255, 255));

  CHECK_THROWS_AS(overlay_explanation(cv::Mat(), m, 0.5), Error);
}

TEST_CASE("gallery lays framed tiles out in one row") {
  std::vector<GalleryTile> tiles;
  for (std::size_t k : {0u, 4u, 21u}) tiles.push_back({cv::Mat(10, 14, CV_8UC3, cv::Scalar(0, 0, 0)), k});
  const cv::Mat g = render_gallery(tiles, 20, 2);
  CHECK(g.rows == 24);
  CHECK(g.cols == 3 * 24 + 2 * 4);
  const Rgb c = palette_color(21);
  CHECK(g.at<cv::Vec3b>(0, 2 * 28) == cv::Vec3b(c.b, c.g, c.r));
  CHECK(g.at<cv::Vec3b>(12, 12) == cv::Vec3b(0, 0, 0));
  CHECK(g.at<cv::Vec3b>(12, 25) == cv::Vec3b(255, 255, 255));
}
