#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "binpick/binpick.hpp"

namespace testing_support {

using namespace binpick;

/// Tray-frame millimetres of the centre of raster pixel (px, py).
inline std::array<double, 2> pixel_mm(const TrayScene& s, int px, int py) {
  const auto& g = s.geometry();
  return {(px - g.interior.x0 + 0.5) * g.resolution_mm, (py - g.interior.y0 + 0.5) * g.resolution_mm};
}

/// Drop `stamp` so that its centre pixel lands on raster pixel (px, py).
inline PieceId drop_at(TrayScene& s, PieceStamp stamp, int px, int py, const std::string& archetype = {}) {
  const auto [x, y] = pixel_mm(s, px, py);
  return s.drop(std::move(stamp), x, y, archetype);
}

inline PieceStamp flat_mm(int w_px, int h_px, double thickness_mm) {
  return PieceStamp::flat(w_px, h_px, from_mm(thickness_mm));
}

inline Mask rect_mask(RasterSize r, int x0, int y0, int x1, int y1) {
  return Mask::from_predicate(r, PixelBox{x0, y0, x1, y1}, [](int, int) { return true; });
}

inline Mask disk_mask(RasterSize r, double cx, double cy, double radius) {
  const int R = static_cast<int>(std::ceil(radius)) + 1;
  const PixelBox box = PixelBox{static_cast<int>(cx) - R, static_cast<int>(cy) - R, static_cast<int>(cx) + R + 1,
                                static_cast<int>(cy) + R + 1}
                           .intersect(PixelBox::of(r));
  return Mask::from_predicate(r, box, [&](int x, int y) { return std::hypot(x - cx, y - cy) <= radius; });
}

/// Filled ellipse with full minor axis `a` along angle `theta` and full major axis `b`.
inline Mask ellipse_mask(RasterSize r, double cx, double cy, double theta, double a, double b) {
  EllipseFit e{cx, cy, theta, a, b};
  return ellipse_region(e, r, PixelBox::of(r));
}

/// Depth image whose values are the scene heights, over the tray interior.
inline DepthImage exact_depth(const TrayScene& s) {
  return DepthImage::from_heightmap(s.heightmap(), s.resolution_mm(), s.geometry().interior);
}

/// Median by full sort; the even case averages the two middle values.
inline double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("binpick_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline FoodArchetype test_archetype(std::string name = "probe") {
  FoodArchetype a;
  a.name = std::move(name);
  a.footprint = {15.0, 15.0, 2.0, 0.0};
  a.dome_ratio = 1.0;
  a.underside_fraction = 0.0;
  a.hardness = Hardness::Soft;
  a.fragility_force_n = 2.5;
  a.damage_tolerance_mm = 3.0;
  a.grasp_height_offset_mm = -10.0;
  return a;
}

}  // namespace testing_support
