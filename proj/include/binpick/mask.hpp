#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "binpick/errors.hpp"
#include "binpick/grid.hpp"

namespace binpick {

/// Binary mask over a raster, stored as a bitmap cropped to a bounding box.
/// Pixels outside the box are unset.
class Mask {
 public:
  Mask() = default;
  explicit Mask(RasterSize raster) : raster_(raster) {}
  Mask(RasterSize raster, PixelBox box) : raster_(raster), box_(box.intersect(PixelBox::of(raster))) {
    bits_.assign(box_.area(), 0);
  }

  /// Mask of every pixel in `box` (clipped to the raster) satisfying pred(x, y).
  template <typename Pred>
  static Mask from_predicate(RasterSize raster, PixelBox box, Pred&& pred) {
    Mask m(raster, box);
    for (int y = m.box_.y0; y < m.box_.y1; ++y)
      for (int x = m.box_.x0; x < m.box_.x1; ++x)
        if (pred(x, y)) m.bits_[m.local(x, y)] = 1;
    m.trim();
    return m;
  }

  static Mask from_grid(const Grid<std::uint8_t>& g) {
    return from_predicate(g.size(), PixelBox::of(g.size()), [&](int x, int y) { return g(x, y) != 0; });
  }

  RasterSize raster() const noexcept { return raster_; }
  const PixelBox& box() const noexcept { return box_; }

  bool test(int x, int y) const noexcept { return box_.contains(x, y) && bits_[local(x, y)]; }

  /// Set a pixel; it must lie inside box().
  void set(int x, int y, bool v = true) {
    if (!box_.contains(x, y)) throw ParameterError("mask pixel outside its box");
    bits_[local(x, y)] = v ? 1 : 0;
  }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return count() == 0; }

  /// Shrink the box to the set pixels.
  void trim() {
    PixelBox t{box_.x1, box_.y1, box_.x0, box_.y0};
    bool any = false;
    for (int y = box_.y0; y < box_.y1; ++y)
      for (int x = box_.x0; x < box_.x1; ++x)
        if (bits_[local(x, y)]) {
          any = true;
          t.x0 = std::min(t.x0, x);
          t.y0 = std::min(t.y0, y);
          t.x1 = std::max(t.x1, x + 1);
          t.y1 = std::max(t.y1, y + 1);
        }
    if (!any) {
      box_ = {};
      bits_.clear();
      return;
    }
    if (t == box_) return;
    std::vector<std::uint8_t> nb(t.area(), 0);
    for (int y = t.y0; y < t.y1; ++y)
      for (int x = t.x0; x < t.x1; ++x)
        nb[static_cast<std::size_t>(y - t.y0) * t.width() + (x - t.x0)] = bits_[local(x, y)];
    box_ = t;
    bits_ = std::move(nb);
  }

  /// Visit set pixels in row-major order.
  template <typename F>
  void for_each(F&& f) const {
    for (int y = box_.y0; y < box_.y1; ++y)
      for (int x = box_.x0; x < box_.x1; ++x)
        if (bits_[local(x, y)]) f(x, y);
  }

  Grid<std::uint8_t> to_grid() const {
    Grid<std::uint8_t> g(raster_, 0);
    for_each([&](int x, int y) { g(x, y) = 1; });
    return g;
  }

  /// Pixel-set equality, independent of the stored box.
  friend bool operator==(const Mask& a, const Mask& b) {
    if (a.raster_ != b.raster_) return false;
    const PixelBox u = a.box_.unite(b.box_);
    for (int y = u.y0; y < u.y1; ++y)
      for (int x = u.x0; x < u.x1; ++x)
        if (a.test(x, y) != b.test(x, y)) return false;
    return true;
  }

 private:
  std::size_t local(int x, int y) const noexcept {
    return static_cast<std::size_t>(y - box_.y0) * static_cast<std::size_t>(box_.width()) +
           static_cast<std::size_t>(x - box_.x0);
  }

  RasterSize raster_{};
  PixelBox box_{};
  std::vector<std::uint8_t> bits_;
};

inline void require_same_raster(const Mask& a, const Mask& b) {
  if (a.raster() != b.raster()) throw ParameterError("masks have different raster dims");
}

inline std::size_t intersection_count(const Mask& a, const Mask& b) {
  require_same_raster(a, b);
  const PixelBox i = a.box().intersect(b.box());
  std::size_t n = 0;
  for (int y = i.y0; y < i.y1; ++y)
    for (int x = i.x0; x < i.x1; ++x) n += (a.test(x, y) && b.test(x, y)) ? 1 : 0;
  return n;
}

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
inline double mask_iou(const Mask& a, const Mask& b) {
  require_same_raster(a, b);
  const std::size_t inter = intersection_count(a, b);
  const std::size_t uni = a.count() + b.count() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline Mask mask_union(const Mask& a, const Mask& b) {
  require_same_raster(a, b);
  return Mask::from_predicate(a.raster(), a.box().unite(b.box()),
                              [&](int x, int y) { return a.test(x, y) || b.test(x, y); });
}

/// True when some pixel of `a` equals or 8-neighbours a pixel of `b`.
inline bool touches(const Mask& a, const Mask& b) {
  require_same_raster(a, b);
  const PixelBox near = a.box().expand(1).intersect(b.box());
  for (int y = near.y0; y < near.y1; ++y)
    for (int x = near.x0; x < near.x1; ++x) {
      if (!b.test(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (a.test(x + dx, y + dy)) return true;
    }
  return false;
}

namespace detail {
inline std::vector<std::array<int, 2>> disk_offsets(int r) {
  std::vector<std::array<int, 2>> out;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r * r) out.push_back({dx, dy});
  return out;
}
}  // namespace detail

/// Morphological dilation by a Euclidean disk of radius r pixels.
inline Mask dilate(const Mask& m, int r) {
  if (r <= 0) return m;
  const auto offs = detail::disk_offsets(r);
  Mask out(m.raster(), m.box().expand(r));
  m.for_each([&](int x, int y) {
    for (auto [dx, dy] : offs)
      if (out.box().contains(x + dx, y + dy)) out.set(x + dx, y + dy);
  });
  out.trim();
  return out;
}

/// Morphological erosion by a Euclidean disk of radius r pixels; off-raster
/// pixels count as unset.
inline Mask erode(const Mask& m, int r) {
  if (r <= 0) return m;
  const auto offs = detail::disk_offsets(r);
  return Mask::from_predicate(m.raster(), m.box(), [&](int x, int y) {
    for (auto [dx, dy] : offs)
      if (!m.test(x + dx, y + dy)) return false;
    return true;
  });
}

}  // namespace binpick
