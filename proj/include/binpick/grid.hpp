#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "binpick/errors.hpp"

namespace binpick {

/// Heights are stored as integer hundredths of a millimetre. This is also the
/// level unit of the 16-bit PGM height rasters, so files round-trip exactly
/// and the composition arithmetic is exact.
using Height = std::int32_t;

inline constexpr double kMmPerHeightUnit = 0.01;

constexpr double to_mm(Height h) noexcept { return static_cast<double>(h) * kMmPerHeightUnit; }

/// Nearest height level for a millimetre value (halves away from zero).
inline Height from_mm(double mm) noexcept {
  const double units = mm / kMmPerHeightUnit;
  return static_cast<Height>(units < 0.0 ? units - 0.5 : units + 0.5);
}

struct RasterSize {
  int width = 0;
  int height = 0;

  constexpr std::size_t area() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  constexpr bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  friend constexpr bool operator==(RasterSize, RasterSize) = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  constexpr int width() const noexcept { return x1 > x0 ? x1 - x0 : 0; }
  constexpr int height() const noexcept { return y1 > y0 ? y1 - y0 : 0; }
  constexpr bool empty() const noexcept { return width() == 0 || height() == 0; }
  constexpr std::size_t area() const noexcept {
    return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  }
  constexpr bool contains(int x, int y) const noexcept {
    return x >= x0 && y >= y0 && x < x1 && y < y1;
  }

  constexpr PixelBox intersect(const PixelBox& o) const noexcept {
    PixelBox r{std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
    if (r.empty()) return {};
    return r;
  }
  constexpr PixelBox unite(const PixelBox& o) const noexcept {
    if (empty()) return o;
    if (o.empty()) return *this;
    return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
  }
  constexpr PixelBox expand(int r) const noexcept {
    if (empty()) return {};
    return {x0 - r, y0 - r, x1 + r, y1 + r};
  }

  static constexpr PixelBox of(RasterSize s) noexcept { return {0, 0, s.width, s.height}; }

  friend constexpr bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Dense row-major raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(RasterSize size, T fill = T{}) : size_(checked(size)), data_(size.area(), fill) {}
  Grid(int width, int height, T fill = T{}) : Grid(RasterSize{width, height}, fill) {}

  RasterSize size() const noexcept { return size_; }
  int width() const noexcept { return size_.width; }
  int height() const noexcept { return size_.height; }
  bool empty() const noexcept { return data_.empty(); }
  bool contains(int x, int y) const noexcept { return size_.contains(x, y); }

  T& operator()(int x, int y) noexcept {
    assert(contains(x, y));
    return data_[index(x, y)];
  }
  const T& operator()(int x, int y) const noexcept {
    assert(contains(x, y));
    return data_[index(x, y)];
  }

  std::span<T> row(int y) noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * size_.width,
            static_cast<std::size_t>(size_.width)};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * size_.width,
            static_cast<std::size_t>(size_.width)};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static RasterSize checked(RasterSize s) {
    if (s.width < 0 || s.height < 0) throw ParameterError("negative grid dimensions");
    return s;
  }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
           static_cast<std::size_t>(x);
  }

  RasterSize size_{};
  std::vector<T> data_;
};

}  // namespace binpick
