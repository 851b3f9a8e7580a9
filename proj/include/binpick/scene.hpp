#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binpick/archetype.hpp"
#include "binpick/errors.hpp"
#include "binpick/grid.hpp"
#include "binpick/rng.hpp"

namespace binpick {

using PieceId = std::uint16_t;

// ---------------------------------------------------------------------------
// Piece shapes
// ---------------------------------------------------------------------------

/// Realized shape of one piece after scaling and jitter, in millimetres.
/// Everything needed to re-rasterize the piece without an rng.
struct ShapeParams {
  double semi_major_mm = 15.0;
  double semi_minor_mm = 15.0;
  double exponent = 2.0;
  double height_mm = 10.0;     ///< rim-to-peak plus underside
  double underside_mm = 3.0;   ///< lift of the rim above the lowest point of the underside

  friend bool operator==(const ShapeParams&, const ShapeParams&) = default;
};

/// Rasterized piece. All three grids share one square raster centred on
/// pixel (`radius`, `radius`); top and bottom are relative to the piece's own
/// base plane and only meaningful where `footprint` is set.
struct PieceStamp {
  int radius = 0;
  Grid<Height> top;
  Grid<Height> bottom;
  Grid<std::uint8_t> footprint;
  double rotation = 0.0;
  double scale = 1.0;
  ShapeParams shape;

  int side() const { return 2 * radius + 1; }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(
        std::count(footprint.data().begin(), footprint.data().end(), std::uint8_t{1}));
  }

  /// A flat slab of uniform thickness covering a w x h pixel block; handy for
  /// constructed scenes.
  static PieceStamp flat(int w, int h, Height thickness) {
    PieceStamp s;
    s.radius = std::max(w, h) / 2;
    const int side = s.side();
    s.top = Grid<Height>(side, side);
    s.bottom = Grid<Height>(side, side);
    s.footprint = Grid<std::uint8_t>(side, side);
    const int ox = s.radius - w / 2;
    const int oy = s.radius - h / 2;
    for (int y = oy; y < oy + h; ++y)
      for (int x = ox; x < ox + w; ++x) {
        s.footprint(x, y) = 1;
        s.top(x, y) = thickness;
      }
    s.shape = {w * 0.5, h * 0.5, 100.0, to_mm(thickness), 0.0};
    return s;
  }
};

/// Rasterize a realized shape at `rotation` (rad, long axis from +x) and pixel
/// pitch `resolution_mm`. Pixels are sampled at their centres, with the piece
/// centre on the centre of the middle pixel.
inline PieceStamp rasterize_stamp(const ShapeParams& shape, double rotation, double resolution_mm) {
  if (!(resolution_mm > 0)) throw ParameterError("resolution must be positive");
  if (!(shape.semi_major_mm > 0 && shape.semi_minor_mm > 0 && shape.exponent > 0))
    throw ParameterError("shape semi-axes and exponent must be positive");
  if (!(shape.height_mm >= shape.underside_mm && shape.underside_mm >= 0))
    throw ParameterError("shape needs height >= underside >= 0");

  PieceStamp s;
  s.shape = shape;
  s.rotation = rotation;
  const double a = shape.semi_major_mm;
  const double b = shape.semi_minor_mm;
  // For exponents below 1 the superellipse still sits inside its axis box, so
  // the box diagonal bounds every rotation.
  s.radius = static_cast<int>(std::ceil(std::hypot(a, b) / resolution_mm)) + 1;
  const int side = s.side();
  s.top = Grid<Height>(side, side);
  s.bottom = Grid<Height>(side, side);
  s.footprint = Grid<std::uint8_t>(side, side);

  const double c = std::cos(rotation);
  const double sn = std::sin(rotation);
  const double n = shape.exponent;
  const bool elliptic = n == 2.0;
  const double under = shape.underside_mm;
  const double dome = shape.height_mm - shape.underside_mm;

  for (int j = 0; j < side; ++j) {
    const double dy = (j - s.radius) * resolution_mm;
    for (int i = 0; i < side; ++i) {
      const double dx = (i - s.radius) * resolution_mm;
      const double u = std::abs(dx * c + dy * sn) / a;
      const double v = std::abs(-dx * sn + dy * c) / b;
      if (u >= 1.0 || v >= 1.0) continue;
      double rho2;
      if (elliptic) {
        rho2 = u * u + v * v;
        if (rho2 >= 1.0) continue;
      } else {
        const double t = std::pow(u, n) + std::pow(v, n);
        if (t >= 1.0) continue;
        rho2 = std::pow(t, 2.0 / n);
      }
      const double rise = std::sqrt(std::max(0.0, 1.0 - rho2));
      const Height lo = from_mm(under * (1.0 - rise));
      const Height hi = std::max(lo, from_mm(under + dome * rise));
      s.footprint(i, j) = 1;
      s.bottom(i, j) = lo;
      s.top(i, j) = hi;
    }
  }
  return s;
}

/// Draw the per-piece jitter for `archetype` at `scale`.
inline ShapeParams realize_shape(const FoodArchetype& archetype, double scale, Rng& rng) {
  if (!(scale >= archetype.scale_range[0] && scale <= archetype.scale_range[1]))
    throw ParameterError("scale " + std::to_string(scale) + " outside the range of " +
                         archetype.name);
  const double j = archetype.footprint.jitter;
  auto jit = [&] { return j > 0 ? 1.0 + uniform(rng, -j, j) : 1.0; };
  const double ja = jit();
  const double jb = jit();
  const double jh = jit();
  ShapeParams p;
  p.semi_major_mm = archetype.footprint.semi_major_mm * scale * ja;
  p.semi_minor_mm = archetype.footprint.semi_minor_mm * scale * jb;
  p.exponent = archetype.footprint.exponent;
  const double mean_r = 0.5 * (p.semi_major_mm + p.semi_minor_mm);
  p.height_mm = archetype.dome_ratio * mean_r * jh;
  p.underside_mm = archetype.underside_fraction * p.height_mm;
  return p;
}

inline PieceStamp make_stamp(const FoodArchetype& archetype, double scale, double rotation, Rng& rng,
                             double resolution_mm) {
  auto s = rasterize_stamp(realize_shape(archetype, scale, rng), rotation, resolution_mm);
  s.scale = scale;
  return s;
}

// ---------------------------------------------------------------------------
// Tray
// ---------------------------------------------------------------------------

struct TrayDims {
  double length_mm = 424.0;  ///< along raster x
  double width_mm = 308.0;   ///< along raster y
  double depth_mm = 160.0;

  friend bool operator==(const TrayDims&, const TrayDims&) = default;
};

/// Maps the tray frame (mm, origin at the interior corner) onto a square
/// camera raster. The tray's long side spans the raster; the short side is
/// centred, and pixels outside `interior` are off-tray.
struct TrayGeometry {
  TrayDims dims;
  RasterSize raster{600, 600};
  double resolution_mm = 424.0 / 600.0;
  PixelBox interior{0, 82, 600, 518};

  static TrayGeometry fit(const TrayDims& dims, int image_px = 600) {
    if (image_px <= 0) throw ParameterError("image size must be positive");
    if (!(dims.length_mm > 0 && dims.width_mm > 0)) throw ParameterError("tray dims must be positive");
    TrayGeometry g;
    g.dims = dims;
    g.raster = {image_px, image_px};
    g.resolution_mm = std::max(dims.length_mm, dims.width_mm) / image_px;
    const int cols = std::min(image_px, static_cast<int>(std::lround(dims.length_mm / g.resolution_mm)));
    const int rows = std::min(image_px, static_cast<int>(std::lround(dims.width_mm / g.resolution_mm)));
    const int x0 = (image_px - cols) / 2;
    const int y0 = (image_px - rows) / 2;
    g.interior = {x0, y0, x0 + cols, y0 + rows};
    return g;
  }

  /// Pixel whose footprint contains tray-frame point (x, y).
  std::array<int, 2> to_pixel(double x_mm, double y_mm) const {
    return {interior.x0 + static_cast<int>(std::floor(x_mm / resolution_mm)),
            interior.y0 + static_cast<int>(std::floor(y_mm / resolution_mm))};
  }

  bool in_tray(double x_mm, double y_mm) const {
    return x_mm >= 0 && y_mm >= 0 && x_mm < dims.length_mm && y_mm < dims.width_mm;
  }

  friend bool operator==(const TrayGeometry&, const TrayGeometry&) = default;
};

/// Appearance randomization; recorded, never rendered.
struct RandomizationRecord {
  std::array<int, 3> tray_rgb{255, 255, 255};
  std::array<double, 3> light_direction{0.0, 0.0, 1.0};
  bool shadows = false;

  friend bool operator==(const RandomizationRecord&, const RandomizationRecord&) = default;
};

struct PieceInstance {
  PieceId id = 0;
  std::string archetype;
  ShapeParams shape;
  double rotation = 0.0;
  double scale = 1.0;
  double x_mm = 0.0;
  double y_mm = 0.0;
  Height rest_height = 0;
  bool occluded = false;
  bool damaged = false;
  double damage_magnitude = 0.0;
  std::shared_ptr<const PieceStamp> stamp;

  /// Stamp pixel (0, 0) in raster coordinates.
  std::array<int, 2> origin(const TrayGeometry& g) const {
    const auto [cx, cy] = g.to_pixel(x_mm, y_mm);
    return {cx - stamp->radius, cy - stamp->radius};
  }
};

class TrayScene {
 public:
  TrayScene() : TrayScene(TrayGeometry{}) {}
  explicit TrayScene(TrayGeometry geometry)
      : geometry_(geometry), heightmap_(geometry.raster, 0), owner_(geometry.raster, 0) {}

  const TrayGeometry& geometry() const { return geometry_; }
  RasterSize raster() const { return geometry_.raster; }
  double resolution_mm() const { return geometry_.resolution_mm; }

  const Grid<Height>& heightmap() const { return heightmap_; }
  const Grid<PieceId>& owner_map() const { return owner_; }
  const std::vector<PieceInstance>& pieces() const { return pieces_; }

  const PieceInstance* find(PieceId id) const {
    for (const auto& p : pieces_)
      if (p.id == id) return &p;
    return nullptr;
  }
  PieceInstance* find(PieceId id) {
    for (auto& p : pieces_)
      if (p.id == id) return &p;
    return nullptr;
  }

  RandomizationRecord randomization;
  std::uint64_t seed = 0;

  /// Settle `stamp` at tray-frame (x, y) by max-composition and register it.
  /// Returns the new piece id.
  PieceId drop(PieceStamp stamp, double x_mm, double y_mm, std::string archetype = {}) {
    if (!geometry_.in_tray(x_mm, y_mm))
      throw ParameterError("drop position outside the tray");
    if (next_id_ == 0xFFFF) throw ParameterError("piece id space exhausted");

    PieceInstance inst;
    inst.id = next_id_;
    inst.archetype = std::move(archetype);
    inst.shape = stamp.shape;
    inst.rotation = stamp.rotation;
    inst.scale = stamp.scale;
    inst.x_mm = x_mm;
    inst.y_mm = y_mm;
    inst.stamp = std::make_shared<const PieceStamp>(std::move(stamp));

    const auto [ox, oy] = inst.origin(geometry_);
    const PixelBox box = clipped_box(*inst.stamp, ox, oy);

    const auto& st = *inst.stamp;
    bool any = false;
    Height rest = 0;
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x) {
        if (!st.footprint(x - ox, y - oy)) continue;
        any = true;
        rest = std::max(rest, heightmap_(x, y) - st.bottom(x - ox, y - oy));
      }
    if (!any) throw PlacementError("piece footprint lies entirely outside the tray");

    inst.rest_height = rest;
    compose(inst);
    ++next_id_;
    pieces_.push_back(std::move(inst));
    return pieces_.back().id;
  }

  /// Rebuild heightmap and owner map from the registry in drop order, using
  /// the recorded rest heights.
  void recompose() {
    heightmap_.fill(0);
    owner_.fill(0);
    for (const auto& p : pieces_) compose(p);
    refresh_visibility();
  }

  /// Remove pieces (by id) and recompose. Unknown ids are ignored.
  void remove(std::span<const PieceId> ids) {
    std::erase_if(pieces_, [&](const PieceInstance& p) {
      return std::find(ids.begin(), ids.end(), p.id) != ids.end();
    });
    recompose();
  }

  /// Re-derive the fully-occluded flags from the owner map.
  void refresh_visibility() {
    std::vector<std::uint8_t> seen(next_id_ + 1u, 0);
    for (PieceId v : owner_.data()) seen[v] = 1;
    for (auto& p : pieces_) p.occluded = !seen[p.id];
  }

  /// Restore a registered piece verbatim (file loading). Call recompose() after
  /// the last one.
  void restore(PieceInstance inst) {
    next_id_ = std::max<PieceId>(next_id_, static_cast<PieceId>(inst.id + 1));
    pieces_.push_back(std::move(inst));
  }

  /// Override raster contents (file loading).
  void assign_rasters(Grid<Height> heightmap, Grid<PieceId> owner) {
    if (heightmap.size() != geometry_.raster || owner.size() != geometry_.raster)
      throw ParameterError("raster dims do not match the tray geometry");
    heightmap_ = std::move(heightmap);
    owner_ = std::move(owner);
  }

  PieceId next_id() const { return next_id_; }

  /// Stamp pixels of piece `p` that fall inside the tray interior.
  PixelBox clipped_box(const PieceStamp& st, int ox, int oy) const {
    return PixelBox{ox, oy, ox + st.side(), oy + st.side()}.intersect(geometry_.interior);
  }

 private:
  void compose(const PieceInstance& p) {
    const auto& st = *p.stamp;
    const auto [ox, oy] = p.origin(geometry_);
    const PixelBox box = clipped_box(st, ox, oy);
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x) {
        if (!st.footprint(x - ox, y - oy)) continue;
        const Height h = p.rest_height + st.top(x - ox, y - oy);
        if (h > heightmap_(x, y)) {
          heightmap_(x, y) = h;
          owner_(x, y) = p.id;
        }
      }
  }

  TrayGeometry geometry_;
  Grid<Height> heightmap_;
  Grid<PieceId> owner_;
  std::vector<PieceInstance> pieces_;
  PieceId next_id_ = 1;
};

/// Free-function form of TrayScene::drop.
inline PieceId drop_piece(TrayScene& scene, PieceStamp stamp, double x_mm, double y_mm,
                          std::string archetype = {}) {
  return scene.drop(std::move(stamp), x_mm, y_mm, std::move(archetype));
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct SceneConfig {
  std::string archetype = "fried_chicken";
  TrayDims tray;
  int image_px = 600;
  std::optional<std::array<int, 2>> count_range;       ///< overrides the archetype's
  std::optional<std::array<double, 2>> scale_range;    ///< overrides the archetype's
  int max_placement_retries = 100;
};

inline TrayScene generate_scene(const SceneConfig& config, const ArchetypeLibrary& library,
                                std::uint64_t seed) {
  FoodArchetype arch = library.at(config.archetype);
  if (config.count_range) arch.count_range = *config.count_range;
  if (config.scale_range) arch.scale_range = *config.scale_range;
  arch.validate();

  TrayScene scene(TrayGeometry::fit(config.tray, config.image_px));
  scene.seed = seed;
  Rng rng = make_rng(seed, Stream::Scene);

  auto& rec = scene.randomization;
  for (auto& c : rec.tray_rgb) c = uniform_int(rng, 128, 255);
  {
    // Light from the upper hemisphere.
    const double az = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double el = std::acos(uniform(rng, 0.0, 1.0));
    rec.light_direction = {std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el)};
  }
  rec.shadows = bernoulli(rng, 0.5);

  const auto& g = scene.geometry();
  const int count = uniform_int(rng, arch.count_range[0], arch.count_range[1]);
  for (int k = 0; k < count; ++k) {
    const double scale = uniform(rng, arch.scale_range[0], arch.scale_range[1]);
    const double rotation = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    PieceStamp stamp = make_stamp(arch, scale, rotation, rng, g.resolution_mm);
    for (int attempt = 0; attempt < config.max_placement_retries; ++attempt) {
      const double x = uniform(rng, 0.0, g.dims.length_mm);
      const double y = uniform(rng, 0.0, g.dims.width_mm);
      try {
        scene.drop(stamp, x, y, arch.name);
        break;
      } catch (const PlacementError&) {
      }
    }
  }
  scene.refresh_visibility();
  return scene;
}

}  // namespace binpick
