#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binpick/archetype.hpp"
#include "binpick/errors.hpp"
#include "binpick/grid.hpp"
#include "binpick/mask.hpp"
#include "binpick/perception.hpp"

namespace binpick {

/// Moment-equivalent ellipse of a mask, in pixels. `theta` is the direction of
/// the minor axis (the jaw closing direction) measured from +x toward +y, in
/// [0, pi). `minor` and `major` are full axis lengths.
struct EllipseFit {
  double x = 0;
  double y = 0;
  double theta = 0;
  double minor = 0;
  double major = 0;
};

inline double wrap_half_turn(double a) {
  a = std::fmod(a, std::numbers::pi);
  if (a < 0) a += std::numbers::pi;
  if (a >= std::numbers::pi) a -= std::numbers::pi;
  return a;
}

inline EllipseFit fit_ellipse(const Mask& mask) {
  const std::size_t n = mask.count();
  if (n < 5) throw FitError("mask has fewer than 5 pixels");

  // Accumulate relative to the box corner to keep the sums small.
  const double bx = mask.box().x0;
  const double by = mask.box().y0;
  double sx = 0, sy = 0;
  mask.for_each([&](int x, int y) {
    sx += x - bx;
    sy += y - by;
  });
  const double cx = sx / static_cast<double>(n);
  const double cy = sy / static_cast<double>(n);
  double mxx = 0, myy = 0, mxy = 0;
  mask.for_each([&](int x, int y) {
    const double dx = x - bx - cx;
    const double dy = y - by - cy;
    mxx += dx * dx;
    myy += dy * dy;
    mxy += dx * dy;
  });
  mxx /= static_cast<double>(n);
  myy /= static_cast<double>(n);
  mxy /= static_cast<double>(n);

  const double mean = 0.5 * (mxx + myy);
  const double spread = std::hypot(0.5 * (mxx - myy), mxy);
  const double lmax = mean + spread;
  const double lmin = mean - spread;
  if (!(lmin > 1e-9 * std::max(1.0, lmax))) throw FitError("degenerate mask covariance");

  EllipseFit e;
  e.x = bx + cx;
  e.y = by + cy;
  const double major_dir = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
  e.theta = wrap_half_turn(major_dir + 0.5 * std::numbers::pi);
  e.minor = 4.0 * std::sqrt(lmin);
  e.major = 4.0 * std::sqrt(lmax);
  return e;
}

/// Unit vectors of an oriented frame: u along theta, v a quarter turn on.
struct Frame2 {
  double ux, uy, vx, vy;
  explicit Frame2(double theta)
      : ux(std::cos(theta)), uy(std::sin(theta)), vx(-std::sin(theta)), vy(std::cos(theta)) {}
};

/// Pixels whose centres fall inside `fit`, clipped to `clip`.
inline Mask ellipse_region(const EllipseFit& fit, RasterSize raster, PixelBox clip) {
  const Frame2 f(fit.theta);
  const double ra = 0.5 * fit.minor;
  const double rb = 0.5 * fit.major;
  const int r = static_cast<int>(std::ceil(rb)) + 1;
  const int cx = static_cast<int>(std::lround(fit.x));
  const int cy = static_cast<int>(std::lround(fit.y));
  const PixelBox box = PixelBox{cx - r, cy - r, cx + r + 1, cy + r + 1}.intersect(clip);
  return Mask::from_predicate(raster, box, [&](int x, int y) {
    const double dx = x - fit.x;
    const double dy = y - fit.y;
    const double a = (dx * f.ux + dy * f.uy) / ra;
    const double b = (dx * f.vx + dy * f.vy) / rb;
    return a * a + b * b <= 1.0;
  });
}

/// Rectangle centred at (cx, cy) with half extents `half_u` along frame u and
/// `half_v` along frame v (pixels), clipped to `clip`.
inline Mask oriented_rect(RasterSize raster, PixelBox clip, double cx, double cy, const Frame2& f,
                          double half_u, double half_v) {
  const double ext = std::abs(f.ux) * half_u + std::abs(f.vx) * half_v;
  const double eyt = std::abs(f.uy) * half_u + std::abs(f.vy) * half_v;
  const PixelBox box = PixelBox{static_cast<int>(std::floor(cx - ext)), static_cast<int>(std::floor(cy - eyt)),
                                static_cast<int>(std::ceil(cx + ext)) + 1,
                                static_cast<int>(std::ceil(cy + eyt)) + 1}
                           .intersect(clip);
  return Mask::from_predicate(raster, box, [&](int x, int y) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::abs(dx * f.ux + dy * f.uy) <= half_u && std::abs(dx * f.vx + dy * f.vy) <= half_v;
  });
}

/// Median of the values; mean of the two middle values for even counts.
inline double median(std::vector<double> v) {
  if (v.empty()) throw ParameterError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double median_over(const Grid<float>& field, const Mask& region) {
  std::vector<double> vals;
  vals.reserve(region.count());
  region.for_each([&](int x, int y) { vals.push_back(field(x, y)); });
  return median(std::move(vals));
}

struct FingerGeometry {
  double width_mm = 4.0;      ///< along the closing axis
  double breadth_mm = 20.0;   ///< across it
  double clearance_mm = 2.0;  ///< opening margin beyond w/2

  void validate() const {
    if (!(width_mm > 0 && breadth_mm > 0 && clearance_mm > 0))
      throw ParameterError("finger geometry values must be positive");
  }
};

enum class FilterVerdict {
  Pending,            ///< filtering not run
  Retained,
  LeftContactHigh,
  RightContactHigh,
  BothContactsHigh,
  OutOfTray,
};

inline std::string_view to_string(FilterVerdict v) {
  switch (v) {
    case FilterVerdict::Pending: return "unfiltered";
    case FilterVerdict::Retained: return "retained";
    case FilterVerdict::LeftContactHigh: return "left_contact_not_lower";
    case FilterVerdict::RightContactHigh: return "right_contact_not_lower";
    case FilterVerdict::BothContactsHigh: return "both_contacts_not_lower";
    case FilterVerdict::OutOfTray: return "out_of_tray";
  }
  return "unfiltered";
}

inline FilterVerdict filter_verdict_from_string(std::string_view s) {
  for (auto v : {FilterVerdict::Pending, FilterVerdict::Retained, FilterVerdict::LeftContactHigh,
                 FilterVerdict::RightContactHigh, FilterVerdict::BothContactsHigh, FilterVerdict::OutOfTray})
    if (to_string(v) == s) return v;
  throw ParameterError("unknown filter verdict '" + std::string(s) + "'");
}

/// Parallel-jaw grasp: centre (px), closing direction theta, insertion height
/// h and jaw width w (mm).
struct GraspCandidate {
  PieceId instance = 0;
  double x = 0;
  double y = 0;
  double theta = 0;
  double h_mm = 0;
  double w_mm = 0;
  double food_median_mm = 0;
  std::optional<std::array<double, 2>> contact_medians_mm;  ///< left, right
  FilterVerdict verdict = FilterVerdict::Pending;
  EllipseFit fit;

  bool removed() const {
    return verdict != FilterVerdict::Pending && verdict != FilterVerdict::Retained;
  }
};

inline GraspCandidate derive_grasp(const EllipseFit& fit, const DepthImage& depth,
                                   const FoodArchetype& archetype, PieceId instance = 0) {
  const Mask food = ellipse_region(fit, depth.raster(), PixelBox::of(depth.raster()));
  if (food.empty()) throw FitError("ellipse has no pixel inside the raster");
  GraspCandidate c;
  c.instance = instance;
  c.x = fit.x;
  c.y = fit.y;
  c.theta = fit.theta;
  c.w_mm = fit.minor * depth.resolution_mm;
  c.food_median_mm = median_over(depth.mm, food);
  c.h_mm = std::max(0.0, c.food_median_mm + archetype.grasp_height_offset_mm);
  c.fit = fit;
  return c;
}

/// Distance (mm) from the grasp centre to each finger-rectangle centre.
inline double finger_offset_mm(const GraspCandidate& c, const FingerGeometry& fg) {
  return 0.5 * c.w_mm + fg.clearance_mm + 0.5 * fg.width_mm;
}

/// Centres (px) of the left (-u) and right (+u) finger rectangles.
inline std::array<std::array<double, 2>, 2> contact_centers(const GraspCandidate& c, const FingerGeometry& fg,
                                                            double resolution_mm) {
  const Frame2 f(c.theta);
  const double d = finger_offset_mm(c, fg) / resolution_mm;
  return {{{c.x - d * f.ux, c.y - d * f.uy}, {c.x + d * f.ux, c.y + d * f.uy}}};
}

/// Left and right finger footprints, clipped to `clip`.
inline std::array<Mask, 2> contact_regions(const GraspCandidate& c, const FingerGeometry& fg,
                                           RasterSize raster, double resolution_mm, PixelBox clip) {
  const Frame2 f(c.theta);
  const auto centers = contact_centers(c, fg, resolution_mm);
  const double hu = 0.5 * fg.width_mm / resolution_mm;
  const double hv = 0.5 * fg.breadth_mm / resolution_mm;
  return {oriented_rect(raster, clip, centers[0][0], centers[0][1], f, hu, hv),
          oriented_rect(raster, clip, centers[1][0], centers[1][1], f, hu, hv)};
}

inline std::array<Mask, 2> contact_regions(const GraspCandidate& c, const FingerGeometry& fg,
                                           const DepthImage& depth) {
  return contact_regions(c, fg, depth.raster(), depth.resolution_mm,
                         depth.workspace.empty() ? PixelBox::of(depth.raster()) : depth.workspace);
}

/// Fill in contact medians and verdicts for every candidate; returns the
/// retained ones (both contact medians strictly below the food median).
inline std::vector<GraspCandidate> filter_grasps(std::vector<GraspCandidate>& cands, const DepthImage& depth,
                                                 const FingerGeometry& fg) {
  std::vector<GraspCandidate> kept;
  for (auto& c : cands) {
    const auto regions = contact_regions(c, fg, depth);
    if (regions[0].empty() || regions[1].empty()) {
      c.contact_medians_mm.reset();
      c.verdict = FilterVerdict::OutOfTray;
      continue;
    }
    const double left = median_over(depth.mm, regions[0]);
    const double right = median_over(depth.mm, regions[1]);
    c.contact_medians_mm = std::array<double, 2>{left, right};
    const bool lo = left < c.food_median_mm;
    const bool ro = right < c.food_median_mm;
    if (lo && ro) {
      c.verdict = FilterVerdict::Retained;
      kept.push_back(c);
    } else if (!lo && !ro) {
      c.verdict = FilterVerdict::BothContactsHigh;
    } else {
      c.verdict = lo ? FilterVerdict::RightContactHigh : FilterVerdict::LeftContactHigh;
    }
  }
  return kept;
}

/// Highest food median; ties go to the lower instance id.
inline std::optional<GraspCandidate> select_grasp(std::span<const GraspCandidate> retained) {
  const GraspCandidate* best = nullptr;
  for (const auto& c : retained) {
    if (!best || c.food_median_mm > best->food_median_mm ||
        (c.food_median_mm == best->food_median_mm && c.instance < best->instance))
      best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

struct PlannerConfig {
  FingerGeometry fingers;
  bool filtering = true;
};

struct SkippedMask {
  PieceId instance = 0;
  std::string reason;
};

struct Plan {
  std::vector<GraspCandidate> candidates;  ///< every fitted mask, in mask order
  std::vector<SkippedMask> skipped;
  std::optional<std::size_t> target;       ///< index into candidates

  const GraspCandidate* target_candidate() const { return target ? &candidates[*target] : nullptr; }
  std::size_t retained_count() const {
    return static_cast<std::size_t>(std::count_if(candidates.begin(), candidates.end(),
                                                  [](const GraspCandidate& c) { return !c.removed(); }));
  }
};

inline Plan plan(const InstanceMaskSet& masks, const DepthImage& depth, const FoodArchetype& archetype,
                 const PlannerConfig& config) {
  if (masks.raster != depth.raster()) throw ParameterError("masks and depth differ in raster dims");
  config.fingers.validate();

  Plan p;
  for (const auto& m : masks.masks) {
    try {
      const EllipseFit fit = fit_ellipse(m.mask);
      p.candidates.push_back(derive_grasp(fit, depth, archetype, m.id));
    } catch (const FitError& e) {
      p.skipped.push_back({m.id, e.what()});
    }
  }

  std::vector<GraspCandidate> pool;
  if (config.filtering) {
    pool = filter_grasps(p.candidates, depth, config.fingers);
  } else {
    for (auto& c : p.candidates) {
      const auto regions = contact_regions(c, config.fingers, depth);
      if (!regions[0].empty() && !regions[1].empty())
        c.contact_medians_mm = std::array<double, 2>{median_over(depth.mm, regions[0]),
                                                     median_over(depth.mm, regions[1])};
    }
    pool = p.candidates;
  }

  if (auto best = select_grasp(pool)) {
    for (std::size_t i = 0; i < p.candidates.size(); ++i)
      if (p.candidates[i].instance == best->instance && !p.candidates[i].removed()) {
        p.target = i;
        break;
      }
  }
  return p;
}

}  // namespace binpick
