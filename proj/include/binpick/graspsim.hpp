#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string_view>
#include <vector>

#include "binpick/archetype.hpp"
#include "binpick/errors.hpp"
#include "binpick/planner.hpp"
#include "binpick/scene.hpp"

namespace binpick {

enum class FingerKind { Fixed, Adaptive };

inline std::string_view to_string(FingerKind k) { return k == FingerKind::Fixed ? "fixed" : "adaptive"; }

inline FingerKind finger_kind_from_string(std::string_view s) {
  if (s == "fixed") return FingerKind::Fixed;
  if (s == "adaptive") return FingerKind::Adaptive;
  throw ParameterError("unknown finger kind '" + std::string(s) + "'");
}

/// Spring-loaded fingertip: retracts up to 22.5 mm, pushing back with 4.1 N at
/// full retraction.
inline constexpr double kAdaptiveRetractionMm = 22.5;
inline constexpr double kAdaptiveMaxForceN = 4.1;

struct FingerModel {
  FingerKind kind = FingerKind::Adaptive;
  double retraction_budget_mm = kAdaptiveRetractionMm;
  double max_force_n = kAdaptiveMaxForceN;
  double pierce_block_mm = 15.0;  ///< fixed finger jams beyond this penetration
  FingerGeometry geometry;

  double stiffness() const { return max_force_n / retraction_budget_mm; }

  void validate() const {
    geometry.validate();
    if (!(retraction_budget_mm > 0 && max_force_n > 0))
      throw ParameterError("adaptive finger needs positive retraction budget and force");
    if (!(pierce_block_mm > 0)) throw ParameterError("pierce block threshold must be positive");
  }

  static FingerModel fixed() {
    FingerModel m;
    m.kind = FingerKind::Fixed;
    return m;
  }
  static FingerModel adaptive() { return FingerModel{}; }
};

/// Thresholds of the pick-up rule.
struct CaptureRules {
  double capture_fraction = 0.6;      ///< target cross-section share that must sit between the jaws
  double multi_pick_fraction = 0.5;   ///< visible-mask share for a neighbour to come along
  double grasp_depth_margin_mm = 5.0; ///< fingertips must reach this far below the target surface

  void validate() const {
    if (!(capture_fraction >= 0 && capture_fraction <= 1 && multi_pick_fraction >= 0 && multi_pick_fraction <= 1))
      throw ParameterError("capture fractions must lie in [0, 1]");
  }
};

struct PieceContact {
  PieceId id = 0;
  double penetration_mm = 0;  ///< fixed finger
  double force_n = 0;         ///< adaptive finger
  bool damaged = false;
};

struct FingerInsertion {
  double commanded_mm = 0;
  double achieved_bottom_mm = 0;
  double obstruction_mm = 0;
  double retraction_mm = 0;
  /// Tip height once closing has slid it off any edge it caught on.
  double settled_bottom_mm = 0;
  /// Non-target piece under most of the fingertip, if any (0 otherwise).
  PieceId resting_on = 0;
  bool blocked = false;
  bool out_of_tray = false;
  std::vector<PieceContact> contacts;
};

struct InsertionResult {
  std::array<FingerInsertion, 2> fingers;  ///< left, right

  bool blocked() const { return fingers[0].blocked || fingers[1].blocked; }
  double max_bottom_mm() const {
    return std::max(fingers[0].achieved_bottom_mm, fingers[1].achieved_bottom_mm);
  }
  double max_settled_mm() const {
    return std::max(fingers[0].settled_bottom_mm, fingers[1].settled_bottom_mm);
  }
};

enum class GraspClass { SuccessSingle, SuccessMultiple, Failure };

inline std::string_view to_string(GraspClass c) {
  switch (c) {
    case GraspClass::SuccessSingle: return "success_single";
    case GraspClass::SuccessMultiple: return "success_multiple";
    case GraspClass::Failure: return "failure";
  }
  return "failure";
}

inline GraspClass grasp_class_from_string(std::string_view s) {
  for (auto c : {GraspClass::SuccessSingle, GraspClass::SuccessMultiple, GraspClass::Failure})
    if (to_string(c) == s) return c;
  throw ParameterError("unknown grasp class '" + std::string(s) + "'");
}

enum class DamageCause { Insertion, Closure };

struct DamageEvent {
  PieceId id = 0;
  double magnitude = 0;  ///< mm of penetration (fixed) or N of force (adaptive)
  DamageCause cause = DamageCause::Insertion;
};

struct GraspOutcome {
  GraspClass classification = GraspClass::Failure;
  std::vector<PieceId> picked;
  std::vector<DamageEvent> damaged;  ///< at most one event per piece
  InsertionResult insertion;
  bool target_captured = false;
};

namespace detail {

inline const FoodArchetype& archetype_of(const TrayScene& scene, PieceId id, const ArchetypeLibrary& lib) {
  const auto* p = scene.find(id);
  if (!p) throw ParameterError("owner map references an unregistered piece");
  return lib.at(p->archetype);
}

/// Per-piece statistics of the visible surface inside one region.
struct RegionPieceStats {
  std::size_t pixels = 0;
  double max_mm = 0;
  std::vector<double> heights;
};

inline std::map<PieceId, RegionPieceStats> region_stats(const TrayScene& scene, const Mask& region,
                                                        bool keep_heights) {
  std::map<PieceId, RegionPieceStats> out;
  const auto& owner = scene.owner_map();
  const auto& hm = scene.heightmap();
  region.for_each([&](int x, int y) {
    const PieceId id = owner(x, y);
    if (id == 0) return;
    auto& s = out[id];
    const double h = to_mm(hm(x, y));
    s.max_mm = s.pixels == 0 ? h : std::max(s.max_mm, h);
    ++s.pixels;
    if (keep_heights) s.heights.push_back(h);
  });
  return out;
}

inline std::map<PieceId, std::size_t> visible_pixel_counts(const TrayScene& scene) {
  std::map<PieceId, std::size_t> out;
  for (PieceId id : scene.owner_map().data())
    if (id != 0) ++out[id];
  return out;
}

}  // namespace detail

/// Finger footprints on the scene raster, clipped to the tray interior.
inline std::array<Mask, 2> finger_regions(const TrayScene& scene, const GraspCandidate& c,
                                          const FingerGeometry& fg) {
  return contact_regions(c, fg, scene.raster(), scene.resolution_mm(), scene.geometry().interior);
}

/// Space between the open jaws: (w + 2 clearance) along the closing axis by
/// the finger breadth across it.
inline Mask jaw_region(const TrayScene& scene, const GraspCandidate& c, const FingerGeometry& fg) {
  const double res = scene.resolution_mm();
  return oriented_rect(scene.raster(), scene.geometry().interior, c.x, c.y, Frame2(c.theta),
                       (0.5 * c.w_mm + fg.clearance_mm) / res, 0.5 * fg.breadth_mm / res);
}

/// Everything the fingers travel over while closing: the jaw plus both
/// finger footprints.
inline Mask swept_region(const TrayScene& scene, const GraspCandidate& c, const FingerGeometry& fg) {
  const double res = scene.resolution_mm();
  return oriented_rect(scene.raster(), scene.geometry().interior, c.x, c.y, Frame2(c.theta),
                       (0.5 * c.w_mm + fg.clearance_mm + fg.width_mm) / res, 0.5 * fg.breadth_mm / res);
}

/// The jaw's breadth band extended across the whole tray along the closing axis.
inline Mask jaw_band(const TrayScene& scene, const GraspCandidate& c, const FingerGeometry& fg) {
  const auto r = scene.raster();
  return oriented_rect(r, scene.geometry().interior, c.x, c.y, Frame2(c.theta),
                       static_cast<double>(r.width + r.height), 0.5 * fg.breadth_mm / scene.resolution_mm());
}

/// Vertical insertion of both fingers to the candidate's height.
inline InsertionResult insert_fingers(const TrayScene& scene, const GraspCandidate& c, const FingerModel& fm,
                                      const ArchetypeLibrary& library) {
  fm.validate();
  const auto regions = finger_regions(scene, c, fm.geometry);
  const double h = c.h_mm;
  const double k = fm.stiffness();

  InsertionResult res;
  for (int side = 0; side < 2; ++side) {
    FingerInsertion& f = res.fingers[side];
    f.commanded_mm = h;
    f.achieved_bottom_mm = h;
    if (regions[side].empty()) {
      // Nothing but tray wall under the finger.
      f.out_of_tray = true;
      f.blocked = true;
      continue;
    }
    const auto stats = detail::region_stats(scene, regions[side], false);
    double obstruction = 0.0;
    std::size_t most = 0;
    for (const auto& [id, s] : stats) {
      obstruction = std::max(obstruction, s.max_mm - h);
      if (id != c.instance && s.max_mm > h && s.pixels > most) {
        most = s.pixels;
        f.resting_on = id;
      }
    }
    f.obstruction_mm = obstruction;
    f.settled_bottom_mm = h;
    if (fm.kind == FingerKind::Adaptive) {
      // Closing drags the sprung tip off edges it caught on; it settles on
      // the typical surface under it.
      std::vector<double> under;
      regions[side].for_each([&](int x, int y) { under.push_back(to_mm(scene.heightmap()(x, y))); });
      f.settled_bottom_mm = std::clamp(median(under), h, h + std::min(obstruction, fm.retraction_budget_mm));
    }

    if (fm.kind == FingerKind::Fixed) {
      for (const auto& [id, s] : stats) {
        const double pen = s.max_mm - h;
        if (!(pen > 0)) continue;
        const auto& arch = detail::archetype_of(scene, id, library);
        f.contacts.push_back({id, pen, 0.0, pen > arch.damage_tolerance_mm});
        if (pen > fm.pierce_block_mm) f.blocked = true;
      }
    } else {
      const double r = std::min(obstruction, fm.retraction_budget_mm);
      f.retraction_mm = r;
      f.achieved_bottom_mm = h + r;
      f.blocked = obstruction > fm.retraction_budget_mm;
      const double force = k * r;
      for (const auto& [id, s] : stats) {
        const double pen = s.max_mm - h;
        // Only pieces that reach the retracted tip are touching it.
        if (!(pen > 0) || pen < r) continue;
        const auto& arch = detail::archetype_of(scene, id, library);
        f.contacts.push_back({id, 0.0, force, force > arch.fragility_force_n});
      }
    }
  }
  return res;
}

/// Close the jaws and lift; decides which pieces come along and which are
/// scraped on the way.
inline GraspOutcome close_and_lift(const TrayScene& scene, const GraspCandidate& c, const InsertionResult& ins,
                                   const FingerModel& fm, const CaptureRules& rules,
                                   const ArchetypeLibrary& library) {
  rules.validate();
  GraspOutcome out;
  out.insertion = ins;

  std::map<PieceId, DamageEvent> damage;
  for (const auto& f : ins.fingers)
    for (const auto& ct : f.contacts)
      if (ct.damaged) {
        const double mag = fm.kind == FingerKind::Fixed ? ct.penetration_mm : ct.force_n;
        auto [it, fresh] = damage.try_emplace(ct.id, DamageEvent{ct.id, mag, DamageCause::Insertion});
        if (!fresh) it->second.magnitude = std::max(it->second.magnitude, mag);
      }

  const Mask jaw = jaw_region(scene, c, fm.geometry);
  const Mask band = jaw_band(scene, c, fm.geometry);
  const Mask swept = swept_region(scene, c, fm.geometry);
  const auto in_jaw = detail::region_stats(scene, jaw, true);
  const auto in_swept = detail::region_stats(scene, swept, true);
  const auto in_band = detail::region_stats(scene, band, false);
  const auto visible = detail::visible_pixel_counts(scene);
  const bool blocked = ins.blocked();
  const double bottom = ins.max_settled_mm();

  std::vector<PieceId> picked;
  if (!blocked) {
    if (auto it = in_jaw.find(c.instance); it != in_jaw.end()) {
      const auto band_it = in_band.find(c.instance);
      const double frac = static_cast<double>(it->second.pixels) / static_cast<double>(band_it->second.pixels);
      const double surface = median(it->second.heights);
      // A finger settling below the target surface grips it directly and
      // shoves lower neighbours aside. A finger left resting on a neighbour
      // pinches that neighbour against the target instead, which holds if
      // the neighbour fits between the jaws; both are lifted.
      std::vector<PieceId> pinched;
      bool held = frac >= rules.capture_fraction;
      for (const auto& f : ins.fingers) {
        if (!held) break;
        if (f.settled_bottom_mm <= surface - rules.grasp_depth_margin_mm) continue;
        const auto* p = f.resting_on ? scene.find(f.resting_on) : nullptr;
        held = p && p->stamp->pixel_count() <= jaw.count();
        if (held) pinched.push_back(f.resting_on);
      }
      if (held) {
        out.target_captured = true;
        picked.push_back(c.instance);
        picked.insert(picked.end(), pinched.begin(), pinched.end());
      }
    }
    for (const auto& [id, s] : in_jaw) {
      if (id == c.instance || std::find(picked.begin(), picked.end(), id) != picked.end()) continue;
      const double frac = static_cast<double>(s.pixels) / static_cast<double>(visible.at(id));
      if (frac >= rules.multi_pick_fraction && median(s.heights) > bottom) picked.push_back(id);
    }
  }
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());

  // Closure sweep: bystanders whose surface between the jaws stands above the
  // fingertips get scraped.
  const double k = fm.stiffness();
  for (const auto& [id, s] : in_swept) {
    if (id == c.instance || std::binary_search(picked.begin(), picked.end(), id)) continue;
    if (!(median(s.heights) > bottom)) continue;
    const double pen = s.max_mm - bottom;
    const auto& arch = detail::archetype_of(scene, id, library);
    double mag;
    bool hurt;
    if (fm.kind == FingerKind::Fixed) {
      mag = pen;
      hurt = pen > arch.damage_tolerance_mm;
    } else {
      mag = k * std::min(pen, fm.retraction_budget_mm);
      hurt = mag > arch.fragility_force_n;
    }
    if (hurt) damage.try_emplace(id, DamageEvent{id, mag, DamageCause::Closure});
  }

  out.picked = std::move(picked);
  for (auto& [id, ev] : damage) out.damaged.push_back(ev);
  if (out.picked.size() == 1)
    out.classification = GraspClass::SuccessSingle;
  else if (out.picked.size() >= 2)
    out.classification = GraspClass::SuccessMultiple;
  else
    out.classification = GraspClass::Failure;
  return out;
}

/// Insertion, closure, then removal of the picked pieces. Damaged pieces that
/// stay behind keep their damage flag.
inline GraspOutcome execute_grasp(TrayScene& scene, const GraspCandidate& c, const FingerModel& fm,
                                  const CaptureRules& rules, const ArchetypeLibrary& library) {
  const InsertionResult ins = insert_fingers(scene, c, fm, library);
  GraspOutcome out = close_and_lift(scene, c, ins, fm, rules, library);
  for (const auto& ev : out.damaged)
    if (auto* p = scene.find(ev.id)) {
      p->damaged = true;
      p->damage_magnitude = std::max(p->damage_magnitude, ev.magnitude);
    }
  if (!out.picked.empty()) scene.remove(out.picked);
  return out;
}

}  // namespace binpick
