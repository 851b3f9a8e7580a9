#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

#include "binpick/errors.hpp"
#include "binpick/grid.hpp"
#include "binpick/mask.hpp"
#include "binpick/rng.hpp"
#include "binpick/scene.hpp"

namespace binpick {

// ---------------------------------------------------------------------------
// Depth
// ---------------------------------------------------------------------------

/// Orthographic top-down height image (mm above the tray floor).
struct DepthImage {
  Grid<float> mm;
  double resolution_mm = 424.0 / 600.0;
  PixelBox workspace;  ///< usable region; finger regions are clipped to it
  double sigma_mm = 0.0;
  double quant_mm = 0.0;

  RasterSize raster() const { return mm.size(); }

  static DepthImage from_heightmap(const Grid<Height>& h, double resolution_mm, PixelBox workspace) {
    DepthImage d;
    d.mm = Grid<float>(h.size());
    auto src = h.data();
    auto dst = d.mm.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(to_mm(src[i]));
    d.resolution_mm = resolution_mm;
    d.workspace = workspace;
    return d;
  }
};

/// Round to the nearest multiple of `step`, ties toward -infinity.
inline double quantize_half_down(double v, double step) {
  if (step <= 0) return v;
  return step * std::ceil(v / step - 0.5);
}

inline DepthImage render_depth(const TrayScene& scene, double sigma_mm, double quant_mm, Rng& rng) {
  if (!(sigma_mm >= 0) || !(quant_mm >= 0)) throw ParameterError("depth noise parameters must be >= 0");
  DepthImage d = DepthImage::from_heightmap(scene.heightmap(), scene.resolution_mm(),
                                            scene.geometry().interior);
  d.sigma_mm = sigma_mm;
  d.quant_mm = quant_mm;
  if (sigma_mm == 0 && quant_mm == 0) return d;

  std::normal_distribution<double> noise(0.0, sigma_mm > 0 ? sigma_mm : 1.0);
  for (float& v : d.mm.data()) {
    double x = v;
    if (sigma_mm > 0) x += noise(rng);
    x = std::max(0.0, x);
    v = static_cast<float>(quantize_half_down(x, quant_mm));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Instance masks
// ---------------------------------------------------------------------------

enum class MaskSource { GroundTruth, Corrupted, External };

inline std::string_view to_string(MaskSource s) {
  switch (s) {
    case MaskSource::GroundTruth: return "ground_truth";
    case MaskSource::Corrupted: return "corrupted";
    case MaskSource::External: return "external";
  }
  return "external";
}

inline MaskSource mask_source_from_string(std::string_view s) {
  if (s == "ground_truth") return MaskSource::GroundTruth;
  if (s == "corrupted") return MaskSource::Corrupted;
  if (s == "external") return MaskSource::External;
  throw ParameterError("unknown mask source '" + std::string(s) + "'");
}

struct InstanceMask {
  PieceId id = 0;
  Mask mask;
};

struct InstanceMaskSet {
  RasterSize raster;
  MaskSource source = MaskSource::GroundTruth;
  std::vector<InstanceMask> masks;
  std::vector<PieceId> occluded;  ///< registered pieces with no visible pixel

  std::size_t size() const { return masks.size(); }
  bool empty() const { return masks.empty(); }

  const InstanceMask* find(PieceId id) const {
    for (const auto& m : masks)
      if (m.id == id) return &m;
    return nullptr;
  }
};

/// Visible-region mask per piece, read off the owner map.
inline InstanceMaskSet render_masks(const TrayScene& scene) {
  const auto& owner = scene.owner_map();
  InstanceMaskSet set;
  set.raster = owner.size();
  set.source = MaskSource::GroundTruth;

  const std::size_t nid = static_cast<std::size_t>(scene.next_id()) + 1;
  std::vector<PixelBox> boxes(nid);
  for (int y = 0; y < owner.height(); ++y) {
    auto row = owner.row(y);
    for (int x = 0; x < owner.width(); ++x) {
      const PieceId id = row[x];
      if (id == 0) continue;
      boxes[id] = boxes[id].unite(PixelBox{x, y, x + 1, y + 1});
    }
  }
  for (const auto& p : scene.pieces()) {
    const PixelBox& b = boxes[p.id];
    if (b.empty()) {
      set.occluded.push_back(p.id);
      continue;
    }
    Mask m(set.raster, b);
    for (int y = b.y0; y < b.y1; ++y)
      for (int x = b.x0; x < b.x1; ++x)
        if (owner(x, y) == p.id) m.set(x, y);
    set.masks.push_back({p.id, std::move(m)});
  }
  return set;
}

struct CorruptionParams {
  int boundary_jitter_px = 0;    ///< each mask dilated/eroded by U{-j..j}
  double merge_prob = 0.0;       ///< per touching pair
  double drop_prob = 0.0;        ///< per mask
  double confidence_floor = 0.0; ///< masks whose best IoU against the input falls below are dropped

  bool is_identity() const {
    return boundary_jitter_px == 0 && merge_prob <= 0 && drop_prob <= 0 && confidence_floor <= 0;
  }
};

namespace detail {
struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};
}  // namespace detail

/// Emulated segmentation error: boundary jitter, then merging of touching
/// instances, then dropped detections, then the confidence cut. A merged mask
/// keeps the lowest member id.
inline InstanceMaskSet corrupt_masks(const InstanceMaskSet& masks, const CorruptionParams& params,
                                     Rng& rng) {
  if (masks.source != MaskSource::GroundTruth)
    throw ParameterError("corrupt_masks expects ground-truth masks");
  if (params.boundary_jitter_px < 0) throw ParameterError("boundary jitter must be >= 0");

  InstanceMaskSet out;
  out.raster = masks.raster;
  out.source = MaskSource::Corrupted;
  out.occluded = masks.occluded;

  std::vector<InstanceMask> work;
  work.reserve(masks.size());
  for (const auto& m : masks.masks) {
    int k = 0;
    if (params.boundary_jitter_px > 0)
      k = uniform_int(rng, -params.boundary_jitter_px, params.boundary_jitter_px);
    work.push_back({m.id, k > 0 ? dilate(m.mask, k) : erode(m.mask, -k)});
  }

  detail::DisjointSets sets(work.size());
  if (params.merge_prob > 0) {
    for (std::size_t i = 0; i < work.size(); ++i)
      for (std::size_t j = i + 1; j < work.size(); ++j)
        if (touches(work[i].mask, work[j].mask) && bernoulli(rng, params.merge_prob))
          sets.unite(i, j);
  }

  std::vector<InstanceMask> merged;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (sets.find(i) != i) continue;
    InstanceMask acc = work[i];
    for (std::size_t j = i + 1; j < work.size(); ++j)
      if (sets.find(j) == i) {
        acc.mask = mask_union(acc.mask, work[j].mask);
        acc.id = std::min(acc.id, work[j].id);
      }
    merged.push_back(std::move(acc));
  }

  for (auto& m : merged) {
    if (bernoulli(rng, params.drop_prob)) continue;
    if (m.mask.empty()) continue;
    if (params.confidence_floor > 0) {
      double best = 0.0;
      for (const auto& g : masks.masks) best = std::max(best, mask_iou(m.mask, g.mask));
      if (best < params.confidence_floor) continue;
    }
    out.masks.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

inline std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

struct AgreementScore {
  double value = 0.0;
  std::vector<double> iou_thresholds;
  std::vector<double> precision;  ///< one per threshold
};

/// Threshold-averaged precision of `pred` against `gt`. At each threshold the
/// pairs are matched one-to-one greedily in descending IoU (ties: lower pred
/// id, then lower gt id) and precision is matches / |pred|.
inline AgreementScore agreement(const InstanceMaskSet& pred, const InstanceMaskSet& gt,
                                std::vector<double> thresholds = default_iou_thresholds()) {
  if (pred.raster != gt.raster) throw ParameterError("mask sets have different raster dims");
  if (thresholds.empty()) throw ParameterError("need at least one IoU threshold");

  struct Pair {
    double iou;
    PieceId pred_id, gt_id;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const auto& a = pred.masks[i].mask;
      const auto& b = gt.masks[j].mask;
      if (a.box().intersect(b.box()).empty()) continue;
      const double iou = mask_iou(a, b);
      if (iou > 0) pairs.push_back({iou, pred.masks[i].id, gt.masks[j].id, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) {
    if (l.iou != r.iou) return l.iou > r.iou;
    if (l.pred_id != r.pred_id) return l.pred_id < r.pred_id;
    return l.gt_id < r.gt_id;
  });

  AgreementScore score;
  score.iou_thresholds = thresholds;
  for (double t : thresholds) {
    double precision;
    if (pred.empty()) {
      precision = gt.empty() ? 1.0 : 0.0;
    } else {
      std::vector<std::uint8_t> used_p(pred.size(), 0), used_g(gt.size(), 0);
      std::size_t matches = 0;
      for (const auto& pr : pairs) {
        if (pr.iou < t) break;
        if (used_p[pr.p] || used_g[pr.g]) continue;
        used_p[pr.p] = used_g[pr.g] = 1;
        ++matches;
      }
      precision = static_cast<double>(matches) / static_cast<double>(pred.size());
    }
    score.precision.push_back(precision);
  }
  score.value = std::accumulate(score.precision.begin(), score.precision.end(), 0.0) /
                static_cast<double>(thresholds.size());
  return score;
}

}  // namespace binpick
