#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "binpick/errors.hpp"
#include "binpick/experiment.hpp"
#include "binpick/perception.hpp"
#include "binpick/pgm.hpp"
#include "binpick/scene.hpp"
#include "binpick/serialize.hpp"

namespace binpick {

namespace fs = std::filesystem;

inline json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << text;
}

inline void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Height rasters: 16-bit, 0.01 mm per level
// ---------------------------------------------------------------------------

inline std::uint16_t height_level(double mm) {
  const double levels = std::round(mm / kMmPerHeightUnit);
  return static_cast<std::uint16_t>(std::clamp(levels, 0.0, 65535.0));
}

inline Grid<std::uint16_t> heights_to_levels(const Grid<Height>& h) {
  Grid<std::uint16_t> g(h.size());
  auto src = h.data();
  auto dst = g.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<std::uint16_t>(std::clamp<Height>(src[i], 0, 65535));
  return g;
}

inline void write_depth_pgm(const fs::path& path, const DepthImage& d) {
  Grid<std::uint16_t> g(d.raster());
  auto src = d.mm.data();
  auto dst = g.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = height_level(src[i]);
  pgm::write_file(path.string(), g);
}

inline DepthImage read_depth_pgm(const fs::path& path, double resolution_mm, PixelBox workspace = {}) {
  const auto g = pgm::read_file(path.string());
  DepthImage d;
  d.mm = Grid<float>(g.size());
  auto src = g.data();
  auto dst = d.mm.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i] * kMmPerHeightUnit);
  d.resolution_mm = resolution_mm;
  d.workspace = workspace.empty() ? PixelBox::of(g.size()) : workspace;
  d.quant_mm = kMmPerHeightUnit;
  return d;
}

inline json box_json(const PixelBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }
inline PixelBox box_from_json(const json& j) {
  const auto v = j.get<std::array<int, 4>>();
  return {v[0], v[1], v[2], v[3]};
}

// ---------------------------------------------------------------------------
// Scene files: <stem>.json + <stem>_height.pgm + <stem>_owner.pgm
// ---------------------------------------------------------------------------

inline json scene_to_json(const TrayScene& s, const std::string& height_file, const std::string& owner_file) {
  const auto& g = s.geometry();
  json pieces = json::array();
  for (const auto& p : s.pieces())
    pieces.push_back({{"id", p.id},
                      {"archetype", p.archetype},
                      {"x_mm", p.x_mm},
                      {"y_mm", p.y_mm},
                      {"rotation", p.rotation},
                      {"scale", p.scale},
                      {"rest_height_mm", to_mm(p.rest_height)},
                      {"shape",
                       {{"semi_major_mm", p.shape.semi_major_mm},
                        {"semi_minor_mm", p.shape.semi_minor_mm},
                        {"exponent", p.shape.exponent},
                        {"height_mm", p.shape.height_mm},
                        {"underside_mm", p.shape.underside_mm}}},
                      {"occluded", p.occluded},
                      {"damaged", p.damaged},
                      {"damage_magnitude", p.damage_magnitude}});
  return json{{"format", "binpick-scene"},
              {"version", 1},
              {"tray", {{"length_mm", g.dims.length_mm}, {"width_mm", g.dims.width_mm}, {"depth_mm", g.dims.depth_mm}}},
              {"raster", {{"width", g.raster.width}, {"height", g.raster.height}}},
              {"resolution_mm", g.resolution_mm},
              {"interior", box_json(g.interior)},
              {"seed", s.seed},
              {"randomization",
               {{"tray_rgb", s.randomization.tray_rgb},
                {"light_direction", s.randomization.light_direction},
                {"shadows", s.randomization.shadows}}},
              {"height_unit_mm", kMmPerHeightUnit},
              {"heightmap", height_file},
              {"owner_map", owner_file},
              {"pieces", pieces}};
}

/// Writes the scene document and its two rasters into `dir`. Returns the JSON path.
inline fs::path write_scene(const TrayScene& s, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  const std::string hf = stem + "_height.pgm";
  const std::string of = stem + "_owner.pgm";
  pgm::write_file((dir / hf).string(), heights_to_levels(s.heightmap()));
  Grid<std::uint16_t> owner(s.raster());
  std::copy(s.owner_map().data().begin(), s.owner_map().data().end(), owner.data().begin());
  pgm::write_file((dir / of).string(), owner);
  const fs::path jp = dir / (stem + ".json");
  write_json_file(jp, scene_to_json(s, hf, of));
  return jp;
}

/// Loads a scene document. Piece stamps are re-rasterized from their recorded
/// shapes; the rasters on disk must agree with the recomposed registry.
inline TrayScene read_scene(const fs::path& json_path) {
  const json j = read_json_file(json_path);
  detail::Fields f(j, json_path.filename().string());
  if (f.get<std::string>("format") != "binpick-scene") throw FormatError("not a binpick scene document");
  if (f.get<int>("version") != 1) throw FormatError("unsupported scene version");

  TrayGeometry g;
  {
    detail::Fields t(f.sub("tray"), "tray");
    g.dims = {t.get<double>("length_mm"), t.get<double>("width_mm"), t.get<double>("depth_mm")};
    t.finish();
    detail::Fields r(f.sub("raster"), "raster");
    g.raster = {r.get<int>("width"), r.get<int>("height")};
    r.finish();
  }
  g.resolution_mm = f.get<double>("resolution_mm");
  g.interior = box_from_json(f.sub("interior"));
  TrayScene s(g);
  s.seed = f.get<std::uint64_t>("seed");
  {
    detail::Fields r(f.sub("randomization"), "randomization");
    s.randomization.tray_rgb = r.get<std::array<int, 3>>("tray_rgb");
    s.randomization.light_direction = r.get<std::array<double, 3>>("light_direction");
    s.randomization.shadows = r.get<bool>("shadows");
    r.finish();
  }
  if (f.get<double>("height_unit_mm") != kMmPerHeightUnit) throw FormatError("unsupported height unit");

  for (const auto& pj : f.sub("pieces")) {
    detail::Fields p(pj, "piece");
    PieceInstance inst;
    inst.id = p.get<PieceId>("id");
    inst.archetype = p.get<std::string>("archetype");
    inst.x_mm = p.get<double>("x_mm");
    inst.y_mm = p.get<double>("y_mm");
    inst.rotation = p.get<double>("rotation");
    inst.scale = p.get<double>("scale");
    inst.rest_height = from_mm(p.get<double>("rest_height_mm"));
    {
      detail::Fields sh(p.sub("shape"), "piece.shape");
      inst.shape = {sh.get<double>("semi_major_mm"), sh.get<double>("semi_minor_mm"), sh.get<double>("exponent"),
                    sh.get<double>("height_mm"), sh.get<double>("underside_mm")};
      sh.finish();
    }
    p.opt("occluded", inst.occluded);
    p.opt("damaged", inst.damaged);
    p.opt("damage_magnitude", inst.damage_magnitude);
    p.finish();
    auto stamp = rasterize_stamp(inst.shape, inst.rotation, g.resolution_mm);
    stamp.scale = inst.scale;
    inst.stamp = std::make_shared<const PieceStamp>(std::move(stamp));
    s.restore(std::move(inst));
  }
  s.recompose();

  const fs::path dir = json_path.parent_path();
  const auto hl = pgm::read_file((dir / f.get<std::string>("heightmap")).string());
  const auto ol = pgm::read_file((dir / f.get<std::string>("owner_map")).string());
  f.finish();
  if (hl != heights_to_levels(s.heightmap())) throw FormatError("heightmap raster disagrees with the piece registry");
  Grid<std::uint16_t> owner(s.raster());
  std::copy(s.owner_map().data().begin(), s.owner_map().data().end(), owner.data().begin());
  if (ol != owner) throw FormatError("owner map raster disagrees with the piece registry");
  return s;
}

// ---------------------------------------------------------------------------
// Mask manifests
// ---------------------------------------------------------------------------

struct MaskManifestInfo {
  double resolution_mm = 424.0 / 600.0;
  PixelBox workspace;
};

inline bool pairwise_disjoint(const InstanceMaskSet& s) {
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (!s.masks[i].mask.box().intersect(s.masks[j].mask.box()).empty() &&
          intersection_count(s.masks[i].mask, s.masks[j].mask) > 0)
        return false;
  return true;
}

/// Disjoint sets are written as one 16-bit id map, overlapping ones as one
/// 8-bit PGM per instance. Returns the manifest path.
inline fs::path write_masks(const InstanceMaskSet& s, const fs::path& dir, const std::string& stem,
                            const MaskManifestInfo& info) {
  fs::create_directories(dir);
  json j{{"format", "binpick-masks"},
         {"version", 1},
         {"source", to_string(s.source)},
         {"width", s.raster.width},
         {"height", s.raster.height},
         {"resolution_mm", info.resolution_mm},
         {"workspace", box_json(info.workspace.empty() ? PixelBox::of(s.raster) : info.workspace)}};
  json ids = json::array();
  for (const auto& m : s.masks) ids.push_back(m.id);
  j["ids"] = ids;
  j["occluded"] = s.occluded;
  if (pairwise_disjoint(s)) {
    Grid<std::uint16_t> idmap(s.raster, 0);
    for (const auto& m : s.masks) m.mask.for_each([&](int x, int y) { idmap(x, y) = m.id; });
    const std::string file = stem + "_ids.pgm";
    pgm::write_file((dir / file).string(), idmap);
    j["encoding"] = "id_map";
    j["id_map"] = file;
  } else {
    json files = json::array();
    for (std::size_t i = 0; i < s.size(); ++i) {
      Grid<std::uint16_t> g(s.raster, 0);
      s.masks[i].mask.for_each([&](int x, int y) { g(x, y) = 255; });
      const std::string file = stem + "_" + std::to_string(i) + "_id" + std::to_string(s.masks[i].id) + ".pgm";
      pgm::write_file((dir / file).string(), g, 255);
      files.push_back({{"id", s.masks[i].id}, {"file", file}});
    }
    j["encoding"] = "per_instance";
    j["masks"] = files;
  }
  const fs::path jp = dir / (stem + ".json");
  write_json_file(jp, j);
  return jp;
}

struct LoadedMasks {
  InstanceMaskSet set;
  MaskManifestInfo info;
};

inline LoadedMasks read_masks(const fs::path& manifest) {
  const json j = read_json_file(manifest);
  detail::Fields f(j, manifest.filename().string());
  if (f.get<std::string>("format") != "binpick-masks") throw FormatError("not a binpick mask manifest");
  if (f.get<int>("version") != 1) throw FormatError("unsupported mask manifest version");
  LoadedMasks out;
  out.set.source = detail::enum_field(f, "source", MaskSource::External, mask_source_from_string);
  out.set.raster = {f.get<int>("width"), f.get<int>("height")};
  f.opt("resolution_mm", out.info.resolution_mm);
  out.info.workspace = f.has("workspace") ? box_from_json(f.sub("workspace")) : PixelBox::of(out.set.raster);
  const auto ids = f.get<std::vector<PieceId>>("ids");
  f.opt("occluded", out.set.occluded);
  const auto encoding = f.get<std::string>("encoding");
  const fs::path dir = manifest.parent_path();

  auto check_dims = [&](const Grid<std::uint16_t>& g) {
    if (g.size() != out.set.raster) throw FormatError("mask raster dims disagree with the manifest");
  };
  if (encoding == "id_map") {
    const auto g = pgm::read_file((dir / f.get<std::string>("id_map")).string());
    check_dims(g);
    for (PieceId id : ids) {
      if (id == 0) throw FormatError("id 0 is reserved for background");
      Mask m = Mask::from_predicate(out.set.raster, PixelBox::of(out.set.raster),
                                    [&](int x, int y) { return g(x, y) == id; });
      out.set.masks.push_back({id, std::move(m)});
    }
  } else if (encoding == "per_instance") {
    for (const auto& mj : f.sub("masks")) {
      detail::Fields mf(mj, "mask");
      const auto id = mf.get<PieceId>("id");
      const auto g = pgm::read_file((dir / mf.get<std::string>("file")).string());
      mf.finish();
      check_dims(g);
      out.set.masks.push_back({id, Mask::from_predicate(out.set.raster, PixelBox::of(out.set.raster),
                                                        [&](int x, int y) { return g(x, y) != 0; })});
    }
  } else {
    throw FormatError("unknown mask encoding '" + encoding + "'");
  }
  f.finish();
  return out;
}

// ---------------------------------------------------------------------------
// Campaign outputs
// ---------------------------------------------------------------------------

inline std::string records_jsonl(std::span<const TrialRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<TrialRecord> read_records_jsonl(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trial_record_from_json(json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return out;
}

inline std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string summary_csv_header() {
  return "condition,archetype,finger,filtering,n_attempts,success_single_rate,success_incl_multiple_rate,"
         "multi_pick_rate,damaged_piece_total,no_target_count";
}

inline std::string summary_csv_row(const ExperimentConfig& c, const SummaryStats& s) {
  std::ostringstream os;
  os << c.describe() << ',' << c.archetype() << ',' << to_string(c.finger.kind) << ','
     << (c.filtering ? "on" : "off") << ',' << s.n_attempts << ',' << format_rate(s.success_single_rate) << ','
     << format_rate(s.success_incl_multiple_rate) << ',' << format_rate(s.multi_pick_rate) << ','
     << s.damaged_piece_total << ',' << s.no_target_count;
  return os.str();
}

inline std::string comparison_csv(const Comparison& cmp) {
  std::ostringstream os;
  os << summary_csv_header()
     << ",delta_success_single_rate,delta_success_incl_multiple_rate,delta_multi_pick_rate,"
        "delta_damaged_piece_total,delta_no_target_count\n";
  for (std::size_t i = 0; i < cmp.conditions.size(); ++i) {
    const auto& c = cmp.conditions[i];
    const auto d = cmp.delta(i);
    os << summary_csv_row(c.config, c.result.summary) << ',' << format_rate(d.success_single_rate) << ','
       << format_rate(d.success_incl_multiple_rate) << ',' << format_rate(d.multi_pick_rate) << ','
       << d.damaged_piece_total << ',' << d.no_target_count << '\n';
  }
  return os.str();
}

/// records.jsonl + summary.csv (+ config.json) under cfg.output_dir.
inline void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& res) {
  if (cfg.output_dir.empty()) return;
  const fs::path dir(cfg.output_dir);
  write_text_file(dir / "records.jsonl", records_jsonl(res.records));
  write_text_file(dir / "summary.csv", summary_csv_header() + "\n" + summary_csv_row(cfg, res.summary) + "\n");
  write_json_file(dir / "config.json", to_json(cfg));
}

}  // namespace binpick
