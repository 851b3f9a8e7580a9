#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "binpick/archetype.hpp"
#include "binpick/errors.hpp"
#include "binpick/experiment.hpp"
#include "binpick/graspsim.hpp"
#include "binpick/perception.hpp"
#include "binpick/planner.hpp"
#include "binpick/scene.hpp"

namespace binpick {

using json = nlohmann::ordered_json;

namespace detail {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw FormatError(where_ + ": expected a JSON object");
  }
  ~Fields() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const std::string& key) {
    if (!has(key)) throw FormatError(where_ + ": missing '" + key + "'");
    return convert<T>(key);
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    if (has(key)) out = convert<T>(key);
  }

  const json& sub(const std::string& key) {
    if (!has(key)) throw FormatError(where_ + ": missing '" + key + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  /// Throws if the object carries keys that were never looked at.
  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw FormatError(where_ + ": unknown key '" + k + "'");
  }

 private:
  template <typename T>
  T convert(const std::string& key) {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where_ + "." + key + ": " + e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename E, typename F>
E enum_field(Fields& f, const std::string& key, E fallback, F&& parse) {
  if (!f.has(key)) return fallback;
  try {
    return parse(f.get<std::string>(key));
  } catch (const ParameterError& e) {
    throw FormatError(f.path(key) + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Archetypes
// ---------------------------------------------------------------------------

inline json to_json(const FoodArchetype& a) {
  return json{{"name", a.name},
              {"footprint",
               {{"semi_major_mm", a.footprint.semi_major_mm},
                {"semi_minor_mm", a.footprint.semi_minor_mm},
                {"exponent", a.footprint.exponent},
                {"jitter", a.footprint.jitter}}},
              {"dome_ratio", a.dome_ratio},
              {"underside_fraction", a.underside_fraction},
              {"scale_range", a.scale_range},
              {"count_range", a.count_range},
              {"hardness", to_string(a.hardness)},
              {"fragility_force_n", a.fragility_force_n},
              {"damage_tolerance_mm", a.damage_tolerance_mm},
              {"grasp_height_offset_mm", a.grasp_height_offset_mm}};
}

inline FoodArchetype archetype_from_json(const json& j) {
  detail::Fields f(j, "archetype");
  FoodArchetype a;
  a.name = f.get<std::string>("name");
  {
    detail::Fields fp(f.sub("footprint"), "archetype " + a.name + ".footprint");
    a.footprint.semi_major_mm = fp.get<double>("semi_major_mm");
    a.footprint.semi_minor_mm = fp.get<double>("semi_minor_mm");
    fp.opt("exponent", a.footprint.exponent);
    fp.opt("jitter", a.footprint.jitter);
    fp.finish();
  }
  f.opt("dome_ratio", a.dome_ratio);
  f.opt("underside_fraction", a.underside_fraction);
  f.opt("scale_range", a.scale_range);
  f.opt("count_range", a.count_range);
  a.hardness = detail::enum_field(f, "hardness", a.hardness, hardness_from_string);
  f.opt("fragility_force_n", a.fragility_force_n);
  f.opt("damage_tolerance_mm", a.damage_tolerance_mm);
  f.opt("grasp_height_offset_mm", a.grasp_height_offset_mm);
  f.finish();
  try {
    a.validate();
  } catch (const ParameterError& e) {
    throw FormatError(e.what());
  }
  return a;
}

inline json to_json(const ArchetypeLibrary& lib) {
  json arr = json::array();
  for (const auto& [_, a] : lib) arr.push_back(to_json(a));
  return json{{"archetypes", arr}};
}

inline ArchetypeLibrary archetype_library_from_json(const json& j) {
  detail::Fields f(j, "archetype library");
  const json& arr = f.sub("archetypes");
  f.finish();
  if (!arr.is_array()) throw FormatError("archetype library: 'archetypes' must be an array");
  ArchetypeLibrary lib;
  for (const auto& a : arr) lib.add(archetype_from_json(a));
  return lib;
}

// ---------------------------------------------------------------------------
// Plans and outcomes
// ---------------------------------------------------------------------------

inline json to_json(const EllipseFit& e) {
  return json{{"x", e.x}, {"y", e.y}, {"theta", e.theta}, {"minor", e.minor}, {"major", e.major}};
}

inline EllipseFit ellipse_from_json(const json& j) {
  detail::Fields f(j, "ellipse");
  EllipseFit e{f.get<double>("x"), f.get<double>("y"), f.get<double>("theta"), f.get<double>("minor"),
               f.get<double>("major")};
  f.finish();
  return e;
}

inline json to_json(const GraspCandidate& c) {
  json j{{"instance", c.instance}, {"x", c.x},           {"y", c.y},
         {"theta", c.theta},       {"h_mm", c.h_mm},     {"w_mm", c.w_mm},
         {"food_median_mm", c.food_median_mm}};
  j["contact_medians_mm"] = c.contact_medians_mm ? json(*c.contact_medians_mm) : json(nullptr);
  j["verdict"] = to_string(c.verdict);
  j["fit"] = to_json(c.fit);
  return j;
}

inline GraspCandidate candidate_from_json(const json& j) {
  detail::Fields f(j, "candidate");
  GraspCandidate c;
  c.instance = f.get<PieceId>("instance");
  c.x = f.get<double>("x");
  c.y = f.get<double>("y");
  c.theta = f.get<double>("theta");
  c.h_mm = f.get<double>("h_mm");
  c.w_mm = f.get<double>("w_mm");
  c.food_median_mm = f.get<double>("food_median_mm");
  if (f.has("contact_medians_mm")) c.contact_medians_mm = f.get<std::array<double, 2>>("contact_medians_mm");
  c.verdict = detail::enum_field(f, "verdict", FilterVerdict::Pending, filter_verdict_from_string);
  if (f.has("fit")) c.fit = ellipse_from_json(f.sub("fit"));
  f.finish();
  if (!(c.w_mm > 0) || c.h_mm < 0) throw FormatError("candidate: need w > 0 and h >= 0");
  return c;
}

inline json to_json(const Plan& p, const std::string& archetype, bool filtering, double resolution_mm) {
  json cands = json::array();
  for (const auto& c : p.candidates) cands.push_back(to_json(c));
  json skipped = json::array();
  for (const auto& s : p.skipped) skipped.push_back({{"instance", s.instance}, {"reason", s.reason}});
  json j{{"archetype", archetype},
         {"filtering", filtering},
         {"resolution_mm", resolution_mm},
         {"candidates", cands},
         {"skipped", skipped}};
  j["target"] = p.target ? json(*p.target) : json(nullptr);
  j["target_candidate"] = p.target ? to_json(p.candidates[*p.target]) : json(nullptr);
  return j;
}

/// The selected target of a plan document, if any.
inline std::optional<GraspCandidate> plan_target_from_json(const json& j) {
  if (!j.is_object() || !j.contains("target_candidate")) throw FormatError("plan: missing 'target_candidate'");
  const json& t = j.at("target_candidate");
  if (t.is_null()) return std::nullopt;
  return candidate_from_json(t);
}

inline json to_json(const GraspOutcome& o) {
  json fingers = json::array();
  for (const auto& f : o.insertion.fingers) {
    json contacts = json::array();
    for (const auto& c : f.contacts)
      contacts.push_back({{"id", c.id},
                          {"penetration_mm", c.penetration_mm},
                          {"force_n", c.force_n},
                          {"damaged", c.damaged}});
    fingers.push_back({{"commanded_mm", f.commanded_mm},
                       {"achieved_bottom_mm", f.achieved_bottom_mm},
                       {"obstruction_mm", f.obstruction_mm},
                       {"retraction_mm", f.retraction_mm},
                       {"settled_bottom_mm", f.settled_bottom_mm},
                       {"resting_on", f.resting_on},
                       {"blocked", f.blocked},
                       {"out_of_tray", f.out_of_tray},
                       {"contacts", contacts}});
  }
  json damaged = json::array();
  for (const auto& d : o.damaged)
    damaged.push_back({{"id", d.id},
                       {"magnitude", d.magnitude},
                       {"cause", d.cause == DamageCause::Insertion ? "insertion" : "closure"}});
  return json{{"classification", to_string(o.classification)},
              {"picked", o.picked},
              {"damaged", damaged},
              {"target_captured", o.target_captured},
              {"insertion", {{"fingers", fingers}}}};
}

// ---------------------------------------------------------------------------
// Trial records and summaries
// ---------------------------------------------------------------------------

inline json to_json(const TrialRecord& r) {
  json j{{"attempt", r.attempt},
         {"seed", r.seed},
         {"scene_seed", r.scene_seed},
         {"pieces_before", r.pieces_before},
         {"candidate_count", r.candidate_count},
         {"filtered_count", r.filtered_count}};
  j["target"] = r.target ? json(*r.target) : json(nullptr);
  j["outcome"] = to_string(r.outcome);
  j["reason"] = r.reason;
  j["picked_count"] = r.picked.size();
  j["picked"] = r.picked;
  j["damaged"] = r.damaged;
  return j;
}

inline TrialRecord trial_record_from_json(const json& j) {
  detail::Fields f(j, "trial record");
  TrialRecord r;
  r.attempt = f.get<int>("attempt");
  r.seed = f.get<std::uint64_t>("seed");
  r.scene_seed = f.get<std::uint64_t>("scene_seed");
  r.pieces_before = f.get<std::size_t>("pieces_before");
  r.candidate_count = f.get<std::size_t>("candidate_count");
  r.filtered_count = f.get<std::size_t>("filtered_count");
  if (f.has("target")) r.target = f.get<PieceId>("target");
  r.outcome = detail::enum_field(f, "outcome", GraspClass::Failure, grasp_class_from_string);
  f.opt("reason", r.reason);
  f.has("picked_count");
  f.opt("picked", r.picked);
  f.opt("damaged", r.damaged);
  f.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

inline json to_json(const ExperimentConfig& c) {
  json scene{{"tray",
              {{"length_mm", c.scene.tray.length_mm},
               {"width_mm", c.scene.tray.width_mm},
               {"depth_mm", c.scene.tray.depth_mm}}},
             {"image_px", c.scene.image_px},
             {"max_placement_retries", c.scene.max_placement_retries}};
  if (c.scene.count_range) scene["count_range"] = *c.scene.count_range;
  if (c.scene.scale_range) scene["scale_range"] = *c.scene.scale_range;
  return json{{"label", c.label},
              {"archetype", c.scene.archetype},
              {"finger", to_string(c.finger.kind)},
              {"filtering", c.filtering},
              {"n_attempts", c.n_attempts},
              {"refill", to_string(c.refill)},
              {"base_seed", c.base_seed},
              {"output_dir", c.output_dir},
              {"depth", {{"sigma_mm", c.depth.sigma_mm}, {"quant_mm", c.depth.quant_mm}}},
              {"corruption",
               {{"boundary_jitter_px", c.corruption.boundary_jitter_px},
                {"merge_prob", c.corruption.merge_prob},
                {"drop_prob", c.corruption.drop_prob},
                {"confidence_floor", c.corruption.confidence_floor}}},
              {"finger_geometry",
               {{"width_mm", c.finger.geometry.width_mm},
                {"breadth_mm", c.finger.geometry.breadth_mm},
                {"clearance_mm", c.finger.geometry.clearance_mm}}},
              {"adaptive",
               {{"retraction_budget_mm", c.finger.retraction_budget_mm}, {"max_force_n", c.finger.max_force_n}}},
              {"fixed", {{"pierce_block_mm", c.finger.pierce_block_mm}}},
              {"capture",
               {{"capture_fraction", c.capture.capture_fraction},
                {"multi_pick_fraction", c.capture.multi_pick_fraction},
                {"grasp_depth_margin_mm", c.capture.grasp_depth_margin_mm}}},
              {"scene", scene}};
}

/// Apply the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_config_json(ExperimentConfig& c, const json& j, const std::string& where = "config") {
  detail::Fields f(j, where);
  f.opt("label", c.label);
  f.opt("archetype", c.scene.archetype);
  c.finger.kind = detail::enum_field(f, "finger", c.finger.kind, finger_kind_from_string);
  f.opt("filtering", c.filtering);
  f.opt("n_attempts", c.n_attempts);
  c.refill = detail::enum_field(f, "refill", c.refill, refill_policy_from_string);
  f.opt("base_seed", c.base_seed);
  f.opt("output_dir", c.output_dir);
  if (f.has("depth")) {
    detail::Fields d(f.sub("depth"), where + ".depth");
    d.opt("sigma_mm", c.depth.sigma_mm);
    d.opt("quant_mm", c.depth.quant_mm);
    d.finish();
  }
  if (f.has("corruption")) {
    detail::Fields d(f.sub("corruption"), where + ".corruption");
    d.opt("boundary_jitter_px", c.corruption.boundary_jitter_px);
    d.opt("merge_prob", c.corruption.merge_prob);
    d.opt("drop_prob", c.corruption.drop_prob);
    d.opt("confidence_floor", c.corruption.confidence_floor);
    d.finish();
  }
  if (f.has("finger_geometry")) {
    detail::Fields d(f.sub("finger_geometry"), where + ".finger_geometry");
    d.opt("width_mm", c.finger.geometry.width_mm);
    d.opt("breadth_mm", c.finger.geometry.breadth_mm);
    d.opt("clearance_mm", c.finger.geometry.clearance_mm);
    d.finish();
  }
  if (f.has("adaptive")) {
    detail::Fields d(f.sub("adaptive"), where + ".adaptive");
    d.opt("retraction_budget_mm", c.finger.retraction_budget_mm);
    d.opt("max_force_n", c.finger.max_force_n);
    d.finish();
  }
  if (f.has("fixed")) {
    detail::Fields d(f.sub("fixed"), where + ".fixed");
    d.opt("pierce_block_mm", c.finger.pierce_block_mm);
    d.finish();
  }
  if (f.has("capture")) {
    detail::Fields d(f.sub("capture"), where + ".capture");
    d.opt("capture_fraction", c.capture.capture_fraction);
    d.opt("multi_pick_fraction", c.capture.multi_pick_fraction);
    d.opt("grasp_depth_margin_mm", c.capture.grasp_depth_margin_mm);
    d.finish();
  }
  if (f.has("scene")) {
    detail::Fields d(f.sub("scene"), where + ".scene");
    if (d.has("tray")) {
      detail::Fields t(d.sub("tray"), where + ".scene.tray");
      t.opt("length_mm", c.scene.tray.length_mm);
      t.opt("width_mm", c.scene.tray.width_mm);
      t.opt("depth_mm", c.scene.tray.depth_mm);
      t.finish();
    }
    d.opt("image_px", c.scene.image_px);
    d.opt("max_placement_retries", c.scene.max_placement_retries);
    if (d.has("count_range")) c.scene.count_range = d.get<std::array<int, 2>>("count_range");
    if (d.has("scale_range")) c.scene.scale_range = d.get<std::array<double, 2>>("scale_range");
    d.finish();
  }
  // Keys consumed by the CLI layer.
  f.has("archetype_library");
  f.has("conditions");
  f.has("jobs");
  f.finish();
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  apply_config_json(c, j);
  return c;
}

/// A comparison document: the base config plus a "conditions" array of
/// partial overrides. Without "conditions" the standard finger x filtering
/// grid is used.
inline std::vector<ExperimentConfig> comparison_configs_from_json(const json& j) {
  const ExperimentConfig base = experiment_config_from_json(j);
  if (!j.contains("conditions")) return finger_filter_grid(base);
  const json& conds = j.at("conditions");
  if (!conds.is_array()) throw FormatError("config.conditions must be an array");
  std::vector<ExperimentConfig> out;
  for (std::size_t i = 0; i < conds.size(); ++i) {
    ExperimentConfig c = base;
    c.label.clear();
    apply_config_json(c, conds[i], "config.conditions[" + std::to_string(i) + "]");
    if (c.label.empty()) c.label = c.describe();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace binpick
