#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "binpick/errors.hpp"

namespace binpick {

enum class Hardness { Soft, Hard, VeryHard };

inline std::string_view to_string(Hardness h) {
  switch (h) {
    case Hardness::Soft: return "soft";
    case Hardness::Hard: return "hard";
    case Hardness::VeryHard: return "very_hard";
  }
  return "soft";
}

inline Hardness hardness_from_string(std::string_view s) {
  if (s == "soft") return Hardness::Soft;
  if (s == "hard") return Hardness::Hard;
  if (s == "very_hard") return Hardness::VeryHard;
  throw ParameterError("unknown hardness '" + std::string(s) + "'");
}

/// Superellipse footprint |u/a|^n + |v/b|^n <= 1 in the piece frame.
struct Footprint {
  double semi_major_mm = 15.0;  ///< a, along the piece's long axis
  double semi_minor_mm = 15.0;  ///< b
  double exponent = 2.0;        ///< n; 2 is an ellipse, larger is boxier
  double jitter = 0.0;          ///< per-piece relative jitter of a, b and the dome
};

/// Procedural shape and handling parameters for one kind of food.
///
/// A piece is a lens: its top surface rises from the rim to `dome_ratio` times
/// the mean footprint radius, and `underside_fraction` of that height lies
/// below the rim (the curved underside the piece rests on).
struct FoodArchetype {
  std::string name;
  Footprint footprint;
  double dome_ratio = 1.0;
  double underside_fraction = 0.3;
  std::array<double, 2> scale_range{0.7, 1.1};
  std::array<int, 2> count_range{10, 60};
  Hardness hardness = Hardness::Soft;
  double fragility_force_n = 3.0;     ///< adaptive-finger damage threshold
  double damage_tolerance_mm = 3.0;   ///< fixed-finger penetration allowance
  double grasp_height_offset_mm = 0;  ///< added to the food-area median height

  double mean_radius_mm() const {
    return 0.5 * (footprint.semi_major_mm + footprint.semi_minor_mm);
  }

  void validate() const {
    if (name.empty()) throw ParameterError("archetype needs a name");
    const auto& f = footprint;
    if (!(f.semi_major_mm > 0 && f.semi_minor_mm > 0))
      throw ParameterError(name + ": semi-axes must be positive");
    if (!(f.exponent > 0)) throw ParameterError(name + ": exponent must be positive");
    if (!(f.jitter >= 0 && f.jitter < 1)) throw ParameterError(name + ": jitter must be in [0, 1)");
    if (!(dome_ratio > 0)) throw ParameterError(name + ": dome ratio must be positive");
    if (!(underside_fraction >= 0 && underside_fraction < 1))
      throw ParameterError(name + ": underside fraction must be in [0, 1)");
    if (!(scale_range[0] > 0 && scale_range[0] <= scale_range[1]))
      throw ParameterError(name + ": need 0 < scale lo <= scale hi");
    if (!(count_range[0] >= 1 && count_range[0] <= count_range[1] && count_range[1] <= 200))
      throw ParameterError(name + ": count range must lie within [1, 200]");
    if (!(fragility_force_n > 0)) throw ParameterError(name + ": fragility force must be positive");
    if (!(damage_tolerance_mm >= 0))
      throw ParameterError(name + ": damage tolerance must be non-negative");
  }
};

class ArchetypeLibrary {
 public:
  ArchetypeLibrary() = default;
  explicit ArchetypeLibrary(std::vector<FoodArchetype> items) {
    for (auto& a : items) add(std::move(a));
  }

  void add(FoodArchetype a) {
    a.validate();
    auto name = a.name;
    items_.insert_or_assign(std::move(name), std::move(a));
  }

  bool contains(std::string_view name) const { return items_.find(name) != items_.end(); }

  const FoodArchetype& at(std::string_view name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw ParameterError("unknown archetype '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : items_) out.push_back(k);
    return out;
  }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  std::size_t size() const { return items_.size(); }

 private:
  std::map<std::string, FoodArchetype, std::less<>> items_;
};

/// The seven foods of the evaluation. Hardness classes follow the reported
/// softness column; every other number is a configuration default.
inline ArchetypeLibrary default_archetypes() {
  auto make = [](std::string name, Footprint fp, double dome, double under, Hardness hard,
                 double fragility, double tolerance, double offset) {
    FoodArchetype a;
    a.name = std::move(name);
    a.footprint = fp;
    a.dome_ratio = dome;
    a.underside_fraction = under;
    a.hardness = hard;
    a.fragility_force_n = fragility;
    a.damage_tolerance_mm = tolerance;
    a.grasp_height_offset_mm = offset;
    return a;
  };
  std::vector<FoodArchetype> v;
  v.push_back(make("fried_chicken", {28, 22, 2.3, 0.20}, 0.75, 0.35, Hardness::Soft, 3.0, 4.0, -8));
  v.push_back(make("broccoli", {25, 20, 1.6, 0.25}, 1.00, 0.40, Hardness::Soft, 3.5, 5.0, -10));
  v.push_back(make("mushroom", {14, 12, 2.0, 0.15}, 0.80, 0.30, Hardness::Soft, 2.5, 3.0, -6));
  v.push_back(make("meatball", {15, 15, 2.0, 0.05}, 1.80, 0.50, Hardness::Hard, 5.0, 6.0, -12));
  v.push_back(make("taro", {20, 16, 2.2, 0.15}, 1.40, 0.45, Hardness::Hard, 6.0, 8.0, -12));
  v.push_back(make("sausage", {40, 12, 2.5, 0.03}, 0.90, 0.50, Hardness::VeryHard, 8.0, 10.0, -10));
  v.push_back(make("gyoza", {30, 18, 2.2, 0.10}, 0.75, 0.25, Hardness::Soft, 1.0, 1.0, -8));
  return ArchetypeLibrary{std::move(v)};
}

}  // namespace binpick
