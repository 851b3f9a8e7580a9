// Generate one tray, plan a grasp with and without filtering and run both
// with the adaptive finger.

#include <cstdio>

#include "binpick/binpick.hpp"

using namespace binpick;

int main(int argc, char** argv) {
  const std::string food = argc > 1 ? argv[1] : "fried_chicken";
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 1;

  const ArchetypeLibrary lib = default_archetypes();
  SceneConfig sc;
  sc.archetype = food;
  const TrayScene tray = generate_scene(sc, lib, seed);
  std::printf("%s tray, seed %llu: %zu pieces\n", food.c_str(), static_cast<unsigned long long>(seed),
              tray.pieces().size());

  Rng drng = make_rng(seed, Stream::Depth);
  const DepthImage depth = render_depth(tray, 0.5, 0.0, drng);
  const InstanceMaskSet masks = render_masks(tray);

  for (bool filtering : {false, true}) {
    const Plan p = plan(masks, depth, lib.at(food), PlannerConfig{FingerGeometry{}, filtering});
    const GraspCandidate* t = p.target_candidate();
    if (!t) {
      std::printf("  filtering %-3s: no grasp\n", filtering ? "on" : "off");
      continue;
    }
    TrayScene s = tray;
    const GraspOutcome o = execute_grasp(s, *t, FingerModel::adaptive(), CaptureRules{}, lib);
    std::printf("  filtering %-3s: piece %u at (%.0f, %.0f) px, h %.1f mm, w %.1f mm -> %s, %zu picked, %zu damaged\n",
                filtering ? "on" : "off", static_cast<unsigned>(t->instance), t->x, t->y, t->h_mm, t->w_mm,
                std::string(to_string(o.classification)).c_str(), o.picked.size(), o.damaged.size());
  }
  return 0;
}
