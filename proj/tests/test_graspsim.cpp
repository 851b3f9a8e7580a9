#include <gtest/gtest.h>

#include "support.hpp"

using namespace binpick;
using namespace testing_support;

namespace {

ArchetypeLibrary probe_library() {
  ArchetypeLibrary lib;
  lib.add(test_archetype("probe"));
  return lib;
}

// Axis-aligned grasp on a 25 mm target centred at (300, 300); fingers land
// 14 mm either side of centre.
GraspCandidate grasp_at_300(PieceId id, double h = 15.0) {
  GraspCandidate c;
  c.instance = id;
  c.x = 300;
  c.y = 300;
  c.theta = 0;
  c.w_mm = 20;
  c.h_mm = h;
  c.food_median_mm = 25;
  return c;
}

struct Bench {
  TrayScene scene;
  PieceId target = 0;
  PieceId neighbour = 0;
};

// Target 28x28 px, 25 mm thick; optional neighbour slab covering the left
// finger footprint.
Bench bench(std::optional<double> neighbour_mm, int neighbour_w = 10, int neighbour_h = 40, int neighbour_x = 280) {
  Bench b;
  b.target = drop_at(b.scene, flat_mm(28, 28, 25.0), 300, 300, "probe");
  if (neighbour_mm)
    b.neighbour = drop_at(b.scene, flat_mm(neighbour_w, neighbour_h, *neighbour_mm), neighbour_x, 300, "probe");
  return b;
}

}  // namespace

TEST(InsertFingers, FloorIsFullInsertion) {
  const auto lib = probe_library();
  Bench b = bench(std::nullopt);
  for (const FingerModel& fm : {FingerModel::adaptive(), FingerModel::fixed()}) {
    const InsertionResult ins = insert_fingers(b.scene, grasp_at_300(b.target), fm, lib);
    for (const auto& f : ins.fingers) {
      EXPECT_DOUBLE_EQ(f.achieved_bottom_mm, 15.0);
      EXPECT_DOUBLE_EQ(f.retraction_mm, 0.0);
      EXPECT_DOUBLE_EQ(f.obstruction_mm, 0.0);
      EXPECT_TRUE(f.contacts.empty());
      EXPECT_FALSE(f.blocked);
      EXPECT_EQ(f.resting_on, 0);
    }
  }
}

TEST(InsertFingers, FixedFingerPenetratesNeighbour) {
  const auto lib = probe_library();
  Bench b = bench(25.0);  // neighbour surface 10 mm above h
  const InsertionResult ins = insert_fingers(b.scene, grasp_at_300(b.target), FingerModel::fixed(), lib);
  const auto& left = ins.fingers[0];
  ASSERT_EQ(left.contacts.size(), 1u);
  EXPECT_EQ(left.contacts[0].id, b.neighbour);
  EXPECT_DOUBLE_EQ(left.contacts[0].penetration_mm, 10.0);
  EXPECT_TRUE(left.contacts[0].damaged);  // tolerance 3 mm
  EXPECT_FALSE(left.blocked);
  EXPECT_DOUBLE_EQ(left.achieved_bottom_mm, 15.0);
  EXPECT_TRUE(ins.fingers[1].contacts.empty());
}

TEST(InsertFingers, AdaptiveFingerRetractsWithSpringForce) {
  const auto lib = probe_library();
  Bench b = bench(25.0);
  const InsertionResult ins = insert_fingers(b.scene, grasp_at_300(b.target), FingerModel::adaptive(), lib);
  const auto& left = ins.fingers[0];
  EXPECT_DOUBLE_EQ(left.retraction_mm, 10.0);
  EXPECT_DOUBLE_EQ(left.achieved_bottom_mm, 25.0);
  ASSERT_EQ(left.contacts.size(), 1u);
  EXPECT_NEAR(left.contacts[0].force_n, 4.1 / 22.5 * 10.0, 1e-12);
  EXPECT_NEAR(left.contacts[0].force_n, 1.82, 0.005);
  EXPECT_FALSE(left.contacts[0].damaged);  // fragility 2.5 N
  EXPECT_FALSE(left.blocked);
  EXPECT_EQ(left.resting_on, b.neighbour);
  EXPECT_DOUBLE_EQ(left.settled_bottom_mm, 25.0);
}

TEST(InsertFingers, AdaptiveBlockedBeyondBudget) {
  const auto lib = probe_library();
  Bench b = bench(40.0);  // 25 mm above h
  const InsertionResult ins = insert_fingers(b.scene, grasp_at_300(b.target), FingerModel::adaptive(), lib);
  EXPECT_TRUE(ins.fingers[0].blocked);
  EXPECT_DOUBLE_EQ(ins.fingers[0].retraction_mm, 22.5);
  EXPECT_LE(ins.fingers[0].contacts.size(), 1u);
  for (const auto& ct : ins.fingers[0].contacts) EXPECT_LE(ct.force_n, 4.1 + 1e-12);
}

TEST(InsertFingers, OutOfTrayFingerIsBlocked) {
  const auto lib = probe_library();
  TrayScene s;
  const PieceId t = drop_at(s, flat_mm(20, 20, 25.0), 10, 300, "probe");
  GraspCandidate c = grasp_at_300(t);
  c.x = 2;
  const InsertionResult ins = insert_fingers(s, c, FingerModel::adaptive(), lib);
  EXPECT_TRUE(ins.fingers[0].out_of_tray);
  EXPECT_TRUE(ins.blocked());
  EXPECT_EQ(close_and_lift(s, c, ins, FingerModel::adaptive(), CaptureRules{}, lib).classification,
            GraspClass::Failure);
}

TEST(CloseAndLift, LonePieceSingleSuccess) {
  const auto lib = probe_library();
  Bench b = bench(std::nullopt);
  for (const FingerModel& fm : {FingerModel::adaptive(), FingerModel::fixed()}) {
    const auto c = grasp_at_300(b.target);
    const GraspOutcome out = close_and_lift(b.scene, c, insert_fingers(b.scene, c, fm, lib), fm, CaptureRules{}, lib);
    EXPECT_EQ(out.classification, GraspClass::SuccessSingle);
    EXPECT_EQ(out.picked, std::vector<PieceId>{b.target});
    EXPECT_TRUE(out.damaged.empty());
    EXPECT_TRUE(out.target_captured);
  }
}

TEST(CloseAndLift, FixedBlockedAtTwentyMillimetres) {
  const auto lib = probe_library();
  Bench b = bench(35.0);  // pierce depth 20 > 15
  const auto c = grasp_at_300(b.target);
  const auto fm = FingerModel::fixed();
  const InsertionResult ins = insert_fingers(b.scene, c, fm, lib);
  ASSERT_TRUE(ins.fingers[0].blocked);
  const GraspOutcome out = close_and_lift(b.scene, c, ins, fm, CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::Failure);
  EXPECT_TRUE(out.picked.empty());
  ASSERT_EQ(out.damaged.size(), 1u);
  EXPECT_EQ(out.damaged[0].id, b.neighbour);
  EXPECT_DOUBLE_EQ(out.damaged[0].magnitude, 20.0);
}

TEST(CloseAndLift, TwinPiecesBothComeAlong) {
  const auto lib = probe_library();
  TrayScene s;
  const PieceId t = drop_at(s, flat_mm(12, 28, 25.0), 294, 300, "probe");
  const PieceId n = drop_at(s, flat_mm(12, 28, 25.0), 306, 300, "probe");
  const auto c = grasp_at_300(t);

  // Fraction of the neighbour's visible mask inside the open jaws.
  const double hu = (10.0 + 2.0) / s.resolution_mm(), hv = 10.0 / s.resolution_mm();
  std::size_t vis = 0, inside = 0;
  for (int y = 0; y < 600; ++y)
    for (int x = 0; x < 600; ++x)
      if (s.owner_map()(x, y) == n) {
        ++vis;
        inside += std::abs(x - 300.0) <= hu && std::abs(y - 300.0) <= hv;
      }
  ASSERT_GE(static_cast<double>(inside) / vis, 0.5);

  const auto fm = FingerModel::adaptive();
  const GraspOutcome out = close_and_lift(s, c, insert_fingers(s, c, fm, lib), fm, CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::SuccessMultiple);
  EXPECT_EQ(out.picked, (std::vector<PieceId>{t, n}));
}

TEST(CloseAndLift, NeighbourOutsideJawStays) {
  const auto lib = probe_library();
  TrayScene s;
  const PieceId t = drop_at(s, flat_mm(12, 28, 25.0), 300, 300, "probe");
  drop_at(s, flat_mm(12, 28, 25.0), 360, 300, "probe");
  const auto c = grasp_at_300(t);
  const auto fm = FingerModel::adaptive();
  const GraspOutcome out = close_and_lift(s, c, insert_fingers(s, c, fm, lib), fm, CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::SuccessSingle);
}

TEST(CloseAndLift, FingerRestingOnSmallNeighbourPinchesIt) {
  const auto lib = probe_library();
  Bench b = bench(35.0, 8, 32);  // covers the left finger, 20 mm above h
  const auto c = grasp_at_300(b.target);
  const auto fm = FingerModel::adaptive();
  const InsertionResult ins = insert_fingers(b.scene, c, fm, lib);
  ASSERT_FALSE(ins.blocked());
  ASSERT_EQ(ins.fingers[0].resting_on, b.neighbour);
  ASSERT_DOUBLE_EQ(ins.fingers[0].settled_bottom_mm, 35.0);
  const GraspOutcome out = close_and_lift(b.scene, c, ins, fm, CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::SuccessMultiple);
  EXPECT_EQ(out.picked, (std::vector<PieceId>{b.target, b.neighbour}));
}

TEST(CloseAndLift, FingerRestingOnLargeNeighbourLosesTarget) {
  const auto lib = probe_library();
  Bench b = bench(35.0, 60, 60, 254);
  const auto c = grasp_at_300(b.target);
  const auto fm = FingerModel::adaptive();
  const InsertionResult ins = insert_fingers(b.scene, c, fm, lib);
  ASSERT_EQ(ins.fingers[0].resting_on, b.neighbour);
  const GraspOutcome out = close_and_lift(b.scene, c, ins, fm, CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::Failure);
  EXPECT_FALSE(out.target_captured);
}

TEST(CloseAndLift, ClosureScrapesBystanderBetweenTheJaws) {
  const auto lib = probe_library();
  TrayScene s;
  const PieceId t = drop_at(s, flat_mm(16, 28, 25.0), 304, 300, "probe");
  // Long 20 mm slab between the left finger and the target; most of it lies
  // outside the jaw, so it is not carried along.
  const PieceId slab = drop_at(s, flat_mm(10, 100, 20.0), 290, 300, "probe");
  const auto c = grasp_at_300(t);

  const auto fixed = FingerModel::fixed();
  const GraspOutcome a = close_and_lift(s, c, insert_fingers(s, c, fixed, lib), fixed, CaptureRules{}, lib);
  EXPECT_EQ(a.classification, GraspClass::SuccessSingle);
  ASSERT_EQ(a.damaged.size(), 1u);
  EXPECT_EQ(a.damaged[0].id, slab);
  EXPECT_EQ(a.damaged[0].cause, DamageCause::Closure);
  EXPECT_DOUBLE_EQ(a.damaged[0].magnitude, 5.0);

  // The sprung finger pushes with 4.1/22.5 N/mm * 5 mm, under the 2.5 N limit.
  const auto adaptive = FingerModel::adaptive();
  const GraspOutcome b = close_and_lift(s, c, insert_fingers(s, c, adaptive, lib), adaptive, CaptureRules{}, lib);
  EXPECT_EQ(b.classification, GraspClass::SuccessSingle);
  EXPECT_TRUE(b.damaged.empty());
}

TEST(ExecuteGrasp, SingleSuccessRemovesTargetAndRevealsBase) {
  const auto lib = probe_library();
  TrayScene s;
  const PieceId base = drop_at(s, flat_mm(80, 80, 10.0), 300, 300, "probe");
  const PieceId t = drop_at(s, flat_mm(28, 28, 25.0), 300, 300, "probe");
  drop_at(s, flat_mm(20, 20, 5.0), 500, 450, "probe");
  ASSERT_EQ(s.find(t)->rest_height, from_mm(10.0));
  GraspCandidate c = grasp_at_300(t, 25.0);
  c.food_median_mm = 35;
  const GraspOutcome out = execute_grasp(s, c, FingerModel::adaptive(), CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::SuccessSingle);
  EXPECT_EQ(s.pieces().size(), 2u);
  EXPECT_EQ(s.find(t), nullptr);
  EXPECT_EQ(s.heightmap()(300, 300), from_mm(10.0));
  EXPECT_EQ(s.owner_map()(300, 300), base);
}

TEST(ExecuteGrasp, FailureOnlyFlagsDamage) {
  const auto lib = probe_library();
  Bench b = bench(35.0);
  const Grid<Height> hm = b.scene.heightmap();
  const Grid<PieceId> owner = b.scene.owner_map();
  const GraspOutcome out =
      execute_grasp(b.scene, grasp_at_300(b.target), FingerModel::fixed(), CaptureRules{}, lib);
  EXPECT_EQ(out.classification, GraspClass::Failure);
  EXPECT_EQ(b.scene.heightmap(), hm);
  EXPECT_EQ(b.scene.owner_map(), owner);
  EXPECT_EQ(b.scene.pieces().size(), 2u);
  EXPECT_TRUE(b.scene.find(b.neighbour)->damaged);
  EXPECT_DOUBLE_EQ(b.scene.find(b.neighbour)->damage_magnitude, 20.0);
  EXPECT_FALSE(b.scene.find(b.target)->damaged);
}

TEST(ExecuteGrasp, GeneratedSceneRecomposesFromSurvivors) {
  const auto lib = default_archetypes();
  SceneConfig cfg;
  cfg.archetype = "fried_chicken";
  TrayScene s = generate_scene(cfg, lib, 5);
  const FoodArchetype& arch = lib.at("fried_chicken");
  int successes = 0;
  for (int k = 0; k < 8; ++k) {
    const Plan p = plan(render_masks(s), exact_depth(s), arch, PlannerConfig{});
    if (!p.target) break;
    const std::size_t before = s.pieces().size();
    const GraspOutcome out = execute_grasp(s, *p.target_candidate(), FingerModel::adaptive(), CaptureRules{}, lib);
    EXPECT_EQ(s.pieces().size(), before - out.picked.size());
    successes += out.classification != GraspClass::Failure;

    Grid<Height> hm(s.raster(), 0);
    for (const auto& piece : s.pieces()) {
      const auto [ox, oy] = piece.origin(s.geometry());
      const auto& st = *piece.stamp;
      for (int j = 0; j < st.side(); ++j)
        for (int i = 0; i < st.side(); ++i)
          if (st.footprint(i, j) && s.geometry().interior.contains(ox + i, oy + j))
            hm(ox + i, oy + j) = std::max(hm(ox + i, oy + j), piece.rest_height + st.top(i, j));
    }
    ASSERT_EQ(s.heightmap(), hm);
  }
  EXPECT_GT(successes, 0);
}
