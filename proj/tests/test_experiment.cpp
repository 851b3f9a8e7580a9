#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace binpick;
using namespace testing_support;

namespace {

ExperimentConfig small_config(std::string food = "mushroom", int n = 12) {
  ExperimentConfig cfg;
  cfg.scene.archetype = std::move(food);
  cfg.n_attempts = n;
  cfg.base_seed = 1000;
  return cfg;
}

TrialRecord record(GraspClass outcome, std::vector<PieceId> damaged = {}, std::uint64_t scene_seed = 0) {
  TrialRecord r;
  r.outcome = outcome;
  r.damaged = std::move(damaged);
  r.scene_seed = scene_seed;
  return r;
}

}  // namespace

TEST(RunTrial, LonePieceCleanPerceptionSucceeds) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config("meatball");
  cfg.scene.count_range = std::array<int, 2>{1, 1};
  cfg.corruption = {};
  cfg.depth = {0.0, 0.0};
  cfg.refill = RefillPolicy::FreshSceneEachAttempt;
  int successes = 0;
  for (int i = 0; i < 8; ++i) {
    const TrialRecord r = run_trial(cfg, i, lib);
    EXPECT_EQ(r.pieces_before, 1u);
    if (!r.target) {
      // Against a wall the only candidate is filtered out.
      EXPECT_EQ(r.reason, "no_target");
      EXPECT_EQ(r.filtered_count, 1u);
      continue;
    }
    EXPECT_EQ(r.outcome, GraspClass::SuccessSingle) << i;
    EXPECT_EQ(r.picked.size(), 1u);
    ++successes;
  }
  EXPECT_GE(successes, 5);
}

TEST(RunTrial, DroppingEveryMaskLeavesNoTarget) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config();
  cfg.corruption.drop_prob = 1.0;
  const TrialRecord r = run_trial(cfg, 0, lib);
  EXPECT_EQ(r.outcome, GraspClass::Failure);
  EXPECT_EQ(r.reason, "no_target");
  EXPECT_FALSE(r.target);
  EXPECT_EQ(r.candidate_count, 0u);
}

TEST(RunTrial, Deterministic) {
  const auto lib = default_archetypes();
  for (RefillPolicy p : {RefillPolicy::FreshSceneEachAttempt, RefillPolicy::DepleteUntilEmptyThenRefresh}) {
    ExperimentConfig cfg = small_config("gyoza");
    cfg.refill = p;
    EXPECT_EQ(run_trial(cfg, 3, lib), run_trial(cfg, 3, lib));
  }
}

TEST(RunTrial, MatchesCampaignUnderDepletion) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config("taro", 6);
  const ExperimentResult all = run_experiment(cfg, lib);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(run_trial(cfg, i, lib), all.records[i]) << i;
  // The tray persists: later attempts start with fewer pieces.
  EXPECT_EQ(all.records[1].scene_seed, all.records[0].scene_seed);
  EXPECT_EQ(all.records[1].pieces_before, all.records[0].pieces_before - all.records[0].picked.size());
}

TEST(RunTrial, FreshPolicyUsesAttemptSeed) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config();
  cfg.refill = RefillPolicy::FreshSceneEachAttempt;
  const TrialRecord r = run_trial(cfg, 7, lib);
  EXPECT_EQ(r.seed, 1007u);
  EXPECT_EQ(r.scene_seed, 1007u);
  SceneConfig sc = cfg.scene;
  EXPECT_EQ(r.pieces_before, generate_scene(sc, lib, 1007).pieces().size());
}

TEST(Summarize, BracketArithmetic) {
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 45; ++i) recs.push_back(record(GraspClass::SuccessSingle));
  for (int i = 0; i < 3; ++i) recs.push_back(record(GraspClass::SuccessMultiple));
  for (int i = 0; i < 2; ++i) recs.push_back(record(GraspClass::Failure));
  const SummaryStats s = summarize(recs);
  EXPECT_EQ(s.n_attempts, 50);
  EXPECT_DOUBLE_EQ(s.success_single_rate, 0.90);
  EXPECT_DOUBLE_EQ(s.success_incl_multiple_rate, 0.96);
  EXPECT_DOUBLE_EQ(s.multi_pick_rate, 0.06);
}

TEST(Summarize, AllSingle) {
  const std::vector<TrialRecord> recs(20, record(GraspClass::SuccessSingle));
  const SummaryStats s = summarize(recs);
  EXPECT_DOUBLE_EQ(s.success_single_rate, 1.0);
  EXPECT_DOUBLE_EQ(s.success_incl_multiple_rate, 1.0);
  EXPECT_DOUBLE_EQ(s.multi_pick_rate, 0.0);
}

TEST(Summarize, DamageCountedOncePerPiece) {
  const std::vector<TrialRecord> recs{
      record(GraspClass::Failure, {3, 4}, 10),
      record(GraspClass::SuccessSingle, {3}, 10),  // same piece again
      record(GraspClass::SuccessSingle, {3}, 11),  // same id, another tray
  };
  EXPECT_EQ(summarize(recs).damaged_piece_total, 3u);
}

TEST(RunExperiment, SummaryMatchesRecordRecount) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config("gyoza", 30);
  cfg.finger = FingerModel::fixed();
  const ExperimentResult r = run_experiment(cfg, lib);
  ASSERT_EQ(r.records.size(), 30u);
  int single = 0, multi = 0;
  std::set<std::pair<std::uint64_t, PieceId>> dmg;
  for (const auto& t : r.records) {
    single += t.outcome == GraspClass::SuccessSingle;
    multi += t.outcome == GraspClass::SuccessMultiple;
    EXPECT_EQ(t.outcome == GraspClass::SuccessSingle, t.picked.size() == 1);
    for (PieceId id : t.damaged) dmg.insert({t.scene_seed, id});
  }
  EXPECT_DOUBLE_EQ(r.summary.success_single_rate, single / 30.0);
  EXPECT_DOUBLE_EQ(r.summary.multi_pick_rate, multi / 30.0);
  EXPECT_EQ(r.summary.damaged_piece_total, dmg.size());
  EXPECT_GT(r.summary.success_incl_multiple_rate, 0.5);
}

TEST(RunExperiment, JobsDoNotChangeRecords) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config("broccoli", 10);
  cfg.refill = RefillPolicy::FreshSceneEachAttempt;
  const ExperimentResult a = run_experiment(cfg, lib, 1);
  const ExperimentResult b = run_experiment(cfg, lib, 3);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.summary, b.summary);
}

TEST(RunExperiment, InvalidConfigRejected) {
  const auto lib = default_archetypes();
  ExperimentConfig cfg = small_config();
  cfg.n_attempts = 0;
  EXPECT_THROW(run_experiment(cfg, lib), ParameterError);
  cfg = small_config("tofu");
  EXPECT_THROW(run_experiment(cfg, lib), ParameterError);
  cfg = small_config();
  cfg.corruption.drop_prob = 1.5;
  EXPECT_THROW(run_experiment(cfg, lib), ParameterError);
}

TEST(CompareConditions, IdenticalConfigsGiveZeroDeltas) {
  const auto lib = default_archetypes();
  const ExperimentConfig cfg = small_config("sausage", 6);
  const std::vector<ExperimentConfig> cfgs{cfg, cfg};
  const Comparison cmp = compare_conditions(cfgs, lib);
  const SummaryDelta d = cmp.delta(1);
  EXPECT_EQ(d.success_single_rate, 0.0);
  EXPECT_EQ(d.success_incl_multiple_rate, 0.0);
  EXPECT_EQ(d.multi_pick_rate, 0.0);
  EXPECT_EQ(d.damaged_piece_total, 0);
  EXPECT_EQ(d.no_target_count, 0);
}

TEST(CompareConditions, MismatchedArchetypesRejected) {
  const auto lib = default_archetypes();
  const std::vector<ExperimentConfig> cfgs{small_config("sausage", 2), small_config("gyoza", 2)};
  EXPECT_THROW(compare_conditions(cfgs, lib), ParameterError);
  const std::vector<ExperimentConfig> one{small_config("sausage", 2)};
  EXPECT_THROW(compare_conditions(one, lib), ParameterError);
}

TEST(CompareConditions, FingerFilterGridOrder) {
  const auto grid = finger_filter_grid(small_config());
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0].label, "adaptive+filter");
  EXPECT_EQ(grid[1].label, "adaptive+nofilter");
  EXPECT_EQ(grid[2].label, "fixed+filter");
  EXPECT_EQ(grid[3].label, "fixed+nofilter");
  EXPECT_EQ(grid[3].finger.kind, FingerKind::Fixed);
  EXPECT_FALSE(grid[3].filtering);
}

TEST(SignTest, ExactBinomialTail) {
  // P(X >= 8 | n = 10, p = 1/2) = (45 + 10 + 1) / 1024.
  EXPECT_NEAR(binomial_upper_tail_half(10, 8), 56.0 / 1024.0, 1e-12);
  EXPECT_DOUBLE_EQ(binomial_upper_tail_half(5, 0), 1.0);
  EXPECT_NEAR(binomial_upper_tail_half(4, 4), 1.0 / 16.0, 1e-12);
  EXPECT_DOUBLE_EQ(binomial_upper_tail_half(3, 4), 0.0);
}

TEST(SignTest, PairedCountsDiscordantTrials) {
  std::vector<TrialRecord> a, b;
  const GraspClass S = GraspClass::SuccessSingle, F = GraspClass::Failure;
  const std::vector<std::pair<GraspClass, GraspClass>> pairs{{S, F}, {S, F}, {S, S}, {F, F}, {F, S}, {S, F}};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    a.push_back(record(pairs[i].first));
    b.push_back(record(pairs[i].second));
    a.back().seed = b.back().seed = i;
  }
  const PairedTest t =
      paired_sign_test(a, b, [](const TrialRecord& r) { return r.outcome == GraspClass::SuccessSingle; });
  EXPECT_EQ(t.a_only, 3u);
  EXPECT_EQ(t.b_only, 1u);
  EXPECT_NEAR(t.p_value, 5.0 / 16.0, 1e-12);
  b[0].seed = 99;
  EXPECT_THROW(paired_sign_test(a, b, [](const TrialRecord&) { return true; }), ParameterError);
}
