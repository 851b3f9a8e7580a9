#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "binpick/archetype.hpp"
#include "binpick/errors.hpp"
#include "binpick/graspsim.hpp"
#include "binpick/perception.hpp"
#include "binpick/planner.hpp"
#include "binpick/rng.hpp"
#include "binpick/scene.hpp"

namespace binpick {

enum class RefillPolicy { FreshSceneEachAttempt, DepleteUntilEmptyThenRefresh };

inline std::string_view to_string(RefillPolicy p) {
  return p == RefillPolicy::FreshSceneEachAttempt ? "fresh_scene_each_attempt"
                                                  : "deplete_until_empty_then_refresh";
}

inline RefillPolicy refill_policy_from_string(std::string_view s) {
  if (s == "fresh_scene_each_attempt") return RefillPolicy::FreshSceneEachAttempt;
  if (s == "deplete_until_empty_then_refresh") return RefillPolicy::DepleteUntilEmptyThenRefresh;
  throw ParameterError("unknown refill policy '" + std::string(s) + "'");
}

struct DepthNoise {
  double sigma_mm = 0.5;
  double quant_mm = 0.0;
};

/// One campaign of grasp attempts on one food. Attempt i uses seed
/// base_seed + i for its depth noise and mask corruption, and for the scene
/// whenever it starts a new tray.
struct ExperimentConfig {
  std::string label;
  SceneConfig scene;  ///< scene.archetype is the food under test
  FingerModel finger = FingerModel::adaptive();
  bool filtering = true;
  CorruptionParams corruption{1, 0.05, 0.15, 0.0};
  DepthNoise depth;
  CaptureRules capture;
  int n_attempts = 50;
  RefillPolicy refill = RefillPolicy::DepleteUntilEmptyThenRefresh;
  std::uint64_t base_seed = 0;
  std::string output_dir;

  const std::string& archetype() const { return scene.archetype; }

  void validate(const ArchetypeLibrary& library) const {
    if (n_attempts < 1) throw ParameterError("n_attempts must be >= 1");
    library.at(scene.archetype);
    finger.validate();
    capture.validate();
    if (!(depth.sigma_mm >= 0 && depth.quant_mm >= 0)) throw ParameterError("depth noise must be >= 0");
    if (corruption.boundary_jitter_px < 0 || corruption.merge_prob < 0 || corruption.merge_prob > 1 ||
        corruption.drop_prob < 0 || corruption.drop_prob > 1 || corruption.confidence_floor < 0 ||
        corruption.confidence_floor > 1)
      throw ParameterError("corruption parameters out of range");
  }

  std::string describe() const {
    if (!label.empty()) return label;
    return std::string(to_string(finger.kind)) + (filtering ? "+filter" : "+nofilter");
  }
};

struct TrialRecord {
  int attempt = 0;
  std::uint64_t seed = 0;
  std::uint64_t scene_seed = 0;  ///< seed of the tray this attempt picked from
  std::size_t pieces_before = 0;
  std::size_t candidate_count = 0;
  std::size_t filtered_count = 0;
  std::optional<PieceId> target;
  GraspClass outcome = GraspClass::Failure;
  std::string reason;  ///< "no_target" when the plan had nothing to grasp
  std::vector<PieceId> picked;
  std::vector<PieceId> damaged;

  std::size_t picked_count() const { return picked.size(); }
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct SummaryStats {
  int n_attempts = 0;
  double success_single_rate = 0;
  double success_incl_multiple_rate = 0;
  double multi_pick_rate = 0;
  std::size_t damaged_piece_total = 0;
  std::size_t no_target_count = 0;

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

/// Damage is counted per piece over the campaign: a piece is identified by
/// the tray it lives in and its id.
inline SummaryStats summarize(std::span<const TrialRecord> records) {
  SummaryStats s;
  s.n_attempts = static_cast<int>(records.size());
  if (records.empty()) return s;
  std::size_t single = 0, multiple = 0;
  std::set<std::pair<std::uint64_t, PieceId>> damaged;
  for (const auto& r : records) {
    if (r.outcome == GraspClass::SuccessSingle) ++single;
    if (r.outcome == GraspClass::SuccessMultiple) ++multiple;
    if (r.reason == "no_target") ++s.no_target_count;
    for (PieceId id : r.damaged) damaged.insert({r.scene_seed, id});
  }
  const double n = static_cast<double>(records.size());
  s.success_single_rate = static_cast<double>(single) / n;
  s.success_incl_multiple_rate = static_cast<double>(single + multiple) / n;
  s.multi_pick_rate = static_cast<double>(multiple) / n;
  s.damaged_piece_total = damaged.size();
  return s;
}

/// Everything one attempt produced, for inspection and the CLI.
struct TrialArtifacts {
  TrialRecord record;
  Plan plan;
  std::optional<GraspOutcome> outcome;
};

/// Sequential attempt runner. Holds the tray between attempts under the
/// depleting policy.
class Campaign {
 public:
  Campaign(ExperimentConfig cfg, const ArchetypeLibrary& library) : cfg_(std::move(cfg)), library_(&library) {
    cfg_.validate(library);
  }

  const ExperimentConfig& config() const { return cfg_; }
  int next_attempt() const { return attempt_; }
  const std::optional<TrayScene>& scene() const { return scene_; }

  TrialArtifacts step() {
    const int idx = attempt_++;
    const std::uint64_t seed = cfg_.base_seed + static_cast<std::uint64_t>(idx);
    const bool fresh = cfg_.refill == RefillPolicy::FreshSceneEachAttempt;
    if (fresh || !scene_ || scene_->pieces().empty() || refresh_) {
      scene_ = generate_scene(cfg_.scene, *library_, seed);
      refresh_ = false;
    }
    TrialArtifacts art = attempt(*scene_, cfg_, *library_, idx);
    // An attempt with nothing to grasp ends the tray epoch.
    if (!art.record.target) refresh_ = true;
    return art;
  }

  /// One attempt on `scene` (mutated by the grasp).
  static TrialArtifacts attempt(TrayScene& scene, const ExperimentConfig& cfg, const ArchetypeLibrary& library,
                                int idx) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(idx);
    const FoodArchetype& arch = library.at(cfg.scene.archetype);

    TrialArtifacts art;
    TrialRecord& rec = art.record;
    rec.attempt = idx;
    rec.seed = seed;
    rec.scene_seed = scene.seed;
    rec.pieces_before = scene.pieces().size();

    Rng depth_rng = make_rng(seed, Stream::Depth);
    const DepthImage depth = render_depth(scene, cfg.depth.sigma_mm, cfg.depth.quant_mm, depth_rng);
    Rng mask_rng = make_rng(seed, Stream::Corruption);
    const InstanceMaskSet masks = corrupt_masks(render_masks(scene), cfg.corruption, mask_rng);

    art.plan = plan(masks, depth, arch, PlannerConfig{cfg.finger.geometry, cfg.filtering});
    rec.candidate_count = art.plan.candidates.size();
    rec.filtered_count = rec.candidate_count - art.plan.retained_count();

    const GraspCandidate* target = art.plan.target_candidate();
    if (!target) {
      rec.outcome = GraspClass::Failure;
      rec.reason = "no_target";
      return art;
    }
    rec.target = target->instance;
    GraspOutcome out = execute_grasp(scene, *target, cfg.finger, cfg.capture, library);
    rec.outcome = out.classification;
    rec.picked = out.picked;
    for (const auto& ev : out.damaged) rec.damaged.push_back(ev.id);
    art.outcome = std::move(out);
    return art;
  }

 private:
  ExperimentConfig cfg_;
  const ArchetypeLibrary* library_;
  std::optional<TrayScene> scene_;
  int attempt_ = 0;
  bool refresh_ = false;
};

/// Attempt `attempt_idx` of the campaign. Under the depleting policy the
/// earlier attempts of the campaign are replayed to reconstruct the tray.
inline TrialRecord run_trial(const ExperimentConfig& cfg, int attempt_idx, const ArchetypeLibrary& library) {
  if (attempt_idx < 0) throw ParameterError("attempt index must be >= 0");
  if (cfg.refill == RefillPolicy::FreshSceneEachAttempt) {
    cfg.validate(library);
    TrayScene scene = generate_scene(cfg.scene, library, cfg.base_seed + static_cast<std::uint64_t>(attempt_idx));
    return Campaign::attempt(scene, cfg, library, attempt_idx).record;
  }
  Campaign c(cfg, library);
  while (c.next_attempt() < attempt_idx) c.step();
  return c.step().record;
}

struct ExperimentResult {
  std::vector<TrialRecord> records;
  SummaryStats summary;
};

/// All attempts of a campaign. Fresh-scene campaigns spread over `jobs`
/// threads; the record order (and content) never depends on `jobs`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const ArchetypeLibrary& library, int jobs = 1) {
  cfg.validate(library);
  ExperimentResult res;
  res.records.resize(static_cast<std::size_t>(cfg.n_attempts));

  if (cfg.refill == RefillPolicy::FreshSceneEachAttempt && jobs > 1) {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next++; i < cfg.n_attempts; i = next++) res.records[i] = run_trial(cfg, i, library);
    };
    std::vector<std::jthread> pool;
    for (int t = 0; t < std::min(jobs, cfg.n_attempts); ++t) pool.emplace_back(worker);
  } else if (cfg.refill == RefillPolicy::FreshSceneEachAttempt) {
    for (int i = 0; i < cfg.n_attempts; ++i) res.records[i] = run_trial(cfg, i, library);
  } else {
    Campaign c(cfg, library);
    for (int i = 0; i < cfg.n_attempts; ++i) res.records[i] = c.step().record;
  }
  res.summary = summarize(res.records);
  return res;
}

// ---------------------------------------------------------------------------
// Condition comparison
// ---------------------------------------------------------------------------

struct SummaryDelta {
  double success_single_rate = 0;
  double success_incl_multiple_rate = 0;
  double multi_pick_rate = 0;
  long long damaged_piece_total = 0;
  long long no_target_count = 0;
};

struct ConditionResult {
  ExperimentConfig config;
  ExperimentResult result;
};

struct Comparison {
  std::vector<ConditionResult> conditions;

  /// Summary of condition i minus that of the baseline (condition 0).
  SummaryDelta delta(std::size_t i) const;
};

inline SummaryDelta Comparison::delta(std::size_t i) const {
  const auto& a = conditions.at(i).result.summary;
  const auto& b = conditions.at(0).result.summary;
  return {a.success_single_rate - b.success_single_rate,
          a.success_incl_multiple_rate - b.success_incl_multiple_rate, a.multi_pick_rate - b.multi_pick_rate,
          static_cast<long long>(a.damaged_piece_total) - static_cast<long long>(b.damaged_piece_total),
          static_cast<long long>(a.no_target_count) - static_cast<long long>(b.no_target_count)};
}

/// Run every condition. Conditions must share the food; with equal seeds and
/// scene settings they see the same trays (paired comparison).
inline Comparison compare_conditions(std::span<const ExperimentConfig> cfgs, const ArchetypeLibrary& library,
                                     int jobs = 1) {
  if (cfgs.size() < 2) throw ParameterError("comparison needs at least two conditions");
  for (const auto& c : cfgs)
    if (c.archetype() != cfgs.front().archetype())
      throw ParameterError("conditions compare different archetypes: " + cfgs.front().archetype() + " vs " +
                           c.archetype());
  Comparison cmp;
  for (const auto& c : cfgs) cmp.conditions.push_back({c, run_experiment(c, library, jobs)});
  return cmp;
}

/// The standard 2x2 grid (adaptive/fixed x filtering on/off) around `base`,
/// baseline first: adaptive+filter, adaptive+nofilter, fixed+filter, fixed+nofilter.
inline std::vector<ExperimentConfig> finger_filter_grid(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  for (FingerKind k : {FingerKind::Adaptive, FingerKind::Fixed})
    for (bool f : {true, false}) {
      ExperimentConfig c = base;
      c.finger.kind = k;
      c.filtering = f;
      c.label.clear();
      c.label = c.describe();
      out.push_back(std::move(c));
    }
  return out;
}

/// Exact one-sided sign test on paired binary outcomes: the probability of at
/// least `wins` successes-only-under-A among the discordant pairs if A and B
/// were exchangeable.
struct PairedTest {
  std::size_t a_only = 0;
  std::size_t b_only = 0;
  double p_value = 1.0;
};

inline double binomial_upper_tail_half(std::size_t n, std::size_t k) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0.0;
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  for (std::size_t i = k; i <= n; ++i) {
    const double lc = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                      std::lgamma(static_cast<double>(n - i) + 1);
    total += std::exp(lc + log_half_n);
  }
  return std::min(1.0, total);
}

template <typename Pred>
PairedTest paired_sign_test(std::span<const TrialRecord> a, std::span<const TrialRecord> b, Pred&& success) {
  if (a.size() != b.size()) throw ParameterError("paired test needs equally long campaigns");
  PairedTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed) throw ParameterError("paired test needs matching seeds");
    const bool sa = success(a[i]);
    const bool sb = success(b[i]);
    if (sa && !sb) ++t.a_only;
    if (sb && !sa) ++t.b_only;
  }
  t.p_value = binomial_upper_tail_half(t.a_only + t.b_only, t.a_only);
  return t;
}

}  // namespace binpick
