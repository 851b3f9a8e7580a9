// binpick: command line front end for scene generation, planning, grasp
// simulation and experiment campaigns.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "binpick/binpick.hpp"

namespace {

using namespace binpick;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
  int jobs = 1;
  std::string archetypes;
};

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) apply_config_json(cfg, read_json_file(g.config));
  if (g.seed) cfg.base_seed = *g.seed;
  return cfg;
}

ArchetypeLibrary load_library(const Globals& g) {
  std::string path = g.archetypes;
  if (path.empty() && !g.config.empty()) {
    const json j = read_json_file(g.config);
    if (j.contains("archetype_library")) {
      path = j.at("archetype_library").get<std::string>();
      if (fs::path(path).is_relative()) path = (fs::path(g.config).parent_path() / path).string();
    }
  }
  if (path.empty()) return default_archetypes();
  return archetype_library_from_json(read_json_file(path));
}

int jobs_of(const Globals& g) {
  if (g.jobs >= 1) return g.jobs;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

MaskManifestInfo manifest_info(const TrayScene& s) { return {s.resolution_mm(), s.geometry().interior}; }

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string archetype;
  int count = 1;
  std::optional<int> pieces;
  bool masks = true;
};

int cmd_generate(const Globals& g, const GenerateArgs& a) {
  const auto lib = load_library(g);
  ExperimentConfig cfg = load_config(g);
  if (!a.archetype.empty()) cfg.scene.archetype = a.archetype;
  if (a.pieces) cfg.scene.count_range = std::array<int, 2>{*a.pieces, *a.pieces};
  const std::uint64_t base = g.seed.value_or(cfg.base_seed);
  const fs::path out(g.out);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
    const std::string stem = a.count == 1 ? "scene" : "scene_" + std::to_string(seed);
    const TrayScene s = generate_scene(cfg.scene, lib, seed);
    const fs::path jp = write_scene(s, out, stem);
    if (a.masks) {
      write_masks(render_masks(s), out, stem + "_masks", manifest_info(s));
      Rng rng = make_rng(seed, Stream::Depth);
      write_depth_pgm(out / (stem + "_depth.pgm"), render_depth(s, cfg.depth.sigma_mm, cfg.depth.quant_mm, rng));
    }
    std::printf("%s  pieces=%zu\n", jp.string().c_str(), s.pieces().size());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string scene;
  std::string masks;
  std::string depth;
  std::string archetype;
  bool no_filter = false;
};

int cmd_plan(const Globals& g, const PlanArgs& a) {
  const auto lib = load_library(g);
  ExperimentConfig cfg = load_config(g);
  if (a.no_filter) cfg.filtering = false;
  const fs::path out(g.out);
  fs::create_directories(out);

  InstanceMaskSet masks;
  DepthImage depth;
  std::string archetype = a.archetype;
  if (!a.scene.empty()) {
    // Perceive the scene: noisy depth and corrupted masks, both kept on disk.
    const TrayScene s = read_scene(a.scene);
    const std::uint64_t seed = g.seed.value_or(cfg.base_seed);
    Rng drng = make_rng(seed, Stream::Depth);
    depth = render_depth(s, cfg.depth.sigma_mm, cfg.depth.quant_mm, drng);
    Rng mrng = make_rng(seed, Stream::Corruption);
    masks = corrupt_masks(render_masks(s), cfg.corruption, mrng);
    write_masks(masks, out, "masks", manifest_info(s));
    write_depth_pgm(out / "depth.pgm", depth);
    if (archetype.empty() && !s.pieces().empty()) archetype = s.pieces().front().archetype;
  } else {
    if (a.masks.empty() || a.depth.empty()) throw ParameterError("plan needs --scene, or --masks with --depth");
    const LoadedMasks lm = read_masks(a.masks);
    masks = lm.set;
    depth = read_depth_pgm(a.depth, lm.info.resolution_mm, lm.info.workspace);
    if (depth.raster() != masks.raster) throw FormatError("depth and mask rasters differ");
  }
  if (archetype.empty()) archetype = cfg.scene.archetype;

  const Plan p = plan(masks, depth, lib.at(archetype), PlannerConfig{cfg.finger.geometry, cfg.filtering});
  write_json_file(out / "plan.json", to_json(p, archetype, cfg.filtering, depth.resolution_mm));
  if (const auto* t = p.target_candidate())
    std::printf("candidates=%zu retained=%zu target=%u h=%.2f w=%.2f\n", p.candidates.size(), p.retained_count(),
                static_cast<unsigned>(t->instance), t->h_mm, t->w_mm);
  else
    std::printf("candidates=%zu retained=%zu target=none\n", p.candidates.size(), p.retained_count());
  return 0;
}

// ---------------------------------------------------------------------------

struct GraspArgs {
  std::string scene;
  std::string plan;
  std::string finger;
};

int cmd_grasp(const Globals& g, const GraspArgs& a) {
  const auto lib = load_library(g);
  ExperimentConfig cfg = load_config(g);
  if (!a.finger.empty()) cfg.finger.kind = finger_kind_from_string(a.finger);
  TrayScene s = read_scene(a.scene);
  const auto target = plan_target_from_json(read_json_file(a.plan));
  const fs::path out(g.out);
  fs::create_directories(out);
  if (!target) {
    write_json_file(out / "outcome.json", json{{"classification", "failure"}, {"reason", "no_target"}});
    write_scene(s, out, "scene");
    std::printf("failure (no target)\n");
    return 0;
  }
  const GraspOutcome o = execute_grasp(s, *target, cfg.finger, cfg.capture, lib);
  json j = to_json(o);
  j["finger"] = to_string(cfg.finger.kind);
  write_json_file(out / "outcome.json", j);
  write_scene(s, out, "scene");
  std::printf("%s picked=%zu damaged=%zu remaining=%zu\n", std::string(to_string(o.classification)).c_str(),
              o.picked.size(), o.damaged.size(), s.pieces().size());
  return 0;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::optional<int> n;
  std::string archetype;
  bool renders = false;
};

void write_renders(const ExperimentConfig& cfg, const ArchetypeLibrary& lib, const fs::path& dir) {
  // Heightmap of the tray after each attempt.
  const fs::path rd = dir / "renders";
  fs::create_directories(rd);
  Campaign c(cfg, lib);
  char name[64];
  for (int i = 0; i < cfg.n_attempts; ++i) {
    c.step();
    std::snprintf(name, sizeof name, "attempt_%04d.pgm", i);
    pgm::write_file((rd / name).string(), heights_to_levels(c.scene()->heightmap()));
  }
}

int cmd_experiment(const Globals& g, const ExperimentArgs& a) {
  const auto lib = load_library(g);
  ExperimentConfig cfg = load_config(g);
  if (a.n) cfg.n_attempts = *a.n;
  if (!a.archetype.empty()) cfg.scene.archetype = a.archetype;
  cfg.output_dir = g.out;
  const ExperimentResult res = run_experiment(cfg, lib, jobs_of(g));
  write_experiment(cfg, res);
  if (a.renders) write_renders(cfg, lib, cfg.output_dir);
  std::cout << summary_csv_header() << '\n' << summary_csv_row(cfg, res.summary) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_compare(const Globals& g, const ExperimentArgs& a) {
  const auto lib = load_library(g);
  json doc = g.config.empty() ? json::object() : read_json_file(g.config);
  std::vector<ExperimentConfig> cfgs = comparison_configs_from_json(doc);
  const fs::path out(g.out);
  for (auto& c : cfgs) {
    if (g.seed) c.base_seed = *g.seed;
    if (a.n) c.n_attempts = *a.n;
    if (!a.archetype.empty()) c.scene.archetype = a.archetype;
    c.output_dir = (out / c.describe()).string();
  }
  const Comparison cmp = compare_conditions(cfgs, lib, jobs_of(g));
  for (const auto& c : cmp.conditions) write_experiment(c.config, c.result);
  const std::string csv = comparison_csv(cmp);
  write_text_file(out / "comparison.csv", csv);
  std::cout << csv;

  // Paired sign tests of every condition against the baseline.
  const auto& base = cmp.conditions.front().result.records;
  auto single = [](const TrialRecord& r) { return r.outcome == GraspClass::SuccessSingle; };
  for (std::size_t i = 1; i < cmp.conditions.size(); ++i) {
    const auto& other = cmp.conditions[i].result.records;
    const PairedTest t = paired_sign_test(base, other, single);
    std::printf("# %s vs %s: single success only-baseline=%zu only-other=%zu p=%.3g\n",
                cmp.conditions[0].config.describe().c_str(), cmp.conditions[i].config.describe().c_str(), t.a_only,
                t.b_only, t.p_value);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AgreementArgs {
  std::vector<std::string> manifests;
  std::string archetype;
  int annotators = 3;
};

int cmd_agreement(const Globals& g, const AgreementArgs& a) {
  std::vector<std::string> names;
  std::vector<InstanceMaskSet> sets;
  if (!a.manifests.empty()) {
    for (const auto& m : a.manifests) {
      names.push_back(fs::path(m).stem().string());
      sets.push_back(read_masks(m).set);
    }
  } else {
    // Synthetic annotators: the ground truth plus independently corrupted copies.
    const auto lib = load_library(g);
    ExperimentConfig cfg = load_config(g);
    if (!a.archetype.empty()) cfg.scene.archetype = a.archetype;
    const std::uint64_t seed = g.seed.value_or(cfg.base_seed);
    const TrayScene s = generate_scene(cfg.scene, lib, seed);
    const InstanceMaskSet gt = render_masks(s);
    names.push_back("ground_truth");
    sets.push_back(gt);
    for (int k = 0; k < a.annotators; ++k) {
      Rng rng = make_rng(seed + 1 + static_cast<std::uint64_t>(k), Stream::Corruption);
      names.push_back("annotator_" + std::to_string(k + 1));
      sets.push_back(corrupt_masks(gt, cfg.corruption, rng));
    }
    const fs::path out(g.out);
    for (std::size_t i = 0; i < sets.size(); ++i) write_masks(sets[i], out, names[i], manifest_info(s));
  }
  if (sets.size() < 2) throw ParameterError("agreement needs at least two mask sets");

  // Row: set in the ground-truth role; column: set scored against it.
  std::string csv = "ground_truth";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    csv += names[i];
    for (std::size_t j = 0; j < sets.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.4f", agreement(sets[j], sets[i]).value);
      csv += buf;
    }
    csv += "\n";
  }
  if (!g.out.empty()) write_text_file(fs::path(g.out) / "agreement.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Food bin-picking simulator: scenes, grasp planning, grasp outcomes and campaigns"};
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--config", g.config, "Experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--archetypes", g.archetypes, "Archetype library JSON")->check(CLI::ExistingFile);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Generate tray scenes");
  gen->add_option("--archetype", ga.archetype, "Food archetype");
  gen->add_option("--count", ga.count, "Number of scenes (seeds seed .. seed+count-1)")->check(CLI::PositiveNumber);
  gen->add_option("--pieces", ga.pieces, "Exact piece count")->check(CLI::Range(1, 200));
  gen->add_flag("!--no-masks", ga.masks, "Skip mask and depth output");

  PlanArgs pa;
  auto* pl = app.add_subcommand("plan", "Plan a grasp from masks and depth");
  pl->add_option("--scene", pa.scene, "Scene JSON (masks and depth are rendered from it)");
  pl->add_option("--masks", pa.masks, "Mask manifest JSON");
  pl->add_option("--depth", pa.depth, "Depth PGM");
  pl->add_option("--archetype", pa.archetype, "Food archetype");
  pl->add_flag("--no-filter", pa.no_filter, "Disable grasp filtering");

  GraspArgs gr;
  auto* gs = app.add_subcommand("grasp", "Execute a planned grasp on a scene");
  gs->add_option("--scene", gr.scene, "Scene JSON")->required();
  gs->add_option("--plan", gr.plan, "Plan JSON")->required();
  gs->add_option("--finger", gr.finger, "adaptive or fixed")->check(CLI::IsMember({"adaptive", "fixed"}));

  ExperimentArgs ea;
  auto* ex = app.add_subcommand("experiment", "Run one campaign");
  ex->add_option("--n", ea.n, "Attempts")->check(CLI::PositiveNumber);
  ex->add_option("--archetype", ea.archetype, "Food archetype");
  ex->add_flag("--renders", ea.renders, "Write the tray heightmap after every attempt");

  ExperimentArgs ca;
  auto* cm = app.add_subcommand("compare", "Run and compare conditions (default: finger x filtering grid)");
  cm->add_option("--n", ca.n, "Attempts per condition")->check(CLI::PositiveNumber);
  cm->add_option("--archetype", ca.archetype, "Food archetype");

  AgreementArgs aa;
  auto* ag = app.add_subcommand("agreement", "Pairwise mask agreement matrix as CSV");
  ag->add_option("--masks", aa.manifests, "Mask manifests (repeatable)");
  ag->add_option("--archetype", aa.archetype, "Food archetype for synthetic annotators");
  ag->add_option("--annotators", aa.annotators, "Synthetic annotators")->check(CLI::PositiveNumber);

  for (auto* sub : {gen, pl, gs, ex, cm, ag}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(g, ga);
    if (*pl) return cmd_plan(g, pa);
    if (*gs) return cmd_grasp(g, gr);
    if (*ex) return cmd_experiment(g, ea);
    if (*cm) return cmd_compare(g, ca);
    if (*ag) return cmd_agreement(g, aa);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "binpick: %s\n", e.what());
    return 1;
  }
  return 0;
}
