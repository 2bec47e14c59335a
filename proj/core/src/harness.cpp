#include "hnplan/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "hnplan/parallel.hpp"

namespace hnplan::harness {

namespace {

std::string f6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string f9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Aggregates are defined over the emitted 6-decimal rows so the report file
// is self-consistent.
double round6(double v) { return std::strtod(f6(v).c_str(), nullptr); }

}  // namespace

std::string Report::to_csv() const {
  std::string out = "scene_id,nc,dac,ep,ttc,comf,pdms\n";
  for (const EvalRow& r : rows) {
    out += std::to_string(r.scene_id);
    out += ',';
    out += f6(r.breakdown.nc);
    out += ',';
    out += f6(r.breakdown.dac);
    out += ',';
    out += f6(r.breakdown.ep);
    out += ',';
    out += f6(r.breakdown.ttc);
    out += ',';
    out += f6(r.breakdown.comf);
    out += ',';
    out += f6(r.breakdown.pdms);
    out += '\n';
  }
  return out;
}

std::string Report::summary_json(std::uint64_t hash, std::span<const std::uint64_t> seeds) const {
  std::string out = "{\"scenes\":" + std::to_string(rows.size());
  out += ",\"nc\":" + f9(aggregate.nc);
  out += ",\"dac\":" + f9(aggregate.dac);
  out += ",\"ep\":" + f9(aggregate.ep);
  out += ",\"ttc\":" + f9(aggregate.ttc);
  out += ",\"comf\":" + f9(aggregate.comf);
  out += ",\"pdms\":" + f9(aggregate.pdms);
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  out += ",\"config_hash\":\"";
  out += hex;
  out += "\",\"seeds\":[";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  out += "]}\n";
  return out;
}

Report evaluate_scenes(std::span<const scene::Scene> scenes,
                       const std::function<traj::Trajectory(const scene::Scene&)>& plan_fn) {
  Report report;
  report.rows.resize(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const scene::Scene& s = scenes[i];
    EvalRow& row = report.rows[i];
    row.scene_id = s.scene_id;
    try {
      row.breakdown = score::score(s, plan_fn(s));
    } catch (const DegenerateHeading&) {
      row.breakdown = {};  // pathological plan scores zero
    }
  });

  if (!report.rows.empty()) {
    Aggregate& a = report.aggregate;
    for (const EvalRow& r : report.rows) {
      a.nc += round6(r.breakdown.nc);
      a.dac += round6(r.breakdown.dac);
      a.ep += round6(r.breakdown.ep);
      a.ttc += round6(r.breakdown.ttc);
      a.comf += round6(r.breakdown.comf);
      a.pdms += round6(r.breakdown.pdms);
    }
    double n = static_cast<double>(report.rows.size());
    a.nc = 100.0 * a.nc / n;
    a.dac = 100.0 * a.dac / n;
    a.ep = 100.0 * a.ep / n;
    a.ttc = 100.0 * a.ttc / n;
    a.comf = 100.0 * a.comf / n;
    a.pdms = 100.0 * a.pdms / n;
  }
  return report;
}

Report evaluate(const policy::Policy& policy, std::span<const scene::Scene> scenes) {
  return evaluate_scenes(scenes,
                         [&policy](const scene::Scene& s) { return policy::plan(policy, s); });
}

std::string ClosedLoopReport::to_csv() const {
  std::string out = "scene_id,rc,hd_score,ticks,collided\n";
  for (const ClosedLoopRow& r : rows) {
    out += std::to_string(r.scene_id);
    out += ',';
    out += f6(r.rc);
    out += ',';
    out += f6(r.hd_score);
    out += ',';
    out += std::to_string(r.ticks);
    out += ',';
    out += r.collided ? '1' : '0';
    out += '\n';
  }
  return out;
}

ClosedLoopReport run_closed_loop(const scene::Planner& planner,
                                 std::span<const scene::Scene> scenes, int ticks) {
  if (ticks < 1) throw ConfigError("closed loop needs at least one tick");
  ClosedLoopReport report;
  report.rows.resize(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    score::ClosedLoopScore cls = score::closed_loop_rollout(scenes[i], planner, ticks);
    report.rows[i] = {scenes[i].scene_id, cls.rc, cls.hd_score, cls.executed_ticks(),
                      cls.collided};
  });
  if (!report.rows.empty()) {
    double rc = 0.0, hd = 0.0;
    for (const ClosedLoopRow& r : report.rows) {
      rc += round6(r.rc);
      hd += round6(r.hd_score);
    }
    double n = static_cast<double>(report.rows.size());
    report.mean_rc = 100.0 * rc / n;
    report.mean_hd_score = 100.0 * hd / n;
  }
  return report;
}

std::vector<std::pair<MiningGridCell, mine::MiningStats>> ablate_mining(
    const flow::FlowModel& model, std::span<const scene::Scene> scenes,
    std::span<const MiningGridCell> grid, double xi, std::uint64_t seed) {
  std::vector<std::pair<MiningGridCell, mine::MiningStats>> out;
  out.reserve(grid.size());
  for (const MiningGridCell& cell : grid) {
    flow::SamplingConfig cfg;
    cfg.candidates = cell.candidates;
    cfg.guidance = cell.guidance;
    cfg.sigma_scale = cell.sigma_scale;
    mine::MiningResult result =
        mine::mine_dataset(model, scenes, cfg, xi, mine::ScoreFn::kPdms, seed);
    out.emplace_back(cell, result.stats);
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::string canon;
  canon += "seeds=";
  for (std::uint64_t s : c.seeds) canon += std::to_string(s) + ";";
  canon += "train=" + std::to_string(c.train_count);
  canon += ",test=" + std::to_string(c.test_count);
  canon += ",difficulty=" + std::string(scene::to_string(c.difficulty));
  canon += ",xi=" + f9(c.xi);
  canon += ",w=" + f9(c.sampling.guidance);
  canon += ",steps=" + std::to_string(c.sampling.steps);
  canon += ",n=" + std::to_string(c.sampling.candidates);
  canon += ",sigma_scale=" + f9(c.sampling.sigma_scale);
  canon += ",imi=" + f9(c.weights.imitation);
  canon += ",sem=" + f9(c.weights.semantic);
  canon += ",rd=" + f9(c.weights.repulsion);
  canon += ",clip=" + f9(c.weights.clip);
  canon += ",score=" + std::string(mine::to_string(c.score_fn));
  canon += ",epochs=" + std::to_string(c.epochs);
  canon += ",ticks=" + std::to_string(c.closed_loop_ticks);

  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::vector<scene::Scene> generate_scene_set(std::uint64_t seed, std::uint64_t first_id, int count,
                                             scene::Difficulty difficulty) {
  std::vector<std::optional<scene::Scene>> slots(static_cast<std::size_t>(count));
  parallel_for(slots.size(), [&](std::size_t i) {
    try {
      slots[i] = scene::generate_scene(seed, first_id + i, difficulty);
    } catch (const ExpertSynthesisFailed&) {
      slots[i] = std::nullopt;  // infeasible draw; skip this id
    }
  });
  std::vector<scene::Scene> out;
  out.reserve(slots.size());
  for (auto& slot : slots)
    if (slot) out.push_back(std::move(*slot));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

namespace {

void note_stage(const std::string& stage, const std::filesystem::path& artifact, bool reused) {
  std::cerr << "[pipeline] " << stage << (reused ? ": using existing " : ": wrote ")
            << artifact.string() << "\n";
}

}  // namespace

PipelineSummary full_pipeline(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  if (config.out_dir.empty()) throw ConfigError("pipeline needs an output directory");
  if (config.seeds.empty()) throw ConfigError("pipeline needs at least one seed");
  if (config.train_count < 100) throw ConfigError("pipeline needs at least 100 training scenes");
  auto t_begin = std::chrono::steady_clock::now();

  fs::create_directories(config.out_dir);
  PipelineSummary summary;
  summary.hash = config_hash(config);

  for (std::uint64_t seed : config.seeds) {
    fs::path seed_dir = config.out_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(seed_dir);

    // Stage: gen-scenes. Train and test id ranges are disjoint.
    fs::path train_file = seed_dir / "scenes_train.json";
    fs::path test_file = seed_dir / "scenes_test.json";
    if (!fs::exists(train_file)) {
      auto scenes = generate_scene_set(seed, 0, config.train_count, config.difficulty);
      scene::write_scenes(train_file, scenes);
      note_stage("gen-scenes", train_file, false);
    } else {
      note_stage("gen-scenes", train_file, true);
    }
    if (!fs::exists(test_file)) {
      auto scenes = generate_scene_set(seed, static_cast<std::uint64_t>(config.train_count),
                                       config.test_count, config.difficulty);
      scene::write_scenes(test_file, scenes);
      note_stage("gen-scenes", test_file, false);
    } else {
      note_stage("gen-scenes", test_file, true);
    }
    // Downstream stages consume the persisted files, never in-memory copies,
    // so a resumed run sees exactly what a fresh run sees.
    std::vector<scene::Scene> train_scenes = scene::read_scenes(train_file);
    std::vector<scene::Scene> test_scenes = scene::read_scenes(test_file);

    // Stage: train-generator.
    fs::path gen_ckpt = seed_dir / "generator.ckpt";
    if (!fs::exists(gen_ckpt)) {
      flow::GeneratorTrainResult r = flow::train_generator(train_scenes, seed, config.epochs);
      if (r.diverged_epoch)
        throw NonFiniteGradient("stage train-generator: diverged at epoch " +
                                std::to_string(*r.diverged_epoch));
      learn::save_checkpoint(gen_ckpt, flow::to_checkpoint(r.model, config.epochs, seed));
      note_stage("train-generator", gen_ckpt, false);
    } else {
      note_stage("train-generator", gen_ckpt, true);
    }
    flow::FlowModel model = flow::from_checkpoint(learn::load_checkpoint(gen_ckpt));

    // Stage: mine-negatives.
    fs::path neg_file = seed_dir / "negatives.json";
    fs::path stats_file = seed_dir / "mining_stats.csv";
    if (!fs::exists(neg_file)) {
      mine::MiningResult mined =
          mine::mine_dataset(model, train_scenes, config.sampling, config.xi, config.score_fn, seed);
      mine::write_negatives(neg_file, mined.records);
      write_text(stats_file, mine::stats_csv_header() +
                                 mine::stats_csv_row(config.sampling.candidates,
                                                     config.sampling.guidance,
                                                     config.sampling.sigma_scale, mined.stats));
      note_stage("mine-negatives", neg_file, false);
    } else {
      note_stage("mine-negatives", neg_file, true);
    }
    std::vector<std::optional<mine::NegativeRecord>> negatives = mine::read_negatives(neg_file);

    // Stage: train-policy, baseline (imitation only) then RD.
    fs::path base_ckpt = seed_dir / "policy_baseline.ckpt";
    if (!fs::exists(base_ckpt)) {
      policy::LossWeights base_weights = config.weights;
      base_weights.repulsion = 0.0;
      policy::PolicyTrainResult r =
          policy::train_policy(train_scenes, {}, base_weights, seed, config.epochs);
      if (r.diverged_epoch)
        throw NonFiniteGradient("stage train-policy(baseline): diverged at epoch " +
                                std::to_string(*r.diverged_epoch));
      learn::save_checkpoint(base_ckpt, policy::to_checkpoint(r.policy, config.epochs, seed));
      note_stage("train-policy baseline", base_ckpt, false);
    } else {
      note_stage("train-policy baseline", base_ckpt, true);
    }
    fs::path rd_ckpt = seed_dir / "policy_rd.ckpt";
    if (!fs::exists(rd_ckpt)) {
      policy::PolicyTrainResult r =
          policy::train_policy(train_scenes, negatives, config.weights, seed, config.epochs);
      if (r.diverged_epoch)
        throw NonFiniteGradient("stage train-policy(rd): diverged at epoch " +
                                std::to_string(*r.diverged_epoch));
      learn::save_checkpoint(rd_ckpt, policy::to_checkpoint(r.policy, config.epochs, seed));
      note_stage("train-policy rd", rd_ckpt, false);
    } else {
      note_stage("train-policy rd", rd_ckpt, true);
    }
    policy::Policy baseline = policy::from_checkpoint(learn::load_checkpoint(base_ckpt));
    policy::Policy rd = policy::from_checkpoint(learn::load_checkpoint(rd_ckpt));

    // Stage: evaluate both on the held-out set.
    std::uint64_t hash = summary.hash;
    std::uint64_t seed_list[1] = {seed};
    Report base_report = evaluate(baseline, test_scenes);
    Report rd_report = evaluate(rd, test_scenes);
    write_text(seed_dir / "eval_baseline.csv", base_report.to_csv());
    write_text(seed_dir / "eval_baseline.json", base_report.summary_json(hash, seed_list));
    write_text(seed_dir / "eval_rd.csv", rd_report.to_csv());
    write_text(seed_dir / "eval_rd.json", rd_report.summary_json(hash, seed_list));

    // Stage: closed loop both.
    ClosedLoopReport base_cl = run_closed_loop(baseline, test_scenes, config.closed_loop_ticks);
    ClosedLoopReport rd_cl = run_closed_loop(rd, test_scenes, config.closed_loop_ticks);
    write_text(seed_dir / "closed_loop_baseline.csv", base_cl.to_csv());
    write_text(seed_dir / "closed_loop_rd.csv", rd_cl.to_csv());

    SeedOutcome outcome;
    outcome.seed = seed;
    outcome.baseline = base_report.aggregate;
    outcome.rd_trained = rd_report.aggregate;
    outcome.baseline_hd = base_cl.mean_hd_score;
    outcome.rd_hd = rd_cl.mean_hd_score;
    std::size_t mined_count = 0;
    for (const auto& r : negatives)
      if (r) ++mined_count;
    outcome.prop_sample =
        negatives.empty() ? 0.0
                          : static_cast<double>(mined_count) / static_cast<double>(negatives.size());
    summary.per_seed.push_back(outcome);
  }

  for (const SeedOutcome& o : summary.per_seed) {
    summary.mean_baseline_pdms += o.baseline.pdms;
    summary.mean_rd_pdms += o.rd_trained.pdms;
  }
  double n_seeds = static_cast<double>(summary.per_seed.size());
  summary.mean_baseline_pdms /= n_seeds;
  summary.mean_rd_pdms /= n_seeds;
  summary.mean_gain = summary.mean_rd_pdms - summary.mean_baseline_pdms;

  // Comparison report across seeds.
  {
    std::string csv = "seed,baseline_pdms,rd_pdms,gain,baseline_hd,rd_hd,prop_sample\n";
    for (const SeedOutcome& o : summary.per_seed) {
      csv += std::to_string(o.seed) + ',' + f6(o.baseline.pdms) + ',' + f6(o.rd_trained.pdms) +
             ',' + f6(o.rd_trained.pdms - o.baseline.pdms) + ',' + f6(o.baseline_hd) + ',' +
             f6(o.rd_hd) + ',' + f6(o.prop_sample) + '\n';
    }
    write_text(config.out_dir / "comparison.csv", csv);

    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(summary.hash));
    std::string json = "{\"config_hash\":\"";
    json += hex;
    json += "\",\"mean_baseline_pdms\":" + f9(summary.mean_baseline_pdms);
    json += ",\"mean_rd_pdms\":" + f9(summary.mean_rd_pdms);
    json += ",\"mean_gain\":" + f9(summary.mean_gain);
    json += ",\"seeds\":[";
    for (std::size_t i = 0; i < summary.per_seed.size(); ++i) {
      if (i) json += ',';
      json += std::to_string(summary.per_seed[i].seed);
    }
    json += "]}\n";
    write_text(config.out_dir / "comparison.json", json);
  }

  // Wall time lives outside the deterministic report set.
  {
    auto t_end = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t_end - t_begin).count();
    write_text(config.out_dir / "run_info.json",
               "{\"wall_time_seconds\":" + f6(secs) + "}\n");
  }
  return summary;
}

}  // namespace hnplan::harness
