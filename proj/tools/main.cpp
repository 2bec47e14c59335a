#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hnplan/harness.hpp"

using namespace hnplan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    seeds.push_back(std::stoull(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

// "64:1.0:1.0,64:0.5:2.0" -> grid cells (n : w : sigma_scale).
std::vector<harness::MiningGridCell> parse_cells(const std::string& text) {
  std::vector<harness::MiningGridCell> cells;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string cell = text.substr(pos, comma - pos);
    std::size_t c1 = cell.find(':');
    std::size_t c2 = cell.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("grid cell must be n:w:sigma_scale, got " + cell);
    cells.push_back({std::stoi(cell.substr(0, c1)), std::stod(cell.substr(c1 + 1, c2 - c1 - 1)),
                     std::stod(cell.substr(c2 + 1))});
    pos = comma + 1;
  }
  if (cells.empty()) throw ConfigError("empty mining grid");
  return cells;
}

struct WeightTriple {
  double imi, sem, rd;
};

std::vector<WeightTriple> parse_weight_list(const std::string& text) {
  std::vector<WeightTriple> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string cell = text.substr(pos, comma - pos);
    std::size_t c1 = cell.find(':');
    std::size_t c2 = cell.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("weights must be imi:sem:rd, got " + cell);
    out.push_back({std::stod(cell.substr(0, c1)), std::stod(cell.substr(c1 + 1, c2 - c1 - 1)),
                   std::stod(cell.substr(c2 + 1))});
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty weight list");
  return out;
}

std::string fnum(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

policy::Policy load_policy(const std::string& path) {
  return policy::from_checkpoint(learn::load_checkpoint(path));
}

flow::FlowModel load_generator(const std::string& path) {
  return flow::from_checkpoint(learn::load_checkpoint(path));
}

int run(int argc, char** argv) {
  CLI::App app{"Failure-aware contrastive imitation learning on synthetic driving scenes"};
  app.require_subcommand(1);

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "Synthesize a deterministic scene set");
  std::uint64_t gen_seed = 0;
  int gen_count = 200;
  std::uint64_t gen_start_id = 0;
  std::string gen_difficulty = "medium";
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Global seed");
  gen->add_option("--count", gen_count, "Scene ids to draw")->check(CLI::PositiveNumber);
  gen->add_option("--start-id", gen_start_id, "First scene id");
  gen->add_option("--difficulty", gen_difficulty)->check(CLI::IsMember({"easy", "medium", "hard"}));
  gen->add_option("--out", gen_out, "Output scene file")->required();

  // train-generator
  auto* tg = app.add_subcommand("train-generator", "Train the flow-matching generator");
  std::string tg_scenes, tg_out;
  std::uint64_t tg_seed = 0;
  int tg_epochs = 100;
  tg->add_option("--scenes", tg_scenes)->required();
  tg->add_option("--seed", tg_seed);
  tg->add_option("--epochs", tg_epochs)->check(CLI::PositiveNumber);
  tg->add_option("--out", tg_out, "Checkpoint path")->required();

  // sample
  auto* sa = app.add_subcommand("sample", "Sample candidate trajectories per scene");
  std::string sa_ckpt, sa_scenes, sa_out;
  double sa_w = 0.5, sa_scale = 2.0;
  int sa_steps = 5, sa_n = 64;
  std::uint64_t sa_seed = 0;
  sa->add_option("--ckpt", sa_ckpt)->required();
  sa->add_option("--scenes", sa_scenes)->required();
  sa->add_option("--w", sa_w, "CFG guidance scale");
  sa->add_option("--sigma-scale", sa_scale, "Sampling noise multiple of the prior");
  sa->add_option("--steps", sa_steps)->check(CLI::PositiveNumber);
  sa->add_option("--n", sa_n)->check(CLI::PositiveNumber);
  sa->add_option("--seed", sa_seed);
  sa->add_option("--out", sa_out)->required();

  // mine-negatives
  auto* mn = app.add_subcommand("mine-negatives", "Two-stage hard-negative selection");
  std::string mn_ckpt, mn_scenes, mn_out, mn_stats, mn_score = "pdms";
  double mn_xi = 0.3, mn_w = 0.5, mn_scale = 2.0;
  int mn_steps = 5, mn_n = 64;
  std::uint64_t mn_seed = 0;
  mn->add_option("--ckpt", mn_ckpt)->required();
  mn->add_option("--scenes", mn_scenes)->required();
  mn->add_option("--xi", mn_xi, "Unsafe threshold (strict <)");
  mn->add_option("--score", mn_score)->check(CLI::IsMember({"pdms", "dac", "ttc"}));
  mn->add_option("--w", mn_w);
  mn->add_option("--sigma-scale", mn_scale);
  mn->add_option("--steps", mn_steps)->check(CLI::PositiveNumber);
  mn->add_option("--n", mn_n)->check(CLI::PositiveNumber);
  mn->add_option("--seed", mn_seed);
  mn->add_option("--out", mn_out, "Negative set file")->required();
  mn->add_option("--stats-out", mn_stats, "Mining stats CSV");

  // train-policy
  auto* tp = app.add_subcommand("train-policy", "Train the planner");
  std::string tp_scenes, tp_negatives, tp_out;
  policy::LossWeights tp_weights;
  std::uint64_t tp_seed = 0;
  int tp_epochs = 100;
  tp->add_option("--scenes", tp_scenes)->required();
  tp->add_option("--negatives", tp_negatives, "Omit for the imitation-only baseline");
  tp->add_option("--lambda-imi", tp_weights.imitation);
  tp->add_option("--lambda-sem", tp_weights.semantic);
  tp->add_option("--lambda-rd", tp_weights.repulsion);
  tp->add_option("--clip", tp_weights.clip);
  tp->add_flag("--allow-unstable", tp_weights.allow_unstable,
               "Permit lambda-rd >= lambda-imi (known-divergent regime)");
  tp->add_option("--seed", tp_seed);
  tp->add_option("--epochs", tp_epochs)->check(CLI::PositiveNumber);
  tp->add_option("--out", tp_out, "Checkpoint path")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Open-loop evaluation of a policy checkpoint");
  std::string ev_ckpt, ev_scenes, ev_out, ev_summary, ev_plot;
  bool ev_expert = false;
  ev->add_option("--ckpt", ev_ckpt);
  ev->add_option("--scenes", ev_scenes)->required();
  ev->add_option("--out", ev_out, "Per-scene CSV")->required();
  ev->add_option("--summary-out", ev_summary, "Aggregate JSON");
  ev->add_option("--plot-data", ev_plot, "Gnuplot-ready per-scene columns");
  ev->add_flag("--expert", ev_expert, "Replay the stored experts instead of a checkpoint");

  // closed-loop
  auto* cl = app.add_subcommand("closed-loop", "Closed-loop rollouts with reactive agents");
  std::string cl_ckpt, cl_scenes, cl_out;
  int cl_ticks = 32;
  bool cl_expert = false;
  cl->add_option("--ckpt", cl_ckpt);
  cl->add_option("--scenes", cl_scenes)->required();
  cl->add_option("--ticks", cl_ticks)->check(CLI::PositiveNumber);
  cl->add_option("--out", cl_out)->required();
  cl->add_flag("--expert", cl_expert, "Roll out the privileged planner");

  // ablate-mining
  auto* am = app.add_subcommand("ablate-mining", "Mining stats across a sampling grid");
  std::string am_ckpt, am_scenes, am_out;
  std::string am_cells = "64:1.0:1.0,64:0.5:1.0,64:0.5:2.0";
  double am_xi = 0.3;
  std::uint64_t am_seed = 0;
  am->add_option("--ckpt", am_ckpt)->required();
  am->add_option("--scenes", am_scenes)->required();
  am->add_option("--cells", am_cells, "Comma-separated n:w:sigma_scale cells");
  am->add_option("--xi", am_xi);
  am->add_option("--seed", am_seed);
  am->add_option("--out", am_out)->required();

  // ablate-weights
  auto* aw = app.add_subcommand("ablate-weights", "Train and evaluate a loss-weight grid");
  std::string aw_scenes, aw_negatives, aw_test, aw_out;
  std::string aw_weights = "10:1:5,10:1:0,1:1:1";
  std::uint64_t aw_seed = 0;
  int aw_epochs = 100;
  double aw_clip = 5.0;
  aw->add_option("--scenes", aw_scenes)->required();
  aw->add_option("--negatives", aw_negatives)->required();
  aw->add_option("--test-scenes", aw_test)->required();
  aw->add_option("--weights", aw_weights, "Comma-separated imi:sem:rd triples");
  aw->add_option("--clip", aw_clip);
  aw->add_option("--seed", aw_seed);
  aw->add_option("--epochs", aw_epochs)->check(CLI::PositiveNumber);
  aw->add_option("--out", aw_out)->required();

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Full two-stage experiment");
  harness::ExperimentConfig cfg;
  std::string pl_seeds = "0,1,2", pl_difficulty = "medium", pl_out, pl_score = "pdms";
  pl->add_option("--seeds", pl_seeds, "Comma-separated seed list");
  pl->add_option("--train", cfg.train_count)->check(CLI::PositiveNumber);
  pl->add_option("--test", cfg.test_count)->check(CLI::PositiveNumber);
  pl->add_option("--difficulty", pl_difficulty)->check(CLI::IsMember({"easy", "medium", "hard"}));
  pl->add_option("--xi", cfg.xi);
  pl->add_option("--w", cfg.sampling.guidance);
  pl->add_option("--sigma-scale", cfg.sampling.sigma_scale);
  pl->add_option("--steps", cfg.sampling.steps)->check(CLI::PositiveNumber);
  pl->add_option("--n", cfg.sampling.candidates)->check(CLI::PositiveNumber);
  pl->add_option("--lambda-imi", cfg.weights.imitation);
  pl->add_option("--lambda-sem", cfg.weights.semantic);
  pl->add_option("--lambda-rd", cfg.weights.repulsion);
  pl->add_option("--clip", cfg.weights.clip);
  pl->add_option("--score", pl_score)->check(CLI::IsMember({"pdms", "dac", "ttc"}));
  pl->add_option("--epochs", cfg.epochs)->check(CLI::PositiveNumber);
  pl->add_option("--ticks", cfg.closed_loop_ticks)->check(CLI::PositiveNumber);
  pl->add_option("--out-dir", pl_out)->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    auto scenes = harness::generate_scene_set(gen_seed, gen_start_id, gen_count,
                                              scene::difficulty_from_string(gen_difficulty));
    scene::write_scenes(gen_out, scenes);
    std::cout << "wrote " << scenes.size() << " scenes (skipped "
              << gen_count - static_cast<int>(scenes.size()) << ") to " << gen_out << "\n";
    return kExitOk;
  }

  if (tg->parsed()) {
    auto scenes = scene::read_scenes(tg_scenes);
    flow::GeneratorTrainResult r = flow::train_generator(scenes, tg_seed, tg_epochs);
    if (r.diverged_epoch) {
      std::cerr << "training diverged at epoch " << *r.diverged_epoch << "\n";
      return kExitDivergence;
    }
    learn::save_checkpoint(tg_out, flow::to_checkpoint(r.model, tg_epochs, tg_seed));
    std::cout << "first-epoch loss " << fnum(r.first_epoch_loss) << ", last-10 mean "
              << fnum(r.last_epochs_loss) << "; checkpoint at " << tg_out << "\n";
    return kExitOk;
  }

  if (sa->parsed()) {
    flow::FlowModel model = load_generator(sa_ckpt);
    auto scenes = scene::read_scenes(sa_scenes);
    flow::SamplingConfig scfg{sa_w, sa_steps, sa_n, sa_scale};
    std::string out = "[\n";
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      auto candidates = flow::sample_candidates(model, scenes[i], scfg, sa_seed);
      out += "{\"scene_id\":" + std::to_string(scenes[i].scene_id) + ",\"candidates\":[";
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (c) out += ',';
        out += "{\"degenerate\":";
        out += candidates[c].degenerate ? "true" : "false";
        out += ",\"waypoints\":[";
        for (int k = 0; k < kHorizonSteps; ++k) {
          const auto& p = candidates[c].trajectory.points[k];
          if (k) out += ',';
          out += '[' + fnum(p.x) + ',' + fnum(p.y) + ',' + fnum(p.h) + ']';
        }
        out += "]}";
      }
      out += "]}";
      out += i + 1 < scenes.size() ? ",\n" : "\n";
    }
    out += "]\n";
    harness::write_text(sa_out, out);
    std::cout << "sampled " << sa_n << " candidates for " << scenes.size() << " scenes\n";
    return kExitOk;
  }

  if (mn->parsed()) {
    flow::FlowModel model = load_generator(mn_ckpt);
    auto scenes = scene::read_scenes(mn_scenes);
    flow::SamplingConfig scfg{mn_w, mn_steps, mn_n, mn_scale};
    mine::MiningResult result = mine::mine_dataset(model, scenes, scfg, mn_xi,
                                                   mine::score_fn_from_string(mn_score), mn_seed);
    mine::write_negatives(mn_out, result.records);
    if (!mn_stats.empty())
      harness::write_text(mn_stats, mine::stats_csv_header() +
                                        mine::stats_csv_row(mn_n, mn_w, mn_scale, result.stats));
    std::cout << "mined " << result.stats.with_negative << "/" << result.stats.scenes
              << " scenes (prop_sample " << fnum(result.stats.prop_sample) << ")\n";
    return kExitOk;
  }

  if (tp->parsed()) {
    auto scenes = scene::read_scenes(tp_scenes);
    std::vector<std::optional<mine::NegativeRecord>> negatives;
    if (!tp_negatives.empty()) negatives = mine::read_negatives(tp_negatives);
    policy::PolicyTrainResult r = policy::train_policy(scenes, negatives, tp_weights, tp_seed, tp_epochs);
    if (r.diverged_epoch) {
      std::cerr << "training diverged at epoch " << *r.diverged_epoch << "\n";
      return kExitDivergence;
    }
    learn::save_checkpoint(tp_out, policy::to_checkpoint(r.policy, tp_epochs, tp_seed));
    std::cout << "first-epoch loss " << fnum(r.first_epoch_loss) << ", last-10 mean "
              << fnum(r.last_epochs_loss) << "; checkpoint at " << tp_out << "\n";
    return kExitOk;
  }

  if (ev->parsed()) {
    auto scenes = scene::read_scenes(ev_scenes);
    harness::Report report;
    if (ev_expert) {
      report = harness::evaluate_scenes(scenes, [](const scene::Scene& s) { return s.expert; });
    } else {
      if (ev_ckpt.empty()) throw ConfigError("evaluate needs --ckpt or --expert");
      policy::Policy p = load_policy(ev_ckpt);
      report = harness::evaluate(p, scenes);
    }
    harness::write_text(ev_out, report.to_csv());
    if (!ev_summary.empty())
      harness::write_text(ev_summary, report.summary_json(0, {}));
    if (!ev_plot.empty()) {
      std::string plot = "# scene_id nc dac ep ttc comf pdms\n";
      for (const auto& row : report.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%llu %.6f %.6f %.6f %.6f %.6f %.6f\n",
                      static_cast<unsigned long long>(row.scene_id), row.breakdown.nc,
                      row.breakdown.dac, row.breakdown.ep, row.breakdown.ttc, row.breakdown.comf,
                      row.breakdown.pdms);
        plot += buf;
      }
      harness::write_text(ev_plot, plot);
    }
    std::cout << "aggregate pdms " << fnum(report.aggregate.pdms) << " over "
              << report.rows.size() << " scenes\n";
    return kExitOk;
  }

  if (cl->parsed()) {
    auto scenes = scene::read_scenes(cl_scenes);
    harness::ClosedLoopReport report;
    if (cl_expert) {
      scene::PurePursuitPlanner planner;
      report = harness::run_closed_loop(planner, scenes, cl_ticks);
    } else {
      if (cl_ckpt.empty()) throw ConfigError("closed-loop needs --ckpt or --expert");
      policy::Policy p = load_policy(cl_ckpt);
      report = harness::run_closed_loop(p, scenes, cl_ticks);
    }
    harness::write_text(cl_out, report.to_csv());
    std::cout << "mean rc " << fnum(report.mean_rc) << ", mean hd-score "
              << fnum(report.mean_hd_score) << "\n";
    return kExitOk;
  }

  if (am->parsed()) {
    flow::FlowModel model = load_generator(am_ckpt);
    auto scenes = scene::read_scenes(am_scenes);
    auto cells = parse_cells(am_cells);
    auto rows = harness::ablate_mining(model, scenes, cells, am_xi, am_seed);
    std::string csv = mine::stats_csv_header();
    for (const auto& [cell, stats] : rows)
      csv += mine::stats_csv_row(cell.candidates, cell.guidance, cell.sigma_scale, stats);
    harness::write_text(am_out, csv);
    std::cout << csv;
    return kExitOk;
  }

  if (aw->parsed()) {
    auto scenes = scene::read_scenes(aw_scenes);
    auto negatives = mine::read_negatives(aw_negatives);
    auto test_scenes = scene::read_scenes(aw_test);
    std::string csv = "lambda_imi,lambda_sem,lambda_rd,nc,dac,ep,ttc,comf,pdms,diverged_epoch\n";
    for (const WeightTriple& w : parse_weight_list(aw_weights)) {
      policy::LossWeights weights;
      weights.imitation = w.imi;
      weights.semantic = w.sem;
      weights.repulsion = w.rd;
      weights.clip = aw_clip;
      weights.allow_unstable = true;  // the grid deliberately probes bad regimes
      policy::PolicyTrainResult r = policy::train_policy(scenes, negatives, weights, aw_seed, aw_epochs);
      harness::Report report = harness::evaluate(r.policy, test_scenes);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%g,%g,%g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n", w.imi, w.sem,
                    w.rd, report.aggregate.nc, report.aggregate.dac, report.aggregate.ep,
                    report.aggregate.ttc, report.aggregate.comf, report.aggregate.pdms,
                    r.diverged_epoch ? std::to_string(*r.diverged_epoch).c_str() : "");
      csv += buf;
    }
    harness::write_text(aw_out, csv);
    std::cout << csv;
    return kExitOk;
  }

  if (pl->parsed()) {
    cfg.seeds = parse_seed_list(pl_seeds);
    cfg.difficulty = scene::difficulty_from_string(pl_difficulty);
    cfg.score_fn = mine::score_fn_from_string(pl_score);
    cfg.out_dir = pl_out;
    harness::PipelineSummary summary = harness::full_pipeline(cfg);
    std::cout << "mean baseline pdms " << fnum(summary.mean_baseline_pdms) << "\n"
              << "mean rd pdms       " << fnum(summary.mean_rd_pdms) << "\n"
              << "mean gain          " << fnum(summary.mean_gain) << "\n";
    return kExitOk;
  }

  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonFiniteGradient& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
