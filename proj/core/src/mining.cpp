#include "hnplan/mining.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hnplan/parallel.hpp"
#include "json.hpp"

namespace hnplan::mine {

const char* to_string(ScoreFn fn) {
  switch (fn) {
    case ScoreFn::kPdms: return "pdms";
    case ScoreFn::kDacOnly: return "dac";
    case ScoreFn::kTtcOnly: return "ttc";
  }
  return "pdms";
}

ScoreFn score_fn_from_string(const std::string& s) {
  if (s == "pdms") return ScoreFn::kPdms;
  if (s == "dac") return ScoreFn::kDacOnly;
  if (s == "ttc") return ScoreFn::kTtcOnly;
  throw ConfigError("unknown score function: " + s);
}

double selection_value(const score::ScoreBreakdown& b, ScoreFn fn) {
  switch (fn) {
    case ScoreFn::kPdms: return b.pdms;
    case ScoreFn::kDacOnly: return b.dac;
    case ScoreFn::kTtcOnly: return b.ttc;
  }
  return b.pdms;
}

std::vector<std::size_t> filter_unsafe(std::span<const double> scores, double xi) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] < xi) out.push_back(i);
  return out;
}

std::vector<std::size_t> filter_unsafe(std::span<const score::ScoreBreakdown> breakdowns,
                                       double xi, ScoreFn fn) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < breakdowns.size(); ++i)
    if (selection_value(breakdowns[i], fn) < xi) out.push_back(i);
  return out;
}

std::optional<NegativeRecord> select_negative(std::span<const flow::Candidate> candidates,
                                              std::span<const score::ScoreBreakdown> breakdowns,
                                              const traj::Trajectory& expert, double xi,
                                              ScoreFn fn) {
  if (candidates.size() != breakdowns.size())
    throw ShapeMismatch("select_negative: candidates/breakdowns size mismatch");
  std::vector<std::size_t> unsafe = filter_unsafe(breakdowns, xi, fn);
  if (unsafe.empty()) return std::nullopt;

  std::size_t best = unsafe.front();
  double best_dist = traj::l2_distance(candidates[best].trajectory, expert);
  for (std::size_t j = 1; j < unsafe.size(); ++j) {
    std::size_t i = unsafe[j];
    double d = traj::l2_distance(candidates[i].trajectory, expert);
    if (d < best_dist) {  // strict: ties keep the lowest index
      best_dist = d;
      best = i;
    }
  }

  NegativeRecord rec;
  rec.negative = candidates[best].trajectory;
  rec.negative_score = breakdowns[best];
  rec.expert_distance = best_dist;
  rec.selection_score = selection_value(breakdowns[best], fn);
  rec.score_fn = fn;
  rec.xi = xi;
  return rec;
}

MiningResult mine_dataset(const flow::FlowModel& model, std::span<const scene::Scene> scenes,
                          const flow::SamplingConfig& cfg, double xi, ScoreFn fn,
                          std::uint64_t seed) {
  if (xi < 0.0 || xi > 1.0) throw ConfigError("xi must lie in [0, 1]");

  MiningResult result;
  result.records.resize(scenes.size());
  struct PerScene {
    double pdms_max = 0.0;
    double pdms_std = 0.0;
  };
  std::vector<PerScene> per_scene(scenes.size());

  parallel_for(scenes.size(), [&](std::size_t i) {
    const scene::Scene& s = scenes[i];
    std::vector<flow::Candidate> candidates = flow::sample_candidates(model, s, cfg, seed);

    std::vector<score::ScoreBreakdown> breakdowns(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
      breakdowns[c] = candidates[c].degenerate ? score::ScoreBreakdown{}
                                               : score::score(s, candidates[c].trajectory);

    double sum = 0.0, sum_sq = 0.0, pmax = 0.0;
    for (const auto& b : breakdowns) {
      sum += b.pdms;
      sum_sq += b.pdms * b.pdms;
      pmax = std::max(pmax, b.pdms);
    }
    double n = static_cast<double>(breakdowns.size());
    double mean = sum / n;
    per_scene[i].pdms_max = pmax;
    per_scene[i].pdms_std = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));

    auto rec = select_negative(candidates, breakdowns, s.expert, xi, fn);
    if (rec) {
      rec->scene_id = s.scene_id;
      rec->guidance = cfg.guidance;
      rec->sigma_scale = cfg.sigma_scale;
      rec->candidates = cfg.candidates;
      result.records[i] = std::move(rec);
    }
  });

  MiningStats& st = result.stats;
  st.scenes = scenes.size();
  double dist_sum = 0.0, pdms_nega_sum = 0.0, max_sum = 0.0, std_sum = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    max_sum += per_scene[i].pdms_max;
    std_sum += per_scene[i].pdms_std;
    if (result.records[i]) {
      ++st.with_negative;
      dist_sum += result.records[i]->expert_distance;
      pdms_nega_sum += result.records[i]->negative_score.pdms;
    }
  }
  if (st.scenes > 0) {
    st.prop_sample = static_cast<double>(st.with_negative) / static_cast<double>(st.scenes);
    st.pdms_max = 100.0 * max_sum / static_cast<double>(st.scenes);
    st.pdms_std = std_sum / static_cast<double>(st.scenes);
  }
  if (st.with_negative > 0) {
    st.dist_nega = dist_sum / static_cast<double>(st.with_negative);
    st.pdms_nega = 100.0 * pdms_nega_sum / static_cast<double>(st.with_negative);
  }
  return result;
}

namespace {

std::string fnum(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string negatives_to_json(std::span<const std::optional<NegativeRecord>> records) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i]) {
      out += "null";
    } else {
      const NegativeRecord& r = *records[i];
      out += "{\"scene_id\":" + std::to_string(r.scene_id);
      out += ",\"waypoints\":[";
      for (int k = 0; k < kHorizonSteps; ++k) {
        if (k) out += ',';
        out += '[';
        out += fnum(r.negative.points[k].x);
        out += ',';
        out += fnum(r.negative.points[k].y);
        out += ',';
        out += fnum(r.negative.points[k].h);
        out += ']';
      }
      out += "]";
      const score::ScoreBreakdown& b = r.negative_score;
      out += ",\"score\":{\"nc\":" + fnum(b.nc) + ",\"dac\":" + fnum(b.dac) +
             ",\"ep\":" + fnum(b.ep) + ",\"ttc\":" + fnum(b.ttc) + ",\"comf\":" + fnum(b.comf) +
             ",\"pdms\":" + fnum(b.pdms) + "}";
      out += ",\"expert_distance\":" + fnum(r.expert_distance);
      out += ",\"selection\":{\"score_fn\":\"" + std::string(to_string(r.score_fn)) +
             "\",\"value\":" + fnum(r.selection_score) + "}";
      out += ",\"config\":{\"w\":" + fnum(r.guidance) + ",\"sigma_scale\":" + fnum(r.sigma_scale) +
             ",\"n\":" + std::to_string(r.candidates) + ",\"xi\":" + fnum(r.xi) + "}";
      out += "}";
    }
    out += i + 1 < records.size() ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

void write_negatives(const std::filesystem::path& path,
                     std::span<const std::optional<NegativeRecord>> records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << negatives_to_json(records);
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<std::optional<NegativeRecord>> read_negatives(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("parse error in " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw IoError("negative file must hold a JSON array: " + path.string());

  std::vector<std::optional<NegativeRecord>> records;
  records.reserve(doc.size());
  try {
    for (const auto& jr : doc) {
      if (jr.is_null()) {
        records.emplace_back(std::nullopt);
        continue;
      }
      NegativeRecord r;
      r.scene_id = jr.at("scene_id").get<std::uint64_t>();
      const auto& wps = jr.at("waypoints");
      for (int k = 0; k < kHorizonSteps; ++k) {
        r.negative.points[k].x = wps.at(k).at(0).get<double>();
        r.negative.points[k].y = wps.at(k).at(1).get<double>();
        r.negative.points[k].h = wps.at(k).at(2).get<double>();
      }
      const auto& sc = jr.at("score");
      r.negative_score = {sc.at("nc").get<double>(), sc.at("dac").get<double>(),
                          sc.at("ep").get<double>(), sc.at("ttc").get<double>(),
                          sc.at("comf").get<double>(), sc.at("pdms").get<double>()};
      r.expert_distance = jr.at("expert_distance").get<double>();
      r.selection_score = jr.at("selection").at("value").get<double>();
      r.score_fn = score_fn_from_string(jr.at("selection").at("score_fn").get<std::string>());
      r.guidance = jr.at("config").at("w").get<double>();
      r.sigma_scale = jr.at("config").at("sigma_scale").get<double>();
      r.candidates = jr.at("config").at("n").get<int>();
      r.xi = jr.at("config").at("xi").get<double>();
      records.emplace_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad negative record in " + path.string() + ": " + e.what());
  }
  return records;
}

std::string stats_csv_header() {
  return "n,w,sigma_scale,prop_sample,pdms_max,pdms_std,dist_nega,pdms_nega,scenes,with_negative\n";
}

std::string stats_csv_row(int candidates, double guidance, double sigma_scale,
                          const MiningStats& stats) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu\n", candidates,
                guidance, sigma_scale, stats.prop_sample, stats.pdms_max, stats.pdms_std,
                stats.dist_nega, stats.pdms_nega, stats.scenes, stats.with_negative);
  return buf;
}

}  // namespace hnplan::mine
