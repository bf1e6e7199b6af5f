#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crmgrasp/agent.hpp"
#include "crmgrasp/config.hpp"
#include "crmgrasp/taxonomy.hpp"

namespace crmgrasp::harness {

// Shortest round-trippable decimal representation, so CSV output is
// deterministic for a given platform.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

inline std::vector<TaskSpec> load_suite(const config::ExperimentConfig& cfg) {
  if (cfg.task_file.empty()) return taxonomy::desk_lift_pull_suite();
  return load_tasks(cfg.task_file);
}

inline constexpr const char* kCurveHeader =
    "episode,timestep,success_100,ep_len_100,lr,loss_pi,loss_v,stage_entry_counts";

// stage_entry_counts is semicolon-joined so the CSV stays one cell per column
inline void write_curve_csv(const std::string& path, const std::vector<agent::EpisodeLog>& log) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("harness: cannot write " + path);
  f << kCurveHeader << "\n";
  for (const auto& e : log) {
    f << e.episode << "," << e.timestep << "," << format_double(e.success_100) << ","
      << format_double(e.ep_len_100) << "," << format_double(e.lr) << ","
      << format_double(e.loss_pi) << "," << format_double(e.loss_v) << ",";
    for (std::size_t i = 0; i < e.stage_entries.size(); ++i)
      f << (i ? ";" : "") << e.stage_entries[i];
    f << "\n";
  }
}

struct RunSummary {
  std::uint64_t seed = 0;
  env::RewardMode mode = env::RewardMode::Full;
  long total_episodes = 0;
  long total_timesteps = 0;
  bool early_stopped = false;
  // first episode at which the rolling-100 success crossed the threshold;
  // -1 when never reached
  long episodes_to_080 = -1;
  long episodes_to_090 = -1;
  double final_success = 0.0;
  double final_ep_len = 0.0;
  // rolling episode length at the first 0.80 crossing (converged length)
  double converged_ep_len = 0.0;
  double wall_seconds = 0.0;
  std::string curve_path;
  std::string checkpoint_path;
};

inline long first_crossing(const std::vector<agent::EpisodeLog>& log, double threshold,
                           double* ep_len = nullptr) {
  for (const auto& e : log)
    if (e.success_100 >= threshold) {
      if (ep_len) *ep_len = e.ep_len_100;
      return e.episode;
    }
  if (ep_len) *ep_len = log.empty() ? 0.0 : log.back().ep_len_100;
  return -1;
}

// Trains one seed and writes its curve and checkpoint under out_dir.
inline RunSummary run_one_seed(const config::ExperimentConfig& cfg, std::uint64_t seed,
                               const std::vector<TaskSpec>& tasks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  agent::GraspTaskEnv env(tasks, cfg.env_config(), cfg.randomize, cfg.reward_machine());
  agent::TrainConfig tc = cfg.train;
  tc.seed = seed;

  const auto t0 = std::chrono::steady_clock::now();
  const agent::TrainResult res = agent::train(env, tc);
  const auto t1 = std::chrono::steady_clock::now();

  RunSummary s;
  s.seed = seed;
  s.mode = cfg.mode;
  s.total_episodes = res.total_episodes;
  s.total_timesteps = res.total_timesteps;
  s.early_stopped = res.early_stopped;
  s.episodes_to_080 = first_crossing(res.episodes, 0.80, &s.converged_ep_len);
  s.episodes_to_090 = first_crossing(res.episodes, 0.90);
  if (!res.episodes.empty()) {
    s.final_success = res.episodes.back().success_100;
    s.final_ep_len = res.episodes.back().ep_len_100;
  }
  s.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

  const std::string tag =
      "seed" + std::to_string(seed) + "_" + env::reward_mode_name(cfg.mode);
  s.curve_path = (fs::path(cfg.out_dir) / ("curve_" + tag + ".csv")).string();
  s.checkpoint_path = (fs::path(cfg.out_dir) / ("policies_" + tag + ".json")).string();
  write_curve_csv(s.curve_path, res.episodes);
  res.policies.save(s.checkpoint_path);
  return s;
}

inline void write_summary_csv(const std::string& path, const std::vector<RunSummary>& runs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("harness: cannot write " + path);
  f << "seed,mode,total_episodes,total_timesteps,early_stopped,episodes_to_080,"
       "episodes_to_090,final_success,final_ep_len,converged_ep_len,wall_seconds\n";
  for (const auto& r : runs) {
    f << r.seed << "," << env::reward_mode_name(r.mode) << "," << r.total_episodes << ","
      << r.total_timesteps << "," << (r.early_stopped ? 1 : 0) << "," << r.episodes_to_080
      << "," << r.episodes_to_090 << "," << format_double(r.final_success) << ","
      << format_double(r.final_ep_len) << "," << format_double(r.converged_ep_len) << ","
      << format_double(r.wall_seconds) << "\n";
  }
}

inline std::vector<RunSummary> run_train(const config::ExperimentConfig& cfg) {
  cfg.validate();
  const auto tasks = load_suite(cfg);
  std::vector<RunSummary> runs;
  runs.reserve(cfg.seeds.size());
  for (const std::uint64_t seed : cfg.seeds) runs.push_back(run_one_seed(cfg, seed, tasks));
  write_summary_csv(
      (std::filesystem::path(cfg.out_dir) /
       (std::string("summary_") + env::reward_mode_name(cfg.mode) + ".csv"))
          .string(),
      runs);
  return runs;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  std::string affordance;
  double success_rate = 0.0;
  double mean_episode_length = 0.0;
  long n_trials = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // Table row order: the seven affordances, then Overall
};

inline constexpr const char* kEvalHeader = "affordance,success_rate,mean_episode_length,n_trials";

// Mean-action evaluation over n_trials uniformly drawn tasks, grouped by
// affordance with a trial-weighted Overall row.
inline EvalReport run_eval(const agent::StagePolicies& policies,
                           const std::vector<TaskSpec>& tasks,
                           const config::ExperimentConfig& cfg, int n_trials,
                           std::uint64_t seed) {
  if (n_trials <= 0) throw std::invalid_argument("eval: n_trials must be > 0");
  if (tasks.empty()) throw std::invalid_argument("eval: empty task list");
  Rng rng(seed);
  std::array<long, kAffordanceCount> trials{}, successes{};
  std::array<double, kAffordanceCount> lengths{};
  for (int i = 0; i < n_trials; ++i) {
    const auto& task = tasks[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(tasks.size()) - 1))];
    agent::GraspTaskEnv env({task}, cfg.env_config(), cfg.randomize, cfg.reward_machine());
    const auto out = agent::eval_episode(env, policies, rng, cfg.env.episode_cap);
    const auto a = static_cast<std::size_t>(task.affordance);
    ++trials[a];
    successes[a] += out.success ? 1 : 0;
    lengths[a] += out.length;
  }
  EvalReport rep;
  long tot_trials = 0, tot_succ = 0;
  double tot_len = 0.0;
  for (int a = 0; a < kAffordanceCount; ++a) {
    EvalRow row;
    row.affordance = affordance_name(static_cast<Affordance>(a));
    row.n_trials = trials[static_cast<std::size_t>(a)];
    if (row.n_trials > 0) {
      row.success_rate = static_cast<double>(successes[static_cast<std::size_t>(a)]) /
                         static_cast<double>(row.n_trials);
      row.mean_episode_length =
          lengths[static_cast<std::size_t>(a)] / static_cast<double>(row.n_trials);
    }
    tot_trials += row.n_trials;
    tot_succ += successes[static_cast<std::size_t>(a)];
    tot_len += lengths[static_cast<std::size_t>(a)];
    rep.rows.push_back(std::move(row));
  }
  EvalRow overall;
  overall.affordance = "Overall";
  overall.n_trials = tot_trials;
  overall.success_rate = static_cast<double>(tot_succ) / static_cast<double>(tot_trials);
  overall.mean_episode_length = tot_len / static_cast<double>(tot_trials);
  rep.rows.push_back(std::move(overall));
  return rep;
}

inline void write_eval_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("harness: cannot write " + path);
  f << kEvalHeader << "\n";
  for (const auto& r : rep.rows)
    f << r.affordance << "," << format_double(r.success_rate) << ","
      << format_double(r.mean_episode_length) << "," << r.n_trials << "\n";
}

inline EvalReport read_eval_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("harness: cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line != kEvalHeader)
    throw std::runtime_error("harness: " + path + " is not an eval CSV");
  EvalReport rep;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    EvalRow row;
    std::string field;
    std::getline(ss, row.affordance, ',');
    std::getline(ss, field, ',');
    row.success_rate = std::stod(field);
    std::getline(ss, field, ',');
    row.mean_episode_length = std::stod(field);
    std::getline(ss, field, ',');
    row.n_trials = std::stol(field);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Comparison reports

// Published reference numbers for the Overall row of the full model, kept as
// a static comparison column in every report.
inline constexpr const char* kReferenceLabel = "reference";
inline constexpr double kReferenceOverallSuccess = 0.95;
inline constexpr double kReferenceOverallEpLen = 273.07;

struct Report {
  std::string text;
  std::string csv;
};

inline Report emit_report(const std::vector<EvalReport>& reports,
                          const std::vector<std::string>& labels) {
  if (reports.empty()) throw std::invalid_argument("report: no eval reports");
  if (reports.size() != labels.size())
    throw std::invalid_argument("report: labels must match reports");
  const std::size_t n_rows = reports.front().rows.size();
  for (const auto& rep : reports) {
    if (rep.rows.size() != n_rows)
      throw std::invalid_argument("report: mismatched affordance sets");
    for (std::size_t i = 0; i < n_rows; ++i)
      if (rep.rows[i].affordance != reports.front().rows[i].affordance)
        throw std::invalid_argument("report: mismatched affordance sets");
  }

  std::ostringstream text, csv;
  csv << "affordance";
  for (const auto& l : labels) csv << "," << l << "_success," << l << "_ep_len";
  csv << "," << kReferenceLabel << "_success," << kReferenceLabel << "_ep_len\n";

  text << "affordance";
  for (const auto& l : labels) text << " | " << l << " succ/len";
  text << " | " << kReferenceLabel << " succ/len\n";

  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::string& name = reports.front().rows[i].affordance;
    csv << name;
    text << name;
    for (const auto& rep : reports) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " | %.2f/%.2f", rep.rows[i].success_rate,
                    rep.rows[i].mean_episode_length);
      text << buf;
      csv << "," << format_double(rep.rows[i].success_rate) << ","
          << format_double(rep.rows[i].mean_episode_length);
    }
    if (name == "Overall") {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " | %.2f/%.2f", kReferenceOverallSuccess,
                    kReferenceOverallEpLen);
      text << buf;
      csv << "," << format_double(kReferenceOverallSuccess) << ","
          << format_double(kReferenceOverallEpLen);
    } else {
      text << " | -";
      csv << ",,";
    }
    text << "\n";
    csv << "\n";
  }
  return {text.str(), csv.str()};
}

}  // namespace crmgrasp::harness
