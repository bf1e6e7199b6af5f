#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crmgrasp/agent.hpp"
#include "crmgrasp/crm.hpp"
#include "crmgrasp/env.hpp"

namespace crmgrasp::config {

// Whole-experiment configuration: the crm/env/train/taxonomy sections mirror
// their module structs, the harness section holds run plumbing (seeds, mode,
// file locations). Every key is optional and falls back to the default.
struct ExperimentConfig {
  // crm
  double r_arrive = 10.0;
  double r_aor = -20.0;
  double r_gor = -10.0;
  double r_fail = -5.0;
  double r_succ = 100.0;

  env::EnvConfig env;
  agent::TrainConfig train;

  // taxonomy
  int selector_samples = 8000;
  int selector_epochs = 150;
  double selector_lr = 3e-3;
  int n_tasks = 26;
  std::uint64_t task_seed = 42;

  // harness
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  env::RewardMode mode = env::RewardMode::Full;
  std::string task_file;  // empty selects the built-in desk suite
  std::string out_dir = "out";
  int n_trials = 100;
  bool randomize = true;

  crm::RewardMachine reward_machine() const {
    return crm::RewardMachine(crm::default_stage_contexts(),
                              crm::TransitionTable::from_rewards(r_arrive, r_aor, r_gor,
                                                                 r_fail, r_succ));
  }

  // env config with the reward mode from the harness section applied
  env::EnvConfig env_config() const {
    env::EnvConfig e = env;
    e.reward.mode = mode;
    return e;
  }

  void validate() const {
    crm::TransitionTable::from_rewards(r_arrive, r_aor, r_gor, r_fail, r_succ).validate();
    env.reward.validate();
    train.validate();
    if (seeds.empty()) throw std::invalid_argument("config: harness.seeds must be non-empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw std::invalid_argument("config: harness.seeds must be distinct");
    if (n_trials < 0) throw std::invalid_argument("config: harness.n_trials must be >= 0");
    if (!task_file.empty()) {
      std::ifstream f(task_file);
      if (!f) throw std::invalid_argument("config: harness.task_file does not exist: " + task_file);
    }
  }
};

namespace detail {

// Reads section[key] into out if present; tracks consumed keys so unknown
// ones can be reported by name.
template <typename T>
void get(const nlohmann::json& sec, std::set<std::string>& seen, const std::string& key, T& out) {
  if (sec.contains(key)) {
    seen.insert(key);
    out = sec.at(key).get<T>();
  }
}

inline void check_unknown(const nlohmann::json& sec, const std::set<std::string>& seen,
                          const std::string& section) {
  for (auto it = sec.begin(); it != sec.end(); ++it)
    if (!seen.count(it.key()))
      throw std::invalid_argument("config: unknown key " + section + "." + it.key());
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  std::set<std::string> sections;
  auto section = [&](const char* name) -> nlohmann::json {
    if (j.contains(name)) {
      sections.insert(name);
      if (!j.at(name).is_object())
        throw std::invalid_argument(std::string("config: section ") + name +
                                    " must be an object");
      return j.at(name);
    }
    return nlohmann::json::object();
  };

  {
    const auto sec = section("crm");
    std::set<std::string> seen;
    detail::get(sec, seen, "r_arrive", c.r_arrive);
    detail::get(sec, seen, "r_aor", c.r_aor);
    detail::get(sec, seen, "r_gor", c.r_gor);
    detail::get(sec, seen, "r_fail", c.r_fail);
    detail::get(sec, seen, "r_succ", c.r_succ);
    detail::check_unknown(sec, seen, "crm");
  }
  {
    const auto sec = section("env");
    std::set<std::string> seen;
    detail::get(sec, seen, "contact_eps", c.env.contact_eps);
    detail::get(sec, seen, "k_contact", c.env.k_contact);
    detail::get(sec, seen, "push_tol", c.env.push_tol);
    detail::get(sec, seen, "push_gain", c.env.push_gain);
    detail::get(sec, seen, "step_max", c.env.step_max);
    detail::get(sec, seen, "grasp_scale", c.env.grasp_scale);
    detail::get(sec, seen, "dtheta_max", c.env.dtheta_max);
    detail::get(sec, seen, "arrive_threshold", c.env.arrive_threshold);
    detail::get(sec, seen, "workspace_half", c.env.workspace_half);
    detail::get(sec, seen, "approach_budget", c.env.approach_budget);
    detail::get(sec, seen, "grasp_budget", c.env.grasp_budget);
    detail::get(sec, seen, "episode_cap", c.env.episode_cap);
    detail::get(sec, seen, "hold_steps", c.env.hold_steps);
    detail::get(sec, seen, "force_tol", c.env.force_tol);
    detail::get(sec, seen, "torque_tol", c.env.torque_tol);
    detail::get(sec, seen, "twist_torque_min", c.env.twist_torque_min);
    detail::get(sec, seen, "press_force_min", c.env.press_force_min);
    detail::get(sec, seen, "start_distance", c.env.start_distance);
    detail::get(sec, seen, "preshape_theta", c.env.preshape_theta);
    detail::get(sec, seen, "rand_pos", c.env.rand_pos);
    detail::get(sec, seen, "rand_orient", c.env.rand_orient);
    detail::get(sec, seen, "rand_joint", c.env.rand_joint);
    detail::get(sec, seen, "rho_appr", c.env.reward.rho_appr);
    detail::get(sec, seen, "rho_grasp", c.env.reward.rho_grasp);
    detail::get(sec, seen, "r_cone", c.env.reward.r_cone);
    detail::get(sec, seen, "l2_norm", c.env.reward.l2_norm);
    detail::get(sec, seen, "reward_floor", c.env.reward.floor);
    detail::check_unknown(sec, seen, "env");
  }
  {
    const auto sec = section("train");
    std::set<std::string> seen;
    detail::get(sec, seen, "gamma", c.train.gamma);
    detail::get(sec, seen, "gae_lambda", c.train.gae_lambda);
    detail::get(sec, seen, "minibatch_size", c.train.minibatch_size);
    detail::get(sec, seen, "clip_eps", c.train.clip_eps);
    detail::get(sec, seen, "base_lr", c.train.base_lr);
    detail::get(sec, seen, "epochs_per_batch", c.train.epochs_per_batch);
    detail::get(sec, seen, "total_timesteps", c.train.total_timesteps);
    detail::get(sec, seen, "value_coef", c.train.value_coef);
    detail::get(sec, seen, "critic_lr_scale", c.train.critic_lr_scale);
    detail::get(sec, seen, "horizon", c.train.horizon);
    detail::get(sec, seen, "max_episodes", c.train.max_episodes);
    detail::get(sec, seen, "hidden", c.train.hidden);
    detail::get(sec, seen, "init_log_std", c.train.init_log_std);
    detail::get(sec, seen, "anneal_log_std", c.train.anneal_log_std);
    detail::get(sec, seen, "final_log_std", c.train.final_log_std);
    detail::get(sec, seen, "stop_success_rate", c.train.stop_success_rate);
    detail::check_unknown(sec, seen, "train");
  }
  {
    const auto sec = section("taxonomy");
    std::set<std::string> seen;
    detail::get(sec, seen, "selector_samples", c.selector_samples);
    detail::get(sec, seen, "selector_epochs", c.selector_epochs);
    detail::get(sec, seen, "selector_lr", c.selector_lr);
    detail::get(sec, seen, "n_tasks", c.n_tasks);
    detail::get(sec, seen, "task_seed", c.task_seed);
    detail::check_unknown(sec, seen, "taxonomy");
  }
  {
    const auto sec = section("harness");
    std::set<std::string> seen;
    detail::get(sec, seen, "seeds", c.seeds);
    std::string mode_name = env::reward_mode_name(c.mode);
    detail::get(sec, seen, "mode", mode_name);
    c.mode = env::reward_mode_from_name(mode_name);
    detail::get(sec, seen, "task_file", c.task_file);
    detail::get(sec, seen, "out_dir", c.out_dir);
    detail::get(sec, seen, "n_trials", c.n_trials);
    detail::get(sec, seen, "randomize", c.randomize);
    detail::check_unknown(sec, seen, "harness");
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!sections.count(it.key()))
      throw std::invalid_argument("config: unknown section " + it.key());
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: " + path + " must hold a JSON object");
  return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["crm"] = {{"r_arrive", c.r_arrive}, {"r_aor", c.r_aor},   {"r_gor", c.r_gor},
              {"r_fail", c.r_fail},     {"r_succ", c.r_succ}};
  j["env"] = {{"contact_eps", c.env.contact_eps},
              {"k_contact", c.env.k_contact},
              {"push_tol", c.env.push_tol},
              {"push_gain", c.env.push_gain},
              {"step_max", c.env.step_max},
              {"grasp_scale", c.env.grasp_scale},
              {"dtheta_max", c.env.dtheta_max},
              {"arrive_threshold", c.env.arrive_threshold},
              {"workspace_half", c.env.workspace_half},
              {"approach_budget", c.env.approach_budget},
              {"grasp_budget", c.env.grasp_budget},
              {"episode_cap", c.env.episode_cap},
              {"hold_steps", c.env.hold_steps},
              {"force_tol", c.env.force_tol},
              {"torque_tol", c.env.torque_tol},
              {"twist_torque_min", c.env.twist_torque_min},
              {"press_force_min", c.env.press_force_min},
              {"start_distance", c.env.start_distance},
              {"preshape_theta", c.env.preshape_theta},
              {"rand_pos", c.env.rand_pos},
              {"rand_orient", c.env.rand_orient},
              {"rand_joint", c.env.rand_joint},
              {"rho_appr", c.env.reward.rho_appr},
              {"rho_grasp", c.env.reward.rho_grasp},
              {"r_cone", c.env.reward.r_cone},
              {"l2_norm", c.env.reward.l2_norm},
              {"reward_floor", c.env.reward.floor}};
  j["train"] = {{"gamma", c.train.gamma},
                {"gae_lambda", c.train.gae_lambda},
                {"minibatch_size", c.train.minibatch_size},
                {"clip_eps", c.train.clip_eps},
                {"base_lr", c.train.base_lr},
                {"epochs_per_batch", c.train.epochs_per_batch},
                {"total_timesteps", c.train.total_timesteps},
                {"value_coef", c.train.value_coef},
                {"critic_lr_scale", c.train.critic_lr_scale},
                {"horizon", c.train.horizon},
                {"max_episodes", c.train.max_episodes},
                {"hidden", c.train.hidden},
                {"init_log_std", c.train.init_log_std},
                {"anneal_log_std", c.train.anneal_log_std},
                {"final_log_std", c.train.final_log_std},
                {"stop_success_rate", c.train.stop_success_rate}};
  j["taxonomy"] = {{"selector_samples", c.selector_samples},
                   {"selector_epochs", c.selector_epochs},
                   {"selector_lr", c.selector_lr},
                   {"n_tasks", c.n_tasks},
                   {"task_seed", c.task_seed}};
  j["harness"] = {{"seeds", c.seeds},
                  {"mode", env::reward_mode_name(c.mode)},
                  {"task_file", c.task_file},
                  {"out_dir", c.out_dir},
                  {"n_trials", c.n_trials},
                  {"randomize", c.randomize}};
  return j;
}

inline void save_config(const std::string& path, const ExperimentConfig& c) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot write " + path);
  f << to_json(c).dump(2) << "\n";
}

// Tuned configuration for the small desk-scale Lift/Pull experiments: closer
// start pose, pre-shaped fingers, softer stability thresholds and a fixed
// exploration schedule. These settings make the 3-task suite learnable within
// a few thousand episodes on a single CPU core.
inline ExperimentConfig desk_defaults() {
  ExperimentConfig c;
  c.r_arrive = 150.0;
  c.r_succ = 2000.0;
  c.env.reward.l2_norm = true;
  c.env.reward.rho_grasp = 8.0;
  c.env.start_distance = 0.08;
  c.env.preshape_theta = 1.2;
  c.env.dtheta_max = 0.05;
  c.env.approach_budget = 40;
  c.env.grasp_budget = 60;
  c.env.episode_cap = 150;
  c.env.hold_steps = 5;
  c.env.force_tol = 3.0;
  c.env.torque_tol = 0.3;
  c.env.rand_orient = 0.1;
  c.train.base_lr = 1e-4;
  c.train.critic_lr_scale = 10.0;
  c.train.total_timesteps = 400000;
  c.train.max_episodes = 4000;
  c.train.init_log_std = -1.2;
  c.train.anneal_log_std = true;
  c.train.final_log_std = -2.0;
  c.seeds = {4, 5, 7, 8, 13};
  return c;
}

}  // namespace crmgrasp::config
