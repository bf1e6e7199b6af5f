#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crmgrasp/crm.hpp"
#include "crmgrasp/env.hpp"
#include "crmgrasp/nn.hpp"
#include "crmgrasp/rng.hpp"
#include "crmgrasp/task.hpp"

namespace crmgrasp::agent {

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int minibatch_size = 64;
  double clip_eps = 0.2;
  double base_lr = 3e-5;
  int epochs_per_batch = 10;
  long total_timesteps = 5'000'000;
  double value_coef = 0.5;
  double critic_lr_scale = 1.0;  // critic rate relative to the policy rate
  int horizon = 2048;       // env steps collected per update
  long max_episodes = 0;    // 0 = no episode cap
  int hidden = 64;
  double init_log_std = 0.0;
  // optional fixed exploration schedule: log_std moves linearly from
  // init_log_std to final_log_std over training instead of being learned
  bool anneal_log_std = false;
  double final_log_std = -2.0;
  // optional convergence target: halt once the rolling-100 success over full
  // episodes reaches this rate (0 disables; requires >= 100 episodes)
  double stop_success_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("train config: gamma in (0, 1]");
    if (gae_lambda < 0.0 || gae_lambda > 1.0)
      throw std::invalid_argument("train config: gae_lambda in [0, 1]");
    if (minibatch_size <= 0) throw std::invalid_argument("train config: minibatch_size > 0");
    if (clip_eps <= 0.0) throw std::invalid_argument("train config: clip_eps > 0");
    if (base_lr <= 0.0) throw std::invalid_argument("train config: base_lr > 0");
    if (epochs_per_batch <= 0) throw std::invalid_argument("train config: epochs_per_batch > 0");
    if (horizon <= 0) throw std::invalid_argument("train config: horizon > 0");
    if (total_timesteps <= 0) throw std::invalid_argument("train config: total_timesteps > 0");
  }
};

// Stepped schedule over training progress in [0, 1]: full rate early, then
// two reductions for the later phases.
inline double lr_schedule(double base_lr, double progress) {
  // n/10 form keeps the plateaus exact in floating point (3e-5 -> 2.7e-5)
  if (progress < 0.4) return base_lr;
  if (progress < 0.7) return 9.0 * base_lr / 10.0;
  return 8.0 * base_lr / 10.0;
}

// Halt once the success rate over the last 100 completed episodes reaches 99%.
inline bool early_stop(const std::vector<int>& success_history) {
  if (success_history.size() < 100) return false;
  int s = 0;
  for (std::size_t i = success_history.size() - 100; i < success_history.size(); ++i)
    s += success_history[i];
  return s >= 99;
}

// ---------------------------------------------------------------------------
// Task environment interface. The trainer only sees stage-abstracted
// observations and the two reward streams.

class TaskEnv {
 public:
  virtual ~TaskEnv() = default;

  struct Step {
    double intra = 0.0;
    double transition = 0.0;
    crm::StageId stage_after = crm::StageId::Approach;
    bool transitioned = false;
    bool terminal = false;
    bool truncated = false;
    bool success = false;
  };

  virtual void reset(Rng& rng) = 0;
  virtual Step step(const Eigen::VectorXd& action) = 0;
  virtual crm::StageId stage() const = 0;
  virtual Eigen::VectorXd observe() const = 0;
  virtual int action_dim(crm::StageId stage) const = 0;
};

// Grasping environment plus reward machine, cycling through a task list.
class GraspTaskEnv : public TaskEnv {
 public:
  GraspTaskEnv(std::vector<TaskSpec> tasks, env::EnvConfig cfg = {}, bool randomize = true,
               crm::RewardMachine machine = crm::RewardMachine::defaults())
      : tasks_(std::move(tasks)),
        env_(std::move(cfg)),
        machine_(std::move(machine)),
        randomize_(randomize) {
    if (tasks_.empty()) throw std::invalid_argument("task env: empty task list");
  }

  void reset(Rng& rng) override {
    env_.reset(tasks_[next_task_], rng, randomize_);
    next_task_ = (next_task_ + 1) % tasks_.size();
    machine_.begin_episode();
  }

  Step step(const Eigen::VectorXd& action) override {
    const crm::StageId stage = machine_.current();
    const auto res = env_.step(action, stage);
    const auto out = machine_.step(res.flags);
    Step s;
    s.intra = res.intra_reward;
    s.stage_after = out.next_stage;
    s.transitioned = out.transitioned;
    s.terminal = crm::is_terminal(out.next_stage);
    if (out.transitioned) {
      s.transition = s.terminal ? env::terminal_reward(*out.event, res.obs, machine_.table(),
                                                       env_.config().reward)
                                : out.transition_reward;
      if (env_.config().reward.mode == env::RewardMode::IntraOnly) s.transition = 0.0;
    }
    s.success = out.next_stage == crm::StageId::GraspSuccess;
    s.truncated = !s.terminal && env_.truncated(out.next_stage);
    return s;
  }

  crm::StageId stage() const override { return machine_.current(); }

  Eigen::VectorXd observe() const override {
    return machine_.abstract_state(env_.observation());
  }

  int action_dim(crm::StageId stage) const override {
    return machine_.context(stage).action_dim;
  }

  const env::GraspEnv& grasp_env() const { return env_; }
  const crm::RewardMachine& machine() const { return machine_; }

 private:
  std::vector<TaskSpec> tasks_;
  std::size_t next_task_ = 0;
  env::GraspEnv env_;
  crm::RewardMachine machine_;
  bool randomize_;
};

// Reward ablation baselines share one switch: the full machine, transition
// rewards only, or intra-stage rewards only.
inline env::EnvConfig baseline_env_config(env::RewardMode mode, env::EnvConfig cfg = {}) {
  cfg.reward.mode = mode;
  return cfg;
}

inline std::unique_ptr<GraspTaskEnv> make_baseline(env::RewardMode mode,
                                                   std::vector<TaskSpec> tasks,
                                                   env::EnvConfig cfg = {},
                                                   bool randomize = true) {
  return std::make_unique<GraspTaskEnv>(std::move(tasks), baseline_env_config(mode, cfg),
                                        randomize);
}

// ---------------------------------------------------------------------------
// Per-stage actor-critic pairs.

struct StagePolicies {
  nn::GaussianPolicy pi_appr;
  nn::GaussianPolicy pi_grasp;
  nn::Mlp v_appr;
  nn::Mlp v_grasp;

  static StagePolicies make(int hidden, double init_log_std, Rng& rng) {
    const auto contexts = crm::default_stage_contexts();
    int appr_in = 0, appr_act = 0, grasp_in = 0, grasp_act = 0;
    for (const auto& c : contexts) {
      if (c.stage == crm::StageId::Approach) {
        appr_in = masked_obs_dim(c.abstraction_mask);
        appr_act = c.action_dim;
      } else if (c.stage == crm::StageId::Grasp) {
        grasp_in = masked_obs_dim(c.abstraction_mask);
        grasp_act = c.action_dim;
      }
    }
    StagePolicies p{
        nn::GaussianPolicy(nn::Mlp::glorot({appr_in, hidden, hidden, appr_act}, rng), appr_act),
        nn::GaussianPolicy(nn::Mlp::glorot({grasp_in, hidden, hidden, grasp_act}, rng),
                           grasp_act),
        nn::Mlp::glorot({appr_in, hidden, hidden, 1}, rng),
        nn::Mlp::glorot({grasp_in, hidden, hidden, 1}, rng)};
    p.pi_appr.log_std().setConstant(init_log_std);
    p.pi_grasp.log_std().setConstant(init_log_std);
    return p;
  }

  nn::GaussianPolicy& policy(crm::StageId s) {
    if (s == crm::StageId::Approach) return pi_appr;
    if (s == crm::StageId::Grasp) return pi_grasp;
    throw std::invalid_argument(std::string("no policy for stage ") + crm::stage_name(s));
  }
  const nn::GaussianPolicy& policy(crm::StageId s) const {
    return const_cast<StagePolicies*>(this)->policy(s);
  }
  nn::Mlp& value(crm::StageId s) {
    if (s == crm::StageId::Approach) return v_appr;
    if (s == crm::StageId::Grasp) return v_grasp;
    throw std::invalid_argument(std::string("no critic for stage ") + crm::stage_name(s));
  }
  const nn::Mlp& value(crm::StageId s) const {
    return const_cast<StagePolicies*>(this)->value(s);
  }

  void save(const std::string& path) const {
    std::vector<nn::CheckpointEntry> entries;
    entries.push_back({"pi_approach", pi_appr.net(), true, pi_appr.log_std()});
    entries.push_back({"pi_grasp", pi_grasp.net(), true, pi_grasp.log_std()});
    entries.push_back({"v_approach", v_appr, false, {}});
    entries.push_back({"v_grasp", v_grasp, false, {}});
    nn::save_checkpoint(path, entries);
  }

  static StagePolicies load(const std::string& path) {
    const auto entries = nn::load_checkpoint(path);
    auto find = [&](const std::string& name) -> const nn::CheckpointEntry& {
      for (const auto& e : entries)
        if (e.name == name) return e;
      throw std::runtime_error("checkpoint missing entry " + name + " in " + path);
    };
    const auto& pa = find("pi_approach");
    const auto& pg = find("pi_grasp");
    StagePolicies p{nn::GaussianPolicy(pa.net, pa.net.output_dim()),
                    nn::GaussianPolicy(pg.net, pg.net.output_dim()),
                    find("v_approach").net, find("v_grasp").net};
    if (pa.has_log_std) p.pi_appr.log_std() = pa.log_std;
    if (pg.has_log_std) p.pi_grasp.log_std() = pg.log_std;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Rollouts and generalized advantage estimation.

struct Record {
  crm::StageId stage = crm::StageId::Approach;
  Eigen::VectorXd obs;
  Eigen::VectorXd action;
  double log_prob = 0.0;
  double reward = 0.0;      // intra plus transition reward for this step
  double value = 0.0;       // critic of the stage that acted
  double next_value = 0.0;  // next state's stage critic, 0 past a terminal
  bool episode_end = false;
};

struct Advantages {
  std::vector<double> adv;
  std::vector<double> ret;
};

// Reverse-time GAE over the combined reward stream. episode_end stops the
// recursion; next_value already carries the terminal/bootstrap distinction.
inline Advantages compute_advantages(const std::vector<Record>& recs, double gamma,
                                     double lambda) {
  Advantages out;
  out.adv.resize(recs.size());
  out.ret.resize(recs.size());
  double acc = 0.0;
  for (std::size_t i = recs.size(); i-- > 0;) {
    const Record& r = recs[i];
    const double delta = r.reward + gamma * r.next_value - r.value;
    acc = r.episode_end ? delta : delta + gamma * lambda * acc;
    out.adv[i] = acc;
    out.ret[i] = acc + r.value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPO update.

struct Optimizers {
  nn::Adam pi_appr, pi_grasp, v_appr, v_grasp;
  nn::AdamVec ls_appr, ls_grasp;

  Optimizers(const StagePolicies& p, double lr)
      : pi_appr(p.pi_appr.net(), {.lr = lr}),
        pi_grasp(p.pi_grasp.net(), {.lr = lr}),
        v_appr(p.v_appr, {.lr = lr}),
        v_grasp(p.v_grasp, {.lr = lr}),
        ls_appr(p.pi_appr.action_dim(), {.lr = lr}),
        ls_grasp(p.pi_grasp.action_dim(), {.lr = lr}) {}

  void set_lr(double lr, double critic_scale = 1.0) {
    pi_appr.config().lr = lr;
    pi_grasp.config().lr = lr;
    v_appr.config().lr = lr * critic_scale;
    v_grasp.config().lr = lr * critic_scale;
    ls_appr.config().lr = lr;
    ls_grasp.config().lr = lr;
  }
};

struct UpdateStats {
  double loss_pi = 0.0;
  double loss_v = 0.0;
};

namespace detail {

struct StageAccum {
  nn::MlpGrads g_pi, g_v;
  Eigen::VectorXd g_ls;
  int count = 0;
};

}  // namespace detail

// Clipped-surrogate update with per-minibatch advantage normalization. Stage
// routing: each sample only touches its own stage's actor-critic pair.
inline UpdateStats ppo_update(StagePolicies& pol, Optimizers& opt,
                              const std::vector<Record>& recs, const Advantages& advs,
                              const TrainConfig& cfg, double lr, Rng& rng) {
  opt.set_lr(lr, cfg.critic_lr_scale);
  const std::size_t n = recs.size();
  if (n == 0) return {};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  double loss_pi_sum = 0.0, loss_v_sum = 0.0;
  long loss_count = 0;

  for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(
                                   rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    const bool last_epoch = epoch + 1 == cfg.epochs_per_batch;

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.minibatch_size));
      const auto mb = static_cast<double>(end - start);

      double mean = 0.0;
      for (std::size_t k = start; k < end; ++k) mean += advs.adv[order[k]];
      mean /= mb;
      double var = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const double d = advs.adv[order[k]] - mean;
        var += d * d;
      }
      const double std_dev = std::max(std::sqrt(var / mb), 1e-8);

      detail::StageAccum acc_appr{pol.pi_appr.net().zero_grads(), pol.v_appr.zero_grads(),
                                  Eigen::VectorXd::Zero(pol.pi_appr.action_dim())};
      detail::StageAccum acc_grasp{pol.pi_grasp.net().zero_grads(), pol.v_grasp.zero_grads(),
                                   Eigen::VectorXd::Zero(pol.pi_grasp.action_dim())};

      for (std::size_t k = start; k < end; ++k) {
        const Record& r = recs[order[k]];
        const double adv = (advs.adv[order[k]] - mean) / std_dev;
        auto& acc = (r.stage == crm::StageId::Approach) ? acc_appr : acc_grasp;
        auto& pi = pol.policy(r.stage);
        auto& vf = pol.value(r.stage);
        ++acc.count;

        nn::Mlp::Trace tr;
        const Eigen::VectorXd mu = pi.net().forward(r.obs, &tr);
        const Eigen::VectorXd ls = pi.clamped_log_std();
        const double lp = nn::gaussian_log_prob(mu, pi.log_std(), r.action);
        const double ratio = std::exp(lp - r.log_prob);
        const bool clipped = (adv >= 0.0 && ratio >= 1.0 + cfg.clip_eps) ||
                             (adv < 0.0 && ratio <= 1.0 - cfg.clip_eps);
        if (last_epoch) {
          const double clamped_ratio =
              std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
          loss_pi_sum += -std::min(ratio * adv, clamped_ratio * adv);
        }
        if (!clipped) {
          const double coef = -ratio * adv;  // d(-surrogate)/d(log pi)
          Eigen::VectorXd z(mu.size()), dmu(mu.size()), dls(mu.size());
          for (Eigen::Index j = 0; j < mu.size(); ++j) {
            const double sigma = std::exp(ls[j]);
            z[j] = (r.action[j] - mu[j]) / sigma;
            dmu[j] = coef * z[j] / sigma;
            // zero gradient where the clamp is active
            const bool at_bound =
                pi.log_std()[j] <= nn::kLogStdMin || pi.log_std()[j] >= nn::kLogStdMax;
            dls[j] = at_bound ? 0.0 : coef * (z[j] * z[j] - 1.0);
          }
          acc.g_pi += pi.net().backward(tr, dmu);
          if (!cfg.anneal_log_std) acc.g_ls += dls;
        }

        nn::Mlp::Trace tv;
        const double v = vf.forward(r.obs, &tv)[0];
        const double verr = v - advs.ret[order[k]];
        if (last_epoch) loss_v_sum += 0.5 * cfg.value_coef * verr * verr;
        Eigen::VectorXd dv(1);
        dv[0] = cfg.value_coef * verr;
        acc.g_v += vf.backward(tv, dv);
      }
      if (last_epoch) loss_count += static_cast<long>(end - start);

      if (acc_appr.count > 0) {
        const double inv = 1.0 / acc_appr.count;
        acc_appr.g_pi *= inv;
        acc_appr.g_v *= inv;
        acc_appr.g_ls *= inv;
        opt.pi_appr.step(pol.pi_appr.net(), acc_appr.g_pi);
        opt.ls_appr.step(pol.pi_appr.log_std(), acc_appr.g_ls);
        opt.v_appr.step(pol.v_appr, acc_appr.g_v);
      }
      if (acc_grasp.count > 0) {
        const double inv = 1.0 / acc_grasp.count;
        acc_grasp.g_pi *= inv;
        acc_grasp.g_v *= inv;
        acc_grasp.g_ls *= inv;
        opt.pi_grasp.step(pol.pi_grasp.net(), acc_grasp.g_pi);
        opt.ls_grasp.step(pol.pi_grasp.log_std(), acc_grasp.g_ls);
        opt.v_grasp.step(pol.v_grasp, acc_grasp.g_v);
      }
    }
  }
  if (loss_count > 0) {
    stats.loss_pi = loss_pi_sum / static_cast<double>(loss_count);
    stats.loss_v = loss_v_sum / static_cast<double>(loss_count);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Training loop.

struct EpisodeLog {
  long episode = 0;
  long timestep = 0;
  double success_100 = 0.0;
  double ep_len_100 = 0.0;
  double lr = 0.0;
  double loss_pi = 0.0;
  double loss_v = 0.0;
  std::array<long, crm::kStageCount> stage_entries{};
};

struct TrainResult {
  std::vector<EpisodeLog> episodes;
  StagePolicies policies;
  bool early_stopped = false;
  long total_episodes = 0;
  long total_timesteps = 0;
};

namespace detail {

inline double rolling_mean(const std::vector<int>& xs, std::size_t window) {
  if (xs.empty()) return 0.0;
  const std::size_t n = std::min(window, xs.size());
  double s = 0.0;
  for (std::size_t i = xs.size() - n; i < xs.size(); ++i) s += xs[i];
  return s / static_cast<double>(n);
}

}  // namespace detail

inline TrainResult train(TaskEnv& env, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  StagePolicies pol = StagePolicies::make(cfg.hidden, cfg.init_log_std, rng);
  Optimizers opt(pol, cfg.base_lr);

  std::vector<EpisodeLog> logs;
  std::vector<int> succ_hist;
  std::vector<int> len_hist;
  std::array<long, crm::kStageCount> stage_entries{};
  UpdateStats last{};

  long timestep = 0, episode = 0;
  bool stop = false, early = false;
  int ep_len = 0;

  env.reset(rng);
  ++stage_entries[static_cast<std::size_t>(crm::StageId::Approach)];

  while (!stop && timestep < cfg.total_timesteps) {
    if (cfg.anneal_log_std) {
      const double progress =
          static_cast<double>(timestep) / static_cast<double>(cfg.total_timesteps);
      const double ls = cfg.init_log_std + (cfg.final_log_std - cfg.init_log_std) * progress;
      pol.pi_appr.log_std().setConstant(ls);
      pol.pi_grasp.log_std().setConstant(ls);
    }
    std::vector<Record> batch;
    batch.reserve(static_cast<std::size_t>(cfg.horizon));
    while (static_cast<int>(batch.size()) < cfg.horizon) {
      const crm::StageId stage = env.stage();
      Record r;
      r.stage = stage;
      r.obs = env.observe();
      if (!r.obs.allFinite()) throw std::runtime_error("train: non-finite observation");
      const auto sample = pol.policy(stage).sample(r.obs, rng);
      r.action = sample.action;
      r.log_prob = sample.log_prob;
      r.value = pol.value(stage).forward(r.obs)[0];

      const auto out = env.step(r.action);
      ++timestep;
      ++ep_len;
      r.reward = out.intra + out.transition;
      if (out.transitioned) ++stage_entries[static_cast<std::size_t>(out.stage_after)];

      if (out.terminal || out.truncated) {
        r.episode_end = true;
        r.next_value = out.truncated ? pol.value(env.stage()).forward(env.observe())[0] : 0.0;
        batch.push_back(std::move(r));

        ++episode;
        succ_hist.push_back(out.success ? 1 : 0);
        len_hist.push_back(ep_len);
        EpisodeLog log;
        log.episode = episode;
        log.timestep = timestep;
        log.success_100 = detail::rolling_mean(succ_hist, 100);
        log.ep_len_100 = detail::rolling_mean(len_hist, 100);
        log.lr = lr_schedule(cfg.base_lr,
                             static_cast<double>(timestep) /
                                 static_cast<double>(cfg.total_timesteps));
        log.loss_pi = last.loss_pi;
        log.loss_v = last.loss_v;
        log.stage_entries = stage_entries;
        logs.push_back(log);

        if (early_stop(succ_hist)) {
          early = true;
          stop = true;
          break;
        }
        if (cfg.stop_success_rate > 0.0 && succ_hist.size() >= 100 &&
            log.success_100 >= cfg.stop_success_rate) {
          stop = true;
          break;
        }
        if (cfg.max_episodes > 0 && episode >= cfg.max_episodes) {
          stop = true;
          break;
        }
        env.reset(rng);
        ep_len = 0;
        ++stage_entries[static_cast<std::size_t>(crm::StageId::Approach)];
      } else {
        r.next_value = pol.value(env.stage()).forward(env.observe())[0];
        batch.push_back(std::move(r));
      }
    }
    if (stop) break;

    const auto advs = compute_advantages(batch, cfg.gamma, cfg.gae_lambda);
    const double lr = lr_schedule(
        cfg.base_lr, static_cast<double>(timestep) / static_cast<double>(cfg.total_timesteps));
    last = ppo_update(pol, opt, batch, advs, cfg, lr, rng);
  }

  return TrainResult{std::move(logs), std::move(pol), early, episode, timestep};
}

// ---------------------------------------------------------------------------
// Deterministic (mean-action) policy evaluation on one environment.

struct EvalEpisode {
  bool success = false;
  int length = 0;
};

inline EvalEpisode eval_episode(TaskEnv& env, const StagePolicies& pol, Rng& rng,
                                int step_cap = 600) {
  env.reset(rng);
  EvalEpisode out;
  for (int i = 0; i < step_cap; ++i) {
    const auto action = pol.policy(env.stage()).mean_action(env.observe());
    const auto s = env.step(action);
    ++out.length;
    if (s.terminal || s.truncated) {
      out.success = s.success;
      return out;
    }
  }
  return out;
}

}  // namespace crmgrasp::agent
