#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crmgrasp/crm.hpp"
#include "crmgrasp/geometry.hpp"
#include "crmgrasp/hand.hpp"
#include "crmgrasp/observation.hpp"
#include "crmgrasp/rng.hpp"
#include "crmgrasp/task.hpp"
#include "crmgrasp/taxonomy.hpp"

namespace crmgrasp::env {

inline constexpr double kGravity = 9.81;

enum class RewardMode : int { Full = 0, TransitionOnly, IntraOnly };

inline const char* reward_mode_name(RewardMode m) {
  switch (m) {
    case RewardMode::Full: return "full";
    case RewardMode::TransitionOnly: return "transition_only";
    case RewardMode::IntraOnly: return "intra_only";
  }
  return "?";
}

inline RewardMode reward_mode_from_name(const std::string& n) {
  if (n == "full") return RewardMode::Full;
  if (n == "transition_only") return RewardMode::TransitionOnly;
  if (n == "intra_only") return RewardMode::IntraOnly;
  throw std::invalid_argument("unknown reward mode: " + n);
}

struct RewardConfig {
  double rho_appr = 0.1;
  double rho_grasp = 0.5;
  double r_cone = 20.0;
  RewardMode mode = RewardMode::Full;
  bool l2_norm = false;      // r_equil norm: L1 of the summed vector by default
  double floor = -50.0;      // clamp on intra-stage rewards

  void validate() const {
    if (rho_appr <= 0.0) throw std::invalid_argument("reward config: rho_appr must be > 0");
    if (rho_grasp <= 0.0) throw std::invalid_argument("reward config: rho_grasp must be > 0");
  }
};

struct EnvConfig {
  // contact model
  double contact_eps = 0.002;   // m, proximity that counts as contact
  double k_contact = 500.0;     // N/m penalty stiffness
  double push_tol = 0.004;      // m, penetration beyond this shoves the object
  double push_gain = 0.5;

  // action scaling
  double step_max = 0.02;       // m per axis per approach step
  double grasp_scale = 0.25;    // reduced palm step size while grasping
  double dtheta_max = 0.05;     // rad per joint per step

  // stage events and budgets
  double arrive_threshold = 0.02;  // m
  double workspace_half = 0.5;     // m
  int approach_budget = 200;
  int grasp_budget = 300;
  int episode_cap = 500;
  int hold_steps = 20;             // consecutive stable steps for e_succ

  // success thresholds
  double force_tol = 0.5;          // N
  double torque_tol = 0.05;        // N*m
  double twist_torque_min = 0.05;  // N*m along success axis
  double press_force_min = 2.0;    // N along success axis

  // reset / domain randomization
  double start_distance = 0.25;    // m from the grasp location
  double preshape_theta = 0.0;     // rad, pre-grasp posture of the independent joints
  double rand_pos = 0.003;         // m per axis
  double rand_orient = 0.200712863979348;  // rad (11.5 deg) about vertical
  double rand_joint = 0.02;        // rad

  RewardConfig reward;
  hand::HandGeometry hand_geom;
};

struct Contact {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();   // outward from the object, into the hand
  double f_normal = 0.0;                              // N
  Eigen::Vector3d f_tangent = Eigen::Vector3d::Zero();  // N, orthogonal to normal
  int finger = -1;                                    // source finger, -1 = palm pad
  bool tip = false;
};

// Force applied by the hand on the object at this contact.
inline Eigen::Vector3d contact_force(const Contact& c) {
  return c.f_normal * (-c.normal) + c.f_tangent;
}

struct ContactResult {
  std::vector<Contact> contacts;
  Eigen::Vector3d pushed_displacement = Eigen::Vector3d::Zero();
};

// Quasi-static contact model: penalty normal forces from penetration depth,
// tangential forces as the per-contact share of gravity resistance projected
// onto the tangent plane and capped by the friction cone. Deep penetration
// shoves the object.
inline ContactResult compute_contacts(const std::vector<hand::CandidatePoint>& points,
                                      const ObjectState& obj, const EnvConfig& cfg) {
  ContactResult res;
  for (const auto& cp : points) {
    const geom::SdfResult s = geom::object_sdf(cp.position, obj);
    if (s.degenerate) continue;
    if (s.distance > cfg.contact_eps) continue;
    Contact c;
    c.point = cp.position;
    c.normal = s.normal;
    c.f_normal = cfg.k_contact * std::max(0.0, -s.distance);
    c.finger = cp.finger;
    c.tip = cp.tip;
    res.contacts.push_back(c);
    const double deep = std::max(0.0, -s.distance - cfg.push_tol);
    res.pushed_displacement += deep * cfg.push_gain * (-s.normal);
  }
  const auto n_c = static_cast<double>(res.contacts.size());
  if (n_c > 0.0) {
    const Eigen::Vector3d share(0.0, 0.0, obj.mass * kGravity / n_c);
    for (auto& c : res.contacts) {
      Eigen::Vector3d t = share - share.dot(c.normal) * c.normal;
      const double tn = t.norm();
      const double cap = obj.mu * c.f_normal;
      if (tn > cap && tn > 0.0) t *= cap / tn;
      c.f_tangent = t;
    }
  }
  return res;
}

// True iff every contact force lies inside the friction cone; an empty
// contact set is not a grasp and reports false.
inline bool friction_cone_check(const std::vector<Contact>& contacts, double mu) {
  if (contacts.empty()) return false;
  for (const auto& c : contacts)
    if (c.f_tangent.norm() > mu * c.f_normal) return false;
  return true;
}

inline double equil_norm(const Eigen::Vector3d& v, const RewardConfig& cfg) {
  return cfg.l2_norm ? v.norm() : v.lpNorm<1>();
}

inline double reward_approach(const GlobalObservation& obs, const RewardConfig& cfg) {
  if (cfg.mode == RewardMode::TransitionOnly) return 0.0;
  const double r = -std::exp(std::abs(obs.o_dist)) - cfg.rho_appr * obs.n_c;
  return std::max(r, cfg.floor);
}

inline double reward_grasp(const GlobalObservation& obs, const RewardConfig& cfg) {
  if (cfg.mode == RewardMode::TransitionOnly) return 0.0;
  const double r_equil =
      -std::exp(equil_norm(obs.o_force, cfg)) - std::exp(equil_norm(obs.o_torque, cfg));
  return std::max(r_equil + cfg.rho_grasp * obs.n_c, cfg.floor);
}

// Reward delivered on entering a terminal stage; the success reward carries
// the friction-cone bonus.
inline double terminal_reward(crm::Event event, const GlobalObservation& obs,
                              const crm::TransitionTable& table, const RewardConfig& cfg) {
  switch (event) {
    case crm::Event::Aor: return table.reward(crm::Event::Aor);
    case crm::Event::Gor: return table.reward(crm::Event::Gor);
    case crm::Event::Fail: return table.reward(crm::Event::Fail);
    case crm::Event::Succ:
      return table.reward(crm::Event::Succ) + (obs.o_cone ? cfg.r_cone : 0.0);
    case crm::Event::Arrive:
      throw std::invalid_argument("terminal_reward: e_arrive is not a terminal event");
  }
  throw std::invalid_argument("terminal_reward: unknown event");
}

// Instantaneous stability/success test; e_succ requires it to hold for
// hold_steps consecutive steps.
inline bool success_predicate(const GlobalObservation& obs, const TaskSpec& task,
                              const taxonomy::TopologySpec& topo,
                              const std::vector<Contact>& contacts, const EnvConfig& cfg) {
  if (obs.n_c < topo.min_contacts) return false;
  if (topo.palm_contact_required) {
    bool palm = false;
    for (const auto& c : contacts) palm = palm || (c.finger < 0);
    if (!palm) return false;
  }
  switch (task.affordance) {
    case Affordance::Twist:
      return obs.o_torque.dot(task.success_axis) >= cfg.twist_torque_min;
    case Affordance::Press:
      return obs.o_force.dot(task.success_axis) >= cfg.press_force_min;
    default:
      return obs.o_cone && obs.o_force.norm() <= cfg.force_tol &&
             obs.o_torque.norm() <= cfg.torque_tol;
  }
}

struct StageCounters {
  int steps_in_stage = 0;
  int stable_streak = 0;
};

inline crm::EventFlags detect_events(const GlobalObservation& obs, crm::StageId stage,
                                     const StageCounters& counters, const EnvConfig& cfg) {
  crm::EventFlags flags;
  const bool out_of_reach = obs.o_object.cwiseAbs().maxCoeff() > cfg.workspace_half;
  if (stage == crm::StageId::Approach) {
    flags.arrive = obs.o_dist < cfg.arrive_threshold;
    flags.aor = out_of_reach;
  } else if (stage == crm::StageId::Grasp) {
    flags.gor = out_of_reach;
    flags.succ = counters.stable_streak >= cfg.hold_steps;
    flags.fail = !flags.succ && counters.steps_in_stage >= cfg.grasp_budget;
  }
  return flags;
}

// Deterministic quasi-static grasping environment. One instance is
// single-owner; run several in parallel with separate rng states if needed.
class GraspEnv {
 public:
  explicit GraspEnv(EnvConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.reward.validate(); }

  void reset(const TaskSpec& task, Rng& rng, bool randomize) {
    if (task.grasp_location.cwiseAbs().maxCoeff() > cfg_.workspace_half)
      throw std::invalid_argument("reset: grasp location outside workspace for task " + task.name);
    task.object.validate();
    task_ = task;
    topo_ = taxonomy::topology_spec(task.topology);
    object_ = task.object;
    hand_ = hand::HandState{};
    for (auto& t : hand_.theta_pip) t = cfg_.preshape_theta;
    hand_.clamp_joints();
    hand_.palm_orient = hand::top_down_palm_orientation() * topo_.palm_orient_offset;
    hand_.palm_pos = task.grasp_location + Eigen::Vector3d(0, 0, cfg_.start_distance);
    if (randomize) {
      for (int i = 0; i < 3; ++i)
        object_.position[i] += rng.uniform(-cfg_.rand_pos, cfg_.rand_pos);
      const double ang = rng.uniform(-cfg_.rand_orient, cfg_.rand_orient);
      object_.orient = Eigen::Quaterniond(Eigen::AngleAxisd(ang, Eigen::Vector3d::UnitZ())) *
                       object_.orient;
      for (auto& t : hand_.theta_pip) t += rng.uniform(-cfg_.rand_joint, cfg_.rand_joint);
      hand_.clamp_joints();
    }
    approach_counters_ = StageCounters{};
    grasp_counters_ = StageCounters{};
    episode_steps_ = 0;
    refresh_observation();
  }

  struct StepResult {
    GlobalObservation obs;
    crm::EventFlags flags;
    double intra_reward = 0.0;
  };

  StepResult step(const Eigen::VectorXd& action, crm::StageId stage) {
    if (stage == crm::StageId::Approach) {
      if (action.size() != 3)
        throw std::invalid_argument("env_step: approach expects a 3-dim action, got " +
                                    std::to_string(action.size()));
      hand_.palm_pos += clipped(action, 3) * cfg_.step_max;
      ++approach_counters_.steps_in_stage;
    } else if (stage == crm::StageId::Grasp) {
      if (action.size() != 8)
        throw std::invalid_argument("env_step: grasp expects an 8-dim action, got " +
                                    std::to_string(action.size()));
      const Eigen::VectorXd a = clipped(action, 8);
      hand_.palm_pos += a.head<3>() * cfg_.step_max * cfg_.grasp_scale;
      for (int f = 0; f < hand::kFingerCount; ++f) {
        if (topo_.active_fingers[static_cast<std::size_t>(f)])
          hand_.theta_pip[static_cast<std::size_t>(f)] += a[3 + f] * cfg_.dtheta_max;
        else
          hand_.theta_pip[static_cast<std::size_t>(f)] = 0.0;
      }
      hand_.clamp_joints();
      ++grasp_counters_.steps_in_stage;
    } else {
      throw std::invalid_argument(std::string("env_step: no actions in stage ") +
                                  crm::stage_name(stage));
    }
    ++episode_steps_;
    refresh_observation();

    StepResult out;
    if (stage == crm::StageId::Grasp) {
      const bool stable = success_predicate(obs_, task_, topo_, contacts_, cfg_);
      grasp_counters_.stable_streak = stable ? grasp_counters_.stable_streak + 1 : 0;
      out.intra_reward = reward_grasp(obs_, cfg_.reward);
    } else {
      out.intra_reward = reward_approach(obs_, cfg_.reward);
    }
    out.flags = detect_events(obs_, stage, counters(stage), cfg_);
    out.obs = obs_;
    // Quasi-static push: deep penetration displaces the object after the
    // step's observation is taken.
    object_.position += push_;
    return out;
  }

  // Episode truncation without a terminal stage (budget exhaustion).
  bool truncated(crm::StageId stage) const {
    if (episode_steps_ >= cfg_.episode_cap) return true;
    return stage == crm::StageId::Approach &&
           approach_counters_.steps_in_stage >= cfg_.approach_budget;
  }

  const GlobalObservation& observation() const { return obs_; }
  const std::vector<Contact>& contacts() const { return contacts_; }
  const hand::HandState& hand_state() const { return hand_; }
  const ObjectState& object() const { return object_; }
  const TaskSpec& task() const { return task_; }
  const taxonomy::TopologySpec& topology() const { return topo_; }
  const EnvConfig& config() const { return cfg_; }
  EnvConfig& config() { return cfg_; }
  const StageCounters& counters(crm::StageId stage) const {
    return stage == crm::StageId::Grasp ? grasp_counters_ : approach_counters_;
  }
  int episode_steps() const { return episode_steps_; }

 private:
  static Eigen::VectorXd clipped(const Eigen::VectorXd& a, int dim) {
    Eigen::VectorXd out(dim);
    for (int i = 0; i < dim; ++i) out[i] = std::clamp(a[i], -1.0, 1.0);
    return out;
  }

  void refresh_observation() {
    const auto points = hand::forward_kinematics(hand_, cfg_.hand_geom);
    auto cr = compute_contacts(points, object_, cfg_);
    contacts_ = std::move(cr.contacts);
    push_ = cr.pushed_displacement;

    obs_ = GlobalObservation{};
    obs_.n_c = static_cast<int>(contacts_.size());
    obs_.o_dist = (hand_.palm_pos - task_.grasp_location).norm();
    obs_.o_object = object_.position;
    obs_.o_cone = friction_cone_check(contacts_, object_.mu);
    obs_.o_relative = hand_.palm_pos - object_.position;
    Eigen::Vector3d force = Eigen::Vector3d(0, 0, -object_.mass * kGravity);
    Eigen::Vector3d torque = Eigen::Vector3d::Zero();
    for (const auto& c : contacts_) {
      const Eigen::Vector3d f = contact_force(c);
      force += f;
      torque += (c.point - object_.position).cross(f);
    }
    obs_.o_force = force;
    obs_.o_torque = torque;
  }

  EnvConfig cfg_;
  TaskSpec task_;
  taxonomy::TopologySpec topo_;
  ObjectState object_;
  hand::HandState hand_;
  std::vector<Contact> contacts_;
  Eigen::Vector3d push_ = Eigen::Vector3d::Zero();
  GlobalObservation obs_;
  StageCounters approach_counters_, grasp_counters_;
  int episode_steps_ = 0;
};

}  // namespace crmgrasp::env
