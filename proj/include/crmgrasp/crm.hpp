#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crmgrasp/observation.hpp"

namespace crmgrasp::crm {

enum class StageId : int {
  Initial = 0,
  Approach,
  Grasp,
  OutOfReach,
  GraspFailure,
  GraspSuccess,
};

inline constexpr int kStageCount = 6;

inline const char* stage_name(StageId s) {
  switch (s) {
    case StageId::Initial: return "initial";
    case StageId::Approach: return "approach";
    case StageId::Grasp: return "grasp";
    case StageId::OutOfReach: return "out_of_reach";
    case StageId::GraspFailure: return "grasp_failure";
    case StageId::GraspSuccess: return "grasp_success";
  }
  return "?";
}

inline bool is_terminal(StageId s) {
  return s == StageId::OutOfReach || s == StageId::GraspFailure || s == StageId::GraspSuccess;
}

enum class Event : int {
  Arrive = 0,  // reached the grasp location (approach only)
  Aor,         // object out of reach during approach
  Gor,         // object knocked out of reach during grasping
  Fail,        // grasp attempt exhausted
  Succ,        // stable grasp achieved
};

inline const char* event_name(Event e) {
  switch (e) {
    case Event::Arrive: return "e_arrive";
    case Event::Aor: return "e_aor";
    case Event::Gor: return "e_gor";
    case Event::Fail: return "e_fail";
    case Event::Succ: return "e_succ";
  }
  return "?";
}

struct EventFlags {
  bool arrive = false;
  bool aor = false;
  bool gor = false;
  bool fail = false;
  bool succ = false;

  bool any() const { return arrive || aor || gor || fail || succ; }

  // Approach may raise only arrive/aor; Grasp only gor/fail/succ.
  bool valid_for(StageId stage) const {
    if (stage == StageId::Approach) return !gor && !fail && !succ;
    if (stage == StageId::Grasp) return !arrive && !aor;
    return !any();
  }
};

struct StageContext {
  StageId stage = StageId::Initial;
  int action_dim = 0;
  ObsMask abstraction_mask;
  std::string reward_id;
};

inline ObsMask approach_obs_mask() {
  ObsMask m;
  m.set(static_cast<std::size_t>(ObsField::NumContacts));
  m.set(static_cast<std::size_t>(ObsField::Dist));
  m.set(static_cast<std::size_t>(ObsField::ObjectPos));
  m.set(static_cast<std::size_t>(ObsField::Relative));
  return m;
}

inline std::vector<StageContext> default_stage_contexts() {
  std::vector<StageContext> cs(kStageCount);
  for (int i = 0; i < kStageCount; ++i) cs[static_cast<std::size_t>(i)].stage = static_cast<StageId>(i);
  cs[static_cast<std::size_t>(StageId::Approach)].action_dim = 3;
  cs[static_cast<std::size_t>(StageId::Approach)].abstraction_mask = approach_obs_mask();
  cs[static_cast<std::size_t>(StageId::Approach)].reward_id = "r_appr";
  cs[static_cast<std::size_t>(StageId::Grasp)].action_dim = 8;
  cs[static_cast<std::size_t>(StageId::Grasp)].abstraction_mask = full_obs_mask();
  cs[static_cast<std::size_t>(StageId::Grasp)].reward_id = "r_grasp";
  cs[static_cast<std::size_t>(StageId::OutOfReach)].reward_id = "r_oor";
  cs[static_cast<std::size_t>(StageId::GraspFailure)].reward_id = "r_fail";
  cs[static_cast<std::size_t>(StageId::GraspSuccess)].reward_id = "r_succ";
  return cs;
}

struct TransitionEntry {
  StageId from = StageId::Initial;
  Event event = Event::Arrive;
  StageId to = StageId::Initial;
  double reward = 0.0;
};

// The five legal stage transitions with their rewards. Constructed from
// config data, so validate() checks structure and ordering constraints and
// names the violated constraint.
class TransitionTable {
 public:
  TransitionTable() = default;
  explicit TransitionTable(std::vector<TransitionEntry> entries) : entries_(std::move(entries)) {}

  static TransitionTable defaults() {
    return TransitionTable({{StageId::Approach, Event::Arrive, StageId::Grasp, 10.0},
                            {StageId::Approach, Event::Aor, StageId::OutOfReach, -20.0},
                            {StageId::Grasp, Event::Gor, StageId::OutOfReach, -10.0},
                            {StageId::Grasp, Event::Fail, StageId::GraspFailure, -5.0},
                            {StageId::Grasp, Event::Succ, StageId::GraspSuccess, 100.0}});
  }

  static TransitionTable from_rewards(double arrive, double aor, double gor, double fail,
                                      double succ) {
    return TransitionTable({{StageId::Approach, Event::Arrive, StageId::Grasp, arrive},
                            {StageId::Approach, Event::Aor, StageId::OutOfReach, aor},
                            {StageId::Grasp, Event::Gor, StageId::OutOfReach, gor},
                            {StageId::Grasp, Event::Fail, StageId::GraspFailure, fail},
                            {StageId::Grasp, Event::Succ, StageId::GraspSuccess, succ}});
  }

  const std::vector<TransitionEntry>& entries() const { return entries_; }

  std::optional<TransitionEntry> lookup(StageId from, Event e) const {
    for (const auto& t : entries_)
      if (t.from == from && t.event == e) return t;
    return std::nullopt;
  }

  double reward(Event e) const {
    for (const auto& t : entries_)
      if (t.event == e) return t.reward;
    throw std::invalid_argument(std::string("TransitionTable: no entry for ") + event_name(e));
  }

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const {
    static const std::array<TransitionEntry, 5> legal = {
        TransitionEntry{StageId::Approach, Event::Arrive, StageId::Grasp, 0.0},
        TransitionEntry{StageId::Approach, Event::Aor, StageId::OutOfReach, 0.0},
        TransitionEntry{StageId::Grasp, Event::Gor, StageId::OutOfReach, 0.0},
        TransitionEntry{StageId::Grasp, Event::Fail, StageId::GraspFailure, 0.0},
        TransitionEntry{StageId::Grasp, Event::Succ, StageId::GraspSuccess, 0.0}};
    if (entries_.size() != legal.size())
      throw std::invalid_argument("transition table: expected exactly 5 entries");
    for (const auto& t : entries_) {
      if (t.from == StageId::Approach &&
          (t.to == StageId::GraspFailure || t.to == StageId::GraspSuccess))
        throw std::invalid_argument(
            "transition table: approach cannot transition directly to " +
            std::string(stage_name(t.to)));
      bool ok = false;
      for (const auto& l : legal)
        if (l.from == t.from && l.event == t.event && l.to == t.to) ok = true;
      if (!ok)
        throw std::invalid_argument(std::string("transition table: illegal entry (") +
                                    stage_name(t.from) + ", " + event_name(t.event) + ") -> " +
                                    stage_name(t.to));
    }
    for (const auto& l : legal)
      if (!lookup(l.from, l.event))
        throw std::invalid_argument(std::string("transition table: missing entry for ") +
                                    event_name(l.event));
    const double r_arrive = reward(Event::Arrive);
    const double r_aor = reward(Event::Aor);
    const double r_gor = reward(Event::Gor);
    const double r_fail = reward(Event::Fail);
    const double r_succ = reward(Event::Succ);
    if (!(r_arrive > -1.0))
      throw std::invalid_argument("transition table: R_arrive > -1 violated");
    if (!(r_aor < r_gor))
      throw std::invalid_argument("transition table: R_aor < R_gor violated");
    if (!(r_gor < 0.0))
      throw std::invalid_argument("transition table: R_gor < 0 violated");
    if (!(r_gor < r_fail))
      throw std::invalid_argument("transition table: R_gor < R_fail violated");
    if (!(r_fail < 0.0))
      throw std::invalid_argument("transition table: R_fail < 0 violated");
    if (!(r_succ > 0.0))
      throw std::invalid_argument("transition table: R_succ > 0 violated");
  }

 private:
  std::vector<TransitionEntry> entries_;
};

struct MachineState {
  StageId current = StageId::Initial;
  std::vector<std::pair<StageId, StageId>> history;
  int steps_in_stage = 0;
  int episode_step = 0;
};

struct StepOutcome {
  StageId next_stage;
  double transition_reward = 0.0;
  bool transitioned = false;
  std::optional<Event> event;
};

// The Contextual Reward Machine: per-stage contexts plus the transition
// table. Transition rewards are emitted here and nowhere else, so each one is
// delivered exactly once per transition.
class RewardMachine {
 public:
  RewardMachine(std::vector<StageContext> contexts, TransitionTable table)
      : contexts_(std::move(contexts)), table_(std::move(table)) {
    if (contexts_.size() != kStageCount)
      throw std::invalid_argument("RewardMachine: expected one context per stage");
    std::array<bool, kStageCount> seen{};
    for (const auto& c : contexts_) {
      const auto i = static_cast<std::size_t>(c.stage);
      if (seen[i]) throw std::invalid_argument("RewardMachine: duplicate stage context");
      seen[i] = true;
      if (is_terminal(c.stage) && c.action_dim != 0)
        throw std::invalid_argument("RewardMachine: terminal stage with nonzero action_dim");
      if (!is_terminal(c.stage) && c.stage != StageId::Initial && c.abstraction_mask.none())
        throw std::invalid_argument("RewardMachine: empty abstraction mask for " +
                                    std::string(stage_name(c.stage)));
    }
    table_.validate();
    // contexts indexed by StageId
    std::vector<StageContext> ordered(kStageCount);
    for (auto& c : contexts_) ordered[static_cast<std::size_t>(c.stage)] = c;
    contexts_ = std::move(ordered);
  }

  static RewardMachine defaults() {
    return RewardMachine(default_stage_contexts(), TransitionTable::defaults());
  }

  const StageContext& context(StageId s) const {
    return contexts_[static_cast<std::size_t>(s)];
  }
  const TransitionTable& table() const { return table_; }
  const MachineState& state() const { return state_; }
  StageId current() const { return state_.current; }

  // Initial moves to Approach before the first agent action, with no reward
  // and no history entry.
  void begin_episode() {
    state_ = MachineState{};
    state_.current = StageId::Approach;
  }

  // Event precedence: succ > gor > fail in Grasp, arrive > aor in Approach.
  static std::optional<Event> select_event(StageId stage, const EventFlags& flags) {
    if (stage == StageId::Approach) {
      if (flags.arrive) return Event::Arrive;
      if (flags.aor) return Event::Aor;
    } else if (stage == StageId::Grasp) {
      if (flags.succ) return Event::Succ;
      if (flags.gor) return Event::Gor;
      if (flags.fail) return Event::Fail;
    }
    return std::nullopt;
  }

  StepOutcome step(const EventFlags& flags) {
    if (is_terminal(state_.current) || state_.current == StageId::Initial)
      throw std::logic_error(std::string("crm_step: no transitions from ") +
                             stage_name(state_.current));
    if (!flags.valid_for(state_.current))
      throw std::invalid_argument(std::string("crm_step: flags invalid for stage ") +
                                  stage_name(state_.current));
    ++state_.episode_step;
    const auto ev = select_event(state_.current, flags);
    if (!ev) {
      ++state_.steps_in_stage;
      return {state_.current, 0.0, false, std::nullopt};
    }
    const auto entry = table_.lookup(state_.current, *ev);
    if (!entry)
      throw std::logic_error(std::string("crm_step: no table entry for ") + event_name(*ev));
    state_.history.emplace_back(entry->from, entry->to);
    state_.current = entry->to;
    state_.steps_in_stage = 0;
    return {entry->to, entry->reward, true, *ev};
  }

  Eigen::VectorXd abstract_state(const GlobalObservation& obs) const {
    return abstract_state(context(state_.current), obs);
  }

  static Eigen::VectorXd abstract_state(const StageContext& ctx, const GlobalObservation& obs) {
    return mask_observation(obs, ctx.abstraction_mask);
  }

 private:
  std::vector<StageContext> contexts_;
  TransitionTable table_;
  MachineState state_;
};

inline double cumulative_reward(const std::vector<double>& step_rewards,
                                const std::vector<double>& transition_rewards) {
  double sum = 0.0;
  for (double r : step_rewards) sum += r;
  for (double r : transition_rewards) sum += r;
  return sum;
}

}  // namespace crmgrasp::crm
