#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "crmgrasp/config.hpp"
#include "crmgrasp/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

using namespace crmgrasp;

config::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return config::desk_defaults();
  return config::load_config(config_path);
}

int cmd_train(const std::string& config_path, const std::string& mode,
              const std::vector<std::uint64_t>& seeds, const std::string& out) {
  auto cfg = load_or_default(config_path);
  if (!mode.empty()) cfg.mode = env::reward_mode_from_name(mode);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.out_dir = out;
  cfg.validate();
  const auto runs = harness::run_train(cfg);
  for (const auto& r : runs) {
    std::cout << "seed " << r.seed << " (" << env::reward_mode_name(r.mode) << "): "
              << r.total_episodes << " episodes, final success "
              << harness::format_double(r.final_success) << ", curve " << r.curve_path << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint,
             const std::string& mode, std::uint64_t seed, int trials, const std::string& out) {
  auto cfg = load_or_default(config_path);
  if (!mode.empty()) cfg.mode = env::reward_mode_from_name(mode);
  if (trials > 0) cfg.n_trials = trials;
  cfg.validate();
  const auto policies = agent::StagePolicies::load(checkpoint);
  const auto tasks = harness::load_suite(cfg);
  const auto rep = harness::run_eval(policies, tasks, cfg, cfg.n_trials, seed);
  const std::string path = out.empty() ? "eval.csv" : out;
  harness::write_eval_csv(path, rep);
  for (const auto& r : rep.rows)
    std::cout << r.affordance << ": " << harness::format_double(r.success_rate) << " over "
              << r.n_trials << " trials\n";
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& csvs, const std::string& out) {
  std::vector<harness::EvalReport> reports;
  std::vector<std::string> labels;
  for (const auto& path : csvs) {
    reports.push_back(harness::read_eval_csv(path));
    labels.push_back(std::filesystem::path(path).stem().string());
  }
  const auto rep = harness::emit_report(reports, labels);
  std::cout << rep.text;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << rep.csv;
    std::cout << "wrote " << out << "\n";
  }
  return kExitOk;
}

int cmd_gen_tasks(std::uint64_t seed, int count, const std::string& out) {
  const auto tasks = taxonomy::generate_tasks(seed, count);
  save_tasks(out, tasks);
  std::cout << "wrote " << tasks.size() << " tasks to " << out << "\n";
  return kExitOk;
}

// Fast property checks over the analytic components; mirrors the invariants
// the test suite pins down, callable from the command line.
int cmd_check() {
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  {  // numerical gradient of a small MLP
    Rng rng(11);
    nn::Mlp net = nn::Mlp::glorot({4, 8, 2}, rng);
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.normal();
    nn::Mlp::Trace tr;
    net.forward(x, &tr);
    const auto grads = net.backward(tr, Eigen::Vector2d(1.0, 0.0));
    const double h = 1e-6;
    double max_rel = 0.0;
    auto& w = net.weights()[0];
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        const double keep = w(r, c);
        w(r, c) = keep + h;
        const double up = net.forward(x)[0];
        w(r, c) = keep - h;
        const double dn = net.forward(x)[0];
        w(r, c) = keep;
        const double num = (up - dn) / (2.0 * h);
        const double ana = grads.w[0](r, c);
        max_rel = std::max(max_rel, std::abs(num - ana) / std::max(1.0, std::abs(ana)));
      }
    report("gradient_check", max_rel < 1e-4);
  }
  {  // GAE with lambda=0 equals the one-step TD advantage
    Rng rng(5);
    std::vector<agent::Record> recs(40);
    for (auto& r : recs) {
      r.stage = crm::StageId::Approach;
      r.reward = rng.normal();
      r.value = rng.normal();
      r.next_value = rng.normal();
      r.episode_end = rng.uniform(0.0, 1.0) < 0.2;
    }
    const auto advs = agent::compute_advantages(recs, 0.99, 0.0);
    double max_err = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const double td = recs[i].reward + 0.99 * recs[i].next_value - recs[i].value;
      max_err = std::max(max_err, std::abs(advs.adv[i] - td));
    }
    report("gae_lambda0_td", max_err < 1e-12);
  }
  {  // friction cone check against direct enumeration
    Rng rng(7);
    bool ok = true;
    for (int it = 0; it < 200; ++it) {
      std::vector<env::Contact> contacts(static_cast<std::size_t>(rng.uniform_int(1, 4)));
      for (auto& c : contacts) {
        c.normal = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
        c.f_normal = rng.uniform(0.1, 2.0);
        Eigen::Vector3d t(rng.normal(), rng.normal(), rng.normal());
        t -= t.dot(c.normal) * c.normal;
        c.f_tangent = rng.uniform(0.0, 2.0) * t.normalized();
      }
      const double mu = rng.uniform(0.2, 1.0);
      bool direct = true;
      for (const auto& c : contacts)
        direct = direct && c.f_tangent.norm() <= mu * c.f_normal + 1e-12;
      if (env::friction_cone_check(contacts, mu) != direct) ok = false;
    }
    report("friction_cone_oracle", ok);
  }
  {  // joint coupling ratios are exact products
    bool ok = true;
    for (int f = 1; f <= 4; ++f) {
      const double theta = 0.3 + 0.2 * f;
      const auto j = hand::coupled_joints(f, theta);
      ok = ok && j.pip == theta &&
           j.dip == hand::kAlphaDip[static_cast<std::size_t>(f - 1)] * theta &&
           j.mcp == hand::kAlphaMcp * theta;
    }
    const auto t = hand::coupled_joints(hand::Thumb, 0.9);
    ok = ok && t.mcp == 0.9 && t.pip == hand::kAlphaTmcp * 0.9;
    report("joint_coupling", ok);
  }
  {  // transition rewards are paid exactly once per stage change
    crm::RewardMachine m = crm::RewardMachine::defaults();
    m.begin_episode();
    crm::EventFlags arrive;
    arrive.arrive = true;
    double total = 0.0;
    total += m.step(arrive).transition_reward;
    crm::EventFlags none;
    for (int i = 0; i < 5; ++i) total += m.step(none).transition_reward;
    crm::EventFlags succ;
    succ.succ = true;
    total += m.step(succ).transition_reward;
    const double expected =
        m.table().reward(crm::Event::Arrive) + m.table().reward(crm::Event::Succ);
    report("exactly_once_rewards", std::abs(total - expected) < 1e-9);
  }
  {  // transition table ordering validation rejects bad tables
    bool ok = true;
    try {
      crm::TransitionTable::from_rewards(-2.0, -20, -10, -5, 100).validate();
      ok = false;
    } catch (const std::invalid_argument&) {
    }
    try {
      crm::TransitionTable::from_rewards(10, -5, -10, -5, 100).validate();
      ok = false;
    } catch (const std::invalid_argument&) {
    }
    report("table_validation", ok);
  }
  {  // event precedence: succ beats gor, gor beats fail, arrive beats aor
    crm::EventFlags all;
    all.succ = all.gor = all.fail = true;
    bool ok =
        crm::RewardMachine::select_event(crm::StageId::Grasp, all) == crm::Event::Succ;
    all.succ = false;
    ok = ok && crm::RewardMachine::select_event(crm::StageId::Grasp, all) == crm::Event::Gor;
    all.gor = false;
    ok = ok && crm::RewardMachine::select_event(crm::StageId::Grasp, all) == crm::Event::Fail;
    crm::EventFlags both;
    both.arrive = both.aor = true;
    ok = ok &&
         crm::RewardMachine::select_event(crm::StageId::Approach, both) == crm::Event::Arrive;
    report("event_precedence", ok);
  }

  std::cout << (failures == 0 ? "all checks passed" : "some checks FAILED") << "\n";
  return failures == 0 ? kExitOk : kExitRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextual reward machine grasping toolkit"};
  app.require_subcommand(1);

  std::string config_path, mode, out, checkpoint;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  int trials = 0, count = 26;
  std::vector<std::string> csvs;

  auto* train = app.add_subcommand("train", "train policies per seed");
  train->add_option("--config", config_path, "experiment config JSON");
  train->add_option("--mode", mode, "full|transition_only|intra_only");
  train->add_option("--seed", seeds, "seed list override");
  train->add_option("--out", out, "output directory override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--config", config_path, "experiment config JSON");
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  eval->add_option("--mode", mode, "full|transition_only|intra_only");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--trials", trials, "number of evaluation episodes");
  eval->add_option("--out", out, "eval CSV path");

  auto* compare = app.add_subcommand("compare", "tabulate eval CSVs side by side");
  compare->add_option("csvs", csvs, "eval CSV files")->required();
  compare->add_option("--out", out, "comparison CSV path");

  auto* gen = app.add_subcommand("gen-tasks", "generate a synthetic task file");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--count", count, "number of tasks");
  gen->add_option("--out", out, "task file path")->required();

  app.add_subcommand("check", "run the property/oracle checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, mode, seeds, out);
    if (eval->parsed()) return cmd_eval(config_path, checkpoint, mode, seed, trials, out);
    if (compare->parsed()) return cmd_compare(csvs, out);
    if (gen->parsed()) return cmd_gen_tasks(seed, count, out);
    return cmd_check();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}
