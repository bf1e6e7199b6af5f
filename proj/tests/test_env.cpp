#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crmgrasp/env.hpp"
#include "crmgrasp/geometry.hpp"
#include "crmgrasp/rng.hpp"
#include "crmgrasp/taxonomy.hpp"

using namespace crmgrasp;
using namespace crmgrasp::env;
using Catch::Approx;

namespace {

ObjectState unit_box(double ex = 0.05, double ey = 0.05, double ez = 0.05) {
  ObjectState o;
  o.shape = Shape::Box;
  o.size = {ex, ey, ez};
  return o;
}

// Component-wise cross product, independent of Eigen's implementation.
Eigen::Vector3d cross_oracle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return {a.y() * b.z() - a.z() * b.y(), a.z() * b.x() - a.x() * b.z(),
          a.x() * b.y() - a.y() * b.x()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Signed distance fields

TEST_CASE("box sdf face, inside and corner cases") {
  const Eigen::Vector3d size(0.05, 0.05, 0.05);
  auto r = geom::box_sdf({0.05, 0, 0}, size);
  CHECK(r.distance == Approx(0.025));
  CHECK((r.normal - Eigen::Vector3d::UnitX()).norm() < 1e-12);

  r = geom::box_sdf({0.02, 0, 0}, size);
  CHECK(r.distance == Approx(-0.005));
  CHECK((r.normal - Eigen::Vector3d::UnitX()).norm() < 1e-12);

  r = geom::box_sdf({0.035, 0.035, 0.035}, size);
  CHECK(r.distance == Approx(0.01 * std::sqrt(3.0)));
  CHECK((r.normal - Eigen::Vector3d(1, 1, 1).normalized()).norm() < 1e-12);

  r = geom::box_sdf({-0.035, 0, 0}, size);
  CHECK((r.normal + Eigen::Vector3d::UnitX()).norm() < 1e-12);
}

TEST_CASE("sphere sdf and center degeneracy") {
  auto r = geom::sphere_sdf({0, 0, 0.06}, 0.05);
  CHECK(r.distance == Approx(0.01));
  CHECK((r.normal - Eigen::Vector3d::UnitZ()).norm() < 1e-12);

  r = geom::sphere_sdf({0, 0.049, 0}, 0.05);
  CHECK(r.distance == Approx(-0.001));
  CHECK((r.normal - Eigen::Vector3d::UnitY()).norm() < 1e-12);

  r = geom::sphere_sdf({0, 0, 0}, 0.05);
  CHECK(r.degenerate);
}

TEST_CASE("cylinder sdf wall, cap and edge cases") {
  auto r = geom::cylinder_sdf({0.03, 0, 0}, 0.02, 0.05);
  CHECK(r.distance == Approx(0.01));
  CHECK((r.normal - Eigen::Vector3d::UnitX()).norm() < 1e-12);

  r = geom::cylinder_sdf({0, 0, 0.06}, 0.02, 0.05);
  CHECK(r.distance == Approx(0.01));
  CHECK((r.normal - Eigen::Vector3d::UnitZ()).norm() < 1e-12);

  r = geom::cylinder_sdf({0.015, 0, 0}, 0.02, 0.05);
  CHECK(r.distance == Approx(-0.005));
  CHECK((r.normal - Eigen::Vector3d::UnitX()).norm() < 1e-12);

  r = geom::cylinder_sdf({0.03, 0, 0.06}, 0.02, 0.05);
  CHECK(r.distance == Approx(0.01 * std::sqrt(2.0)));
  CHECK((r.normal - Eigen::Vector3d(1, 0, 1).normalized()).norm() < 1e-12);
}

TEST_CASE("sdf normals equal the numerical distance gradient") {
  Rng rng(71);
  ObjectState shapes[3];
  shapes[0] = unit_box(0.06, 0.04, 0.05);
  shapes[1].shape = Shape::Cylinder;
  shapes[1].size = {0.025, 0.04, 0.0};
  shapes[2].shape = Shape::Sphere;
  shapes[2].size = {0.035, 0.0, 0.0};
  const double h = 1e-6;
  for (auto& obj : shapes) {
    int checked = 0;
    while (checked < 20) {
      Eigen::Vector3d p(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                        rng.uniform(-0.15, 0.15));
      const auto r = geom::object_sdf(p, obj);
      // stay away from the surface and interior ridges
      if (r.degenerate || std::abs(r.distance) < 0.005) continue;
      ++checked;
      Eigen::Vector3d grad;
      for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        grad[i] =
            (geom::object_sdf(pp, obj).distance - geom::object_sdf(pm, obj).distance) / (2 * h);
      }
      if (r.distance < 0.0 && grad.norm() < 0.5) continue;  // crossed an interior ridge
      CHECK((grad - r.normal).norm() < 1e-4);
    }
  }
}

TEST_CASE("object sdf respects pose") {
  ObjectState o = unit_box(0.04, 0.08, 0.04);
  o.position = {0.1, 0.0, 0.0};
  o.orient = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()));
  // world +x maps onto the local -y face (half extent 0.04)
  const auto r = geom::object_sdf({0.16, 0.0, 0.0}, o);
  CHECK(r.distance == Approx(0.02));
  CHECK((r.normal - Eigen::Vector3d::UnitX()).norm() < 1e-9);
}

TEST_CASE("top extent per shape") {
  CHECK(geom::top_extent(unit_box(0.04, 0.04, 0.06)) == Approx(0.03));
  ObjectState c;
  c.shape = Shape::Cylinder;
  c.size = {0.02, 0.07, 0.0};
  CHECK(geom::top_extent(c) == Approx(0.07));
  ObjectState s;
  s.shape = Shape::Sphere;
  s.size = {0.03, 0.0, 0.0};
  CHECK(geom::top_extent(s) == Approx(0.03));
}

// ---------------------------------------------------------------------------
// Contact model

TEST_CASE("separated point produces no contact") {
  const ObjectState obj = unit_box();
  EnvConfig cfg;
  std::vector<hand::CandidatePoint> pts = {{{0.0, 0.0, 0.035}, 1, true}};  // 10 mm above
  const auto res = compute_contacts(pts, obj, cfg);
  CHECK(res.contacts.empty());
  CHECK(res.pushed_displacement.norm() == 0.0);
}

TEST_CASE("one millimeter penetration gives half a newton") {
  ObjectState obj;
  obj.shape = Shape::Sphere;
  obj.size = {0.05, 0.0, 0.0};
  obj.mass = 0.02;
  obj.mu = 0.6;
  EnvConfig cfg;
  std::vector<hand::CandidatePoint> pts = {{{0.0, 0.049, 0.0}, 2, true}};
  const auto res = compute_contacts(pts, obj, cfg);
  REQUIRE(res.contacts.size() == 1);
  const auto& c = res.contacts[0];
  CHECK(c.f_normal == Approx(0.5));  // 500 N/m * 1 mm
  CHECK((c.normal - Eigen::Vector3d::UnitY()).norm() < 1e-12);
  // gravity share lies in the tangent plane and is below the friction cap
  const double mg = obj.mass * kGravity;
  CHECK((c.f_tangent - Eigen::Vector3d(0, 0, mg)).norm() < 1e-12);
  CHECK((contact_force(c) - (Eigen::Vector3d(0, -0.5, 0) + Eigen::Vector3d(0, 0, mg))).norm() <
        1e-12);
  CHECK(res.pushed_displacement.norm() == 0.0);  // below the push tolerance
}

TEST_CASE("grazing contact within epsilon carries zero normal force") {
  const ObjectState obj = unit_box();
  EnvConfig cfg;
  std::vector<hand::CandidatePoint> pts = {{{0.0, 0.0, 0.0260}, 0, true}};  // 1 mm gap
  const auto res = compute_contacts(pts, obj, cfg);
  REQUIRE(res.contacts.size() == 1);
  CHECK(res.contacts[0].f_normal == 0.0);
  CHECK(res.contacts[0].f_tangent.norm() == 0.0);  // cap is mu * 0
}

TEST_CASE("deep penetration shoves the object") {
  const ObjectState obj = unit_box();
  EnvConfig cfg;
  std::vector<hand::CandidatePoint> pts = {{{0.0, 0.0, 0.020}, 0, true}};  // 5 mm deep
  const auto res = compute_contacts(pts, obj, cfg);
  REQUIRE(res.contacts.size() == 1);
  // 1 mm beyond push_tol, scaled by push_gain, along -normal
  CHECK((res.pushed_displacement - Eigen::Vector3d(0, 0, -0.0005)).norm() < 1e-12);
}

TEST_CASE("tangential share is capped at the cone boundary") {
  ObjectState obj = unit_box();
  obj.mass = 0.5;  // mg = 4.905 N
  obj.mu = 0.4;
  EnvConfig cfg;
  std::vector<hand::CandidatePoint> pts = {{{0.0, 0.0255, 0.0}, 1, true}};  // 0.5 mm deep, fn=0.25
  const auto res = compute_contacts(pts, obj, cfg);
  REQUIRE(res.contacts.size() == 1);
  const auto& c = res.contacts[0];
  CHECK(c.f_tangent.norm() == Approx(obj.mu * c.f_normal));
  CHECK(std::abs(c.f_tangent.dot(c.normal)) < 1e-12);
}

TEST_CASE("friction cone check against direct enumeration") {
  CHECK_FALSE(friction_cone_check({}, 0.6));

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = rng.uniform(0.2, 0.9);
    std::vector<Contact> contacts(static_cast<std::size_t>(rng.uniform_int(1, 6)));
    for (auto& c : contacts) {
      Eigen::Vector3d n(rng.normal(), rng.normal(), rng.normal());
      c.normal = n.normalized();
      c.f_normal = rng.uniform(0.0, 2.0);
      Eigen::Vector3d t(rng.normal(), rng.normal(), rng.normal());
      t -= t.dot(c.normal) * c.normal;
      // scale to a definite side of the boundary
      const double factor = (rng.uniform() < 0.5) ? 0.8 : 1.2;
      if (t.norm() > 1e-9) c.f_tangent = t.normalized() * (factor * mu * c.f_normal);
    }
    bool expect = true;
    for (const auto& c : contacts) expect = expect && (c.f_tangent.norm() <= mu * c.f_normal);
    CHECK(friction_cone_check(contacts, mu) == expect);
  }
}

// ---------------------------------------------------------------------------
// Rewards

TEST_CASE("approach reward closed forms") {
  RewardConfig cfg;
  GlobalObservation obs;
  obs.o_dist = 0.0;
  CHECK(reward_approach(obs, cfg) == Approx(-1.0));
  obs.n_c = 2;
  CHECK(reward_approach(obs, cfg) == Approx(-1.2));
  obs.n_c = 0;
  obs.o_dist = std::log(2.0);
  CHECK(reward_approach(obs, cfg) == Approx(-2.0));
  obs.o_dist = 10.0;
  CHECK(reward_approach(obs, cfg) == -50.0);  // floored
  cfg.mode = RewardMode::TransitionOnly;
  CHECK(reward_approach(obs, cfg) == 0.0);
  cfg.mode = RewardMode::IntraOnly;  // intra stream unchanged in this mode
  obs.o_dist = 0.0;
  CHECK(reward_approach(obs, cfg) == Approx(-1.0));
}

TEST_CASE("grasp reward closed forms and norm switch") {
  RewardConfig cfg;
  GlobalObservation obs;
  obs.n_c = 1;
  CHECK(reward_grasp(obs, cfg) == Approx(-1.5));  // -1 - 1 + 0.5
  obs.n_c = 0;
  obs.o_force = {1, 0, 0};
  CHECK(reward_grasp(obs, cfg) == Approx(-std::exp(1.0) - 1.0));
  obs.o_force = {0.3, 0.4, 0.0};
  CHECK(reward_grasp(obs, cfg) == Approx(-std::exp(0.7) - 1.0));
  cfg.l2_norm = true;
  CHECK(reward_grasp(obs, cfg) == Approx(-std::exp(0.5) - 1.0));
  cfg.l2_norm = false;
  obs.o_force = {20, 0, 0};
  CHECK(reward_grasp(obs, cfg) == -50.0);  // floored
  cfg.mode = RewardMode::TransitionOnly;
  CHECK(reward_grasp(obs, cfg) == 0.0);
}

TEST_CASE("terminal rewards and the cone bonus") {
  const auto table = crm::TransitionTable::defaults();
  RewardConfig cfg;
  GlobalObservation obs;
  obs.o_cone = true;
  CHECK(terminal_reward(crm::Event::Succ, obs, table, cfg) == Approx(120.0));
  obs.o_cone = false;
  CHECK(terminal_reward(crm::Event::Succ, obs, table, cfg) == Approx(100.0));
  CHECK(terminal_reward(crm::Event::Fail, obs, table, cfg) == Approx(-5.0));
  CHECK(terminal_reward(crm::Event::Aor, obs, table, cfg) == Approx(-20.0));
  CHECK(terminal_reward(crm::Event::Gor, obs, table, cfg) == Approx(-10.0));
  CHECK_THROWS_AS(terminal_reward(crm::Event::Arrive, obs, table, cfg), std::invalid_argument);
}

TEST_CASE("reward config validation") {
  RewardConfig bad;
  bad.rho_appr = 0.0;
  CHECK_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("rho_appr"));
}

// ---------------------------------------------------------------------------
// Events and success predicate

TEST_CASE("event detection thresholds") {
  EnvConfig cfg;
  StageCounters counters;
  GlobalObservation obs;
  obs.o_dist = 0.019;
  auto f = detect_events(obs, crm::StageId::Approach, counters, cfg);
  CHECK(f.arrive);
  CHECK_FALSE(f.aor);
  obs.o_dist = 0.021;
  f = detect_events(obs, crm::StageId::Approach, counters, cfg);
  CHECK_FALSE(f.arrive);
  obs.o_object = {0.51, 0, 0};
  f = detect_events(obs, crm::StageId::Approach, counters, cfg);
  CHECK(f.aor);
  f = detect_events(obs, crm::StageId::Grasp, counters, cfg);
  CHECK(f.gor);
  obs.o_object.setZero();

  counters.stable_streak = 20;
  f = detect_events(obs, crm::StageId::Grasp, counters, cfg);
  CHECK(f.succ);
  counters.stable_streak = 19;
  counters.steps_in_stage = 300;
  f = detect_events(obs, crm::StageId::Grasp, counters, cfg);
  CHECK_FALSE(f.succ);
  CHECK(f.fail);
  counters.stable_streak = 20;
  f = detect_events(obs, crm::StageId::Grasp, counters, cfg);
  CHECK(f.succ);
  CHECK_FALSE(f.fail);  // success wins at the budget edge
}

TEST_CASE("success predicate branches") {
  EnvConfig cfg;
  TaskSpec task;
  task.affordance = Affordance::Lift;
  auto topo = taxonomy::topology_spec(Topology::PPdAb23);
  GlobalObservation obs;
  obs.n_c = 3;
  obs.o_cone = true;
  obs.o_force = {0.1, 0.0, 0.0};
  obs.o_torque = {0.01, 0.0, 0.0};
  std::vector<Contact> contacts(3);
  contacts[0].finger = 0;
  contacts[1].finger = 1;
  contacts[2].finger = 2;

  CHECK(success_predicate(obs, task, topo, contacts, cfg));
  obs.n_c = 2;
  CHECK_FALSE(success_predicate(obs, task, topo, contacts, cfg));
  obs.n_c = 3;
  obs.o_cone = false;
  CHECK_FALSE(success_predicate(obs, task, topo, contacts, cfg));
  obs.o_cone = true;
  obs.o_force = {0.6, 0.0, 0.0};
  CHECK_FALSE(success_predicate(obs, task, topo, contacts, cfg));
  obs.o_force = {0.1, 0.0, 0.0};
  obs.o_torque = {0.06, 0.0, 0.0};
  CHECK_FALSE(success_predicate(obs, task, topo, contacts, cfg));
  obs.o_torque = {0.01, 0.0, 0.0};

  // palm requirement
  auto power = taxonomy::topology_spec(Topology::PoPmAb25);
  obs.n_c = 4;
  contacts.resize(4);
  contacts[3].finger = 3;
  CHECK_FALSE(success_predicate(obs, task, power, contacts, cfg));
  contacts[3].finger = -1;
  CHECK(success_predicate(obs, task, power, contacts, cfg));

  // twist: torque about the success axis, no equilibrium requirement
  task.affordance = Affordance::Twist;
  task.success_axis = Eigen::Vector3d::UnitZ();
  auto side = taxonomy::topology_spec(Topology::InSiAd2);
  obs.n_c = 2;
  obs.o_torque = {0, 0, 0.06};
  CHECK(success_predicate(obs, task, side, contacts, cfg));
  obs.o_torque = {0, 0, 0.04};
  CHECK_FALSE(success_predicate(obs, task, side, contacts, cfg));

  // press: force along the (downward) success axis
  task.affordance = Affordance::Press;
  task.success_axis = Eigen::Vector3d(0, 0, -1);
  auto plat = taxonomy::topology_spec(Topology::Platform);
  obs.n_c = 1;
  std::vector<Contact> palm_only(1);
  palm_only[0].finger = -1;
  obs.o_force = {0, 0, -2.5};
  CHECK(success_predicate(obs, task, plat, palm_only, cfg));
  obs.o_force = {0, 0, -1.5};
  CHECK_FALSE(success_predicate(obs, task, plat, palm_only, cfg));
}

// ---------------------------------------------------------------------------
// Environment dynamics

TEST_CASE("canonical reset pose") {
  GraspEnv e;
  Rng rng(1);
  const auto tasks = taxonomy::desk_lift_pull_suite();
  e.reset(tasks[0], rng, false);
  CHECK(e.observation().o_dist == Approx(0.25));
  CHECK((e.hand_state().palm_pos - (tasks[0].grasp_location + Eigen::Vector3d(0, 0, 0.25)))
            .norm() < 1e-12);
  for (double t : e.hand_state().theta_pip) CHECK(t == 0.0);
  CHECK(e.episode_steps() == 0);
  CHECK(e.observation().n_c == 0);
  CHECK_FALSE(e.observation().o_cone);
}

TEST_CASE("reset rejects tasks outside the workspace") {
  GraspEnv e;
  Rng rng(1);
  auto task = taxonomy::desk_lift_pull_suite()[0];
  task.grasp_location = {0.6, 0.0, 0.0};
  CHECK_THROWS_WITH(e.reset(task, rng, false),
                    Catch::Matchers::ContainsSubstring("outside workspace"));
}

TEST_CASE("randomized resets stay inside the documented bounds") {
  GraspEnv e;
  Rng rng(99);
  const auto task = taxonomy::desk_lift_pull_suite()[0];
  for (int i = 0; i < 200; ++i) {
    e.reset(task, rng, true);
    const Eigen::Vector3d d = e.object().position - task.object.position;
    for (int k = 0; k < 3; ++k) CHECK(std::abs(d[k]) <= e.config().rand_pos + 1e-12);
    const double ang = task.object.orient.angularDistance(e.object().orient);
    CHECK(ang <= e.config().rand_orient + 1e-9);
    for (double t : e.hand_state().theta_pip) {
      CHECK(t >= 0.0);
      CHECK(t <= e.config().rand_joint + 1e-12);
    }
  }
}

TEST_CASE("reset is deterministic in the seed") {
  const auto task = taxonomy::desk_lift_pull_suite()[1];
  GraspEnv a, b;
  Rng ra(7), rb(7);
  a.reset(task, ra, true);
  b.reset(task, rb, true);
  CHECK((a.object().position - b.object().position).norm() == 0.0);
  CHECK((a.observation().flatten() - b.observation().flatten()).norm() == 0.0);
}

TEST_CASE("approach step kinematics and clipping") {
  GraspEnv e;
  Rng rng(1);
  const auto task = taxonomy::desk_lift_pull_suite()[0];
  e.reset(task, rng, false);
  const Eigen::Vector3d p0 = e.hand_state().palm_pos;

  auto res = e.step(Eigen::Vector3d(0, 0, 0), crm::StageId::Approach);
  CHECK((e.hand_state().palm_pos - p0).norm() == 0.0);
  CHECK(res.obs.o_dist == Approx(0.25));
  CHECK(res.intra_reward == Approx(reward_approach(res.obs, e.config().reward)));

  e.step(Eigen::Vector3d(1, 0, 0), crm::StageId::Approach);
  CHECK((e.hand_state().palm_pos - p0 - Eigen::Vector3d(0.02, 0, 0)).norm() < 1e-12);
  e.step(Eigen::Vector3d(-5, 0, 0), crm::StageId::Approach);  // clipped to -1
  CHECK((e.hand_state().palm_pos - p0).norm() < 1e-12);

  CHECK_THROWS_WITH(e.step(Eigen::VectorXd::Zero(8), crm::StageId::Approach),
                    Catch::Matchers::ContainsSubstring("3-dim"));
  CHECK_THROWS_WITH(e.step(Eigen::VectorXd::Zero(3), crm::StageId::Grasp),
                    Catch::Matchers::ContainsSubstring("8-dim"));
  CHECK_THROWS_AS(e.step(Eigen::VectorXd::Zero(3), crm::StageId::GraspSuccess),
                  std::invalid_argument);
}

TEST_CASE("grasp step scales the palm and freezes inactive fingers") {
  GraspEnv e;
  Rng rng(1);
  const auto task = taxonomy::desk_lift_pull_suite()[0];  // pPdAb23: thumb, index, middle
  e.reset(task, rng, false);
  const Eigen::Vector3d p0 = e.hand_state().palm_pos;

  Eigen::VectorXd a = Eigen::VectorXd::Ones(8);
  e.step(a, crm::StageId::Grasp);
  CHECK((e.hand_state().palm_pos - p0 - Eigen::Vector3d(0.005, 0.005, 0.005)).norm() < 1e-12);
  const auto& th = e.hand_state().theta_pip;
  CHECK(th[0] == Approx(0.05));
  CHECK(th[1] == Approx(0.05));
  CHECK(th[2] == Approx(0.05));
  CHECK(th[3] == 0.0);  // ring and little are frozen by the topology
  CHECK(th[4] == 0.0);
}

TEST_CASE("truncation budgets") {
  GraspEnv e;
  Rng rng(1);
  const auto task = taxonomy::desk_lift_pull_suite()[0];
  e.reset(task, rng, false);
  CHECK_FALSE(e.truncated(crm::StageId::Approach));
  for (int i = 0; i < 200; ++i) e.step(Eigen::Vector3d(0, 0, 0), crm::StageId::Approach);
  CHECK(e.truncated(crm::StageId::Approach));
  CHECK_FALSE(e.truncated(crm::StageId::Grasp));  // grasp only ends via the episode cap
  for (int i = 0; i < 300; ++i) e.step(Eigen::VectorXd::Zero(8), crm::StageId::Grasp);
  CHECK(e.episode_steps() == 500);
  CHECK(e.truncated(crm::StageId::Grasp));
}

namespace {

// Hand-written descend-and-close controller for the canonical lift task.
// Returns the step result of the final grasp step taken.
GraspEnv::StepResult run_scripted_grasp(GraspEnv& e, bool* reached_succ) {
  *reached_succ = false;
  GraspEnv::StepResult res;
  for (int i = 0; i < 30; ++i) {
    res = e.step(Eigen::Vector3d(0, 0, -1), crm::StageId::Approach);
    if (res.flags.arrive) break;
  }
  if (!res.flags.arrive) return res;
  // lift the palm slightly so the thumb sweep stays on the box side face
  const double palm_target = e.task().grasp_location.z() + 0.020;
  const std::array<double, 5> theta_target = {1.485, 1.52, 1.52, 0.0, 0.0};
  for (int i = 0; i < 120; ++i) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(8);
    const double dz = palm_target - e.hand_state().palm_pos.z();
    a[2] = std::clamp(dz / (e.config().step_max * e.config().grasp_scale), -1.0, 1.0);
    for (int f = 0; f < 5; ++f) {
      const double dth = theta_target[static_cast<std::size_t>(f)] -
                         e.hand_state().theta_pip[static_cast<std::size_t>(f)];
      a[3 + f] = std::clamp(dth / e.config().dtheta_max, -1.0, 1.0);
    }
    res = e.step(a, crm::StageId::Grasp);
    if (res.flags.succ) {
      *reached_succ = true;
      return res;
    }
  }
  return res;
}

}  // namespace

TEST_CASE("scripted closing sequence reaches a stable grasp") {
  GraspEnv e;
  Rng rng(3);
  const auto tasks = taxonomy::desk_lift_pull_suite();
  REQUIRE(tasks[0].topology == Topology::PPdAb23);
  e.reset(tasks[0], rng, false);

  bool ok = false;
  const auto res = run_scripted_grasp(e, &ok);
  REQUIRE(ok);
  CHECK(res.obs.n_c >= 3);
  CHECK(res.obs.o_cone);
  CHECK(res.obs.o_force.norm() <= e.config().force_tol);
  CHECK(res.obs.o_torque.norm() <= e.config().torque_tol);
  // the grip never pushed the object
  CHECK(e.object().position.norm() == 0.0);
}

TEST_CASE("observed wrench matches a brute-force recomputation") {
  GraspEnv e;
  Rng rng(3);
  e.reset(taxonomy::desk_lift_pull_suite()[0], rng, false);
  bool ok = false;
  const auto res = run_scripted_grasp(e, &ok);
  REQUIRE(ok);
  REQUIRE_FALSE(e.contacts().empty());

  Eigen::Vector3d force(0, 0, -e.object().mass * kGravity);
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  for (const auto& c : e.contacts()) {
    const Eigen::Vector3d f = c.f_normal * (-c.normal) + c.f_tangent;
    force += f;
    torque += cross_oracle(c.point - e.object().position, f);
  }
  CHECK((res.obs.o_force - force).norm() < 1e-9);
  CHECK((res.obs.o_torque - torque).norm() < 1e-9);
  CHECK(res.obs.n_c == static_cast<int>(e.contacts().size()));
}

TEST_CASE("scripted rollout is reproducible") {
  auto run = [](std::uint64_t seed) {
    GraspEnv e;
    Rng rng(seed);
    e.reset(taxonomy::desk_lift_pull_suite()[0], rng, true);
    std::vector<double> trace;
    bool ok = false;
    run_scripted_grasp(e, &ok);
    const auto flat = e.observation().flatten();
    for (int i = 0; i < flat.size(); ++i) trace.push_back(flat[i]);
    trace.push_back(ok ? 1.0 : 0.0);
    trace.push_back(static_cast<double>(e.episode_steps()));
    return trace;
  };
  CHECK(run(11) == run(11));
  CHECK(run(11) != run(12));
}
