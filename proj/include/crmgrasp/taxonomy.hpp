#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "crmgrasp/geometry.hpp"
#include "crmgrasp/nn.hpp"
#include "crmgrasp/rng.hpp"
#include "crmgrasp/task.hpp"

namespace crmgrasp::taxonomy {

// Static metadata for one grasp topology: which fingers close, whether the
// palm pad must touch, and the minimum contact count for a valid grasp.
struct TopologySpec {
  Topology label = Topology::PPdAb23;
  std::array<bool, 5> active_fingers = {false, false, false, false, false};  // thumb..little
  bool palm_contact_required = false;
  int min_contacts = 1;
  Eigen::Quaterniond palm_orient_offset = Eigen::Quaterniond::Identity();
};

inline TopologySpec topology_spec(Topology label) {
  TopologySpec s;
  s.label = label;
  switch (label) {
    case Topology::Platform:  // open hand, presses with the palm pad
      s.palm_contact_required = true;
      s.min_contacts = 1;
      break;
    case Topology::PoPmAb25:  // power grasp: all fingers plus palm
      s.active_fingers = {true, true, true, true, true};
      s.palm_contact_required = true;
      s.min_contacts = 4;
      break;
    case Topology::PPdAb2:  // thumb-index pinch
      s.active_fingers = {true, true, false, false, false};
      s.min_contacts = 2;
      break;
    case Topology::PPdAb23:  // thumb, index, middle tripod
      s.active_fingers = {true, true, true, false, false};
      s.min_contacts = 3;
      break;
    case Topology::PPdAb25:  // thumb opposing all four fingers
      s.active_fingers = {true, true, true, true, true};
      s.min_contacts = 3;
      break;
    case Topology::InSiAd2:  // thumb-index side opposition
      s.active_fingers = {true, true, false, false, false};
      s.min_contacts = 2;
      break;
  }
  return s;
}

// Size threshold splitting power from precision grasps, meters.
inline constexpr double kPowerGraspSizeThreshold = 0.06;

// Input features of the topology selector: object extents, shape one-hot,
// mass and affordance one-hot.
struct FeatureVector {
  Eigen::Vector3d dims = Eigen::Vector3d::Zero();  // meters
  Shape shape = Shape::Box;
  double mass = 0.1;  // kg
  Affordance affordance = Affordance::Lift;

  static constexpr int kDim = 15;

  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kDim);
    // extents in decimeters so their scale matches the one-hot features;
    // the max extent is included explicitly to expose the size boundary
    v.segment<3>(0) = 10.0 * dims;
    v[3] = 10.0 * dims.maxCoeff();
    v[4 + static_cast<int>(shape)] = 1.0;
    v[7] = mass;
    v[8 + static_cast<int>(affordance)] = 1.0;
    return v;
  }

  static FeatureVector of(const ObjectState& obj, Affordance a) {
    FeatureVector f;
    switch (obj.shape) {
      case Shape::Box: f.dims = obj.size; break;
      case Shape::Cylinder:
        f.dims = {2.0 * obj.size[0], 2.0 * obj.size[0], 2.0 * obj.size[1]};
        break;
      case Shape::Sphere:
        f.dims = Eigen::Vector3d::Constant(2.0 * obj.size[0]);
        break;
    }
    f.shape = obj.shape;
    f.mass = obj.mass;
    f.affordance = a;
    return f;
  }
};

// Deterministic rule table standing in for human grasp annotations.
inline Topology label_oracle(const FeatureVector& f, double size_threshold = kPowerGraspSizeThreshold) {
  switch (f.affordance) {
    case Affordance::Press: return Topology::Platform;
    case Affordance::Twist:
    case Affordance::Lever: return Topology::InSiAd2;
    case Affordance::Pull: return Topology::PPdAb25;
    case Affordance::Lift:
    case Affordance::WrapGrasp:
    case Affordance::HandleGrasp:
      return f.dims.maxCoeff() >= size_threshold ? Topology::PoPmAb25 : Topology::PPdAb23;
  }
  throw std::invalid_argument("label_oracle: invalid affordance");
}

// Per-topology probabilities via elementwise sigmoid; a missing network falls
// back to the rule oracle.
inline Eigen::VectorXd select_topology(const FeatureVector& f, const nn::Mlp* net,
                                       bool* used_fallback = nullptr) {
  if (used_fallback) *used_fallback = false;
  if (!net) {
    if (used_fallback) *used_fallback = true;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(kTopologyCount);
    p[static_cast<int>(label_oracle(f))] = 1.0;
    return p;
  }
  if (net->input_dim() != FeatureVector::kDim || net->output_dim() != kTopologyCount)
    throw std::invalid_argument("select_topology: network shape mismatch");
  const Eigen::VectorXd logits = net->forward(f.to_vector());
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

inline Topology argmax_topology(const Eigen::VectorXd& probs) {
  Eigen::Index k = 0;
  probs.maxCoeff(&k);
  return static_cast<Topology>(k);
}

inline FeatureVector random_features(Rng& rng) {
  FeatureVector f;
  f.shape = static_cast<Shape>(rng.uniform_int(0, 2));
  switch (f.shape) {
    case Shape::Box:
      f.dims = {rng.uniform(0.03, 0.12), rng.uniform(0.03, 0.12), rng.uniform(0.03, 0.12)};
      break;
    case Shape::Cylinder: {
      const double r = rng.uniform(0.01, 0.04);
      f.dims = {2.0 * r, 2.0 * r, rng.uniform(0.03, 0.12)};
      break;
    }
    case Shape::Sphere: {
      const double r = rng.uniform(0.02, 0.05);
      f.dims = Eigen::Vector3d::Constant(2.0 * r);
      break;
    }
  }
  f.mass = rng.uniform(0.05, 0.8);
  f.affordance = static_cast<Affordance>(rng.uniform_int(0, kAffordanceCount - 1));
  return f;
}

// Trains the 14->32->32->6 selector on oracle-labeled synthetic features with
// a per-label binary cross-entropy target.
inline nn::Mlp train_selector(int n_samples, Rng& rng, int epochs = 150, double lr = 3e-3) {
  nn::Mlp net = nn::Mlp::glorot({FeatureVector::kDim, 32, 32, kTopologyCount}, rng);
  nn::Adam opt(net, {.lr = lr});
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n_samples));
  std::vector<int> ys(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const FeatureVector f = random_features(rng);
    xs[static_cast<std::size_t>(i)] = f.to_vector();
    ys[static_cast<std::size_t>(i)] = static_cast<int>(label_oracle(f));
  }
  const int batch = 64;
  for (int e = 0; e < epochs; ++e) {
    for (int start = 0; start < n_samples; start += batch) {
      const int end = std::min(start + batch, n_samples);
      nn::MlpGrads g = net.zero_grads();
      for (int i = start; i < end; ++i) {
        nn::Mlp::Trace tr;
        const Eigen::VectorXd logits = net.forward(xs[static_cast<std::size_t>(i)], &tr);
        const Eigen::VectorXd p = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
        Eigen::VectorXd target = Eigen::VectorXd::Zero(kTopologyCount);
        target[ys[static_cast<std::size_t>(i)]] = 1.0;
        g += net.backward(tr, p - target);  // d(BCE)/d(logit)
      }
      g *= 1.0 / static_cast<double>(end - start);
      opt.step(net, g);
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Synthetic task generation

inline constexpr double kWorkspaceHalf = 0.5;

inline ObjectState random_object(Rng& rng) {
  ObjectState o;
  o.shape = static_cast<Shape>(rng.uniform_int(0, 2));
  switch (o.shape) {
    case Shape::Box:
      o.size = {rng.uniform(0.03, 0.12), rng.uniform(0.03, 0.12), rng.uniform(0.03, 0.12)};
      break;
    case Shape::Cylinder:
      o.size = {rng.uniform(0.01, 0.04), rng.uniform(0.015, 0.08), 0.0};
      break;
    case Shape::Sphere:
      o.size = {rng.uniform(0.02, 0.05), 0.0, 0.0};
      break;
  }
  o.mass = rng.uniform(0.05, 0.8);
  o.mu = rng.uniform(0.3, 0.9);
  o.position = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0};
  return o;
}

// Generates n tasks covering all seven affordances; the grasp location is the
// surface point opposite the (top-down) approach axis.
inline std::vector<TaskSpec> generate_tasks(std::uint64_t seed, int n) {
  if (n < kAffordanceCount)
    throw std::invalid_argument("generate_tasks: need at least 7 tasks to cover affordances");
  Rng rng(seed);
  std::vector<TaskSpec> tasks;
  tasks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    TaskSpec t;
    // Round-robin over the first 7 guarantees affordance coverage.
    t.affordance = (i < kAffordanceCount)
                       ? static_cast<Affordance>(i)
                       : static_cast<Affordance>(rng.uniform_int(0, kAffordanceCount - 1));
    t.object = random_object(rng);
    t.topology = label_oracle(FeatureVector::of(t.object, t.affordance));
    t.grasp_location = t.object.position + Eigen::Vector3d(0, 0, geom::top_extent(t.object));
    t.success_axis = (t.affordance == Affordance::Press) ? Eigen::Vector3d(0, 0, -1)
                                                         : Eigen::Vector3d(0, 0, 1);
    t.name = std::string(affordance_name(t.affordance)) + "_" + shape_name(t.object.shape) +
             "_" + std::to_string(i);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

// Small fixed Lift/Pull suite used by the desk-scale experiments.
inline std::vector<TaskSpec> desk_lift_pull_suite() {
  std::vector<TaskSpec> tasks;
  auto make_box = [](const std::string& name, Affordance a, const Eigen::Vector3d& size,
                     double mass, double mu) {
    TaskSpec t;
    t.name = name;
    t.affordance = a;
    t.object.shape = Shape::Box;
    t.object.size = size;
    t.object.mass = mass;
    t.object.mu = mu;
    t.object.position = Eigen::Vector3d::Zero();
    t.topology = label_oracle(FeatureVector::of(t.object, a));
    t.grasp_location = Eigen::Vector3d(0, 0, geom::top_extent(t.object));
    return t;
  };
  tasks.push_back(make_box("lift_box_small", Affordance::Lift, {0.055, 0.050, 0.050}, 0.08, 0.7));
  tasks.push_back(make_box("lift_box_heavy", Affordance::Lift, {0.056, 0.050, 0.050}, 0.16, 0.8));
  tasks.push_back(make_box("pull_box", Affordance::Pull, {0.058, 0.050, 0.050}, 0.10, 0.7));
  return tasks;
}

}  // namespace crmgrasp::taxonomy
