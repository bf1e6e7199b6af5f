#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace crmgrasp {

enum class Shape : int { Box = 0, Cylinder, Sphere };

inline const char* shape_name(Shape s) {
  switch (s) {
    case Shape::Box: return "box";
    case Shape::Cylinder: return "cylinder";
    case Shape::Sphere: return "sphere";
  }
  return "?";
}

inline Shape shape_from_name(const std::string& n) {
  if (n == "box") return Shape::Box;
  if (n == "cylinder") return Shape::Cylinder;
  if (n == "sphere") return Shape::Sphere;
  throw std::invalid_argument("unknown shape: " + n);
}

// Task objectives, in reporting row order.
enum class Affordance : int { Lift = 0, Pull, Press, Twist, Lever, WrapGrasp, HandleGrasp };

inline constexpr int kAffordanceCount = 7;

inline const char* affordance_name(Affordance a) {
  switch (a) {
    case Affordance::Lift: return "Lift";
    case Affordance::Pull: return "Pull";
    case Affordance::Press: return "Press";
    case Affordance::Twist: return "Twist";
    case Affordance::Lever: return "Lever";
    case Affordance::WrapGrasp: return "Wrap-Grasp";
    case Affordance::HandleGrasp: return "Handle-Grasp";
  }
  return "?";
}

inline Affordance affordance_from_name(const std::string& n) {
  for (int i = 0; i < kAffordanceCount; ++i)
    if (n == affordance_name(static_cast<Affordance>(i))) return static_cast<Affordance>(i);
  throw std::invalid_argument("unknown affordance: " + n);
}

// The six-element grasp taxonomy.
enum class Topology : int { Platform = 0, PoPmAb25, PPdAb2, PPdAb23, PPdAb25, InSiAd2 };

inline constexpr int kTopologyCount = 6;

inline const char* topology_name(Topology t) {
  switch (t) {
    case Topology::Platform: return "platform";
    case Topology::PoPmAb25: return "poPmAb25";
    case Topology::PPdAb2: return "pPdAb2";
    case Topology::PPdAb23: return "pPdAb23";
    case Topology::PPdAb25: return "pPdAb25";
    case Topology::InSiAd2: return "InSiAd2";
  }
  return "?";
}

inline Topology topology_from_name(const std::string& n) {
  for (int i = 0; i < kTopologyCount; ++i)
    if (n == topology_name(static_cast<Topology>(i))) return static_cast<Topology>(i);
  throw std::invalid_argument("unknown topology: " + n);
}

struct ObjectState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orient = Eigen::Quaterniond::Identity();
  Shape shape = Shape::Box;
  // Box: full extents (x, y, z). Cylinder: (radius, half_height, 0), axis z.
  // Sphere: (radius, 0, 0).
  Eigen::Vector3d size = Eigen::Vector3d(0.05, 0.05, 0.05);
  double mass = 0.1;  // kg
  double mu = 0.6;    // friction coefficient

  void validate() const {
    if (!position.allFinite()) throw std::invalid_argument("object: non-finite position");
    if (mu < 0.0) throw std::invalid_argument("object: mu must be >= 0");
    if (mass <= 0.0) throw std::invalid_argument("object: mass must be positive");
    const int nsz = shape == Shape::Box ? 3 : (shape == Shape::Cylinder ? 2 : 1);
    for (int i = 0; i < nsz; ++i)
      if (size[i] <= 0.0) throw std::invalid_argument("object: size parameters must be positive");
  }

  // Largest extent of the object, meters.
  double max_dim() const {
    switch (shape) {
      case Shape::Box: return size.maxCoeff();
      case Shape::Cylinder: return std::max(2.0 * size[0], 2.0 * size[1]);
      case Shape::Sphere: return 2.0 * size[0];
    }
    return 0.0;
  }
};

// One benchmark task: object template, objective, grasp topology and pose.
struct TaskSpec {
  std::string name;
  ObjectState object;
  Affordance affordance = Affordance::Lift;
  Topology topology = Topology::PPdAb23;
  Eigen::Vector3d grasp_location = Eigen::Vector3d::Zero();
  Eigen::Quaterniond grasp_orient = Eigen::Quaterniond::Identity();
  Eigen::Vector3d success_axis = Eigen::Vector3d::UnitZ();  // twist/press tasks
};

// ---------------------------------------------------------------------------
// JSON task file format: array of task objects; lengths in meters, angles in
// radians, masses in kg.

inline nlohmann::json task_to_json(const TaskSpec& t) {
  nlohmann::json j;
  j["name"] = t.name;
  j["affordance"] = affordance_name(t.affordance);
  j["topology"] = topology_name(t.topology);
  j["grasp_location"] = {t.grasp_location.x(), t.grasp_location.y(), t.grasp_location.z()};
  j["grasp_orient"] = {t.grasp_orient.w(), t.grasp_orient.x(), t.grasp_orient.y(),
                       t.grasp_orient.z()};
  j["success_axis"] = {t.success_axis.x(), t.success_axis.y(), t.success_axis.z()};
  nlohmann::json jo;
  jo["shape"] = shape_name(t.object.shape);
  jo["position"] = {t.object.position.x(), t.object.position.y(), t.object.position.z()};
  jo["orient"] = {t.object.orient.w(), t.object.orient.x(), t.object.orient.y(),
                  t.object.orient.z()};
  jo["size"] = {t.object.size.x(), t.object.size.y(), t.object.size.z()};
  jo["mass"] = t.object.mass;
  jo["mu"] = t.object.mu;
  j["object"] = std::move(jo);
  return j;
}

namespace detail {

inline Eigen::Vector3d vec3_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("task file: " + key + " must be a 3-array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Eigen::Quaterniond quat_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 4)
    throw std::invalid_argument("task file: " + key + " must be a 4-array (w,x,y,z)");
  Eigen::Quaterniond q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>());
  q.normalize();
  return q;
}

}  // namespace detail

inline TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  t.name = j.value("name", "");
  t.affordance = affordance_from_name(j.at("affordance").get<std::string>());
  t.topology = topology_from_name(j.at("topology").get<std::string>());
  t.grasp_location = detail::vec3_from_json(j.at("grasp_location"), "grasp_location");
  if (j.contains("grasp_orient"))
    t.grasp_orient = detail::quat_from_json(j.at("grasp_orient"), "grasp_orient");
  if (j.contains("success_axis")) {
    t.success_axis = detail::vec3_from_json(j.at("success_axis"), "success_axis");
    t.success_axis.normalize();
  }
  const auto& jo = j.at("object");
  t.object.shape = shape_from_name(jo.at("shape").get<std::string>());
  t.object.position = detail::vec3_from_json(jo.at("position"), "object.position");
  if (jo.contains("orient")) t.object.orient = detail::quat_from_json(jo.at("orient"), "object.orient");
  t.object.size = detail::vec3_from_json(jo.at("size"), "object.size");
  t.object.mass = jo.at("mass").get<double>();
  t.object.mu = jo.at("mu").get<double>();
  t.object.validate();
  return t;
}

inline void save_tasks(const std::string& path, const std::vector<TaskSpec>& tasks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : tasks) j.push_back(task_to_json(t));
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_tasks: cannot open " + path);
  os << j.dump(2) << "\n";
}

inline std::vector<TaskSpec> load_tasks(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_tasks: cannot open " + path);
  nlohmann::json j;
  is >> j;
  if (!j.is_array()) throw std::invalid_argument("task file: top level must be an array");
  std::vector<TaskSpec> tasks;
  for (const auto& e : j) tasks.push_back(task_from_json(e));
  return tasks;
}

}  // namespace crmgrasp
