#pragma once

#include <Eigen/Dense>

#include <array>
#include <bitset>
#include <string>

namespace crmgrasp {

// Fields of the global observation vector, in declared order. Flattened the
// full vector is 15 reals: [n_c, o_dist, o_object(3), o_cone, o_relative(3),
// o_force(3), o_torque(3)].
enum class ObsField : int {
  NumContacts = 0,
  Dist,
  ObjectPos,
  ConeFlag,
  Relative,
  Force,
  Torque,
};

inline constexpr int kObsFieldCount = 7;
inline constexpr std::array<int, kObsFieldCount> kObsFieldWidths = {1, 1, 3, 1, 3, 3, 3};
inline constexpr int kObsFlatDim = 15;

using ObsMask = std::bitset<kObsFieldCount>;

inline ObsMask full_obs_mask() {
  ObsMask m;
  m.set();
  return m;
}

inline int masked_obs_dim(const ObsMask& mask) {
  int d = 0;
  for (int f = 0; f < kObsFieldCount; ++f)
    if (mask.test(static_cast<std::size_t>(f))) d += kObsFieldWidths[static_cast<std::size_t>(f)];
  return d;
}

inline const char* obs_field_name(ObsField f) {
  switch (f) {
    case ObsField::NumContacts: return "n_c";
    case ObsField::Dist: return "o_dist";
    case ObsField::ObjectPos: return "o_object";
    case ObsField::ConeFlag: return "o_cone";
    case ObsField::Relative: return "o_relative";
    case ObsField::Force: return "o_force";
    case ObsField::Torque: return "o_torque";
  }
  return "?";
}

struct GlobalObservation {
  int n_c = 0;                                     // contact count
  double o_dist = 0.0;                             // palm to grasp location, m
  Eigen::Vector3d o_object = Eigen::Vector3d::Zero();    // object position, m
  bool o_cone = false;                             // all contacts inside friction cone
  Eigen::Vector3d o_relative = Eigen::Vector3d::Zero();  // palm minus object, m
  Eigen::Vector3d o_force = Eigen::Vector3d::Zero();     // summed contact forces + weight, N
  Eigen::Vector3d o_torque = Eigen::Vector3d::Zero();    // contact torque about COM, N*m

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(kObsFlatDim);
    v << static_cast<double>(n_c), o_dist, o_object, (o_cone ? 1.0 : 0.0), o_relative,
        o_force, o_torque;
    return v;
  }

  bool finite() const {
    return std::isfinite(o_dist) && o_object.allFinite() && o_relative.allFinite() &&
           o_force.allFinite() && o_torque.allFinite();
  }
};

// Projects the observation onto the masked fields, flattened in declared
// field order.
inline Eigen::VectorXd mask_observation(const GlobalObservation& obs, const ObsMask& mask) {
  const Eigen::VectorXd flat = obs.flatten();
  Eigen::VectorXd out(masked_obs_dim(mask));
  int src = 0, dst = 0;
  for (int f = 0; f < kObsFieldCount; ++f) {
    const int w = kObsFieldWidths[static_cast<std::size_t>(f)];
    if (mask.test(static_cast<std::size_t>(f))) {
      out.segment(dst, w) = flat.segment(src, w);
      dst += w;
    }
    src += w;
  }
  return out;
}

}  // namespace crmgrasp
