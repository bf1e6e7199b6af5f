#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <vector>

namespace crmgrasp::hand {

inline constexpr int kFingerCount = 5;  // thumb, index, middle, ring, little

enum Finger : int { Thumb = 0, Index, Middle, Ring, Little };

inline const char* finger_name(int f) {
  static const char* names[kFingerCount] = {"thumb", "index", "middle", "ring", "little"};
  return names[f];
}

// Joint coupling ratios. Four-finger DIP follows the PIP joint, MCP follows
// PIP with a shared ratio, and the thumb IP follows the TMCP joint.
inline constexpr std::array<double, 4> kAlphaDip = {0.77, 0.75, 0.75, 0.57};
inline constexpr double kAlphaMcp = 0.67;
inline constexpr double kAlphaTmcp = 0.5;

inline constexpr double kThetaMin = 0.0;
inline constexpr double kThetaMax = 1.6;

// Palm pose plus the five independent joint values (PIP for the fingers,
// TMCP for the thumb); all dependent joints are derived.
struct HandState {
  Eigen::Vector3d palm_pos = Eigen::Vector3d::Zero();
  Eigen::Quaterniond palm_orient = Eigen::Quaterniond::Identity();
  std::array<double, kFingerCount> theta_pip = {0, 0, 0, 0, 0};

  void clamp_joints() {
    for (auto& t : theta_pip) t = std::clamp(t, kThetaMin, kThetaMax);
  }
};

struct CandidatePoint {
  Eigen::Vector3d position;  // world frame
  int finger = -1;           // -1 for the palm pad
  bool tip = false;
};

// Planar-chain hand geometry. Fingers are rooted on the front edge of the
// palm plate and flex in their sagittal plane toward the palm normal; the
// thumb is rooted on the opposite edge and flexes toward the fingers.
struct HandGeometry {
  // proximal, middle, distal link lengths for the four fingers, meters
  std::array<double, 3> finger_links = {0.045, 0.025, 0.020};
  // proximal, distal link lengths for the thumb
  std::array<double, 2> thumb_links = {0.040, 0.030};
  // finger anchor offsets across the palm (index..little), meters
  std::array<double, 4> finger_anchor_x = {-0.027, -0.009, 0.009, 0.027};
  double finger_anchor_y = 0.038;  // front edge inset of the 90x80 mm plate
  double thumb_anchor_x = 0.0;
  double thumb_anchor_y = -0.038;
  double palm_pad_offset = 0.005;  // palm pad along the palm normal
};

// Derived joint angles for one finger at independent joint value theta.
struct FingerJoints {
  double mcp = 0.0, pip = 0.0, dip = 0.0;  // thumb: tmcp, ip in mcp/pip slots
};

inline FingerJoints coupled_joints(int finger, double theta) {
  FingerJoints j;
  if (finger == Thumb) {
    j.mcp = theta;                  // TMCP
    j.pip = kAlphaTmcp * theta;     // IP
  } else {
    j.mcp = kAlphaMcp * theta;
    j.pip = theta;
    j.dip = kAlphaDip[static_cast<std::size_t>(finger - 1)] * theta;
  }
  return j;
}

// Candidate contact points: 5 fingertips, 5 middle-phalanx midpoints and the
// palm pad, in world frame.
inline std::vector<CandidatePoint> forward_kinematics(const HandState& hs,
                                                      const HandGeometry& g = {}) {
  std::vector<CandidatePoint> pts;
  pts.reserve(11);
  const Eigen::Quaterniond& R = hs.palm_orient;
  auto to_world = [&](const Eigen::Vector3d& local) -> Eigen::Vector3d {
    return hs.palm_pos + R * local;
  };

  for (int f = 0; f < kFingerCount; ++f) {
    const FingerJoints j = coupled_joints(f, hs.theta_pip[static_cast<std::size_t>(f)]);
    // Forward direction in the palm plane: fingers +y, thumb -y; flexion
    // rotates toward the palm normal +z.
    const double fwd = (f == Thumb) ? -1.0 : 1.0;
    Eigen::Vector3d anchor;
    std::vector<double> lengths, cum;
    if (f == Thumb) {
      anchor = Eigen::Vector3d(g.thumb_anchor_x, g.thumb_anchor_y, 0.0);
      lengths = {g.thumb_links[0], g.thumb_links[1]};
      cum = {j.mcp, j.mcp + j.pip};
    } else {
      anchor = Eigen::Vector3d(g.finger_anchor_x[static_cast<std::size_t>(f - 1)],
                               g.finger_anchor_y, 0.0);
      lengths = {g.finger_links[0], g.finger_links[1], g.finger_links[2]};
      cum = {j.mcp, j.mcp + j.pip, j.mcp + j.pip + j.dip};
    }
    Eigen::Vector3d p = anchor;
    Eigen::Vector3d mid = anchor;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      const Eigen::Vector3d dir(0.0, fwd * std::cos(cum[k]), std::sin(cum[k]));
      // phalanx midpoint: middle phalanx for fingers, distal for the thumb
      if (k == 1) mid = p + 0.5 * lengths[k] * dir;
      p += lengths[k] * dir;
    }
    pts.push_back({to_world(mid), f, false});
    pts.push_back({to_world(p), f, true});
  }
  pts.push_back({to_world(Eigen::Vector3d(0.0, 0.0, g.palm_pad_offset)), -1, false});
  return pts;
}

// Palm orientation for a top-down grasp: palm normal (local +z) points along
// world -z, fingers along world -y.
inline Eigen::Quaterniond top_down_palm_orientation() {
  return Eigen::Quaterniond(Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()));
}

}  // namespace crmgrasp::hand
