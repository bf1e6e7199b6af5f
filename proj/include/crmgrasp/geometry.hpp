#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "crmgrasp/task.hpp"

namespace crmgrasp::geom {

struct SdfResult {
  double distance = 0.0;           // signed, negative inside
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // outward unit gradient
  bool degenerate = false;         // gradient undefined (shape center)
};

inline SdfResult sphere_sdf(const Eigen::Vector3d& p, double radius) {
  SdfResult r;
  const double n = p.norm();
  r.distance = n - radius;
  if (n < 1e-12) {
    r.degenerate = true;
    return r;
  }
  r.normal = p / n;
  return r;
}

// Box with full extents `size`, centered at origin.
inline SdfResult box_sdf(const Eigen::Vector3d& p, const Eigen::Vector3d& size) {
  SdfResult r;
  const Eigen::Vector3d h = 0.5 * size;
  const Eigen::Vector3d q = p.cwiseAbs() - h;
  const Eigen::Vector3d qo = q.cwiseMax(0.0);
  const double outside = qo.norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  r.distance = outside + inside;
  if (outside > 1e-12) {
    Eigen::Vector3d n = qo;
    for (int i = 0; i < 3; ++i) n[i] *= (p[i] < 0.0 ? -1.0 : 1.0);
    r.normal = n / outside;
  } else {
    // Inside: push out through the nearest face.
    int k = 0;
    q.maxCoeff(&k);
    r.normal = Eigen::Vector3d::Zero();
    r.normal[k] = (p[k] < 0.0 ? -1.0 : (p[k] > 0.0 ? 1.0 : 0.0));
    if (r.normal[k] == 0.0) {
      r.degenerate = true;
      r.normal[k] = 1.0;
    }
  }
  return r;
}

// Cylinder with axis z, given radius and half height.
inline SdfResult cylinder_sdf(const Eigen::Vector3d& p, double radius, double half_height) {
  SdfResult r;
  const double rho = std::hypot(p.x(), p.y());
  const double dr = rho - radius;
  const double dz = std::abs(p.z()) - half_height;
  Eigen::Vector3d radial = Eigen::Vector3d::Zero();
  if (rho > 1e-12) {
    radial = Eigen::Vector3d(p.x() / rho, p.y() / rho, 0.0);
  }
  if (dr <= 0.0 && dz <= 0.0) {
    // Inside: nearest of side wall or cap.
    if (dr > dz) {
      r.distance = dr;
      if (rho <= 1e-12) {
        r.degenerate = true;
        r.normal = Eigen::Vector3d::UnitX();
      } else {
        r.normal = radial;
      }
    } else {
      r.distance = dz;
      r.normal = Eigen::Vector3d(0, 0, p.z() >= 0.0 ? 1.0 : -1.0);
      if (p.z() == 0.0 && dz == dr) r.degenerate = true;
    }
    return r;
  }
  const double ox = std::max(dr, 0.0);
  const double oz = std::max(dz, 0.0);
  r.distance = std::hypot(ox, oz);
  Eigen::Vector3d n = radial * ox + Eigen::Vector3d(0, 0, p.z() >= 0.0 ? 1.0 : -1.0) * oz;
  const double nn = n.norm();
  if (nn < 1e-12) {
    r.degenerate = true;
    return r;
  }
  r.normal = n / nn;
  return r;
}

// Signed distance of a world point to an object, normal in world frame.
inline SdfResult object_sdf(const Eigen::Vector3d& world_point, const ObjectState& obj) {
  const Eigen::Vector3d local = obj.orient.conjugate() * (world_point - obj.position);
  SdfResult r;
  switch (obj.shape) {
    case Shape::Box: r = box_sdf(local, obj.size); break;
    case Shape::Cylinder: r = cylinder_sdf(local, obj.size[0], obj.size[1]); break;
    case Shape::Sphere: r = sphere_sdf(local, obj.size[0]); break;
  }
  r.normal = obj.orient * r.normal;
  return r;
}

// Highest surface point along +z (used to place grasp locations).
inline double top_extent(const ObjectState& obj) {
  switch (obj.shape) {
    case Shape::Box: return 0.5 * obj.size.z();
    case Shape::Cylinder: return obj.size[1];
    case Shape::Sphere: return obj.size[0];
  }
  return 0.0;
}

}  // namespace crmgrasp::geom
