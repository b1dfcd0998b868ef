#pragma once

#include <Eigen/Dense>

#include "mpfb/common.hpp"

namespace mpfb {

// Rotation vector in so(3), half-angle convention: quat_exp(w) is a rotation
// of angle 2*||w||.  Principal branch requires ||w|| < pi.
using RotVec3 = Eigen::Vector3d;

// Unit quaternion (r, q1, q2, q3) with scalar part first.
struct UnitQuaternion {
  double r = 1.0;
  Eigen::Vector3d q = Eigen::Vector3d::Zero();

  UnitQuaternion() = default;
  UnitQuaternion(double r_, double q1, double q2, double q3) : r(r_), q(q1, q2, q3) {}
  UnitQuaternion(double r_, const Eigen::Vector3d& q_) : r(r_), q(q_) {}

  static UnitQuaternion identity() { return UnitQuaternion(); }

  double norm() const { return std::sqrt(r * r + q.squaredNorm()); }

  UnitQuaternion normalized() const {
    const double n = norm();
    return UnitQuaternion(r / n, q / n);
  }

  // Keeps trajectories on one hemisphere of the double cover (r >= 0); the
  // log map is discontinuous across it.
  UnitQuaternion canonicalized() const {
    return r < 0.0 ? UnitQuaternion(-r, -q) : *this;
  }

  Eigen::Vector4d coeffs() const { return Eigen::Vector4d(r, q.x(), q.y(), q.z()); }
};

// Hamilton product a ∘ b.  Both inputs must be unit within 1e-6.
UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b);

// Conjugation Q* = (r, -q).
UnitQuaternion conjugate(const UnitQuaternion& a);

// Logarithm map SO(3) -> so(3); returns the zero vector near identity.
RotVec3 quat_log(const UnitQuaternion& a);

// Exponential map so(3) -> SO(3); returns identity for near-zero input.
UnitQuaternion quat_exp(const RotVec3& w);

// 2*log(a ∘ b*): the full-angle rotation vector taking b to a.
RotVec3 rotation_error(const UnitQuaternion& a, const UnitQuaternion& b);

// Rotation of `angle_rad` radians about `axis` (need not be normalized).
UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);

}  // namespace mpfb
