#include "mpfb/quat.hpp"

#include <cmath>

namespace mpfb {

namespace {

constexpr double kUnitTol = 1e-6;
constexpr double kSmallAngle = 1e-8;

void require_unit(const UnitQuaternion& a, const char* who) {
  if (std::abs(a.norm() - 1.0) > kUnitTol) {
    throw ValidationError(std::string(who) + ": quaternion is not unit-norm");
  }
}

}  // namespace

UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b) {
  require_unit(a, "compose");
  require_unit(b, "compose");
  UnitQuaternion out;
  out.r = a.r * b.r - a.q.dot(b.q);
  out.q = a.r * b.q + b.r * a.q + a.q.cross(b.q);
  return out;
}

UnitQuaternion conjugate(const UnitQuaternion& a) {
  require_unit(a, "conjugate");
  return UnitQuaternion(a.r, -a.q);
}

RotVec3 quat_log(const UnitQuaternion& a) {
  const double qn = a.q.norm();
  if (qn < kSmallAngle) {
    return RotVec3::Zero();
  }
  const double r = std::clamp(a.r, -1.0, 1.0);
  const double angle = std::acos(r);
  // sin(acos(r)) == ||q|| for unit quaternions; use ||q|| directly.
  return (angle / qn) * a.q;
}

UnitQuaternion quat_exp(const RotVec3& w) {
  const double wn = w.norm();
  if (wn < kSmallAngle) {
    return UnitQuaternion::identity();
  }
  return UnitQuaternion(std::cos(wn), (std::sin(wn) / wn) * w);
}

RotVec3 rotation_error(const UnitQuaternion& a, const UnitQuaternion& b) {
  return 2.0 * quat_log(compose(a, conjugate(b)));
}

UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  const double n = axis.norm();
  if (n < kSmallAngle) {
    return UnitQuaternion::identity();
  }
  return quat_exp((0.5 * angle_rad / n) * axis);
}

}  // namespace mpfb
