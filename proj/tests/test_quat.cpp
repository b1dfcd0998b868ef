#include <doctest.h>

#include <random>

#include "mpfb/quat.hpp"

using namespace mpfb;

namespace {

UnitQuaternion random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  UnitQuaternion q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  return q.normalized();
}

}  // namespace

TEST_CASE("compose: identity and inverse") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const UnitQuaternion q = random_unit(rng);
    const UnitQuaternion qi = compose(UnitQuaternion::identity(), q);
    CHECK(qi.r == doctest::Approx(q.r).epsilon(1e-12));
    CHECK((qi.q - q.q).norm() < 1e-12);

    const UnitQuaternion e = compose(q, conjugate(q));
    CHECK(e.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.q.norm() < 1e-12);
  }
}

TEST_CASE("compose: 90-degree x rotations stack to 180 degrees") {
  // Direct evaluation of the 4x4 composition: (cos45, sin45 x) twice.
  const double c = std::cos(M_PI / 4.0), s = std::sin(M_PI / 4.0);
  const UnitQuaternion h(c, s, 0.0, 0.0);
  const UnitQuaternion q = compose(h, h);
  CHECK(q.r == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.q.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(q.q.y()) < 1e-12);
  CHECK(std::abs(q.q.z()) < 1e-12);
}

TEST_CASE("compose rejects non-unit input") {
  CHECK_THROWS_AS(compose(UnitQuaternion(1.1, 0, 0, 0), UnitQuaternion::identity()),
                  ValidationError);
  CHECK_THROWS_AS(conjugate(UnitQuaternion(0.5, 0.1, 0.1, 0.1)), ValidationError);
}

TEST_CASE("conjugate flips the imaginary part") {
  const UnitQuaternion q(0.5, 0.5, 0.5, 0.5);
  const UnitQuaternion qc = conjugate(q);
  CHECK(qc.r == 0.5);
  CHECK(qc.q.x() == -0.5);
  CHECK(qc.q.y() == -0.5);
  CHECK(qc.q.z() == -0.5);

  const UnitQuaternion qcc = conjugate(qc);
  CHECK((qcc.coeffs() - q.coeffs()).norm() == 0.0);

  const UnitQuaternion id = conjugate(UnitQuaternion::identity());
  CHECK(id.r == 1.0);
  CHECK(id.q.norm() == 0.0);
}

TEST_CASE("log: identity branch and quarter turn") {
  CHECK(quat_log(UnitQuaternion::identity()).norm() == 0.0);

  // (0, [1,0,0]) is a half-turn about x; log returns the half-angle vector.
  const RotVec3 w = quat_log(UnitQuaternion(0.0, 1.0, 0.0, 0.0));
  CHECK(w.x() == doctest::Approx(M_PI / 2.0).epsilon(1e-12));
  CHECK(std::abs(w.y()) < 1e-15);
  CHECK(std::abs(w.z()) < 1e-15);
}

TEST_CASE("exp: zero branch and quarter turn") {
  const UnitQuaternion id = quat_exp(RotVec3::Zero());
  CHECK(id.r == 1.0);

  const UnitQuaternion q = quat_exp(RotVec3(M_PI / 2.0, 0.0, 0.0));
  CHECK(q.r == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.q.x() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exp/log round trip over the principal branch") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(1e-6, M_PI - 1e-3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
    dir.normalize();
    const RotVec3 w = mag(rng) * dir;
    const RotVec3 back = quat_log(quat_exp(w));
    worst = std::max(worst, (back - w).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("log/exp round trip on the positive hemisphere") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    UnitQuaternion q = random_unit(rng).canonicalized();
    if (q.r < 1e-3) {
      continue;  // stay away from the branch boundary
    }
    const UnitQuaternion back = quat_exp(quat_log(q));
    CHECK((back.coeffs() - q.coeffs()).norm() < 1e-9);
  }
}

TEST_CASE("group properties: unit norm and associativity") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const UnitQuaternion a = random_unit(rng);
    const UnitQuaternion b = random_unit(rng);
    const UnitQuaternion c = random_unit(rng);
    CHECK(std::abs(compose(a, b).norm() - 1.0) < 1e-12);
    CHECK(std::abs(conjugate(a).norm() - 1.0) < 1e-12);
    const UnitQuaternion ab_c = compose(compose(a, b), c);
    const UnitQuaternion a_bc = compose(a, compose(b, c));
    CHECK((ab_c.coeffs() - a_bc.coeffs()).norm() < 1e-12);
  }
}

TEST_CASE("rotation_error and from_axis_angle are consistent") {
  const UnitQuaternion q = from_axis_angle(Eigen::Vector3d(0, 0, 1), 0.3);
  const RotVec3 err = rotation_error(q, UnitQuaternion::identity());
  CHECK(err.z() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(err.head<2>().norm() < 1e-15);
}
