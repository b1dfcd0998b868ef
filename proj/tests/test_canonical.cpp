#include <doctest.h>

#include <cmath>

#include "mpfb/canonical.hpp"

using namespace mpfb;

TEST_CASE("canonical system: initial conditions and convergence") {
  const double tau = 0.7;
  const double dt = tau / 1000.0;
  CanonicalState s;
  CHECK(s.p == 1.0);
  CHECK(s.u == 0.0);

  double p_min = 1.0, p_max = 1.0;
  for (int t = 0; t < 2000; ++t) {  // 2 tau
    s = canonical_step(s, tau, dt);
    p_min = std::min(p_min, s.p);
    p_max = std::max(p_max, s.p);
  }
  CHECK(p_max <= 1.0);
  CHECK(p_min >= -dt);  // undershoot bounded by one step's motion
  CHECK(s.p < 0.01);
  CHECK(std::abs(s.u) < 0.01);
}

TEST_CASE("canonical system against an independent RK4 integration") {
  // Same linear ODE integrated with RK4 at a much finer step.
  const double tau = 1.3;
  const double horizon = 2.0 * tau;
  const int n_euler = 2000;
  CanonicalState s;
  for (int t = 0; t < n_euler; ++t) {
    s = canonical_step(s, tau, horizon / n_euler);
  }

  double p = 1.0, u = 0.0;
  const int n_rk = 20000;
  const double h = horizon / n_rk;
  auto f = [&](double pp, double uu, double& dp, double& du) {
    du = kAlphaPhase * (kBetaPhase * (0.0 - pp) - uu) / tau;
    dp = uu / tau;
  };
  for (int t = 0; t < n_rk; ++t) {
    double k1p, k1u, k2p, k2u, k3p, k3u, k4p, k4u;
    f(p, u, k1p, k1u);
    f(p + 0.5 * h * k1p, u + 0.5 * h * k1u, k2p, k2u);
    f(p + 0.5 * h * k2p, u + 0.5 * h * k2u, k3p, k3u);
    f(p + h * k3p, u + h * k3u, k4p, k4u);
    p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
    u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
  }
  CHECK(s.p == doctest::Approx(p).epsilon(0.02));
  CHECK(std::abs(s.u - u) < 0.02);
}

TEST_CASE("canonical_step validates tau and dt") {
  CanonicalState s;
  CHECK_THROWS_AS(canonical_step(s, 0.0, 0.01), ValidationError);
  CHECK_THROWS_AS(canonical_step(s, 1.0, -0.1), ValidationError);
}

TEST_CASE("kernel bank: placement and evaluation") {
  const KernelBank bank = make_kernel_bank(25);
  REQUIRE(bank.size() == 25);
  CHECK(bank.centers[0] == doctest::Approx(1.0).epsilon(1e-6));
  for (int i = 1; i < bank.size(); ++i) {
    CHECK(bank.centers[i] < bank.centers[i - 1]);
    CHECK(bank.widths[i] > 0.0);
  }
  CHECK(bank.centers[bank.size() - 1] < 0.01);

  // Peak value 1 at each center.
  for (int k = 0; k < bank.size(); ++k) {
    const Eigen::VectorXd psi = kernels(bank, bank.centers[k]);
    CHECK(psi[k] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(psi.maxCoeff() <= 1.0 + 1e-12);
    CHECK(psi.minCoeff() >= 0.0);
  }

  // Far from all centers everything decays to zero.
  CHECK(kernels(bank, 50.0).maxCoeff() < 1e-10);
  CHECK(kernels(bank, -50.0).maxCoeff() < 1e-10);

  // The normalizer stays healthy over the phase range.
  for (double p = 0.0; p <= 1.0; p += 0.01) {
    CHECK(kernels(bank, p).sum() > 1e-3);
  }
}

TEST_CASE("kernels match an independent per-element evaluation") {
  const KernelBank bank = make_kernel_bank(25);
  for (double p : {1.0, 0.62, 0.2, 0.05}) {
    const Eigen::VectorXd psi = kernels(bank, p);
    for (int i = 0; i < bank.size(); ++i) {
      const double expected =
          std::exp(-bank.widths[i] * (p - bank.centers[i]) * (p - bank.centers[i]));
      CHECK(psi[i] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("phase modulation sums to u") {
  const KernelBank bank = make_kernel_bank(25);

  CHECK(phase_modulation(bank, 0.3, 0.0).norm() == 0.0);
  CHECK(phase_modulation(bank, 0.77, 1.0).sum() == doctest::Approx(1.0).epsilon(1e-12));

  for (double p : {0.9, 0.5, 0.123}) {
    for (double u : {-4.0, -0.3, 0.25, 2.0}) {
      CHECK(phase_modulation(bank, p, u).sum() == doctest::Approx(u).epsilon(1e-12));
    }
  }
}

TEST_CASE("phase modulation matches the element-wise formula") {
  const KernelBank bank = make_kernel_bank(25);
  const double p = 0.5, u = 0.3;
  const Eigen::VectorXd phi = phase_modulation(bank, p, u);
  const Eigen::VectorXd psi = kernels(bank, p);
  const double total = psi.sum();
  for (int i = 0; i < bank.size(); ++i) {
    CHECK(phi[i] == doctest::Approx(psi[i] * u / total).epsilon(1e-14));
  }
}
