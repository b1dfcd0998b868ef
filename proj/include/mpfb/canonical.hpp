#pragma once

#include <Eigen/Dense>

#include "mpfb/common.hpp"

namespace mpfb {

// Constants of the second-order canonical system, critically damped.
constexpr double kAlphaPhase = 25.0;
constexpr double kBetaPhase = kAlphaPhase / 4.0;

// Phase state shared by all transformation systems of a primitive.
// p starts at 1 and converges to 0; u starts at 0 and converges to 0.
struct CanonicalState {
  double p = 1.0;
  double u = 0.0;
  double up = 0.0;  // du/dt of the last step, kept for logging
};

// One explicit-Euler step of tau*u' = alpha_u*(beta_u*(0 - p) - u), tau*p' = u.
CanonicalState canonical_step(const CanonicalState& s, double tau, double dt);

// Gaussian kernels on the phase variable: psi_i(p) = exp(-chi_i*(p - mu_i)^2).
struct KernelBank {
  Eigen::VectorXd centers;  // mu, strictly decreasing from ~1 toward ~0
  Eigen::VectorXd widths;   // chi > 0
  int size() const { return static_cast<int>(centers.size()); }
};

// Builds N kernels whose centers are the phase values at N equally spaced
// times over [0, 1.5*tau] (the phase trajectory is invariant to tau in
// normalized time, so the bank is tau-independent).  Widths follow the gap to
// the next center; the last width copies the previous one.
KernelBank make_kernel_bank(int n_kernels = 25);

// psi_i(p) for all kernels; every component in (0, 1].
Eigen::VectorXd kernels(const KernelBank& bank, double p);

// Phase kernel modulation vector: phi_i = psi_i(p) * u / sum_j psi_j(p).
// Components sum to u.
Eigen::VectorXd phase_modulation(const KernelBank& bank, double p, double u);

}  // namespace mpfb
