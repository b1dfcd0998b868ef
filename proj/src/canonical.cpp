#include "mpfb/canonical.hpp"

#include <cmath>

namespace mpfb {

CanonicalState canonical_step(const CanonicalState& s, double tau, double dt) {
  if (tau <= 0.0) {
    throw ValidationError("canonical_step: tau must be positive");
  }
  if (dt <= 0.0) {
    throw ValidationError("canonical_step: dt must be positive");
  }
  CanonicalState next;
  next.up = kAlphaPhase * (kBetaPhase * (0.0 - s.p) - s.u) / tau;
  next.u = s.u + dt * next.up;
  next.p = s.p + dt * s.u / tau;
  return next;
}

KernelBank make_kernel_bank(int n_kernels) {
  if (n_kernels < 2) {
    throw ValidationError("make_kernel_bank: need at least 2 kernels");
  }
  // Simulate the phase over [0, 1.5] in normalized time and sample p at
  // equally spaced instants; reproduces equal-time spacing of the centers.
  const double tau = 1.0;
  const double horizon = 1.5;
  const int steps = 3000;
  const double dt = horizon / steps;

  KernelBank bank;
  bank.centers.resize(n_kernels);
  bank.widths.resize(n_kernels);

  CanonicalState s;
  int next_sample = 0;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * dt;
    const double t_sample = next_sample * horizon / (n_kernels - 1);
    if (next_sample < n_kernels && t >= t_sample - 0.5 * dt) {
      bank.centers[next_sample++] = s.p;
    }
    s = canonical_step(s, tau, dt);
  }
  while (next_sample < n_kernels) {
    bank.centers[next_sample++] = s.p;
  }

  for (int i = 0; i < n_kernels - 1; ++i) {
    const double gap = std::abs(bank.centers[i] - bank.centers[i + 1]);
    bank.widths[i] = 1.0 / (2.0 * std::pow(0.55 * gap, 2));
  }
  bank.widths[n_kernels - 1] = bank.widths[n_kernels - 2];
  return bank;
}

Eigen::VectorXd kernels(const KernelBank& bank, double p) {
  return (-bank.widths.array() * (p - bank.centers.array()).square()).exp();
}

Eigen::VectorXd phase_modulation(const KernelBank& bank, double p, double u) {
  const Eigen::VectorXd psi = kernels(bank, p);
  return psi * (u / psi.sum());
}

}  // namespace mpfb
