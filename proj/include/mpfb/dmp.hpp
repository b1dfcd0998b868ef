#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mpfb/canonical.hpp"
#include "mpfb/quat.hpp"

namespace mpfb {

// Transformation-system constants, critically damped; the goal system runs at
// half the attractor gain.
constexpr double kAlphaOmega = 25.0;
constexpr double kBetaOmega = kAlphaOmega / 4.0;
constexpr double kAlphaGoal = kAlphaOmega / 2.0;

// One orientation primitive: forcing weights plus the attractor frame.
struct DmpParams {
  Eigen::MatrixXd theta_f;  // N x 3 forcing-term weights
  double tau = 1.0;         // movement duration, seconds
  UnitQuaternion Q0;        // start orientation
  UnitQuaternion QG;        // steady-state goal orientation
  KernelBank bank;
};

struct DmpState {
  UnitQuaternion Q;
  UnitQuaternion Qg;  // evolving goal
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d omegadot = Eigen::Vector3d::Zero();
  CanonicalState phase;
};

// Time-indexed closed-loop execution record.  omega_traj/omegadot_traj rows
// hold the state values entering the transformation system at each step, so
// coupling extraction can invert the dynamics exactly.
struct Rollout {
  Eigen::VectorXd times;                  // T
  double tau = 0.0;                       // movement duration in effect
  std::vector<UnitQuaternion> Q_traj;     // T
  Eigen::MatrixXd omega_traj;             // T x 3
  Eigen::MatrixXd omegadot_traj;          // T x 3
  Eigen::MatrixXd sensors;                // T x S (0 cols when no plant)
  Eigen::VectorXd costs;                  // T (empty when no plant)
  Eigen::MatrixXd phase_traj;             // T x 2 (p, u)
  bool valid = true;

  int steps() const { return static_cast<int>(times.size()); }
  double dt() const { return steps() >= 2 ? times[1] - times[0] : 0.0; }
};

// Expected sensor traces: one scalar DMP per sensor channel sharing the
// kernel bank, evaluated open-loop and phase-aligned with the primitive.
struct ExpectedSensorTraces {
  KernelBank bank;
  Eigen::MatrixXd theta;  // N x S
  Eigen::VectorXd y0;     // S start values
  Eigen::VectorXd goal;   // S steady-state values
  double tau = 1.0;

  int dim() const { return static_cast<int>(y0.size()); }
};

// Per-step sensor reading and scoring returned by a plant.
struct PlantObservation {
  Eigen::VectorXd sensors;
  UnitQuaternion relative;  // tool orientation relative to the board
  double cost = 0.0;        // J_t vs the nominal relative orientation
};

// Closed-loop environment the unroll queries each step.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual int sensor_dim() const = 0;
  virtual PlantObservation observe(const UnitQuaternion& commanded, int step) = 0;
};

// Per-step coupling term source (feedback model, test oracle, ...).
class CouplingSource {
 public:
  virtual ~CouplingSource() = default;
  virtual Eigen::Vector3d coupling(const DmpState& state,
                                   const Eigen::VectorXd& sensor_deviation,
                                   double dt, int step) = 0;
};

struct UnrollOptions {
  double dt_fraction = 1.0 / 300.0;  // dt = tau * dt_fraction
  double horizon_scale = 1.1;        // steps cover [0, horizon_scale * tau]
};

// Phase trajectory (p_t, u_t) under the same record-then-step recursion
// unroll uses; fills in the phase for demos loaded from files.
Eigen::MatrixXd simulate_phase_trajectory(int steps, double tau, double dt);

// f(p, u) = theta_f' * (psi(p) / sum psi) * u.
Eigen::VectorXd forcing_term(const DmpParams& params, double p, double u);

// One Euler step of the transformation and goal evolution systems:
//   tau^2 w' = alpha*(beta*2log(Qg o Q*) - tau*w) + f + c
//   Q <- exp(w dt / 2) o Q          (with the updated w)
//   tau wg = alpha_g*2log(QG o Qg*), Qg <- exp(wg dt / 2) o Qg
// The canonical phase is advanced separately by the caller; the returned
// omegadot is the acceleration of *this* step.
DmpState transformation_step(const DmpState& state, const DmpParams& params,
                             const Eigen::Vector3d& f, const Eigen::Vector3d& c,
                             double dt);

// Angular velocity/acceleration from a quaternion trajectory: forward
// log-differences for omega, central differences plus a 5-sample moving
// average for omegadot.
void derive_kinematics(const std::vector<UnitQuaternion>& Q_traj, double dt,
                       Eigen::MatrixXd& omega, Eigen::MatrixXd& omegadot);

// Fits forcing weights from segmented demonstrations by ridge least squares
// on phase-modulated RBF features.  Start/goal come from demo means, tau from
// the mean demo duration.
DmpParams fit_forcing_term(const std::vector<Rollout>& demos, const KernelBank& bank);

// Inverts the transformation system on a corrected demonstration:
//   c_target = -alpha*(beta*2log(Qg o Q*) - tau_cd*w) + tau_cd^2*w' - f
// The evolving goal is re-simulated from the demo's first orientation toward
// the nominal goal, so the result is exact on data produced by unroll.
Eigen::MatrixXd extract_target_coupling(const Rollout& demo, const DmpParams& nominal);

// Fits one scalar DMP per sensor channel from the sensor blocks of nominal
// rollouts.
ExpectedSensorTraces encode_sensor_traces(const std::vector<Rollout>& nominal_rollouts,
                                          const KernelBank& bank);

// Open-loop evaluation of the expected traces over a horizon of T steps.
Eigen::MatrixXd unroll_expected(const ExpectedSensorTraces& expected, int steps,
                                double tau, double dt);

// Closed-loop unroll.  Every argument except params is optional: without a
// plant the rollout is purely kinematic; weight_override replaces theta_f
// (low-dimensional policy rollouts) and excludes a coupling source.
Rollout unroll(const DmpParams& params, CouplingSource* coupling,
               const ExpectedSensorTraces* expected, Plant* plant,
               const UnrollOptions& opts = {},
               const Eigen::MatrixXd* weight_override = nullptr);

}  // namespace mpfb
