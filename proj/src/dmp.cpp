#include "mpfb/dmp.hpp"

#include <cmath>
#include <sstream>

namespace mpfb {

namespace {

constexpr double kRidge = 1e-8;

Eigen::MatrixXd phase_for(const Rollout& demo) {
  const int T = demo.steps();
  if (demo.phase_traj.rows() == T && demo.phase_traj.cols() == 2) {
    return demo.phase_traj;
  }
  return simulate_phase_trajectory(T, demo.tau, demo.dt());
}

double demo_duration(const Rollout& demo) {
  if (demo.tau > 0.0) {
    return demo.tau;
  }
  return demo.times[demo.steps() - 1] - demo.times[0];
}

UnitQuaternion mean_quaternion(const std::vector<UnitQuaternion>& qs) {
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  const Eigen::Vector4d ref = qs.front().coeffs();
  for (const auto& q : qs) {
    Eigen::Vector4d v = q.coeffs();
    if (v.dot(ref) < 0.0) {
      v = -v;
    }
    acc += v;
  }
  acc.normalize();
  return UnitQuaternion(acc[0], acc.tail<3>()).canonicalized();
}

// Evolving-goal trajectory over a demo: starts at the demo's first
// orientation and relaxes toward QG at the goal-system rate.
std::vector<UnitQuaternion> goal_trajectory(const UnitQuaternion& start,
                                            const UnitQuaternion& QG, int steps,
                                            double tau, double dt) {
  std::vector<UnitQuaternion> out(steps);
  UnitQuaternion Qg = start.canonicalized();
  for (int t = 0; t < steps; ++t) {
    out[t] = Qg;
    const Eigen::Vector3d wg = kAlphaGoal * rotation_error(QG, Qg) / tau;
    Qg = compose(quat_exp(0.5 * dt * wg), Qg).normalized().canonicalized();
  }
  return out;
}

Eigen::VectorXd feature_row(const KernelBank& bank, double p, double u) {
  const Eigen::VectorXd psi = kernels(bank, p);
  return psi * (u / psi.sum());
}

Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F,
                            const char* who) {
  const int n = static_cast<int>(X.cols());
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += kRidge;
  const Eigen::MatrixXd w = gram.ldlt().solve(X.transpose() * F);
  if (!w.allFinite()) {
    std::ostringstream msg;
    msg << who << ": regression produced non-finite weights (" << X.rows()
        << " samples, " << n << " features)";
    throw RegressionError(msg.str());
  }
  return w;
}

// Central differences with a 5-sample moving average, one column at a time.
Eigen::MatrixXd smoothed_derivative(const Eigen::MatrixXd& y, double dt) {
  const int T = static_cast<int>(y.rows());
  Eigen::MatrixXd d(T, y.cols());
  for (int t = 0; t < T; ++t) {
    if (t == 0) {
      d.row(t) = (y.row(1) - y.row(0)) / dt;
    } else if (t == T - 1) {
      d.row(t) = (y.row(T - 1) - y.row(T - 2)) / dt;
    } else {
      d.row(t) = (y.row(t + 1) - y.row(t - 1)) / (2.0 * dt);
    }
  }
  Eigen::MatrixXd out(T, y.cols());
  for (int t = 0; t < T; ++t) {
    const int lo = std::max(0, t - 2);
    const int hi = std::min(T - 1, t + 2);
    out.row(t) = d.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd simulate_phase_trajectory(int steps, double tau, double dt) {
  Eigen::MatrixXd out(steps, 2);
  CanonicalState s;
  for (int t = 0; t < steps; ++t) {
    out(t, 0) = s.p;
    out(t, 1) = s.u;
    s = canonical_step(s, tau, dt);
  }
  return out;
}

Eigen::VectorXd forcing_term(const DmpParams& params, double p, double u) {
  return params.theta_f.transpose() * feature_row(params.bank, p, u);
}

DmpState transformation_step(const DmpState& state, const DmpParams& params,
                             const Eigen::Vector3d& f, const Eigen::Vector3d& c,
                             double dt) {
  if (dt <= 0.0) {
    throw ValidationError("transformation_step: dt must be positive");
  }
  const double tau = params.tau;
  DmpState next = state;
  const Eigen::Vector3d err = rotation_error(state.Qg, state.Q);
  next.omegadot =
      (kAlphaOmega * (kBetaOmega * err - tau * state.omega) + f + c) / (tau * tau);
  next.omega = state.omega + dt * next.omegadot;
  next.Q = compose(quat_exp(0.5 * dt * next.omega), state.Q).normalized().canonicalized();
  const Eigen::Vector3d wg = kAlphaGoal * rotation_error(params.QG, state.Qg) / tau;
  next.Qg = compose(quat_exp(0.5 * dt * wg), state.Qg).normalized().canonicalized();
  return next;
}

void derive_kinematics(const std::vector<UnitQuaternion>& Q_traj, double dt,
                       Eigen::MatrixXd& omega, Eigen::MatrixXd& omegadot) {
  const int T = static_cast<int>(Q_traj.size());
  if (T < 2 || dt <= 0.0) {
    throw ValidationError("derive_kinematics: need >= 2 samples and dt > 0");
  }
  omega.resize(T, 3);
  for (int t = 0; t < T - 1; ++t) {
    omega.row(t) = rotation_error(Q_traj[t + 1], Q_traj[t]) / dt;
  }
  omega.row(T - 1) = omega.row(T - 2);
  omegadot = smoothed_derivative(omega, dt);
}

DmpParams fit_forcing_term(const std::vector<Rollout>& demos, const KernelBank& bank) {
  if (demos.empty()) {
    throw RegressionError("fit_forcing_term: no demonstrations");
  }
  int total = 0;
  std::vector<UnitQuaternion> starts, ends;
  double tau_sum = 0.0;
  for (const auto& d : demos) {
    if (d.steps() < 2) {
      throw RegressionError("fit_forcing_term: demonstration shorter than 2 samples");
    }
    total += d.steps();
    starts.push_back(d.Q_traj.front());
    ends.push_back(d.Q_traj.back());
    tau_sum += demo_duration(d);
  }
  if (total < 2) {
    throw RegressionError("fit_forcing_term: fewer than 2 samples");
  }

  DmpParams params;
  params.bank = bank;
  params.Q0 = mean_quaternion(starts);
  params.QG = mean_quaternion(ends);
  params.tau = tau_sum / static_cast<double>(demos.size());

  const int n = bank.size();
  Eigen::MatrixXd X(total, n);
  Eigen::MatrixXd F(total, 3);
  int row = 0;
  for (const auto& d : demos) {
    const int T = d.steps();
    const double tau = demo_duration(d);
    const double dt = d.dt();
    const Eigen::MatrixXd phase = phase_for(d);
    const auto goals = goal_trajectory(d.Q_traj.front(), params.QG, T, tau, dt);
    for (int t = 0; t < T; ++t) {
      const Eigen::Vector3d err = rotation_error(goals[t], d.Q_traj[t]);
      const Eigen::Vector3d w = d.omega_traj.row(t);
      const Eigen::Vector3d wd = d.omegadot_traj.row(t);
      F.row(row) = tau * tau * wd - kAlphaOmega * (kBetaOmega * err - tau * w);
      X.row(row) = feature_row(bank, phase(t, 0), phase(t, 1));
      ++row;
    }
  }
  params.theta_f = ridge_solve(X, F, "fit_forcing_term");
  return params;
}

Eigen::MatrixXd extract_target_coupling(const Rollout& demo, const DmpParams& nominal) {
  const int T = demo.steps();
  if (demo.phase_traj.rows() != T || demo.phase_traj.cols() != 2) {
    throw ValidationError(
        "extract_target_coupling: phase trajectory does not match demo length");
  }
  const double tau = demo_duration(demo);
  const double dt = demo.dt();
  const auto goals = goal_trajectory(demo.Q_traj.front(), nominal.QG, T, tau, dt);

  Eigen::MatrixXd c(T, 3);
  for (int t = 0; t < T; ++t) {
    const Eigen::Vector3d err = rotation_error(goals[t], demo.Q_traj[t]);
    const Eigen::Vector3d w = demo.omega_traj.row(t);
    const Eigen::Vector3d wd = demo.omegadot_traj.row(t);
    const Eigen::Vector3d f =
        nominal.theta_f.transpose() *
        feature_row(nominal.bank, demo.phase_traj(t, 0), demo.phase_traj(t, 1));
    c.row(t) =
        (-kAlphaOmega * (kBetaOmega * err - tau * w) + tau * tau * wd - f).transpose();
  }
  return c;
}

ExpectedSensorTraces encode_sensor_traces(const std::vector<Rollout>& nominal_rollouts,
                                          const KernelBank& bank) {
  if (nominal_rollouts.empty()) {
    throw RegressionError("encode_sensor_traces: no rollouts");
  }
  const int S = static_cast<int>(nominal_rollouts.front().sensors.cols());
  if (S < 1) {
    throw RegressionError("encode_sensor_traces: rollouts carry no sensor data");
  }

  ExpectedSensorTraces out;
  out.bank = bank;
  out.y0 = Eigen::VectorXd::Zero(S);
  out.goal = Eigen::VectorXd::Zero(S);
  double tau_sum = 0.0;
  int total = 0;
  for (const auto& r : nominal_rollouts) {
    if (r.sensors.cols() != S || r.steps() < 2) {
      throw RegressionError("encode_sensor_traces: inconsistent rollout shapes");
    }
    out.y0 += r.sensors.row(0).transpose();
    out.goal += r.sensors.row(r.steps() - 1).transpose();
    tau_sum += demo_duration(r);
    total += r.steps();
  }
  const double inv = 1.0 / static_cast<double>(nominal_rollouts.size());
  out.y0 *= inv;
  out.goal *= inv;
  out.tau = tau_sum * inv;

  const int n = bank.size();
  Eigen::MatrixXd X(total, n);
  Eigen::MatrixXd F(total, S);
  int row = 0;
  for (const auto& r : nominal_rollouts) {
    const int T = r.steps();
    const double tau = demo_duration(r);
    const double dt = r.dt();
    const Eigen::MatrixXd phase = phase_for(r);
    const Eigen::MatrixXd yd = smoothed_derivative(r.sensors, dt);
    const Eigen::MatrixXd ydd = smoothed_derivative(yd, dt);
    Eigen::VectorXd g_ev = r.sensors.row(0).transpose();
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd y = r.sensors.row(t).transpose();
      F.row(row) = (tau * tau * ydd.row(t).transpose() -
                    kAlphaOmega * (kBetaOmega * (g_ev - y) - tau * yd.row(t).transpose()))
                       .transpose();
      X.row(row) = feature_row(bank, phase(t, 0), phase(t, 1));
      g_ev += dt * kAlphaGoal * (out.goal - g_ev) / tau;
      ++row;
    }
  }
  out.theta = ridge_solve(X, F, "encode_sensor_traces");
  return out;
}

Eigen::MatrixXd unroll_expected(const ExpectedSensorTraces& expected, int steps,
                                double tau, double dt) {
  const int S = expected.dim();
  Eigen::MatrixXd out(steps, S);
  Eigen::VectorXd y = expected.y0;
  Eigen::VectorXd yd = Eigen::VectorXd::Zero(S);
  Eigen::VectorXd g_ev = expected.y0;
  CanonicalState phase;
  for (int t = 0; t < steps; ++t) {
    out.row(t) = y.transpose();
    const Eigen::VectorXd f =
        expected.theta.transpose() * feature_row(expected.bank, phase.p, phase.u);
    const Eigen::VectorXd ydd =
        (kAlphaOmega * (kBetaOmega * (g_ev - y) - tau * yd) + f) / (tau * tau);
    yd += dt * ydd;
    y += dt * yd;
    g_ev += dt * kAlphaGoal * (expected.goal - g_ev) / tau;
    phase = canonical_step(phase, tau, dt);
  }
  return out;
}

Rollout unroll(const DmpParams& params, CouplingSource* coupling,
               const ExpectedSensorTraces* expected, Plant* plant,
               const UnrollOptions& opts, const Eigen::MatrixXd* weight_override) {
  if (coupling != nullptr && weight_override != nullptr) {
    throw ValidationError("unroll: feedback and weight override are mutually exclusive");
  }
  if (params.tau <= 0.0) {
    throw ValidationError("unroll: tau must be positive");
  }
  const double dt = params.tau * opts.dt_fraction;
  const int T = static_cast<int>(std::lround(opts.horizon_scale / opts.dt_fraction)) + 1;
  const Eigen::MatrixXd& theta =
      weight_override != nullptr ? *weight_override : params.theta_f;

  const int S = plant != nullptr ? plant->sensor_dim() : 0;
  if (plant != nullptr && expected != nullptr && expected->dim() != S) {
    throw ValidationError("unroll: expected-trace dimension does not match plant");
  }
  Eigen::MatrixXd E;
  if (expected != nullptr) {
    E = unroll_expected(*expected, T, params.tau, dt);
  }

  Rollout roll;
  roll.tau = params.tau;
  roll.times.resize(T);
  roll.Q_traj.resize(T);
  roll.omega_traj.resize(T, 3);
  roll.omegadot_traj.resize(T, 3);
  roll.phase_traj.resize(T, 2);
  roll.sensors.resize(T, S);
  roll.costs = Eigen::VectorXd::Zero(T);

  DmpState state;
  state.Q = params.Q0.canonicalized();
  state.Qg = state.Q;

  for (int t = 0; t < T; ++t) {
    roll.times[t] = t * dt;
    roll.Q_traj[t] = state.Q;
    roll.omega_traj.row(t) = state.omega.transpose();
    roll.phase_traj(t, 0) = state.phase.p;
    roll.phase_traj(t, 1) = state.phase.u;

    Eigen::VectorXd ds = Eigen::VectorXd::Zero(S);
    if (plant != nullptr) {
      PlantObservation obs;
      try {
        obs = plant->observe(state.Q, t);
      } catch (const PlantError&) {
        roll.times.conservativeResize(t);
        roll.Q_traj.resize(t);
        roll.omega_traj.conservativeResize(t, 3);
        roll.omegadot_traj.conservativeResize(t, 3);
        roll.phase_traj.conservativeResize(t, 2);
        roll.sensors.conservativeResize(t, S);
        roll.costs.conservativeResize(t);
        roll.valid = false;
        return roll;
      }
      roll.sensors.row(t) = obs.sensors.transpose();
      roll.costs[t] = obs.cost;
      if (expected != nullptr) {
        ds = obs.sensors - E.row(t).transpose();
      }
    }

    const Eigen::Vector3d f =
        theta.transpose() * feature_row(params.bank, state.phase.p, state.phase.u);
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    if (coupling != nullptr) {
      c = coupling->coupling(state, ds, dt, t);
    }
    const DmpState next = transformation_step(state, params, f, c, dt);
    roll.omegadot_traj.row(t) = next.omegadot.transpose();
    state = next;
    state.phase = canonical_step(state.phase, params.tau, dt);
  }
  return roll;
}

}  // namespace mpfb
