#include "mpfb/testbed.hpp"

#include <cmath>

#include "mpfb/rng.hpp"

namespace mpfb {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double smoothstep5(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

// Normalized progress of a move spanning [t0, t1].
double move_progress(double t, double t0, double t1) {
  return smoothstep5((t - t0) / (t1 - t0));
}

}  // namespace

std::vector<EnvSetting> canonical_settings() {
  return {{0.0, SettingRole::kDefault},   {2.5, SettingRole::kUnseen},
          {5.0, SettingRole::kSeen},      {6.3, SettingRole::kSeen},
          {7.5, SettingRole::kSeen},      {8.8, SettingRole::kUnseen},
          {10.0, SettingRole::kInitiallyUnseen}};
}

const char* role_name(SettingRole role) {
  switch (role) {
    case SettingRole::kDefault:
      return "default";
    case SettingRole::kSeen:
      return "seen";
    case SettingRole::kInitiallyUnseen:
      return "initially-unseen";
    case SettingRole::kUnseen:
      return "unseen";
  }
  return "?";
}

TiltBoardPlant::TiltBoardPlant(const PlantConfig& cfg,
                               std::vector<UnitQuaternion> nominal_reference)
    : cfg_(cfg),
      reference_(std::move(nominal_reference)),
      noise_rng_(cfg.noise_seed) {
  if (reference_.empty()) {
    throw ValidationError("TiltBoardPlant: empty nominal reference");
  }
  tilt_ = from_axis_angle(Eigen::Vector3d::UnitX(), cfg_.roll_deg * kDegToRad);

  std::mt19937_64 rng(sub_seed(cfg_.seed, "plant-structure"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  mixing_.resize(cfg_.sensor_dim, 3);
  for (int i = 0; i < cfg_.sensor_dim; ++i) {
    for (int j = 0; j < 3; ++j) {
      mixing_(i, j) = cfg_.sensor_gain * gauss(rng);
    }
  }
  std::uniform_real_distribution<double> offset(0.2, 0.8);
  std::uniform_real_distribution<double> ramp(-0.5, 0.5);
  base_offset_.resize(cfg_.sensor_dim);
  base_ramp_.resize(cfg_.sensor_dim);
  for (int i = 0; i < cfg_.sensor_dim; ++i) {
    base_offset_[i] = offset(rng);
    base_ramp_[i] = ramp(rng);
  }
}

Eigen::VectorXd TiltBoardPlant::base_traces(int step) const {
  const int last = static_cast<int>(reference_.size()) - 1;
  const double x = last > 0 ? static_cast<double>(std::min(step, last)) / last : 0.0;
  return base_offset_ + smoothstep5(x) * base_ramp_;
}

PlantObservation TiltBoardPlant::observe(const UnitQuaternion& commanded, int step) {
  const int last = static_cast<int>(reference_.size()) - 1;
  const int tc = std::min(step, last);
  const UnitQuaternion board_aligned = compose(tilt_, reference_[tc]);
  const Eigen::Vector3d e = rotation_error(board_aligned, commanded);
  Eigen::Vector3d e_roll = Eigen::Vector3d::Zero();
  e_roll.x() = e.x();

  Eigen::VectorXd dev = mixing_ * e_roll;
  if (cfg_.saturate_sensors) {
    for (int i = 0; i < dev.size(); ++i) {
      const double knee = cfg_.saturation_knee * std::max(std::abs(mixing_(i, 0)), 1e-9);
      dev[i] = knee * std::tanh(dev[i] / knee);
    }
  }

  PlantObservation obs;
  obs.sensors = base_traces(tc) + dev;
  if (cfg_.noise_sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, cfg_.noise_sigma);
    for (int i = 0; i < obs.sensors.size(); ++i) {
      obs.sensors[i] += gauss(noise_rng_);
    }
  }
  obs.relative = compose(conjugate(tilt_), commanded);
  obs.cost = step_cost(reference_[tc], obs.relative);
  return obs;
}

std::unique_ptr<Plant> TiltBoardPlantFactory::make(std::uint64_t noise_seed) {
  PlantConfig cfg = cfg_;
  cfg.noise_seed = noise_seed;
  return std::make_unique<TiltBoardPlant>(cfg, reference_);
}

TrackingOracle::TrackingOracle(const DmpParams& nominal,
                               std::vector<UnitQuaternion> reference)
    : nominal_(nominal), reference_(std::move(reference)) {
  if (reference_.empty()) {
    throw ValidationError("TrackingOracle: empty reference");
  }
}

Eigen::Vector3d TrackingOracle::coupling(const DmpState& state,
                                         const Eigen::VectorXd& /*sensor_deviation*/,
                                         double dt, int step) {
  const int last = static_cast<int>(reference_.size()) - 1;
  const UnitQuaternion& target = reference_[std::min(step + 1, last)];
  const Eigen::Vector3d w_next = rotation_error(target, state.Q) / dt;
  const Eigen::Vector3d wd_req = (w_next - state.omega) / dt;
  const Eigen::Vector3d f =
      forcing_term(nominal_, state.phase.p, state.phase.u);
  const Eigen::Vector3d err = rotation_error(state.Qg, state.Q);
  const double tau = nominal_.tau;
  return tau * tau * wd_req -
         kAlphaOmega * (kBetaOmega * err - tau * state.omega) - f;
}

ProportionalOracle::ProportionalOracle(const DmpParams& nominal,
                                       std::vector<UnitQuaternion> reference,
                                       double gain, double noise_sigma,
                                       std::uint64_t seed)
    : nominal_(nominal),
      reference_(std::move(reference)),
      gain_(gain),
      noise_sigma_(noise_sigma),
      rng_(seed) {
  if (reference_.empty()) {
    throw ValidationError("ProportionalOracle: empty reference");
  }
}

Eigen::Vector3d ProportionalOracle::coupling(const DmpState& state,
                                             const Eigen::VectorXd& /*sensor_deviation*/,
                                             double /*dt*/, int step) {
  const int last = static_cast<int>(reference_.size()) - 1;
  const UnitQuaternion& target = reference_[std::min(step, last)];
  const Eigen::Vector3d e = rotation_error(target, state.Q);
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  c.x() = gain_ * (-state.phase.u) * e.x();
  if (noise_sigma_ > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise_sigma_);
    c.x() += gauss(rng_);
  }
  return c;
}

std::vector<UnitQuaternion> tilted_reference(const std::vector<UnitQuaternion>& nominal,
                                             double roll_deg) {
  const UnitQuaternion tilt =
      from_axis_angle(Eigen::Vector3d::UnitX(), roll_deg * kDegToRad);
  std::vector<UnitQuaternion> out;
  out.reserve(nominal.size());
  for (const auto& q : nominal) {
    out.push_back(compose(tilt, q).canonicalized());
  }
  return out;
}

std::vector<Rollout> generate_corrected_demos(const PlantConfig& plant_cfg,
                                              const DmpParams& nominal,
                                              const std::vector<UnitQuaternion>& reference,
                                              int n, std::uint64_t seed,
                                              const CorrectionOptions& opts) {
  if (plant_cfg.roll_deg == 0.0) {
    throw ValidationError("generate_corrected_demos: setting must be non-default");
  }
  const auto target = tilted_reference(reference, plant_cfg.roll_deg);
  std::mt19937_64 gain_rng(sub_seed(seed, "demo-gains"));
  std::uniform_real_distribution<double> jitter(-opts.gain_jitter, opts.gain_jitter);

  std::vector<Rollout> demos;
  demos.reserve(std::max(n, 0));
  for (int i = 0; i < n; ++i) {
    PlantConfig pc = plant_cfg;
    pc.noise_seed = sub_seed(seed, "demo-noise-" + std::to_string(i));
    TiltBoardPlant plant(pc, reference);
    ProportionalOracle oracle(nominal, target, opts.gain * (1.0 + jitter(gain_rng)),
                              opts.coupling_noise,
                              sub_seed(seed, "demo-coupling-" + std::to_string(i)));
    demos.push_back(unroll(nominal, &oracle, nullptr, &plant, opts.episode));
  }
  return demos;
}

SettingScore evaluate_setting(const PlantConfig& plant_cfg, const DmpParams& nominal,
                              const std::vector<UnitQuaternion>& reference,
                              const PmnnParams* fb, const ExpectedSensorTraces* expected,
                              int runs, std::uint64_t seed,
                              const UnrollOptions& episode) {
  if (runs < 1) {
    throw ValidationError("evaluate_setting: need at least 1 run");
  }
  SettingScore score;
  for (int r = 0; r < runs; ++r) {
    PlantConfig pc = plant_cfg;
    pc.noise_seed = sub_seed(seed, "eval-run-" + std::to_string(r));
    TiltBoardPlant plant(pc, reference);
    Rollout roll;
    if (fb != nullptr) {
      PmnnCoupling coupling(*fb);
      roll = unroll(nominal, &coupling, expected, &plant, episode);
    } else {
      roll = unroll(nominal, nullptr, expected, &plant, episode);
    }
    score.runs.push_back(roll.costs.norm());
  }
  const int n = static_cast<int>(score.runs.size());
  for (double v : score.runs) {
    score.mean += v;
  }
  score.mean /= n;
  if (n > 1) {
    double acc = 0.0;
    for (double v : score.runs) {
      acc += (v - score.mean) * (v - score.mean);
    }
    score.stddev = std::sqrt(acc / (n - 1));
  }
  return score;
}

NominalCorpus make_nominal_corpus(int L, std::uint64_t seed, const CorpusParams& p) {
  if (L < 1) {
    throw ValidationError("make_nominal_corpus: need at least 1 demo");
  }
  const int T = static_cast<int>(std::lround(p.total_s * p.rate)) + 1;
  const double z_hi = 0.30, z_lo = 0.10, y_goal = 0.25;
  const double reorient_rad = p.reorient_deg * kDegToRad;

  // Scripted timeline (seconds): descend, quiet, reorient, quiet, scrape.
  const double z0 = 0.8, z1 = 2.3;
  const double o0 = 2.8, o1 = 4.3;
  const double y0 = 4.8, y1 = 6.3;

  auto z_profile = [&](double t) { return z_hi - (z_hi - z_lo) * move_progress(t, z0, z1); };
  auto y_profile = [&](double t) { return y_goal * move_progress(t, y0, y1); };
  auto angle_profile = [&](double t) { return reorient_rad * move_progress(t, o0, o1); };

  std::mt19937_64 rng(sub_seed(seed, "corpus"));
  std::uniform_real_distribution<double> scale_d(p.time_scale_lo, p.time_scale_hi);
  std::uniform_real_distribution<double> delay_d(p.delay_lo_s, p.delay_hi_s);
  std::uniform_real_distribution<double> amp_d(1.0 - p.amplitude_jitter,
                                               1.0 + p.amplitude_jitter);
  std::normal_distribution<double> gauss(0.0, 1.0);

  NominalCorpus corpus;
  for (int l = 0; l < L; ++l) {
    const double a = l == 0 ? 1.0 : scale_d(rng);
    const double b = l == 0 ? 0.0 : delay_d(rng);
    const double amp_z = l == 0 ? 1.0 : amp_d(rng);
    const double amp_y = l == 0 ? 1.0 : amp_d(rng);
    const double amp_o = l == 0 ? 1.0 : amp_d(rng);

    CorpusDemo demo;
    demo.axes.rate = p.rate;
    demo.axes.name = "demo_" + std::to_string(l);
    demo.axes.signals.resize(T, 3);
    demo.orientation.resize(T);
    const double noise_z = p.noise_frac * (z_hi - z_lo);
    const double noise_y = p.noise_frac * y_goal;
    const double noise_o = p.noise_frac * reorient_rad;
    for (int i = 0; i < T; ++i) {
      const double t = i / p.rate;
      const double tw = (t - b) / a;
      demo.axes.signals(i, 0) = 0.0;
      demo.axes.signals(i, 1) =
          amp_y * y_profile(tw) + noise_y * gauss(rng);
      demo.axes.signals(i, 2) =
          z_hi + amp_z * (z_profile(tw) - z_hi) + noise_z * gauss(rng);
      const double angle = amp_o * angle_profile(tw) + noise_o * gauss(rng);
      demo.orientation[i] = from_axis_angle(Eigen::Vector3d::UnitY(), angle);
    }
    corpus.demos.push_back(std::move(demo));
  }

  AnchorSpec prim1;
  prim1.axis = 2;
  prim1.ref_start = static_cast<int>(std::lround(z0 * p.rate));
  prim1.ref_end = static_cast<int>(std::lround(z1 * p.rate));
  AnchorSpec prim3;
  prim3.axis = 1;
  prim3.ref_start = static_cast<int>(std::lround(y0 * p.rate));
  prim3.ref_end = static_cast<int>(std::lround(y1 * p.rate));
  corpus.anchors = {prim1, prim3};
  return corpus;
}

}  // namespace mpfb
