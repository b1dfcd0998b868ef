#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpfb/dmp.hpp"
#include "mpfb/rl.hpp"
#include "mpfb/segmentation.hpp"

namespace mpfb {

enum class SettingRole { kDefault, kSeen, kInitiallyUnseen, kUnseen };

struct EnvSetting {
  double roll_deg = 0.0;
  SettingRole role = SettingRole::kDefault;
};

// The seven tilt-stage settings with their roles in the learning pipeline.
std::vector<EnvSetting> canonical_settings();
const char* role_name(SettingRole role);

struct PlantConfig {
  double roll_deg = 0.0;
  int sensor_dim = 38;
  double sensor_gain = 3.0;      // mixing-matrix scale
  double noise_sigma = 0.02;     // per-channel sensor noise
  bool saturate_sensors = false;  // per-channel squashing of the deviation
  double saturation_knee = 0.15;  // misalignment (rad) where channels flatten
  std::uint64_t seed = 0;          // fixes the mixing matrix and base traces
  std::uint64_t noise_seed = 0;    // per-rollout noise stream
};

// Kinematic stand-in for the tilt-board scraping hardware.  Sensor readings
// are a fixed random mixing of the tool-board misalignment (restricted to the
// roll axis) on top of a smooth per-channel base profile, plus noise.
class TiltBoardPlant : public Plant {
 public:
  TiltBoardPlant(const PlantConfig& cfg, std::vector<UnitQuaternion> nominal_reference);

  int sensor_dim() const override { return cfg_.sensor_dim; }
  PlantObservation observe(const UnitQuaternion& commanded, int step) override;

  const PlantConfig& config() const { return cfg_; }
  const UnitQuaternion& board_tilt() const { return tilt_; }
  const std::vector<UnitQuaternion>& nominal_reference() const { return reference_; }
  // Base sensor profile at a step, before deviation and noise.
  Eigen::VectorXd base_traces(int step) const;

 private:
  PlantConfig cfg_;
  std::vector<UnitQuaternion> reference_;  // nominal commanded orientation per step
  UnitQuaternion tilt_;
  Eigen::MatrixXd mixing_;       // S x 3
  Eigen::VectorXd base_offset_;  // S
  Eigen::VectorXd base_ramp_;    // S
  std::mt19937_64 noise_rng_;
};

class TiltBoardPlantFactory : public PlantFactory {
 public:
  TiltBoardPlantFactory(PlantConfig cfg, std::vector<UnitQuaternion> nominal_reference)
      : cfg_(std::move(cfg)), reference_(std::move(nominal_reference)) {}
  std::unique_ptr<Plant> make(std::uint64_t noise_seed) override;

 private:
  PlantConfig cfg_;
  std::vector<UnitQuaternion> reference_;
};

// Exact discrete inverse of the transformation system onto the tilted
// reference trajectory; establishes that the plant's learning problem is
// solvable.
class TrackingOracle : public CouplingSource {
 public:
  TrackingOracle(const DmpParams& nominal, std::vector<UnitQuaternion> reference);
  Eigen::Vector3d coupling(const DmpState& state, const Eigen::VectorXd& sensor_deviation,
                           double dt, int step) override;

 private:
  DmpParams nominal_;
  std::vector<UnitQuaternion> reference_;
};

// Roll correction proportional to the board misalignment and gated by the
// phase velocity, plus optional noise; stands in for human corrective
// demonstrations.
class ProportionalOracle : public CouplingSource {
 public:
  ProportionalOracle(const DmpParams& nominal, std::vector<UnitQuaternion> reference,
                     double gain, double noise_sigma = 0.0, std::uint64_t seed = 0);
  Eigen::Vector3d coupling(const DmpState& state, const Eigen::VectorXd& sensor_deviation,
                           double dt, int step) override;

 private:
  DmpParams nominal_;
  std::vector<UnitQuaternion> reference_;
  double gain_;
  double noise_sigma_;
  std::mt19937_64 rng_;
};

// The reference the corrective behavior should track at a tilted setting.
std::vector<UnitQuaternion> tilted_reference(const std::vector<UnitQuaternion>& nominal,
                                             double roll_deg);

struct CorrectionOptions {
  double gain = 700.0;
  double gain_jitter = 0.1;       // per-demo multiplicative jitter
  double coupling_noise = 0.3;    // white noise on the roll coupling
  UnrollOptions episode;
};

// Unrolls the nominal primitive n times with the proportional oracle at a
// non-default setting; each rollout has its own noise realization.
std::vector<Rollout> generate_corrected_demos(const PlantConfig& plant_cfg,
                                              const DmpParams& nominal,
                                              const std::vector<UnitQuaternion>& reference,
                                              int n, std::uint64_t seed,
                                              const CorrectionOptions& opts = {});

struct SettingScore {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> runs;
};

// Repeated unrolls with per-run noise; aggregates ||J||_2.
SettingScore evaluate_setting(const PlantConfig& plant_cfg, const DmpParams& nominal,
                              const std::vector<UnitQuaternion>& reference,
                              const PmnnParams* fb, const ExpectedSensorTraces* expected,
                              int runs, std::uint64_t seed,
                              const UnrollOptions& episode = {1.0 / 300.0, 1.0});

// ---------------------------------------------------------------------------
// Synthetic demonstration corpus for the segmentation + learning pipeline

struct CorpusParams {
  double rate = 300.0;
  double total_s = 9.0;  // leaves room for the slowest time warp to finish
  double time_scale_lo = 0.85, time_scale_hi = 1.25;
  double delay_lo_s = -0.1, delay_hi_s = 0.1;
  double amplitude_jitter = 0.05;
  double noise_frac = 0.01;      // of each axis' range
  double reorient_deg = 30.0;    // primitive-2 pitch reorientation
};

struct CorpusDemo {
  MultiAxisDemo axes;                       // columns: x, y, z
  std::vector<UnitQuaternion> orientation;  // same length as axes rows
};

struct NominalCorpus {
  std::vector<CorpusDemo> demos;    // demos[0] is the unwarped reference
  std::vector<AnchorSpec> anchors;  // primitive 1 on z, primitive 3 on y
};

// L demonstrations of the scripted three-primitive task: descend (z),
// reorient (pitch), scrape forward (y); demos 1..L-1 are time-warped, jittered
// and noisy copies of the reference.
NominalCorpus make_nominal_corpus(int L, std::uint64_t seed, const CorpusParams& p = {});

}  // namespace mpfb
