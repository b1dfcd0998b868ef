#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpfb/dmp.hpp"
#include "mpfb/pmnn.hpp"

namespace mpfb {

// J_t = ||2 log(Q_nr o Q_cr*)||: norm of the angular error between the
// nominal and current relative orientations.
double step_cost(const UnitQuaternion& Q_nr, const UnitQuaternion& Q_cr);

// Low-dimensional policy over a primitive's forcing weights.
struct LowDimPolicy {
  Eigen::MatrixXd theta;  // N x D policy mean
  Eigen::MatrixXd Sigma;  // (N*D) x (N*D) exploration covariance
};

// Compresses an observed adaptive rollout into a fresh DMP; its weights act
// as the low-dimensional policy mean.
DmpParams compress_rollout(const Rollout& roll, const KernelBank& bank);

// K Gaussian draws around the policy mean.  Negative-definite directions are
// repaired with a 1e-12 eigenvalue floor (reported through `repaired`).
std::vector<Eigen::MatrixXd> sample_policies(const LowDimPolicy& policy, int K,
                                             std::uint64_t seed,
                                             bool* repaired = nullptr);

struct Pi2CmaOptions {
  double lambda = -1.0;         // <= 0: per-call heuristic, max_t range(S_t) / 10
  bool literal_full_sum = false;  // cost-to-go summed over the full horizon for
                                  // every t, as the update rule is written
};

struct Pi2CmaResult {
  Eigen::MatrixXd theta;  // N x D
  Eigen::MatrixXd Sigma;  // (N*D) x (N*D)
  double lambda_used = 0.0;
};

// Path-integral policy improvement with covariance matrix adaptation:
// per-time softmax weights over cost-to-go, then (T-t)-weighted time
// averaging.  Covariance deviations are taken about the pre-update mean.
Pi2CmaResult pi2_cma_update(const std::vector<Eigen::MatrixXd>& samples,
                            const std::vector<Eigen::VectorXd>& costs,
                            const Eigen::MatrixXd& mean,
                            const Pi2CmaOptions& opts = {});

// Creates independent plant instances so exploration rollouts can run
// concurrently.
class PlantFactory {
 public:
  virtual ~PlantFactory() = default;
  virtual std::unique_ptr<Plant> make(std::uint64_t noise_seed) = 0;
};

// Supervised rows for one rollout: sensor deviations, phases, and coupling
// targets extracted against the nominal primitive.
FeedbackDataset feedback_rows(const Rollout& roll, const DmpParams& nominal,
                              const ExpectedSensorTraces& expected);

struct RlConfig {
  int K = 38;
  double lambda = -1.0;
  bool literal_full_sum = false;
  int max_iters = 2;
  double sigma0_scale = 0.05;  // Sigma0 = (scale * rms(theta_f))^2 * I
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  PmnnTrainConfig train;
  UnrollOptions episode;
  std::string log_dir;  // when set: JSONL iteration log + PMNN checkpoints
};

struct RlIteration {
  double cost_norm = 0.0;  // after this iteration's retrain
  double lambda = 0.0;
  double sigma_trace = 0.0;
  Eigen::VectorXd sample_cost_norms;  // K exploration rollouts
  double improved_cost_norm = 0.0;    // the theta' rollout
};

struct RlResult {
  PmnnParams pmnn;
  double initial_cost_norm = 0.0;
  double final_cost_norm = 0.0;
  std::vector<RlIteration> iterations;
  int rollouts_per_iteration = 0;  // K + 2 by construction
  bool reached_threshold = false;
  bool stopped_early = false;
  std::string note;
};

// Alg. 2 outer loop: evaluate the adaptive behavior, compress, explore K
// policies, PI2-CMA update, roll out the improved policy, append to the
// training set, retrain the feedback model, re-evaluate.  Stops at J_thr,
// max_iters, or after 3 non-improving iterations (best-so-far returned).
RlResult rl_feedback(const DmpParams& nominal, const PmnnParams& pmnn0,
                     const FeedbackDataset& d_cdemo,
                     const ExpectedSensorTraces& expected, double J_thr,
                     PlantFactory& plants, const RlConfig& cfg);

}  // namespace mpfb
