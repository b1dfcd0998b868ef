#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mpfb/canonical.hpp"
#include "mpfb/dmp.hpp"

namespace mpfb {

struct PmnnLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// One network per coupling dimension: tanh hidden layers, a modulation layer
// gated element-wise by the phase kernel vector, and a bias-free output so
// the coupling vanishes exactly at zero phase velocity.
struct PmnnNetwork {
  std::vector<PmnnLayer> hidden;  // regular hidden layers
  PmnnLayer modulation;           // last hidden -> N phase-modulated nodes
  Eigen::VectorXd w_out;          // N, no bias
};

struct PmnnParams {
  KernelBank bank;
  std::vector<PmnnNetwork> nets;
  int input_dim = 0;

  int output_dim() const { return static_cast<int>(nets.size()); }
};

struct FeedbackDataset {
  Eigen::MatrixXd inputs;   // T x S sensor-trace deviations
  Eigen::MatrixXd phases;   // T x 2 (p, u)
  Eigen::MatrixXd targets;  // T x D target coupling
  std::vector<int> demo_ids;  // optional row -> source demo, for the LOO harness

  int rows() const { return static_cast<int>(inputs.rows()); }
  void append(const FeedbackDataset& other);
};

// Row-wise phase kernel modulation vectors for a batch of (p, u) pairs.
Eigen::MatrixXd modulation_matrix(const KernelBank& bank, const Eigen::MatrixXd& phases);

PmnnParams make_pmnn(int input_dim, int output_dim, const std::vector<int>& hidden,
                     const KernelBank& bank, std::uint64_t seed);

// c(ds, p, u), one component per network.
Eigen::VectorXd pmnn_forward(const PmnnParams& params, const Eigen::VectorXd& ds,
                             double p, double u);

// Batch predictions, T x D.
Eigen::MatrixXd pmnn_predict(const PmnnParams& params, const Eigen::MatrixXd& inputs,
                             const Eigen::MatrixXd& phases);

// Sum of squared residuals over all rows and output dimensions.
double pmnn_loss(const PmnnParams& params, const FeedbackDataset& data);

// Exact gradient of pmnn_loss, same shapes as the networks.
std::vector<PmnnNetwork> pmnn_grad(const PmnnParams& params, const FeedbackDataset& data);

// MSE / target variance, averaged over output dimensions; NaN when the
// target variance vanishes.
double nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct PmnnTrainConfig {
  std::vector<int> hidden = {100};
  int epochs = 150;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_eps = 1e-8;
  double dropout = 0.5;          // regular hidden layers only, inverted
  double val_fraction = 0.075;
  double test_fraction = 0.075;
  std::uint64_t seed = 0;
  bool allow_small_dataset = false;  // waive the rows >= 10x parameter guard
};

struct PmnnTrainMetrics {
  std::vector<double> epoch_train_mse;
  std::vector<double> epoch_val_mse;
  std::vector<double> epoch_monitor_nmse;  // only with a monitor dataset
  double train_nmse = 0.0;
  double val_nmse = 0.0;
  double test_nmse = 0.0;
  double monitor_nmse = 0.0;
  int best_epoch = -1;
  int n_train = 0, n_val = 0, n_test = 0;
  bool diverged = false;
};

struct PmnnTrainResult {
  PmnnParams params;  // snapshot at the best validation (or monitor) epoch
  PmnnTrainMetrics metrics;
};

// Mini-batch RMSProp on the supervised loss.  Deterministic under a fixed
// seed.  When `monitor` is given, its NMSE is tracked per epoch and the
// returned snapshot minimizes it; otherwise validation MSE decides.
PmnnTrainResult pmnn_train(const FeedbackDataset& data, const KernelBank& bank,
                           const PmnnTrainConfig& config,
                           const FeedbackDataset* monitor = nullptr);

struct LooNmse {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
  double generalization = 0.0;
};

// Leave-one-demonstration-out protocol over data.demo_ids.
std::vector<LooNmse> leave_one_demo_out(const FeedbackDataset& data,
                                        const KernelBank& bank,
                                        const PmnnTrainConfig& config);

// Coupling source backed by a trained feedback model (outputs zero-padded /
// truncated to 3 components as needed).
class PmnnCoupling : public CouplingSource {
 public:
  explicit PmnnCoupling(const PmnnParams& params) : params_(params) {}
  Eigen::Vector3d coupling(const DmpState& state, const Eigen::VectorXd& sensor_deviation,
                           double dt, int step) override;

 private:
  const PmnnParams& params_;
};

}  // namespace mpfb
