#include "mpfb/pmnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mpfb/rng.hpp"

namespace mpfb {

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> act;       // pre-dropout activations per hidden layer
  std::vector<Eigen::MatrixXd> act_used;  // post-dropout activations fed forward
  Eigen::MatrixXd modulated;              // B x N, after the phase gate
  Eigen::VectorXd out;                    // B
};

ForwardCache forward_batch(const PmnnNetwork& net, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Phi,
                           const std::vector<Eigen::MatrixXd>* dropout_masks = nullptr) {
  ForwardCache cache;
  Eigen::MatrixXd a = X;
  for (size_t l = 0; l < net.hidden.size(); ++l) {
    Eigen::MatrixXd z = a * net.hidden[l].W.transpose();
    z.rowwise() += net.hidden[l].b.transpose();
    Eigen::MatrixXd h = z.array().tanh();
    cache.act.push_back(h);
    if (dropout_masks != nullptr) {
      h = h.cwiseProduct((*dropout_masks)[l]);
    }
    cache.act_used.push_back(h);
    a = h;
  }
  Eigen::MatrixXd zm = a * net.modulation.W.transpose();
  zm.rowwise() += net.modulation.b.transpose();
  cache.modulated = Phi.cwiseProduct(zm);
  cache.out = cache.modulated * net.w_out;
  return cache;
}

// Backpropagates d(loss)/d(output) through one network and accumulates into a
// same-shaped gradient holder.
void backward_batch(const PmnnNetwork& net, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd& Phi, const ForwardCache& cache,
                    const Eigen::VectorXd& dout, PmnnNetwork& grad,
                    const std::vector<Eigen::MatrixXd>* dropout_masks = nullptr) {
  grad.w_out += cache.modulated.transpose() * dout;
  const Eigen::MatrixXd dzm =
      (dout * net.w_out.transpose()).cwiseProduct(Phi);
  const Eigen::MatrixXd& last =
      net.hidden.empty() ? X : cache.act_used.back();
  grad.modulation.W += dzm.transpose() * last;
  grad.modulation.b += dzm.colwise().sum().transpose();

  if (net.hidden.empty()) {
    return;
  }
  Eigen::MatrixXd da = dzm * net.modulation.W;
  for (int l = static_cast<int>(net.hidden.size()) - 1; l >= 0; --l) {
    if (dropout_masks != nullptr) {
      da = da.cwiseProduct((*dropout_masks)[l]);
    }
    const Eigen::MatrixXd dz =
        da.cwiseProduct((1.0 - cache.act[l].array().square()).matrix());
    const Eigen::MatrixXd& below = l == 0 ? X : cache.act_used[l - 1];
    grad.hidden[l].W += dz.transpose() * below;
    grad.hidden[l].b += dz.colwise().sum().transpose();
    if (l > 0) {
      da = dz * net.hidden[l].W;
    }
  }
}

PmnnNetwork zeros_like(const PmnnNetwork& net) {
  PmnnNetwork g;
  for (const auto& layer : net.hidden) {
    g.hidden.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                        Eigen::VectorXd::Zero(layer.b.size())});
  }
  g.modulation = {Eigen::MatrixXd::Zero(net.modulation.W.rows(), net.modulation.W.cols()),
                  Eigen::VectorXd::Zero(net.modulation.b.size())};
  g.w_out = Eigen::VectorXd::Zero(net.w_out.size());
  return g;
}

long parameter_count(const PmnnNetwork& net) {
  long n = net.modulation.W.size() + net.modulation.b.size() + net.w_out.size();
  for (const auto& layer : net.hidden) {
    n += layer.W.size() + layer.b.size();
  }
  return n;
}

void validate_dataset(const FeedbackDataset& data, const char* who) {
  if (data.rows() < 1) {
    throw ValidationError(std::string(who) + ": empty dataset");
  }
  if (data.phases.rows() != data.rows() || data.targets.rows() != data.rows() ||
      data.phases.cols() != 2) {
    throw ValidationError(std::string(who) + ": dataset row counts do not match");
  }
  if (!data.inputs.allFinite() || !data.targets.allFinite() || !data.phases.allFinite()) {
    throw ValidationError(std::string(who) + ": dataset contains non-finite entries");
  }
}

struct RmspropState {
  std::vector<PmnnNetwork> cache;
};

void rmsprop_update(PmnnNetwork& net, const PmnnNetwork& grad, PmnnNetwork& cache,
                    const PmnnTrainConfig& cfg) {
  auto step = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g,
                  Eigen::Ref<Eigen::MatrixXd> c) {
    c.array() =
        cfg.rmsprop_decay * c.array() + (1.0 - cfg.rmsprop_decay) * g.array().square();
    p.array() -= cfg.learning_rate * g.array() / (c.array().sqrt() + cfg.rmsprop_eps);
  };
  auto step_vec = [&](Eigen::VectorXd& p, const Eigen::VectorXd& g, Eigen::VectorXd& c) {
    c.array() =
        cfg.rmsprop_decay * c.array() + (1.0 - cfg.rmsprop_decay) * g.array().square();
    p.array() -= cfg.learning_rate * g.array() / (c.array().sqrt() + cfg.rmsprop_eps);
  };
  for (size_t l = 0; l < net.hidden.size(); ++l) {
    step(net.hidden[l].W, grad.hidden[l].W, cache.hidden[l].W);
    step_vec(net.hidden[l].b, grad.hidden[l].b, cache.hidden[l].b);
  }
  step(net.modulation.W, grad.modulation.W, cache.modulation.W);
  step_vec(net.modulation.b, grad.modulation.b, cache.modulation.b);
  step_vec(net.w_out, grad.w_out, cache.w_out);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<int>(idx.size()), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<int>(i)) = m.row(idx[i]);
  }
  return out;
}

FeedbackDataset take_dataset(const FeedbackDataset& data, const std::vector<int>& idx) {
  FeedbackDataset out;
  out.inputs = take_rows(data.inputs, idx);
  out.phases = take_rows(data.phases, idx);
  out.targets = take_rows(data.targets, idx);
  return out;
}

double dataset_mse(const PmnnParams& params, const FeedbackDataset& data) {
  const Eigen::MatrixXd pred = pmnn_predict(params, data.inputs, data.phases);
  return (pred - data.targets).array().square().rowwise().sum().mean();
}

}  // namespace

void FeedbackDataset::append(const FeedbackDataset& other) {
  if (rows() == 0) {
    *this = other;
    return;
  }
  if (other.inputs.cols() != inputs.cols() || other.targets.cols() != targets.cols()) {
    throw ValidationError("FeedbackDataset::append: column mismatch");
  }
  const int n0 = rows();
  const int n1 = other.rows();
  inputs.conservativeResize(n0 + n1, Eigen::NoChange);
  phases.conservativeResize(n0 + n1, Eigen::NoChange);
  targets.conservativeResize(n0 + n1, Eigen::NoChange);
  inputs.bottomRows(n1) = other.inputs;
  phases.bottomRows(n1) = other.phases;
  targets.bottomRows(n1) = other.targets;
  if (!demo_ids.empty() || !other.demo_ids.empty()) {
    if (demo_ids.empty()) {
      demo_ids.assign(n0, 0);
    }
    const int offset = 1 + *std::max_element(demo_ids.begin(), demo_ids.end());
    if (other.demo_ids.empty()) {
      demo_ids.insert(demo_ids.end(), n1, offset);
    } else {
      for (int id : other.demo_ids) {
        demo_ids.push_back(offset + id);
      }
    }
  }
}

Eigen::MatrixXd modulation_matrix(const KernelBank& bank, const Eigen::MatrixXd& phases) {
  Eigen::MatrixXd phi(phases.rows(), bank.size());
  for (int t = 0; t < phases.rows(); ++t) {
    phi.row(t) = phase_modulation(bank, phases(t, 0), phases(t, 1)).transpose();
  }
  return phi;
}

PmnnParams make_pmnn(int input_dim, int output_dim, const std::vector<int>& hidden,
                     const KernelBank& bank, std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1) {
    throw ValidationError("make_pmnn: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  auto init = [&](int rows, int cols, double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        m(r, c) = dist(rng);
      }
    }
    return m;
  };

  PmnnParams params;
  params.bank = bank;
  params.input_dim = input_dim;
  const int n_mod = bank.size();
  for (int d = 0; d < output_dim; ++d) {
    PmnnNetwork net;
    int below = input_dim;
    for (int width : hidden) {
      const double s = 1.0 / std::sqrt(static_cast<double>(below));
      net.hidden.push_back({init(width, below, s), Eigen::VectorXd::Zero(width)});
      below = width;
    }
    const double sm = 1.0 / std::sqrt(static_cast<double>(below));
    net.modulation = {init(n_mod, below, sm), Eigen::VectorXd::Zero(n_mod)};
    net.w_out = init(n_mod, 1, 1.0 / std::sqrt(static_cast<double>(n_mod)));
    params.nets.push_back(std::move(net));
  }
  return params;
}

Eigen::VectorXd pmnn_forward(const PmnnParams& params, const Eigen::VectorXd& ds,
                             double p, double u) {
  if (ds.size() != params.input_dim) {
    throw ValidationError("pmnn_forward: input dimension mismatch");
  }
  Eigen::MatrixXd phases(1, 2);
  phases << p, u;
  const Eigen::MatrixXd pred = pmnn_predict(params, ds.transpose(), phases);
  return pred.row(0);
}

Eigen::MatrixXd pmnn_predict(const PmnnParams& params, const Eigen::MatrixXd& inputs,
                             const Eigen::MatrixXd& phases) {
  if (inputs.cols() != params.input_dim) {
    throw ValidationError("pmnn_predict: input dimension mismatch");
  }
  const Eigen::MatrixXd phi = modulation_matrix(params.bank, phases);
  Eigen::MatrixXd out(inputs.rows(), params.output_dim());
  for (int d = 0; d < params.output_dim(); ++d) {
    out.col(d) = forward_batch(params.nets[d], inputs, phi).out;
  }
  return out;
}

double pmnn_loss(const PmnnParams& params, const FeedbackDataset& data) {
  validate_dataset(data, "pmnn_loss");
  const Eigen::MatrixXd pred = pmnn_predict(params, data.inputs, data.phases);
  return (pred - data.targets).squaredNorm();
}

std::vector<PmnnNetwork> pmnn_grad(const PmnnParams& params, const FeedbackDataset& data) {
  validate_dataset(data, "pmnn_grad");
  const Eigen::MatrixXd phi = modulation_matrix(params.bank, data.phases);
  std::vector<PmnnNetwork> grads;
  for (int d = 0; d < params.output_dim(); ++d) {
    const PmnnNetwork& net = params.nets[d];
    PmnnNetwork g = zeros_like(net);
    const ForwardCache cache = forward_batch(net, data.inputs, phi);
    const Eigen::VectorXd dout = 2.0 * (cache.out - data.targets.col(d));
    backward_batch(net, data.inputs, phi, cache, dout, g);
    grads.push_back(std::move(g));
  }
  return grads;
}

double nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  const Eigen::RowVectorXd mean = target.colwise().mean();
  const Eigen::RowVectorXd var =
      (target.rowwise() - mean).array().square().colwise().mean();
  const Eigen::RowVectorXd mse = (pred - target).array().square().colwise().mean();
  const double var_floor = 1e-12 * std::max(var.maxCoeff(), 0.0);
  double acc = 0.0;
  int used = 0;
  for (int d = 0; d < target.cols(); ++d) {
    if (var[d] > var_floor && var[d] > 0.0) {
      acc += mse[d] / var[d];
      ++used;
    }
  }
  if (used == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return acc / used;
}

PmnnTrainResult pmnn_train(const FeedbackDataset& data, const KernelBank& bank,
                           const PmnnTrainConfig& config,
                           const FeedbackDataset* monitor) {
  validate_dataset(data, "pmnn_train");
  const int rows = data.rows();
  const int out_dim = static_cast<int>(data.targets.cols());

  PmnnParams params = make_pmnn(static_cast<int>(data.inputs.cols()), out_dim,
                                config.hidden, bank, sub_seed(config.seed, "pmnn-init"));
  const long per_net = parameter_count(params.nets[0]);
  if (!config.allow_small_dataset && rows < 10 * per_net) {
    std::ostringstream msg;
    msg << "pmnn_train: " << rows << " rows for " << per_net
        << " parameters per network; need 10x or allow_small_dataset";
    throw ValidationError(msg.str());
  }

  // Deterministic shuffled split: train, then validation, then test.
  std::vector<int> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(sub_seed(config.seed, "pmnn-split"));
  std::shuffle(order.begin(), order.end(), rng);
  const int n_val = static_cast<int>(rows * config.val_fraction);
  const int n_test = static_cast<int>(rows * config.test_fraction);
  const int n_train = rows - n_val - n_test;
  if (n_train < 1) {
    throw ValidationError("pmnn_train: no training rows after split");
  }
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> val_idx(order.begin() + n_train, order.begin() + n_train + n_val);
  std::vector<int> test_idx(order.begin() + n_train + n_val, order.end());

  const FeedbackDataset train_set = take_dataset(data, train_idx);
  const FeedbackDataset val_set = n_val > 0 ? take_dataset(data, val_idx) : FeedbackDataset{};
  const FeedbackDataset test_set =
      n_test > 0 ? take_dataset(data, test_idx) : FeedbackDataset{};
  const Eigen::MatrixXd phi_train = modulation_matrix(bank, train_set.phases);

  RmspropState opt;
  for (const auto& net : params.nets) {
    opt.cache.push_back(zeros_like(net));
  }

  PmnnTrainResult result;
  result.metrics.n_train = n_train;
  result.metrics.n_val = n_val;
  result.metrics.n_test = n_test;
  PmnnParams best = params;
  PmnnParams last_finite = params;
  double best_score = std::numeric_limits<double>::infinity();
  std::mt19937_64 batch_rng(sub_seed(config.seed, "pmnn-batches"));
  std::mt19937_64 mask_rng(sub_seed(config.seed, "pmnn-dropout"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 - config.dropout;

  std::vector<int> epoch_order(n_train);
  std::iota(epoch_order.begin(), epoch_order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(epoch_order.begin(), epoch_order.end(), batch_rng);
    for (int start = 0; start < n_train; start += config.batch_size) {
      const int bsize = std::min(config.batch_size, n_train - start);
      std::vector<int> batch(epoch_order.begin() + start,
                             epoch_order.begin() + start + bsize);
      const Eigen::MatrixXd Xb = take_rows(train_set.inputs, batch);
      const Eigen::MatrixXd Phib = take_rows(phi_train, batch);
      const Eigen::MatrixXd Tb = take_rows(train_set.targets, batch);

      std::vector<Eigen::MatrixXd> masks;
      std::vector<Eigen::MatrixXd>* masks_ptr = nullptr;
      if (config.dropout > 0.0 && !config.hidden.empty()) {
        for (int width : config.hidden) {
          Eigen::MatrixXd m(bsize, width);
          for (int r = 0; r < bsize; ++r) {
            for (int c = 0; c < width; ++c) {
              m(r, c) = unit(mask_rng) < keep ? 1.0 / keep : 0.0;
            }
          }
          masks.push_back(std::move(m));
        }
        masks_ptr = &masks;
      }

      for (int d = 0; d < out_dim; ++d) {
        PmnnNetwork grad = zeros_like(params.nets[d]);
        const ForwardCache cache = forward_batch(params.nets[d], Xb, Phib, masks_ptr);
        const Eigen::VectorXd dout =
            (2.0 / bsize) * (cache.out - Tb.col(d));
        backward_batch(params.nets[d], Xb, Phib, cache, dout, grad, masks_ptr);
        rmsprop_update(params.nets[d], grad, opt.cache[d], config);
      }
    }

    const double train_mse = dataset_mse(params, train_set);
    result.metrics.epoch_train_mse.push_back(train_mse);
    double val_mse = std::numeric_limits<double>::quiet_NaN();
    if (n_val > 0) {
      val_mse = dataset_mse(params, val_set);
      result.metrics.epoch_val_mse.push_back(val_mse);
    }
    if (!std::isfinite(train_mse)) {
      result.metrics.diverged = true;
      params = last_finite;
      break;
    }
    last_finite = params;

    double score = n_val > 0 ? val_mse : train_mse;
    if (monitor != nullptr) {
      const Eigen::MatrixXd pred =
          pmnn_predict(params, monitor->inputs, monitor->phases);
      const double mon = nmse(pred, monitor->targets);
      result.metrics.epoch_monitor_nmse.push_back(mon);
      score = mon;
    }
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best = params;
      result.metrics.best_epoch = epoch;
    }
  }

  if (result.metrics.best_epoch < 0) {
    best = params;
  }
  result.params = best;

  auto split_nmse = [&](const FeedbackDataset& set) {
    if (set.rows() == 0) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return nmse(pmnn_predict(result.params, set.inputs, set.phases), set.targets);
  };
  result.metrics.train_nmse = split_nmse(train_set);
  result.metrics.val_nmse = split_nmse(val_set);
  result.metrics.test_nmse = split_nmse(test_set);
  if (monitor != nullptr) {
    result.metrics.monitor_nmse = split_nmse(*monitor);
  }
  return result;
}

std::vector<LooNmse> leave_one_demo_out(const FeedbackDataset& data,
                                        const KernelBank& bank,
                                        const PmnnTrainConfig& config) {
  validate_dataset(data, "leave_one_demo_out");
  if (data.demo_ids.size() != static_cast<size_t>(data.rows())) {
    throw ValidationError("leave_one_demo_out: dataset lacks per-row demo ids");
  }
  std::vector<int> ids = data.demo_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) {
    throw ValidationError("leave_one_demo_out: need at least 2 demos");
  }

  std::vector<LooNmse> results;
  for (int held : ids) {
    std::vector<int> in_idx, out_idx;
    for (int r = 0; r < data.rows(); ++r) {
      (data.demo_ids[r] == held ? out_idx : in_idx).push_back(r);
    }
    const FeedbackDataset train = take_dataset(data, in_idx);
    const FeedbackDataset holdout = take_dataset(data, out_idx);
    PmnnTrainConfig cfg = config;
    cfg.seed = sub_seed(config.seed, "loo-" + std::to_string(held));
    const PmnnTrainResult r = pmnn_train(train, bank, cfg, &holdout);
    LooNmse row;
    row.train = r.metrics.train_nmse;
    row.val = r.metrics.val_nmse;
    row.test = r.metrics.test_nmse;
    row.generalization = r.metrics.monitor_nmse;
    results.push_back(row);
  }
  return results;
}

Eigen::Vector3d PmnnCoupling::coupling(const DmpState& state,
                                       const Eigen::VectorXd& sensor_deviation,
                                       double /*dt*/, int /*step*/) {
  const Eigen::VectorXd c =
      pmnn_forward(params_, sensor_deviation, state.phase.p, state.phase.u);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int d = 0; d < std::min<int>(3, c.size()); ++d) {
    out[d] = c[d];
  }
  return out;
}

}  // namespace mpfb
