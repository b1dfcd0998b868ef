#include "mpfb/rl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "mpfb/io.hpp"
#include "mpfb/rng.hpp"

namespace mpfb {

double step_cost(const UnitQuaternion& Q_nr, const UnitQuaternion& Q_cr) {
  return rotation_error(Q_nr, Q_cr).norm();
}

DmpParams compress_rollout(const Rollout& roll, const KernelBank& bank) {
  return fit_forcing_term({roll}, bank);
}

std::vector<Eigen::MatrixXd> sample_policies(const LowDimPolicy& policy, int K,
                                             std::uint64_t seed, bool* repaired) {
  if (K < 2) {
    throw ValidationError("sample_policies: need K >= 2");
  }
  const int n = static_cast<int>(policy.theta.rows());
  const int d = static_cast<int>(policy.theta.cols());
  const int dim = n * d;
  if (policy.Sigma.rows() != dim || policy.Sigma.cols() != dim) {
    throw ValidationError("sample_policies: covariance does not match the policy size");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(policy.Sigma);
  Eigen::VectorXd vals = eig.eigenvalues();
  bool fixed = false;
  for (int i = 0; i < dim; ++i) {
    if (vals[i] < 0.0) {
      vals[i] = vals[i] < -1e-12 ? 1e-12 : 0.0;
      fixed = fixed || vals[i] > 0.0;
    }
  }
  if (repaired != nullptr) {
    *repaired = fixed;
  }
  const Eigen::MatrixXd L = eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Map<const Eigen::VectorXd> mean(policy.theta.data(), dim);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) {
      z[i] = gauss(rng);
    }
    const Eigen::VectorXd sample = mean + L * z;
    out.emplace_back(Eigen::Map<const Eigen::MatrixXd>(sample.data(), n, d));
  }
  return out;
}

Pi2CmaResult pi2_cma_update(const std::vector<Eigen::MatrixXd>& samples,
                            const std::vector<Eigen::VectorXd>& costs,
                            const Eigen::MatrixXd& mean, const Pi2CmaOptions& opts) {
  const int K = static_cast<int>(samples.size());
  if (K < 2 || costs.size() != samples.size()) {
    throw ValidationError("pi2_cma_update: need K >= 2 samples with costs");
  }
  const int T = static_cast<int>(costs[0].size());
  for (const auto& j : costs) {
    if (j.size() != T) {
      throw ValidationError("pi2_cma_update: cost vectors differ in length");
    }
  }
  const int n = static_cast<int>(mean.rows());
  const int d = static_cast<int>(mean.cols());
  const int dim = n * d;

  // Cost-to-go S_{k,t}: tail sum by default, full-horizon sum in the literal
  // variant of the update rule.
  Eigen::MatrixXd S(K, T);
  for (int k = 0; k < K; ++k) {
    if (opts.literal_full_sum) {
      S.row(k).setConstant(costs[k].sum());
    } else {
      double acc = 0.0;
      for (int t = T - 1; t >= 0; --t) {
        acc += costs[k][t];
        S(k, t) = acc;
      }
    }
  }

  double lambda = opts.lambda;
  if (!(lambda > 0.0)) {
    double range = 0.0;
    for (int t = 0; t < T; ++t) {
      range = std::max(range, S.col(t).maxCoeff() - S.col(t).minCoeff());
    }
    lambda = range > 0.0 ? range / 10.0 : 1.0;
  }

  Eigen::Map<const Eigen::VectorXd> mean_vec(mean.data(), dim);
  std::vector<Eigen::Map<const Eigen::VectorXd>> sample_vecs;
  sample_vecs.reserve(K);
  for (const auto& s : samples) {
    sample_vecs.emplace_back(s.data(), dim);
  }

  Eigen::VectorXd theta_acc = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd sigma_acc = Eigen::MatrixXd::Zero(dim, dim);
  double weight_total = 0.0;
  for (int t = 0; t < T; ++t) {
    // Max-subtracted softmax over the negated cost-to-go.
    const double smin = S.col(t).minCoeff();
    Eigen::VectorXd p(K);
    for (int k = 0; k < K; ++k) {
      p[k] = std::exp(-(S(k, t) - smin) / lambda);
    }
    p /= p.sum();

    Eigen::VectorXd theta_t = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd sigma_t = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < K; ++k) {
      theta_t += p[k] * sample_vecs[k];
      const Eigen::VectorXd dev = sample_vecs[k] - mean_vec;
      sigma_t.noalias() += p[k] * dev * dev.transpose();
    }
    const double w = static_cast<double>(T - 1 - t);
    theta_acc += w * theta_t;
    sigma_acc += w * sigma_t;
    weight_total += w;
  }
  if (weight_total <= 0.0) {
    // T == 1: nothing to time-average.
    weight_total = 1.0;
    const double smin = S.col(0).minCoeff();
    Eigen::VectorXd p(K);
    for (int k = 0; k < K; ++k) {
      p[k] = std::exp(-(S(k, 0) - smin) / lambda);
    }
    p /= p.sum();
    theta_acc.setZero();
    sigma_acc.setZero();
    for (int k = 0; k < K; ++k) {
      theta_acc += p[k] * sample_vecs[k];
      const Eigen::VectorXd dev = sample_vecs[k] - mean_vec;
      sigma_acc.noalias() += p[k] * dev * dev.transpose();
    }
  }

  Pi2CmaResult out;
  const Eigen::VectorXd theta_new = theta_acc / weight_total;
  out.theta = Eigen::Map<const Eigen::MatrixXd>(theta_new.data(), n, d);
  out.Sigma = sigma_acc / weight_total;
  out.lambda_used = lambda;
  return out;
}

FeedbackDataset feedback_rows(const Rollout& roll, const DmpParams& nominal,
                              const ExpectedSensorTraces& expected) {
  FeedbackDataset data;
  const int T = roll.steps();
  data.inputs = roll.sensors - unroll_expected(expected, T, roll.tau, roll.dt());
  data.phases = roll.phase_traj;
  data.targets = extract_target_coupling(roll, nominal);
  data.demo_ids.assign(T, 0);
  return data;
}

namespace {

Rollout evaluate_adaptive(const DmpParams& nominal, const PmnnParams& pmnn,
                          const ExpectedSensorTraces& expected, PlantFactory& plants,
                          std::uint64_t noise_seed, const UnrollOptions& episode) {
  auto plant = plants.make(noise_seed);
  PmnnCoupling fb(pmnn);
  return unroll(nominal, &fb, &expected, plant.get(), episode);
}

void write_rl_log(const std::string& dir, const RlResult& result,
                  const std::vector<PmnnParams>& checkpoints) {
  std::filesystem::create_directories(dir);
  std::ofstream log(dir + "/rl_log.jsonl");
  {
    nlohmann::json j{{"iteration", 0}, {"cost_norm", result.initial_cost_norm}};
    log << j.dump() << "\n";
  }
  for (size_t i = 0; i < result.iterations.size(); ++i) {
    const RlIteration& it = result.iterations[i];
    nlohmann::json samples = nlohmann::json::array();
    for (int k = 0; k < it.sample_cost_norms.size(); ++k) {
      samples.push_back(it.sample_cost_norms[k]);
    }
    nlohmann::json j{{"iteration", i + 1},
                     {"cost_norm", it.cost_norm},
                     {"lambda", it.lambda},
                     {"sigma_trace", it.sigma_trace},
                     {"improved_cost_norm", it.improved_cost_norm},
                     {"sample_cost_norms", std::move(samples)}};
    log << j.dump() << "\n";
  }
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    write_json_file(dir + "/pmnn_iter_" + std::to_string(i + 1) + ".json",
                    to_json(checkpoints[i]));
  }
}

}  // namespace

RlResult rl_feedback(const DmpParams& nominal, const PmnnParams& pmnn0,
                     const FeedbackDataset& d_cdemo,
                     const ExpectedSensorTraces& expected, double J_thr,
                     PlantFactory& plants, const RlConfig& cfg) {
  if (!(J_thr > 0.0)) {
    throw ValidationError("rl_feedback: a positive cost threshold is required");
  }
  RlResult result;
  result.pmnn = pmnn0;
  result.rollouts_per_iteration = cfg.K + 2;

  const double theta_rms =
      std::sqrt(nominal.theta_f.array().square().mean());
  const double sigma0 = std::pow(cfg.sigma0_scale * std::max(theta_rms, 1e-6), 2);
  const int dim = static_cast<int>(nominal.theta_f.size());

  LowDimPolicy policy;
  policy.Sigma = sigma0 * Eigen::MatrixXd::Identity(dim, dim);

  Rollout eval = evaluate_adaptive(nominal, result.pmnn, expected, plants,
                                   sub_seed(cfg.seed, "rl-eval-0"), cfg.episode);
  double cost_norm = eval.costs.norm();
  result.initial_cost_norm = cost_norm;

  FeedbackDataset train_set = d_cdemo;
  PmnnParams best = result.pmnn;
  double best_cost = cost_norm;
  int non_improving = 0;
  std::vector<PmnnParams> checkpoints;

  const int n_threads = cfg.threads > 0
                            ? cfg.threads
                            : std::max(1u, std::thread::hardware_concurrency());

  int iter = 0;
  while (cost_norm > J_thr && iter < cfg.max_iters) {
    const std::string tag = "rl-iter-" + std::to_string(iter);
    const DmpParams cdmp = compress_rollout(eval, nominal.bank);
    policy.theta = cdmp.theta_f;

    const auto thetas =
        sample_policies(policy, cfg.K, sub_seed(cfg.seed, tag + "-sample"));

    // Exploration rollouts are independent; run them in worker batches.
    std::vector<Eigen::VectorXd> sample_costs(cfg.K);
    std::vector<std::uint64_t> noise_seeds(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      noise_seeds[k] = sub_seed(cfg.seed, tag + "-explore-" + std::to_string(k));
    }
    std::atomic<int> next_k{0};
    auto worker = [&]() {
      for (int k = next_k.fetch_add(1); k < cfg.K; k = next_k.fetch_add(1)) {
        auto plant = plants.make(noise_seeds[k]);
        const Rollout r = unroll(cdmp, nullptr, &expected, plant.get(), cfg.episode,
                                 &thetas[k]);
        sample_costs[k] = r.costs;
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(n_threads, cfg.K); ++w) {
      pool.emplace_back(worker);
    }
    for (auto& th : pool) {
      th.join();
    }

    Pi2CmaOptions pi2;
    pi2.lambda = cfg.lambda;
    pi2.literal_full_sum = cfg.literal_full_sum;
    const Pi2CmaResult update =
        pi2_cma_update(thetas, sample_costs, policy.theta, pi2);
    policy.Sigma = update.Sigma;

    // Roll out the improved low-dimensional policy and harvest training rows.
    auto plant = plants.make(sub_seed(cfg.seed, tag + "-improved"));
    const Rollout improved = unroll(cdmp, nullptr, &expected, plant.get(),
                                    cfg.episode, &update.theta);
    train_set.append(feedback_rows(improved, nominal, expected));

    PmnnTrainConfig tc = cfg.train;
    tc.seed = sub_seed(cfg.seed, tag + "-retrain");
    const PmnnTrainResult retrained = pmnn_train(train_set, nominal.bank, tc);
    result.pmnn = retrained.params;

    eval = evaluate_adaptive(nominal, result.pmnn, expected, plants,
                             sub_seed(cfg.seed, tag + "-eval"), cfg.episode);
    cost_norm = eval.costs.norm();

    RlIteration log;
    log.cost_norm = cost_norm;
    log.lambda = update.lambda_used;
    log.sigma_trace = policy.Sigma.trace();
    log.improved_cost_norm = improved.costs.norm();
    log.sample_cost_norms.resize(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      log.sample_cost_norms[k] = sample_costs[k].norm();
    }
    result.iterations.push_back(std::move(log));
    checkpoints.push_back(result.pmnn);

    if (cost_norm < best_cost) {
      best_cost = cost_norm;
      best = result.pmnn;
      non_improving = 0;
    } else if (++non_improving >= 3) {
      result.stopped_early = true;
      result.note = "cost did not decrease for 3 consecutive iterations";
      break;
    }
    ++iter;
  }

  if (result.stopped_early || best_cost < cost_norm) {
    result.pmnn = best;
    result.final_cost_norm = best_cost;
  } else {
    result.final_cost_norm = cost_norm;
  }
  result.reached_threshold = result.final_cost_norm <= J_thr;

  if (!cfg.log_dir.empty()) {
    write_rl_log(cfg.log_dir, result, checkpoints);
  }
  return result;
}

}  // namespace mpfb
