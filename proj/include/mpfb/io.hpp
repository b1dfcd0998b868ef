#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mpfb/dmp.hpp"
#include "mpfb/pmnn.hpp"
#include "mpfb/segmentation.hpp"

namespace mpfb {

// Trajectory CSV: t,r,q1,q2,q3,wx,wy,wz,ax,ay,az[,s1..sS]; seconds, radians.
void write_rollout_csv(const std::string& path, const Rollout& roll);

// Reads a trajectory CSV.  Angular velocity/acceleration columns are used
// when present, otherwise derived from the quaternions.  tau is set to the
// file's duration; the phase trajectory is left empty (consumers simulate it).
Rollout read_rollout_csv(const std::string& path);

// Position corpus CSV: t,x,y,z,r,q1,q2,q3 (inputs to segmentation).
void write_corpus_csv(const std::string& path, const Eigen::VectorXd& times,
                      const Eigen::MatrixXd& axes,
                      const std::vector<UnitQuaternion>& orientation);
void read_corpus_csv(const std::string& path, Eigen::VectorXd& times,
                     Eigen::MatrixXd& axes, std::vector<UnitQuaternion>& orientation);

nlohmann::json to_json(const KernelBank& bank);
KernelBank kernel_bank_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DmpParams& params);
DmpParams dmp_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExpectedSensorTraces& expected);
ExpectedSensorTraces expected_traces_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PmnnParams& params);
PmnnParams pmnn_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

// Per-epoch training metrics CSV: epoch,train_mse,val_mse[,monitor_nmse].
void write_metrics_csv(const std::string& path, const PmnnTrainMetrics& metrics);

}  // namespace mpfb
