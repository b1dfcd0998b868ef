#include "mpfb/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mpfb {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw ValidationError("cannot open for writing: " + path);
  }
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw ValidationError("cannot open for reading: " + path);
  }
  return f;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) {
    out.push_back(v[i]);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) {
    v[i] = j[i].get<double>();
  }
  return v;
}

nlohmann::json quat_json(const UnitQuaternion& q) {
  return nlohmann::json::array({q.r, q.q.x(), q.q.y(), q.q.z()});
}

UnitQuaternion quat_from_json(const nlohmann::json& j) {
  return UnitQuaternion(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                        j[3].get<double>());
}

}  // namespace

void write_rollout_csv(const std::string& path, const Rollout& roll) {
  auto f = open_out(path);
  const int S = static_cast<int>(roll.sensors.cols());
  f << "t,r,q1,q2,q3,wx,wy,wz,ax,ay,az";
  for (int s = 1; s <= S; ++s) {
    f << ",s" << s;
  }
  f << "\n";
  for (int t = 0; t < roll.steps(); ++t) {
    f << fmt(roll.times[t]);
    const UnitQuaternion& q = roll.Q_traj[t];
    f << ',' << fmt(q.r) << ',' << fmt(q.q.x()) << ',' << fmt(q.q.y()) << ','
      << fmt(q.q.z());
    for (int c = 0; c < 3; ++c) {
      f << ',' << fmt(roll.omega_traj(t, c));
    }
    for (int c = 0; c < 3; ++c) {
      f << ',' << fmt(roll.omegadot_traj(t, c));
    }
    for (int s = 0; s < S; ++s) {
      f << ',' << fmt(roll.sensors(t, s));
    }
    f << "\n";
  }
}

Rollout read_rollout_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) {
    throw ValidationError("empty trajectory file: " + path);
  }
  const auto header = split_line(line);
  if (header.size() < 5 || header[0] != "t" || header[1] != "r") {
    throw ValidationError("unrecognized trajectory header in " + path);
  }
  const bool has_kinematics = header.size() >= 11 && header[5] == "wx";
  const int sensor_start = has_kinematics ? 11 : 5;
  const int S = static_cast<int>(header.size()) - sensor_start;

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": wrong column count");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": cannot parse '" + c + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const int T = static_cast<int>(rows.size());
  if (T < 2) {
    throw ValidationError("trajectory has fewer than 2 samples: " + path);
  }

  Rollout roll;
  roll.times.resize(T);
  roll.Q_traj.resize(T);
  roll.sensors.resize(T, std::max(S, 0));
  for (int t = 0; t < T; ++t) {
    roll.times[t] = rows[t][0];
    roll.Q_traj[t] =
        UnitQuaternion(rows[t][1], rows[t][2], rows[t][3], rows[t][4]).normalized();
    for (int s = 0; s < S; ++s) {
      roll.sensors(t, s) = rows[t][sensor_start + s];
    }
  }
  if (has_kinematics) {
    roll.omega_traj.resize(T, 3);
    roll.omegadot_traj.resize(T, 3);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < 3; ++c) {
        roll.omega_traj(t, c) = rows[t][5 + c];
        roll.omegadot_traj(t, c) = rows[t][8 + c];
      }
    }
  } else {
    derive_kinematics(roll.Q_traj, roll.times[1] - roll.times[0], roll.omega_traj,
                      roll.omegadot_traj);
  }
  roll.tau = roll.times[T - 1] - roll.times[0];
  return roll;
}

void write_corpus_csv(const std::string& path, const Eigen::VectorXd& times,
                      const Eigen::MatrixXd& axes,
                      const std::vector<UnitQuaternion>& orientation) {
  auto f = open_out(path);
  f << "t,x,y,z,r,q1,q2,q3\n";
  for (int t = 0; t < times.size(); ++t) {
    f << fmt(times[t]);
    for (int a = 0; a < axes.cols(); ++a) {
      f << ',' << fmt(axes(t, a));
    }
    const UnitQuaternion& q = orientation[t];
    f << ',' << fmt(q.r) << ',' << fmt(q.q.x()) << ',' << fmt(q.q.y()) << ','
      << fmt(q.q.z()) << "\n";
  }
}

void read_corpus_csv(const std::string& path, Eigen::VectorXd& times,
                     Eigen::MatrixXd& axes, std::vector<UnitQuaternion>& orientation) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || split_line(line).size() != 8) {
    throw ValidationError("unrecognized corpus header in " + path);
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto cells = split_line(line);
    if (cells.size() != 8) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": wrong column count");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": cannot parse '" + c + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const int T = static_cast<int>(rows.size());
  times.resize(T);
  axes.resize(T, 3);
  orientation.resize(T);
  for (int t = 0; t < T; ++t) {
    times[t] = rows[t][0];
    axes(t, 0) = rows[t][1];
    axes(t, 1) = rows[t][2];
    axes(t, 2) = rows[t][3];
    orientation[t] =
        UnitQuaternion(rows[t][4], rows[t][5], rows[t][6], rows[t][7]).normalized();
  }
}

nlohmann::json to_json(const KernelBank& bank) {
  return {{"centers", vector_json(bank.centers)},
          {"widths", vector_json(bank.widths)},
          {"n", bank.size()}};
}

KernelBank kernel_bank_from_json(const nlohmann::json& j) {
  KernelBank bank;
  bank.centers = vector_from_json(j.at("centers"));
  bank.widths = vector_from_json(j.at("widths"));
  return bank;
}

nlohmann::json to_json(const DmpParams& params) {
  return {{"theta_f", matrix_json(params.theta_f)},
          {"tau", params.tau},
          {"Q0", quat_json(params.Q0)},
          {"QG", quat_json(params.QG)},
          {"bank", to_json(params.bank)}};
}

DmpParams dmp_params_from_json(const nlohmann::json& j) {
  DmpParams params;
  params.theta_f = matrix_from_json(j.at("theta_f"));
  params.tau = j.at("tau").get<double>();
  params.Q0 = quat_from_json(j.at("Q0"));
  params.QG = quat_from_json(j.at("QG"));
  params.bank = kernel_bank_from_json(j.at("bank"));
  return params;
}

nlohmann::json to_json(const ExpectedSensorTraces& expected) {
  return {{"theta", matrix_json(expected.theta)},
          {"y0", vector_json(expected.y0)},
          {"goal", vector_json(expected.goal)},
          {"tau", expected.tau},
          {"bank", to_json(expected.bank)}};
}

ExpectedSensorTraces expected_traces_from_json(const nlohmann::json& j) {
  ExpectedSensorTraces e;
  e.theta = matrix_from_json(j.at("theta"));
  e.y0 = vector_from_json(j.at("y0"));
  e.goal = vector_from_json(j.at("goal"));
  e.tau = j.at("tau").get<double>();
  e.bank = kernel_bank_from_json(j.at("bank"));
  return e;
}

nlohmann::json to_json(const PmnnParams& params) {
  nlohmann::json nets = nlohmann::json::array();
  for (const auto& net : params.nets) {
    nlohmann::json hidden = nlohmann::json::array();
    for (const auto& layer : net.hidden) {
      hidden.push_back({{"W", matrix_json(layer.W)}, {"b", vector_json(layer.b)}});
    }
    nets.push_back({{"hidden", std::move(hidden)},
                    {"modulation",
                     {{"W", matrix_json(net.modulation.W)},
                      {"b", vector_json(net.modulation.b)}}},
                    {"w_out", vector_json(net.w_out)}});
  }
  return {{"activation", "tanh"},
          {"input_dim", params.input_dim},
          {"bank", to_json(params.bank)},
          {"nets", std::move(nets)}};
}

PmnnParams pmnn_from_json(const nlohmann::json& j) {
  PmnnParams params;
  params.input_dim = j.at("input_dim").get<int>();
  params.bank = kernel_bank_from_json(j.at("bank"));
  for (const auto& jn : j.at("nets")) {
    PmnnNetwork net;
    for (const auto& jl : jn.at("hidden")) {
      PmnnLayer layer;
      layer.W = matrix_from_json(jl.at("W"));
      layer.b = vector_from_json(jl.at("b"));
      net.hidden.push_back(std::move(layer));
    }
    net.modulation.W = matrix_from_json(jn.at("modulation").at("W"));
    net.modulation.b = vector_from_json(jn.at("modulation").at("b"));
    net.w_out = vector_from_json(jn.at("w_out"));
    params.nets.push_back(std::move(net));
  }
  return params;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  auto f = open_out(path);
  f << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  auto f = open_in(path);
  nlohmann::json j;
  f >> j;
  return j;
}

void write_metrics_csv(const std::string& path, const PmnnTrainMetrics& metrics) {
  auto f = open_out(path);
  const bool monitored = !metrics.epoch_monitor_nmse.empty();
  f << "epoch,train_mse,val_mse" << (monitored ? ",monitor_nmse" : "") << "\n";
  for (size_t e = 0; e < metrics.epoch_train_mse.size(); ++e) {
    f << e << ',' << fmt(metrics.epoch_train_mse[e]) << ','
      << fmt(e < metrics.epoch_val_mse.size() ? metrics.epoch_val_mse[e]
                                              : std::nan(""));
    if (monitored) {
      f << ',' << fmt(e < metrics.epoch_monitor_nmse.size()
                          ? metrics.epoch_monitor_nmse[e]
                          : std::nan(""));
    }
    f << "\n";
  }
}

}  // namespace mpfb
