#include "mpfb/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mpfb/io.hpp"
#include "mpfb/rng.hpp"

namespace fs = std::filesystem;

namespace mpfb {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string setting_tag(double roll_deg) {
  std::ostringstream os;
  os << roll_deg;
  std::string s = os.str();
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

std::vector<std::string> sorted_files(const std::string& dir, const std::string& prefix) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) {
    return out;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind(prefix, 0) == 0 &&
        entry.path().extension() == ".csv") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string prim_dir(const PipelineConfig& cfg, int primitive) {
  return cfg.segment_dir() + "/prim" + std::to_string(primitive + 1);
}

std::vector<EnvSetting> settings_with_role(SettingRole role) {
  std::vector<EnvSetting> out;
  for (const auto& s : canonical_settings()) {
    if (s.role == role) {
      out.push_back(s);
    }
  }
  return out;
}

// Primitive DMPs and expected traces live in one model file.
struct Models {
  std::vector<DmpParams> primitives;
  std::vector<int> fb_primitives;
  std::vector<ExpectedSensorTraces> expected;  // parallel to fb_primitives
};

void save_models(const PipelineConfig& cfg, const Models& m) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : m.primitives) {
    prims.push_back(to_json(p));
  }
  nlohmann::json expected = nlohmann::json::array();
  for (size_t i = 0; i < m.fb_primitives.size(); ++i) {
    expected.push_back(
        {{"primitive", m.fb_primitives[i]}, {"traces", to_json(m.expected[i])}});
  }
  write_json_file(cfg.model_dir() + "/dmp.json",
                  {{"primitives", std::move(prims)}, {"expected", std::move(expected)}});
}

Models load_models(const PipelineConfig& cfg) {
  const std::string path = cfg.model_dir() + "/dmp.json";
  if (!fs::exists(path)) {
    throw ValidationError("missing " + path + "; run learn-dmp first");
  }
  const nlohmann::json j = read_json_file(path);
  Models m;
  for (const auto& jp : j.at("primitives")) {
    m.primitives.push_back(dmp_params_from_json(jp));
  }
  for (const auto& je : j.at("expected")) {
    m.fb_primitives.push_back(je.at("primitive").get<int>());
    m.expected.push_back(expected_traces_from_json(je.at("traces")));
  }
  return m;
}

const ExpectedSensorTraces& expected_for(const Models& m, int primitive) {
  for (size_t i = 0; i < m.fb_primitives.size(); ++i) {
    if (m.fb_primitives[i] == primitive) {
      return m.expected[i];
    }
  }
  throw ValidationError("no expected traces for primitive " +
                        std::to_string(primitive + 1) + "; run learn-dmp first");
}

std::vector<UnitQuaternion> nominal_reference(const DmpParams& params,
                                              const UnrollOptions& episode) {
  return unroll(params, nullptr, nullptr, nullptr, episode).Q_traj;
}

PmnnParams load_pmnn(const std::string& path, const std::string& phase_hint) {
  if (!fs::exists(path)) {
    throw ValidationError("missing " + path + "; run " + phase_hint + " first");
  }
  return pmnn_from_json(read_json_file(path));
}

Rollout load_corrected_demo(const std::string& path) {
  Rollout roll = read_rollout_csv(path);
  roll.phase_traj = simulate_phase_trajectory(roll.steps(), roll.tau, roll.dt());
  return roll;
}

FeedbackDataset corrected_dataset(const PipelineConfig& cfg, const Models& models,
                                  int primitive) {
  const DmpParams& nominal = models.primitives[primitive];
  const ExpectedSensorTraces& expected = expected_for(models, primitive);
  FeedbackDataset data;
  int demo_id = 0;
  for (const auto& s : settings_with_role(SettingRole::kSeen)) {
    const std::string dir = cfg.corrected_dir() + "/prim" +
                            std::to_string(primitive + 1) + "/setting_" +
                            setting_tag(s.roll_deg);
    const auto files = sorted_files(dir, "demo_");
    if (files.empty()) {
      throw ValidationError("no corrected demos under " + dir +
                            "; run gen-corrections first");
    }
    for (const auto& f : files) {
      FeedbackDataset rows = feedback_rows(load_corrected_demo(f), nominal, expected);
      // Roll-orientation coupling only; the plant never needs pitch/yaw
      // correction.
      rows.targets = rows.targets.col(0).eval();
      rows.demo_ids.assign(rows.rows(), demo_id);
      data.append(rows);
      ++demo_id;
    }
  }
  return data;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  PipelineConfig cfg;
  cfg.root = j.value("root", cfg.root);
  if (!j.contains("seed")) {
    throw ValidationError("config: a global seed is mandatory");
  }
  cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("corpus")) {
    const auto& c = j.at("corpus");
    cfg.corpus_demos = c.value("demos", cfg.corpus_demos);
    cfg.corpus.rate = c.value("rate", cfg.corpus.rate);
    cfg.corpus.total_s = c.value("total_s", cfg.corpus.total_s);
    cfg.corpus.noise_frac = c.value("noise_frac", cfg.corpus.noise_frac);
    cfg.corpus.time_scale_lo = c.value("time_scale_lo", cfg.corpus.time_scale_lo);
    cfg.corpus.time_scale_hi = c.value("time_scale_hi", cfg.corpus.time_scale_hi);
    cfg.corpus.reorient_deg = c.value("reorient_deg", cfg.corpus.reorient_deg);
  }
  if (j.contains("segmentation")) {
    const auto& s = j.at("segmentation");
    cfg.segmentation.h = s.value("h", cfg.segmentation.h);
    cfg.segmentation.eps = s.value("eps", cfg.segmentation.eps);
    cfg.segmentation.g = s.value("g", cfg.segmentation.g);
    cfg.segmentation.dwell_s = s.value("dwell_s", cfg.segmentation.dwell_s);
  }
  if (j.contains("dmp")) {
    const auto& d = j.at("dmp");
    cfg.n_kernels = d.value("n_kernels", cfg.n_kernels);
    cfg.episode.dt_fraction = d.value("dt_fraction", cfg.episode.dt_fraction);
    cfg.episode.horizon_scale = d.value("horizon_scale", cfg.episode.horizon_scale);
    cfg.expected_trace_runs = d.value("expected_runs", cfg.expected_trace_runs);
    if (d.contains("fb_primitives")) {
      cfg.fb_primitives = d.at("fb_primitives").get<std::vector<int>>();
    }
  }
  if (j.contains("corrections")) {
    const auto& c = j.at("corrections");
    cfg.demos_per_setting = c.value("per_setting", cfg.demos_per_setting);
    cfg.correction.gain = c.value("gain", cfg.correction.gain);
    cfg.correction.gain_jitter = c.value("gain_jitter", cfg.correction.gain_jitter);
    cfg.correction.coupling_noise = c.value("noise", cfg.correction.coupling_noise);
  }
  if (j.contains("pmnn")) {
    const auto& p = j.at("pmnn");
    if (p.contains("hidden")) {
      cfg.train.hidden = p.at("hidden").get<std::vector<int>>();
    }
    cfg.train.epochs = p.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = p.value("batch", cfg.train.batch_size);
    cfg.train.learning_rate = p.value("lr", cfg.train.learning_rate);
    cfg.train.dropout = p.value("dropout", cfg.train.dropout);
    cfg.train.val_fraction = p.value("val_fraction", cfg.train.val_fraction);
    cfg.train.test_fraction = p.value("test_fraction", cfg.train.test_fraction);
    cfg.train.allow_small_dataset =
        p.value("allow_small_dataset", cfg.train.allow_small_dataset);
  }
  if (j.contains("rl")) {
    const auto& r = j.at("rl");
    cfg.rl.K = r.value("K", cfg.rl.K);
    cfg.rl.max_iters = r.value("max_iters", cfg.rl.max_iters);
    cfg.rl.lambda = r.value("lambda", cfg.rl.lambda);
    cfg.rl.literal_full_sum = r.value("literal_full_sum", cfg.rl.literal_full_sum);
    cfg.rl.sigma0_scale = r.value("sigma0_scale", cfg.rl.sigma0_scale);
    cfg.rl.threads = r.value("threads", cfg.rl.threads);
    if (!r.contains("J_thr")) {
      throw ValidationError("config: rl.J_thr is task-specific and mandatory");
    }
    cfg.J_thr = r.at("J_thr").get<double>();
  }
  if (j.contains("plant")) {
    const auto& p = j.at("plant");
    cfg.plant.sensor_dim = p.value("sensor_dim", cfg.plant.sensor_dim);
    cfg.plant.sensor_gain = p.value("gain", cfg.plant.sensor_gain);
    cfg.plant.noise_sigma = p.value("noise_sigma", cfg.plant.noise_sigma);
    cfg.plant.saturate_sensors = p.value("saturate", cfg.plant.saturate_sensors);
    cfg.plant.saturation_knee = p.value("knee", cfg.plant.saturation_knee);
  }
  if (j.contains("eval")) {
    cfg.eval_runs = j.at("eval").value("runs", cfg.eval_runs);
  }

  cfg.plant.seed = sub_seed(cfg.seed, "plant-structure");
  cfg.train.seed = sub_seed(cfg.seed, "pmnn-train");
  cfg.rl.seed = sub_seed(cfg.seed, "rl");
  cfg.rl.train = cfg.train;
  cfg.rl.episode = cfg.episode;
  return cfg;
}

void write_default_config(const std::string& path) {
  nlohmann::json j{
      {"root", "."},
      {"seed", 20240001},
      {"corpus", {{"demos", 11}, {"rate", 300.0}, {"noise_frac", 0.01}}},
      {"segmentation", {{"h", 0.02}, {"eps", 100}, {"g", 1}, {"dwell_s", 0.1}}},
      {"dmp",
       {{"n_kernels", 25},
        {"dt_fraction", 1.0 / 300.0},
        {"horizon_scale", 1.0},
        {"expected_runs", 15},
        {"fb_primitives", {1, 2}}}},
      {"corrections", {{"per_setting", 15}, {"gain", 700.0}, {"noise", 0.3}}},
      {"pmnn",
       {{"hidden", {100}},
        {"epochs", 100},
        {"batch", 64},
        {"lr", 1e-3},
        {"dropout", 0.0},
        {"allow_small_dataset", true}}},
      {"rl", {{"K", 38}, {"max_iters", 2}, {"J_thr", 0.5}, {"sigma0_scale", 0.05}}},
      {"plant",
       {{"sensor_dim", 38},
        {"gain", 3.0},
        {"noise_sigma", 0.02},
        {"saturate", true},
        {"knee", 0.15}}},
      {"eval", {{"runs", 8}}}};
  write_json_file(path, j);
}

void cmd_gen_demos(const PipelineConfig& cfg) {
  fs::create_directories(cfg.demo_dir());
  const NominalCorpus corpus =
      make_nominal_corpus(cfg.corpus_demos, sub_seed(cfg.seed, "corpus"), cfg.corpus);

  for (size_t l = 0; l < corpus.demos.size(); ++l) {
    const CorpusDemo& d = corpus.demos[l];
    const int T = static_cast<int>(d.axes.signals.rows());
    Eigen::VectorXd times(T);
    for (int t = 0; t < T; ++t) {
      times[t] = t / d.axes.rate;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "demo_%03zu.csv", l);
    write_corpus_csv(cfg.demo_dir() + "/" + name, times, d.axes.signals, d.orientation);
  }

  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : corpus.anchors) {
    anchors.push_back({{"axis", a.axis}, {"start", a.ref_start}, {"end", a.ref_end}});
  }
  write_json_file(cfg.demo_dir() + "/anchors.json", {{"anchors", std::move(anchors)}});
  std::cout << "gen-demos: wrote " << corpus.demos.size() << " demos to "
            << cfg.demo_dir() << "\n";
}

void cmd_segment(const PipelineConfig& cfg) {
  const auto files = sorted_files(cfg.demo_dir(), "demo_");
  if (files.empty()) {
    throw ValidationError("no demos under " + cfg.demo_dir() + "; run gen-demos first");
  }
  const nlohmann::json ja = read_json_file(cfg.demo_dir() + "/anchors.json");
  std::vector<AnchorSpec> anchors;
  for (const auto& a : ja.at("anchors")) {
    anchors.push_back(
        {a.at("axis").get<int>(), a.at("start").get<int>(), a.at("end").get<int>()});
  }

  std::vector<MultiAxisDemo> demos;
  std::vector<std::vector<UnitQuaternion>> orientations;
  std::vector<Eigen::VectorXd> times;
  for (const auto& f : files) {
    Eigen::VectorXd t;
    Eigen::MatrixXd axes;
    std::vector<UnitQuaternion> q;
    read_corpus_csv(f, t, axes, q);
    MultiAxisDemo d;
    d.signals = axes;
    d.rate = t.size() >= 2 ? 1.0 / (t[1] - t[0]) : 0.0;
    d.name = fs::path(f).filename().string();
    demos.push_back(std::move(d));
    orientations.push_back(std::move(q));
    times.push_back(std::move(t));
  }

  const SegmentationResult result = segment_demos(demos, anchors, cfg.segmentation);

  auto write_segment = [&](int demo_idx, std::pair<int, int> span, int prim,
                           const std::string& filename) {
    const int len = span.second - span.first + 1;
    const double dt = 1.0 / demos[demo_idx].rate;
    Rollout roll;
    roll.times.resize(len);
    roll.Q_traj.resize(len);
    for (int i = 0; i < len; ++i) {
      roll.times[i] = i * dt;
      roll.Q_traj[i] = orientations[demo_idx][span.first + i].canonicalized();
    }
    derive_kinematics(roll.Q_traj, dt, roll.omega_traj, roll.omegadot_traj);
    roll.tau = (len - 1) * dt;
    roll.sensors.resize(len, 0);
    const std::string dir = prim_dir(cfg, prim);
    fs::create_directories(dir);
    write_rollout_csv(dir + "/" + filename, roll);
  };

  for (int p = 0; p < result.primitive_count; ++p) {
    write_segment(0, result.reference_spans[p], p, "reference.csv");
  }

  nlohmann::json report = nlohmann::json::array();
  int failures = 0;
  for (size_t l = 0; l < result.demos.size(); ++l) {
    const DemoSegments& seg = result.demos[l];
    nlohmann::json entry{{"demo", demos[l + 1].name}, {"ok", seg.ok}};
    if (!seg.ok) {
      entry["error"] = seg.error;
      ++failures;
      std::cerr << "segment: " << seg.error << "\n";
    } else {
      nlohmann::json aligns = nlohmann::json::array();
      for (const auto& a : seg.alignments) {
        aligns.push_back({{"a", a.a},
                          {"b", a.b},
                          {"weighted_residual", a.weighted_residual},
                          {"weighted", a.weighted},
                          {"dtw_cells", a.dtw_cells}});
      }
      entry["alignments"] = std::move(aligns);
      char name[32];
      std::snprintf(name, sizeof(name), "demo_%03zu.csv", l + 1);
      for (int p = 0; p < result.primitive_count; ++p) {
        write_segment(static_cast<int>(l + 1), seg.spans[p], p, name);
      }
    }
    report.push_back(std::move(entry));
  }
  fs::create_directories(cfg.segment_dir());
  write_json_file(cfg.segment_dir() + "/report.json",
                  {{"primitives", result.primitive_count},
                   {"total_dtw_cells", result.total_dtw_cells},
                   {"demos", std::move(report)}});

  std::cout << "segment: " << result.demos.size() - failures << "/"
            << result.demos.size() << " demos refined into "
            << result.primitive_count << " primitives\n";
  if (failures > 0 && !cfg.lenient) {
    throw SegmentationError(std::to_string(failures) +
                            " demo(s) failed segmentation (use --lenient to continue)");
  }
}

void cmd_learn_dmp(const PipelineConfig& cfg) {
  const KernelBank bank = make_kernel_bank(cfg.n_kernels);
  fs::create_directories(cfg.model_dir());

  Models models;
  int prim = 0;
  while (fs::is_directory(prim_dir(cfg, prim))) {
    const auto files = sorted_files(prim_dir(cfg, prim), "");
    std::vector<Rollout> demos;
    for (const auto& f : files) {
      demos.push_back(read_rollout_csv(f));
    }
    if (demos.empty()) {
      throw ValidationError("no segments under " + prim_dir(cfg, prim));
    }
    models.primitives.push_back(fit_forcing_term(demos, bank));
    ++prim;
  }
  if (models.primitives.empty()) {
    throw ValidationError("no segmented primitives under " + cfg.segment_dir() +
                          "; run segment first");
  }

  // Expected sensor traces: unroll each feedback primitive on the default
  // plant and encode the recorded traces.
  for (int p : cfg.fb_primitives) {
    if (p < 0 || p >= static_cast<int>(models.primitives.size())) {
      throw ValidationError("fb primitive index out of range: " + std::to_string(p));
    }
    const DmpParams& nominal = models.primitives[p];
    const auto reference = nominal_reference(nominal, cfg.episode);
    std::vector<Rollout> runs;
    for (int r = 0; r < cfg.expected_trace_runs; ++r) {
      PlantConfig pc = cfg.plant;
      pc.roll_deg = 0.0;
      pc.noise_seed = sub_seed(cfg.seed, "expected-" + std::to_string(p) + "-" +
                                             std::to_string(r));
      TiltBoardPlant plant(pc, reference);
      runs.push_back(unroll(nominal, nullptr, nullptr, &plant, cfg.episode));
    }
    models.fb_primitives.push_back(p);
    models.expected.push_back(encode_sensor_traces(runs, bank));
  }

  save_models(cfg, models);
  std::cout << "learn-dmp: fitted " << models.primitives.size()
            << " primitives, expected traces for " << models.fb_primitives.size()
            << " of them\n";
}

void cmd_gen_corrections(const PipelineConfig& cfg) {
  const Models models = load_models(cfg);
  CorrectionOptions opts = cfg.correction;
  opts.episode = cfg.episode;
  for (int p : cfg.fb_primitives) {
    const DmpParams& nominal = models.primitives[p];
    const auto reference = nominal_reference(nominal, cfg.episode);
    for (const auto& s : settings_with_role(SettingRole::kSeen)) {
      PlantConfig pc = cfg.plant;
      pc.roll_deg = s.roll_deg;
      const auto demos = generate_corrected_demos(
          pc, nominal, reference, cfg.demos_per_setting,
          sub_seed(cfg.seed, "corrections-" + std::to_string(p) + "-" +
                                 setting_tag(s.roll_deg)),
          opts);
      const std::string dir = cfg.corrected_dir() + "/prim" + std::to_string(p + 1) +
                              "/setting_" + setting_tag(s.roll_deg);
      fs::create_directories(dir);
      for (size_t i = 0; i < demos.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "demo_%03zu.csv", i);
        write_rollout_csv(dir + "/" + name, demos[i]);
      }
    }
  }
  std::cout << "gen-corrections: " << cfg.demos_per_setting
            << " demos per seen setting per primitive\n";
}

void cmd_learn_fb(const PipelineConfig& cfg) {
  const Models models = load_models(cfg);
  fs::create_directories(cfg.report_dir());
  for (int p : cfg.fb_primitives) {
    const FeedbackDataset data = corrected_dataset(cfg, models, p);
    PmnnTrainConfig tc = cfg.train;
    tc.seed = sub_seed(cfg.seed, "learn-fb-" + std::to_string(p));
    const PmnnTrainResult result =
        pmnn_train(data, models.primitives[p].bank, tc);
    write_json_file(cfg.model_dir() + "/pmnn_pre_prim" + std::to_string(p + 1) + ".json",
                    to_json(result.params));
    write_metrics_csv(cfg.report_dir() + "/fb_metrics_prim" + std::to_string(p + 1) +
                          ".csv",
                      result.metrics);
    std::cout << "learn-fb: primitive " << (p + 1) << " train/val/test NMSE "
              << result.metrics.train_nmse << "/" << result.metrics.val_nmse << "/"
              << result.metrics.test_nmse << " (" << data.rows() << " rows)\n";
  }
}

void cmd_rl(const PipelineConfig& cfg) {
  const Models models = load_models(cfg);
  const auto initially_unseen = settings_with_role(SettingRole::kInitiallyUnseen);
  if (initially_unseen.size() != 1) {
    throw ValidationError("expected exactly one initially-unseen setting");
  }
  if (!(cfg.J_thr > 0.0)) {
    throw ValidationError("rl.J_thr must be set in the config");
  }

  // Primitive after primitive: RL on one converges before the next starts.
  for (int p : cfg.fb_primitives) {
    const DmpParams& nominal = models.primitives[p];
    const ExpectedSensorTraces& expected = expected_for(models, p);
    const PmnnParams pre = load_pmnn(
        cfg.model_dir() + "/pmnn_pre_prim" + std::to_string(p + 1) + ".json",
        "learn-fb");
    const FeedbackDataset d_cdemo = corrected_dataset(cfg, models, p);

    PlantConfig pc = cfg.plant;
    pc.roll_deg = initially_unseen[0].roll_deg;
    TiltBoardPlantFactory plants(pc, nominal_reference(nominal, cfg.episode));

    RlConfig rc = cfg.rl;
    rc.seed = sub_seed(cfg.seed, "rl-prim-" + std::to_string(p));
    rc.train.seed = rc.seed;
    rc.episode = cfg.episode;
    rc.log_dir = cfg.report_dir() + "/rl_prim" + std::to_string(p + 1);
    const RlResult result =
        rl_feedback(nominal, pre, d_cdemo, expected, cfg.J_thr, plants, rc);
    write_json_file(
        cfg.model_dir() + "/pmnn_post_prim" + std::to_string(p + 1) + ".json",
        to_json(result.pmnn));
    std::cout << "rl: primitive " << (p + 1) << " cost " << result.initial_cost_norm
              << " -> " << result.final_cost_norm << " over "
              << result.iterations.size() << " iterations\n";
  }
}

void cmd_eval(const PipelineConfig& cfg) {
  const Models models = load_models(cfg);
  fs::create_directories(cfg.report_dir());
  std::ofstream f(cfg.report_dir() + "/eval.csv");
  f << "primitive,roll_deg,label,nofb_mean,nofb_std,fb_pre_mean,fb_pre_std,"
       "fb_post_mean,fb_post_std\n";

  for (int p : cfg.fb_primitives) {
    const DmpParams& nominal = models.primitives[p];
    const ExpectedSensorTraces& expected = expected_for(models, p);
    const auto reference = nominal_reference(nominal, cfg.episode);

    const std::string pre_path =
        cfg.model_dir() + "/pmnn_pre_prim" + std::to_string(p + 1) + ".json";
    const std::string post_path =
        cfg.model_dir() + "/pmnn_post_prim" + std::to_string(p + 1) + ".json";
    std::unique_ptr<PmnnParams> pre, post;
    if (fs::exists(pre_path)) {
      pre = std::make_unique<PmnnParams>(pmnn_from_json(read_json_file(pre_path)));
    }
    if (fs::exists(post_path)) {
      post = std::make_unique<PmnnParams>(pmnn_from_json(read_json_file(post_path)));
    }

    for (const auto& s : canonical_settings()) {
      PlantConfig pc = cfg.plant;
      pc.roll_deg = s.roll_deg;
      const std::string base = "eval-" + std::to_string(p) + "-" +
                               setting_tag(s.roll_deg);
      const SettingScore nofb =
          evaluate_setting(pc, nominal, reference, nullptr, &expected, cfg.eval_runs,
                           sub_seed(cfg.seed, base + "-nofb"), cfg.episode);
      f << (p + 1) << ',' << fmt(s.roll_deg) << ',' << role_name(s.role) << ','
        << fmt(nofb.mean) << ',' << fmt(nofb.stddev);
      if (pre != nullptr) {
        const SettingScore sc =
            evaluate_setting(pc, nominal, reference, pre.get(), &expected,
                             cfg.eval_runs, sub_seed(cfg.seed, base + "-pre"),
                             cfg.episode);
        f << ',' << fmt(sc.mean) << ',' << fmt(sc.stddev);
      } else {
        f << ",,";
      }
      if (post != nullptr) {
        const SettingScore sc =
            evaluate_setting(pc, nominal, reference, post.get(), &expected,
                             cfg.eval_runs, sub_seed(cfg.seed, base + "-post"),
                             cfg.episode);
        f << ',' << fmt(sc.mean) << ',' << fmt(sc.stddev);
      } else {
        f << ",,";
      }
      f << "\n";
    }
  }
  std::cout << "eval: wrote " << cfg.report_dir() << "/eval.csv\n";
}

void cmd_unroll(const PipelineConfig& cfg, int primitive, double roll_deg,
                const std::string& feedback_model, const std::string& out_csv) {
  const Models models = load_models(cfg);
  if (primitive < 0 || primitive >= static_cast<int>(models.primitives.size())) {
    throw ValidationError("primitive index out of range");
  }
  const DmpParams& nominal = models.primitives[primitive];
  const auto reference = nominal_reference(nominal, cfg.episode);
  PlantConfig pc = cfg.plant;
  pc.roll_deg = roll_deg;
  pc.noise_seed = sub_seed(cfg.seed, "cmd-unroll");
  TiltBoardPlant plant(pc, reference);

  Rollout roll;
  if (!feedback_model.empty()) {
    const PmnnParams fb = load_pmnn(feedback_model, "learn-fb");
    const ExpectedSensorTraces& expected = expected_for(models, primitive);
    PmnnCoupling coupling(fb);
    roll = unroll(nominal, &coupling, &expected, &plant, cfg.episode);
  } else {
    roll = unroll(nominal, nullptr, nullptr, &plant, cfg.episode);
  }
  write_rollout_csv(out_csv, roll);
  std::cout << "unroll: ||J||_2 = " << roll.costs.norm() << ", wrote " << out_csv
            << "\n";
}

void run_full_pipeline(const PipelineConfig& cfg) {
  cmd_gen_demos(cfg);
  cmd_segment(cfg);
  cmd_learn_dmp(cfg);
  cmd_gen_corrections(cfg);
  cmd_learn_fb(cfg);
  cmd_rl(cfg);
  cmd_eval(cfg);
}

}  // namespace mpfb
