#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpfb/pmnn.hpp"
#include "mpfb/rl.hpp"
#include "mpfb/testbed.hpp"

namespace mpfb {

// File-based pipeline: every phase reads the previous phase's artifacts from
// disk and all randomness flows from the single global seed.
struct PipelineConfig {
  std::string root = ".";
  std::uint64_t seed = 0;
  bool lenient = false;

  int corpus_demos = 11;
  CorpusParams corpus;

  SegmentationConfig segmentation{0.02, 100, 1, 0.1, true};

  int n_kernels = 25;
  UnrollOptions episode{1.0 / 300.0, 1.0};
  int expected_trace_runs = 15;

  std::vector<int> fb_primitives = {1, 2};  // 0-based; primitives 2 and 3
  int demos_per_setting = 15;
  CorrectionOptions correction;

  PmnnTrainConfig train;
  RlConfig rl;
  double J_thr = 0.0;

  PlantConfig plant;
  int eval_runs = 8;

  std::string demo_dir() const { return root + "/demos/nominal"; }
  std::string corrected_dir() const { return root + "/demos/corrected"; }
  std::string segment_dir() const { return root + "/segmented"; }
  std::string model_dir() const { return root + "/models"; }
  std::string report_dir() const { return root + "/reports"; }
};

PipelineConfig load_pipeline_config(const std::string& path);
void write_default_config(const std::string& path);

// Phase commands; each throws on hard failure (the CLI maps that to a
// nonzero exit code).
void cmd_gen_demos(const PipelineConfig& cfg);
void cmd_segment(const PipelineConfig& cfg);
void cmd_learn_dmp(const PipelineConfig& cfg);
void cmd_gen_corrections(const PipelineConfig& cfg);
void cmd_learn_fb(const PipelineConfig& cfg);
void cmd_rl(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg);

// Unrolls one primitive at a setting and writes the trajectory CSV.
void cmd_unroll(const PipelineConfig& cfg, int primitive, double roll_deg,
                const std::string& feedback_model, const std::string& out_csv);

// Runs every phase in order (the smoke pipeline).
void run_full_pipeline(const PipelineConfig& cfg);

}  // namespace mpfb
