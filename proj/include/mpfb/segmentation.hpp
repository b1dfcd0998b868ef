#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mpfb/common.hpp"

namespace mpfb {

// One scalar channel of a demonstration (a chosen position axis).
struct Demo1D {
  Eigen::VectorXd z;  // signal
  Eigen::VectorXd v;  // velocity of z, signal units per second
  double rate = 0.0;  // samples per second
};

// DTW-matched time-index pairs (0-based, within the compared segments) with
// velocity-compatibility weights.
struct CorrespondenceSet {
  std::vector<std::pair<int, int>> pairs;  // (t_ref, t_guess)
  Eigen::VectorXd weights;                 // in [0, 1]; empty until computed
  long cells_evaluated = 0;                // DTW cost-matrix cells touched
};

// Time scale / delay of a guessed segment relative to the reference:
// t_guess = a * t_ref + b.
struct AlignmentParams {
  double a = 1.0;
  double b = 0.0;
  bool weighted = true;  // false when WLS was degenerate and plain LS was used
};

// First index where |v| rises above h, and the subsequent index where it
// falls below h and stays below for the dwell window.
std::pair<int, int> zvc_segment(const Demo1D& demo, double h, double dwell_s = 0.1);

// Classic DTW on standardized signals, squared-difference local cost, step set
// {(1,0),(0,1),(1,1)}; reduces the warping path to min(M,N) one-to-one pairs
// by keeping the middle visit of each run.
CorrespondenceSet dtw_correspondences(const Demo1D& ref, const Demo1D& guess);

// A row per pair: [t_ref, 1]; b holds t_guess.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> construct_ls(const CorrespondenceSet& c);

// Diagonal weights: 0 for near-zero-velocity pairs, else
// exp(-|v_ref - v_guess| / sigma_v) with sigma_v the reference segment's
// velocity standard deviation.
Eigen::VectorXd compute_ls_weights(const CorrespondenceSet& c, const Demo1D& ref,
                                   const Demo1D& guess);

// x = (A'WA)^-1 A'Wb.  Falls back to unweighted LS (with weighted=false) when
// the weighted system is rank-deficient.
AlignmentParams solve_wls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& w);

// Maps the reference cut [s1, e1] into the guessed trajectory:
//   i_s = s_guess + b + (a - 1) * eps,  i_e = i_s + a * (e1 - s1)
// clamped to [0, n_samples - 1].
std::pair<int, int> refine_indices(int s_guess, std::pair<int, int> ref_span, int eps,
                                   const AlignmentParams& align, int n_samples);

// ---------------------------------------------------------------------------
// Batch segmentation of a demo corpus (Alg. 1 with the down-sampling speed-up)

struct MultiAxisDemo {
  Eigen::MatrixXd signals;  // T x A position channels
  double rate = 0.0;
  std::string name;
};

// An anchored primitive: the manually cut span in the reference demo and the
// axis used to align it.  Gap primitives between consecutive anchors are
// derived, not anchored.
struct AnchorSpec {
  int axis = 0;
  int ref_start = 0;
  int ref_end = 0;  // inclusive
};

struct SegmentationConfig {
  double h = 0.0;       // ZVC velocity threshold
  int eps = 0;          // segment extension, samples
  int g = 1;            // down-sampling factor
  double dwell_s = 0.1;
  bool emit_gaps = true;  // derive one gap primitive between consecutive anchors
};

struct SegmentAlignment {
  double a = 1.0;
  double b = 0.0;
  double weighted_residual = 0.0;
  bool weighted = true;
  long dtw_cells = 0;
};

struct DemoSegments {
  std::vector<std::pair<int, int>> spans;      // one per output primitive
  std::vector<SegmentAlignment> alignments;    // one per anchored primitive
  bool ok = true;
  std::string error;
};

struct SegmentationResult {
  std::vector<std::pair<int, int>> reference_spans;  // primitives in demo 0
  std::vector<DemoSegments> demos;                   // demos 1..L-1
  long total_dtw_cells = 0;
  int primitive_count = 0;
};

// Velocity by central differences scaled to signal units per second.
Eigen::VectorXd signal_velocity(const Eigen::VectorXd& z, double rate);

// Runs Alg. 1 over demos[1..L-1] against the reference demos[0].  Per-demo
// failures are recorded, not thrown.
SegmentationResult segment_demos(const std::vector<MultiAxisDemo>& demos,
                                 const std::vector<AnchorSpec>& anchors,
                                 const SegmentationConfig& cfg);

}  // namespace mpfb
