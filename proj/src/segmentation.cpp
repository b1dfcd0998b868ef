#include "mpfb/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mpfb {

namespace {

Eigen::VectorXd standardize(const Eigen::VectorXd& z, const char* who) {
  const double mean = z.mean();
  const double sd = std::sqrt((z.array() - mean).square().mean());
  if (sd < 1e-12) {
    throw SegmentationError(std::string(who) + ": constant segment cannot be standardized");
  }
  return (z.array() - mean) / sd;
}

Demo1D slice(const Demo1D& d, int start, int end) {
  Demo1D out;
  out.rate = d.rate;
  out.z = d.z.segment(start, end - start + 1);
  out.v = d.v.segment(start, end - start + 1);
  return out;
}

Demo1D downsample(const Demo1D& d, int g) {
  if (g <= 1) {
    return d;
  }
  const int n = (static_cast<int>(d.z.size()) + g - 1) / g;
  Demo1D out;
  out.rate = d.rate / g;
  out.z.resize(n);
  out.v.resize(n);
  for (int i = 0; i < n; ++i) {
    out.z[i] = d.z[i * g];
    out.v[i] = d.v[i * g];
  }
  return out;
}

}  // namespace

std::pair<int, int> zvc_segment(const Demo1D& demo, double h, double dwell_s) {
  if (h <= 0.0) {
    throw ValidationError("zvc_segment: threshold must be positive");
  }
  const int n = static_cast<int>(demo.v.size());
  const int dwell = std::max(1, static_cast<int>(std::lround(dwell_s * demo.rate)));

  int s = -1;
  for (int i = 0; i < n; ++i) {
    if (std::abs(demo.v[i]) > h) {
      s = i;
      break;
    }
  }
  if (s < 0) {
    throw SegmentationError("zvc_segment: velocity never crosses the threshold");
  }

  for (int j = s + 1; j < n; ++j) {
    if (std::abs(demo.v[j]) < h) {
      bool stays_below = true;
      for (int k = j; k < std::min(n, j + dwell); ++k) {
        if (std::abs(demo.v[k]) >= h) {
          stays_below = false;
          break;
        }
      }
      if (stays_below) {
        return {s, j};
      }
    }
  }
  throw SegmentationError("zvc_segment: motion does not come to rest after onset");
}

CorrespondenceSet dtw_correspondences(const Demo1D& ref, const Demo1D& guess) {
  const int n = static_cast<int>(ref.z.size());
  const int m = static_cast<int>(guess.z.size());
  if (n < 2 || m < 2) {
    throw SegmentationError("dtw_correspondences: segments must have length >= 2");
  }
  const Eigen::VectorXd zr = standardize(ref.z, "dtw_correspondences(ref)");
  const Eigen::VectorXd zg = standardize(guess.z, "dtw_correspondences(guess)");

  Eigen::MatrixXd D(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double cost = (zr[i] - zg[j]) * (zr[i] - zg[j]);
      double best = 0.0;
      if (i > 0 && j > 0) {
        best = std::min({D(i - 1, j - 1), D(i - 1, j), D(i, j - 1)});
      } else if (i > 0) {
        best = D(i - 1, j);
      } else if (j > 0) {
        best = D(i, j - 1);
      }
      D(i, j) = cost + best;
    }
  }

  // Backtrack; ties prefer the diagonal step.
  std::vector<std::pair<int, int>> path;
  int i = n - 1, j = m - 1;
  path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = D(i - 1, j - 1);
      const double up = D(i - 1, j);
      const double left = D(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());

  // One pair per index along the shorter axis: middle visit of each run.
  CorrespondenceSet out;
  out.cells_evaluated = static_cast<long>(n) * m;
  const bool ref_shorter = n <= m;
  size_t k = 0;
  while (k < path.size()) {
    size_t end = k;
    const int key = ref_shorter ? path[k].first : path[k].second;
    while (end + 1 < path.size() &&
           (ref_shorter ? path[end + 1].first : path[end + 1].second) == key) {
      ++end;
    }
    out.pairs.push_back(path[(k + end) / 2]);
    k = end + 1;
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> construct_ls(const CorrespondenceSet& c) {
  const int k = static_cast<int>(c.pairs.size());
  if (k < 2) {
    throw SegmentationError("construct_ls: need at least 2 correspondence pairs");
  }
  Eigen::MatrixXd A(k, 2);
  Eigen::VectorXd b(k);
  for (int i = 0; i < k; ++i) {
    A(i, 0) = c.pairs[i].first;
    A(i, 1) = 1.0;
    b[i] = c.pairs[i].second;
  }
  return {A, b};
}

Eigen::VectorXd compute_ls_weights(const CorrespondenceSet& c, const Demo1D& ref,
                                   const Demo1D& guess) {
  const int k = static_cast<int>(c.pairs.size());
  const double v_near_zero = 0.05 * ref.v.cwiseAbs().maxCoeff();
  const double mean = ref.v.mean();
  const double sigma_v =
      std::max(std::sqrt((ref.v.array() - mean).square().mean()), 1e-12);

  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) {
    const double vr = ref.v[c.pairs[i].first];
    const double vg = guess.v[c.pairs[i].second];
    if (std::min(std::abs(vr), std::abs(vg)) < v_near_zero) {
      w[i] = 0.0;
    } else {
      w[i] = std::exp(-std::abs(vr - vg) / sigma_v);
    }
  }
  return w;
}

AlignmentParams solve_wls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& w) {
  auto normal_solve = [&](const Eigen::VectorXd& weights,
                          Eigen::Vector2d& x) -> bool {
    const Eigen::Matrix2d m = A.transpose() * weights.asDiagonal() * A;
    const Eigen::Vector2d rhs = A.transpose() * weights.asDiagonal() * b;
    const double scale = m.trace() * m.trace();
    if (!(scale > 0.0) || std::abs(m.determinant()) < 1e-12 * std::max(scale, 1.0)) {
      return false;
    }
    x = m.inverse() * rhs;
    return x.allFinite();
  };

  AlignmentParams out;
  Eigen::Vector2d x;
  if (normal_solve(w, x)) {
    out.a = x[0];
    out.b = x[1];
    out.weighted = true;
    return out;
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(b.size());
  if (!normal_solve(ones, x)) {
    throw SegmentationError("solve_wls: alignment system is rank-deficient");
  }
  out.a = x[0];
  out.b = x[1];
  out.weighted = false;
  return out;
}

std::pair<int, int> refine_indices(int s_guess, std::pair<int, int> ref_span, int eps,
                                   const AlignmentParams& align, int n_samples) {
  const double i_s_raw = s_guess + align.b + (align.a - 1.0) * eps;
  const double len = align.a * (ref_span.second - ref_span.first);
  int i_s = static_cast<int>(std::lround(i_s_raw));
  int i_e = static_cast<int>(std::lround(i_s_raw + len));
  i_s = std::clamp(i_s, 0, n_samples - 1);
  i_e = std::clamp(i_e, 0, n_samples - 1);
  if (i_e <= i_s) {
    throw SegmentationError("refine_indices: refined segment is degenerate");
  }
  return {i_s, i_e};
}

Eigen::VectorXd signal_velocity(const Eigen::VectorXd& z, double rate) {
  const int n = static_cast<int>(z.size());
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      v[i] = (z[1] - z[0]) * rate;
    } else if (i == n - 1) {
      v[i] = (z[n - 1] - z[n - 2]) * rate;
    } else {
      v[i] = (z[i + 1] - z[i - 1]) * rate * 0.5;
    }
  }
  return v;
}

SegmentationResult segment_demos(const std::vector<MultiAxisDemo>& demos,
                                 const std::vector<AnchorSpec>& anchors,
                                 const SegmentationConfig& cfg) {
  if (demos.empty()) {
    throw ValidationError("segment_demos: no demonstrations");
  }
  if (anchors.empty()) {
    throw ValidationError("segment_demos: no anchored primitives");
  }
  if (cfg.g < 1) {
    throw ValidationError("segment_demos: down-sampling factor must be >= 1");
  }

  const MultiAxisDemo& ref_demo = demos[0];
  const int n_anchors = static_cast<int>(anchors.size());

  // Reference channels and extended reference segments, one per anchor.
  std::vector<Demo1D> ref_channels(n_anchors);
  std::vector<Demo1D> ref_segments(n_anchors);
  std::vector<int> ref_seg_start(n_anchors);
  const int ref_len = static_cast<int>(ref_demo.signals.rows());
  for (int p = 0; p < n_anchors; ++p) {
    const AnchorSpec& a = anchors[p];
    Demo1D ch;
    ch.rate = ref_demo.rate;
    ch.z = ref_demo.signals.col(a.axis);
    ch.v = signal_velocity(ch.z, ref_demo.rate);
    const int lo = std::max(0, a.ref_start - cfg.eps);
    const int hi = std::min(ref_len - 1, a.ref_end + cfg.eps);
    ref_segments[p] = slice(ch, lo, hi);
    ref_seg_start[p] = lo;
    ref_channels[p] = std::move(ch);
  }

  SegmentationResult result;
  result.primitive_count = cfg.emit_gaps ? 2 * n_anchors - 1 : n_anchors;

  // Reference passthrough: the manual cuts plus derived gaps.
  for (int p = 0; p < n_anchors; ++p) {
    result.reference_spans.emplace_back(anchors[p].ref_start, anchors[p].ref_end);
    if (cfg.emit_gaps && p + 1 < n_anchors) {
      result.reference_spans.emplace_back(anchors[p].ref_end + 1,
                                          anchors[p + 1].ref_start - 1);
    }
  }

  for (size_t l = 1; l < demos.size(); ++l) {
    DemoSegments seg;
    const int demo_len = static_cast<int>(demos[l].signals.rows());
    std::vector<std::pair<int, int>> anchor_spans(n_anchors);
    try {
      for (int p = 0; p < n_anchors; ++p) {
        const AnchorSpec& a = anchors[p];
        Demo1D ch;
        ch.rate = demos[l].rate;
        ch.z = demos[l].signals.col(a.axis);
        ch.v = signal_velocity(ch.z, demos[l].rate);

        const auto [s_guess, e_guess] = zvc_segment(ch, cfg.h, cfg.dwell_s);
        const int lo = std::max(0, s_guess - cfg.eps);
        const int hi = std::min(demo_len - 1, e_guess + cfg.eps);
        const Demo1D guess_seg = slice(ch, lo, hi);

        const Demo1D ref_ds = downsample(ref_segments[p], cfg.g);
        const Demo1D guess_ds = downsample(guess_seg, cfg.g);
        CorrespondenceSet corr = dtw_correspondences(ref_ds, guess_ds);
        const auto [A, b] = construct_ls(corr);
        corr.weights = compute_ls_weights(corr, ref_ds, guess_ds);
        AlignmentParams align = solve_wls(A, b, corr.weights);
        align.b *= cfg.g;  // back to full resolution; the scale is unchanged

        const auto span = refine_indices(s_guess, {a.ref_start, a.ref_end}, cfg.eps,
                                         align, demo_len);
        anchor_spans[p] = span;

        SegmentAlignment rep;
        rep.a = align.a;
        rep.b = align.b;
        rep.weighted = align.weighted;
        rep.dtw_cells = corr.cells_evaluated;
        const Eigen::VectorXd resid = A * Eigen::Vector2d(align.a, align.b / cfg.g) - b;
        rep.weighted_residual =
            std::sqrt((corr.weights.array() * resid.array().square()).sum() /
                      std::max(corr.weights.sum(), 1e-12));
        seg.alignments.push_back(rep);
        result.total_dtw_cells += corr.cells_evaluated;
      }

      for (int p = 0; p < n_anchors; ++p) {
        seg.spans.push_back(anchor_spans[p]);
        if (cfg.emit_gaps && p + 1 < n_anchors) {
          const int gs = anchor_spans[p].second + 1;
          const int ge = anchor_spans[p + 1].first - 1;
          if (ge <= gs) {
            throw SegmentationError("segment_demos: gap primitive is degenerate");
          }
          seg.spans.emplace_back(gs, ge);
        }
      }
    } catch (const std::exception& e) {
      seg.ok = false;
      std::ostringstream msg;
      msg << "demo " << (demos[l].name.empty() ? std::to_string(l) : demos[l].name)
          << ": " << e.what();
      seg.error = msg.str();
      seg.spans.clear();
    }
    result.demos.push_back(std::move(seg));
  }
  return result;
}

}  // namespace mpfb
