#pragma once

#include <stdexcept>
#include <string>

namespace mpfb {

// Bad arguments / broken preconditions (non-unit quaternion, non-positive dt, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Least-squares fitting failed (too few samples, rank-deficient features).
struct RegressionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A demo could not be segmented (no velocity crossing, degenerate segment, ...).
struct SegmentationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulated plant failure; rollouts hit by this are flagged invalid.
struct PlantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mpfb
