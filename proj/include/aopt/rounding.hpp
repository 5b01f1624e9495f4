#pragma once

// Greedy round-off of an approximate allocation to n experimental units.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "aopt/design.hpp"
#include "aopt/errors.hpp"
#include "aopt/glm.hpp"

namespace aopt {

struct RoundingStep {
  int index = -1;
  /// d_i for every eligible index at this step (0 for ineligible ones).
  Vector gains;
};

struct RoundingResult {
  ExactDesign design;
  std::vector<long> floors;
  std::vector<RoundingStep> trace;
};

/// n_i = floor(n w_i), then each of the k leftover units goes to the index in
/// {i : w_i > 0} maximizing d_i = h((n - k + 1)^{-1}(n_1, ..., n_i + 1, ..., n_m)),
/// ties to the smallest index.
inline RoundingResult round_allocation_traced(const InfoSystem& sys, const ApproximateDesign& design, long n) {
  if (n < 1) throw InvalidArgument("n must be at least 1");
  design.validate();
  const int m = design.size();
  if (sys.num_points() != m) throw InvalidArgument("information system and design differ in size");

  RoundingResult res;
  std::vector<long> counts(m);
  long used = 0;
  for (int i = 0; i < m; ++i) {
    counts[i] = static_cast<long>(std::floor(static_cast<double>(n) * design.weights[i]));
    used += counts[i];
  }
  res.floors = counts;
  long k = n - used;
  if (k < 0) throw InvalidArgument("floor allocation exceeds n");
  if (k == 0) {
    Vector w(m);
    for (int i = 0; i < m; ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
    if (sys.h(w) <= 0.0) throw InfeasibleError("floor allocation is singular and no units are left to repair it");
  }

  for (; k > 0; --k) {
    const double scale = 1.0 / static_cast<double>(n - k + 1);
    RoundingStep step;
    step.gains = Vector::Zero(m);
    double best = -1.0;
    for (int i = 0; i < m; ++i) {
      if (!(design.weights[i] > 0.0)) continue;
      Vector w(m);
      for (int j = 0; j < m; ++j) w[j] = static_cast<double>(counts[j]) * scale;
      w[i] += scale;
      const double d = sys.h(w);
      step.gains[i] = d;
      if (d > best) {
        best = d;
        step.index = i;
      }
    }
    ++counts[step.index];
    res.trace.push_back(std::move(step));
  }

  res.design = {design.points, counts, n};
  return res;
}

inline RoundingResult round_allocation_traced(const GlmModel& model, const ApproximateDesign& design, long n) {
  return round_allocation_traced(InfoSystem(model, design.points), design, n);
}

inline ExactDesign round_allocation(const GlmModel& model, const ApproximateDesign& design, long n) {
  return round_allocation_traced(model, design, n).design;
}

}  // namespace aopt
