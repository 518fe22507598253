#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "vflow/varifold.hpp"

namespace vflow {

/// d((x, S), (y, T)) = |x − y| + ‖P_S − P_T‖.
double product_distance(const Vec& x, const Plane& s, const Vec& y, const Plane& t);

/// One point of the merged support with its signed weight μ − ν.
struct SupportPoint {
  Vec position;
  Plane plane;
  double weight = 0.0;
};

/// Union of the two supports, merging points that agree within `tol` in
/// position and projector.
std::vector<SupportPoint> merged_support(const Varifold& v, const Varifold& w, double tol = 1e-12);

struct BLResult {
  double distance = 0.0;
  std::size_t support_size = 0;
  std::size_t iterations = 0;
  /// Transport cost minus the objective of the reconstructed test function.
  double gap = 0.0;
  /// Optimal test function on the merged support.
  std::vector<double> test_function;
};

/// sup { Σ wᵢφᵢ : |φᵢ| ≤ 1, |φᵢ − φⱼ| ≤ d_ij } over the merged support.
BLResult bl_distance_report(const Varifold& v, const Varifold& w);

inline double bl_distance(const Varifold& v, const Varifold& w) {
  return bl_distance_report(v, w).distance;
}

using PointFunction = std::function<double(const Vec&, const Plane&)>;

/// |Σ wᵢ φ(pᵢ)| for a test function checked to satisfy |φ| ≤ 1 and
/// lip(φ) ≤ 1 on the merged support; throws InfeasibleTestFunction otherwise.
double bl_lower_bound(const Varifold& v, const Varifold& w, const PointFunction& phi);

}  // namespace vflow
