#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vflow/kernel.hpp"
#include "vflow/varifold.hpp"

namespace vflow {

/// Discretisation of the outer convolution h_ε = Φ_ε ∗ h̃_ε and of the
/// dissipation integral.
struct QuadratureSpec {
  enum class Rule { TensorGauss, TensorMidpoint };

  Rule rule = Rule::TensorGauss;
  int points_per_axis = 16;
  /// Integrate over B_{min(1, k·ε)}(x).
  double radius_factor = 6.0;
  /// Upper bound on the number of h̃ evaluations per call.
  std::size_t max_nodes = 50'000'000;

  void validate() const;
  /// Same rule with twice the points per axis.
  QuadratureSpec refined() const;
};

std::string to_string(QuadratureSpec::Rule rule);
QuadratureSpec::Rule parse_quadrature_rule(const std::string& name);

/// h_ε and Dh_ε sampled at the atoms. dh[j](a, b) = ∂_b h_a(x_j).
struct CurvatureField {
  std::vector<Vec> h;
  std::vector<Mat> dh;
  double h_sup = 0.0;   ///< max_j |h(x_j)|
  double dh_sup = 0.0;  ///< max_j ‖Dh(x_j)‖ (operator norm)
  std::size_t nodes = 0;
  /// Relative Gaussian mass beyond the truncation radius, e^{−k²/2}.
  double truncation_bound = 0.0;

  SampledMap as_map() const { return {h, dh}; }
};

/// (‖V‖ ∗ Φ_ε)(y) = Σⱼ mⱼ Φ_ε(xⱼ − y), summed over every atom.
double conv_mass(const Varifold& v, const Kernel& k, const Vec& y);

/// (δV ∗ Φ_ε)(y) = Σⱼ mⱼ P_{Sⱼ} ∇Φ_ε(xⱼ − y), summed over every atom.
Vec conv_first_variation(const Varifold& v, const Kernel& k, const Vec& y);

/// h̃_ε(y) = −(δV ∗ Φ_ε)(y) / ((‖V‖ ∗ Φ_ε)(y) + ε).
Vec h_tilde(const Varifold& v, const Kernel& k, const Vec& y);

CurvatureField curvature_field(const Varifold& v, const Kernel& k, const QuadratureSpec& q = {});

/// D(V) = ∫ |δV ∗ Φ_ε|² / (‖V‖ ∗ Φ_ε + ε), midpoint lattice over the union of
/// the balls B_{min(1, kε)}(xⱼ).
double dissipation(const Varifold& v, const Kernel& k, const QuadratureSpec& q = {});

/// Radius beyond which neighbour terms are dropped: min(1, 10ε).
double neighbour_radius(double eps);

}  // namespace vflow
