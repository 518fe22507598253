#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vflow/geometry.hpp"

namespace vflow {

/// Radial cutoff profile and its first two radial derivatives.
struct CutoffValues {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

/// Cubic smoothstep: 1 on [0, ½], 0 on [1, ∞), p(s) = 1 − (3s² − 2s³) with
/// s = 2r − 1 in between. |p′| ≤ 3 and |p″| ≤ 24.
CutoffValues cutoff(double r);

/// Bound on the cutoff's Hessian norm used for c₀ (radial 24 plus tangential 6).
inline constexpr double kCutoffHessianBound = 30.0;
/// The factor appearing in the published definition of c₀.
inline constexpr double kPublishedCutoffHessianBound = 9.0;

/// Dimension-only constants of the kernel family.
struct KernelConstants {
  int n = 0;
  double sphere_area = 0.0;    ///< σ_{n−1} = |∂B₁|
  double ball_volume = 0.0;    ///< ωₙ = |B₁|
  double c_upper = 0.0;        ///< c, with 1/c = ∫_{B_½} Φ̂₁
  double c0 = 0.0;             ///< recomputed for the implemented cutoff
  double c0_published = 0.0;   ///< same supremum with the published factor 9
  double c1 = 0.0;             ///< 2(1 + ωₙc₀)(1 + c₀)
  double c1_published = 0.0;
};

/// Cached per n; thread-safe.
const KernelConstants& kernel_constants(int n);

/// c(ε) = 1 / ∫ ψ Φ̂_ε by adaptive radial quadrature (relative tolerance 1e-10);
/// cached per (n, ε).
double normalization(int n, double eps);

struct KernelEval {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// Φ_ε(x) = c(ε) ψ(|x|) (2πε²)^{−n/2} exp(−|x|²/2ε²), supported in the closed unit ball.
class Kernel {
 public:
  Kernel(int n, double eps);

  int ambient() const { return n_; }
  double eps() const { return eps_; }
  double c_eps() const { return c_eps_; }
  double c0() const { return constants_->c0; }
  const KernelConstants& constants() const { return *constants_; }

  /// Φ_ε(0).
  double peak() const { return peak_; }

  /// Value and gradient factor g with ∇Φ_ε(x) = g·x, from r² = |x|².
  void radial(double r2, double& value, double& grad_factor) const {
    value = 0.0;
    grad_factor = 0.0;
    if (r2 >= 1.0) {
      return;
    }
    const double gauss = peak_ * std::exp(-r2 * half_inv_eps2_);
    if (r2 <= 0.25) {
      value = gauss;
      grad_factor = -gauss * inv_eps2_;
      return;
    }
    const double r = std::sqrt(r2);
    const CutoffValues psi = cutoff(r);
    value = psi.value * gauss;
    grad_factor = gauss * (psi.first / r - psi.value * inv_eps2_);
  }

  /// Adds the Hessian: ∇²Φ_ε(x) = g·I + hcoef·x xᵀ.
  void radial_hessian(double r2, double& value, double& grad_factor, double& hess_coef) const;

  double value(const Vec& x) const;
  KernelEval eval(const Vec& x) const;

  /// Radial derivatives Φ′(r), Φ″(r) of the profile.
  void profile(double r, double& value, double& d1, double& d2) const;

 private:
  int n_;
  double eps_;
  double c_eps_;
  double peak_;
  double inv_eps2_;
  double half_inv_eps2_;
  const KernelConstants* constants_;
};

struct KernelBoundReport {
  int n = 0;
  double eps = 0.0;
  double c_eps = 0.0;
  KernelConstants constants;
  double integral = 0.0;  ///< ∫Φ_ε by radial quadrature
  std::size_t samples = 0;
  std::size_t gradient_violations = 0;
  std::size_t hessian_violations = 0;
  std::size_t lipschitz_violations = 0;
  double worst_gradient_slack = 0.0;  ///< min over samples of (bound − |∇Φ|)
  double worst_hessian_slack = 0.0;
  double l1_gradient = 0.0;
  double l1_gradient_bound = 0.0;
  double l1_hessian = 0.0;
  double l1_hessian_bound = 0.0;
  double lipschitz_empirical = 0.0;  ///< max |Φ(a) − Φ(b)|/|a − b| over consecutive samples
  double lipschitz_bound = 0.0;
  double gradient_lipschitz_empirical = 0.0;
  double gradient_lipschitz_bound = 0.0;

  std::size_t violations() const;
  bool ok() const { return violations() == 0; }
};

/// Checks the pointwise derivative bounds at `samples`, the L¹ bounds by
/// radial quadrature, and the Lipschitz bounds along consecutive sample pairs.
KernelBoundReport kernel_bound_check(const Kernel& k, const std::vector<Vec>& samples);

/// ∫_{ℝⁿ} f(|x|) dx = σ_{n−1} ∫₀¹ f(r) r^{n−1} dr for f supported in [0, 1].
/// Adaptive Gauss–Kronrod on pieces split at ½ and at multiples of `scale`.
double radial_integral(int n, const std::function<double(double)>& f, double scale,
                       double tol = 1e-12);

}  // namespace vflow
