#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vflow/curvature.hpp"
#include "vflow/kernel.hpp"
#include "vflow/metric.hpp"
#include "vflow/varifold.hpp"

namespace vflow {

/// 0 = t₀ < t₁ < … < t_m = T.
class Subdivision {
 public:
  Subdivision() = default;
  explicit Subdivision(std::vector<double> times);

  static Subdivision uniform(double horizon, int steps);
  /// Step horizon·2^{−j}.
  static Subdivision dyadic(double horizon, int level);

  const std::vector<double>& times() const { return times_; }
  std::size_t steps() const { return times_.empty() ? 0 : times_.size() - 1; }
  double horizon() const { return times_.empty() ? 0.0 : times_.back(); }
  double max_step() const;

  /// Index i with |tᵢ − t| ≤ tol, if any.
  std::optional<std::size_t> index_of(double t, double tol = 1e-12) const;

 private:
  std::vector<double> times_;
};

enum class StepMode { Practical, StrictPaper };

std::string to_string(StepMode mode);
StepMode parse_step_mode(const std::string& name);

struct StepOptions {
  /// Diffeomorphism gate τ·maxⱼ‖Dh(xⱼ)‖ ≤ eta.
  double eta = 0.5;
  StepMode mode = StepMode::Practical;
  /// Constant in the strict gate c₃·τ ≤ (M + 1)^{−3} ε⁸.
  double c3 = 1.0;
  bool compute_dissipation = true;
};

struct StepDiagnostics {
  std::size_t index = 0;
  double t = 0.0;    ///< start of the step
  double tau = 0.0;
  double mass_before = 0.0;
  double mass_after = 0.0;
  double dissipation = 0.0;
  double first_variation = 0.0;  ///< δV(h_ε)
  double certificate = 0.0;      ///< τ·maxⱼ‖Dh(xⱼ)‖
  double h_sup = 0.0;
  double dh_sup = 0.0;
  double jacobian_min = 1.0;
  double jacobian_max = 1.0;
  /// mass_after ≤ mass_before + τ.
  bool mass_bound_ok = true;
  std::string gate;
};

struct StepResult {
  Varifold next;
  StepDiagnostics diagnostics;
  CurvatureField field;
};

/// One step V ↦ (id + τ h_ε(·, V))_# V. Throws CertificateViolation (state
/// untouched) when the active gate fails.
StepResult step(const Varifold& v, const Kernel& k, double tau, const QuadratureSpec& q,
                const StepOptions& options = {});

struct FlowConfig {
  double eps = 0.05;
  Subdivision subdivision = Subdivision::uniform(0.2, 100);
  QuadratureSpec quadrature;
  StepOptions step;
  /// On a certificate failure, split the step in halves up to this many times.
  bool retry_halving = false;
  int max_halvings = 6;
  /// Also evaluate h_ε at the final snapshot (used for per-atom output).
  bool final_field = true;

  void validate() const;
};

struct FailureRecord {
  std::size_t step = 0;
  double t = 0.0;
  double tau = 0.0;
  std::string reason;
  double value = 0.0;
  double limit = 0.0;
};

enum class Extension { LinearInterpolation, PiecewiseConstant };

/// Snapshots V(tᵢ) with the velocity field used on each step.
struct Trajectory {
  int d = 0;
  int n = 0;
  double eps = 0.0;
  std::vector<double> times;
  std::vector<Varifold> snapshots;
  /// fields[i] is h_ε(·, V(tᵢ)) for i < snapshots.size() − 1, and at the
  /// final snapshot when it was computed.
  std::vector<SampledMap> fields;
  std::vector<StepDiagnostics> diagnostics;
  std::optional<FailureRecord> failure;
  std::vector<std::string> warnings;

  bool complete() const { return !failure.has_value(); }
  std::size_t mass_violations() const;

  /// V(t) by the linear-interpolation push (default) or the last snapshot at
  /// or before t.
  Varifold sample_at(double t, Extension ext = Extension::LinearInterpolation) const;
};

using StepObserver = std::function<void(const StepDiagnostics&)>;

/// Iterates step over the subdivision; a failed gate ends the run with a
/// failure record and the partial trajectory.
Trajectory evolve(const Varifold& v0, const FlowConfig& config, const StepObserver& observer = {});

/// Space-time test function φ(x, t).
class TestFunction {
 public:
  virtual ~TestFunction() = default;
  virtual double value(const Vec& x, double t) const = 0;
  virtual Vec gradient(const Vec& x, double t) const = 0;
  virtual double time_derivative(const Vec& x, double t) const = 0;
};

class ConstantTest final : public TestFunction {
 public:
  explicit ConstantTest(double c = 1.0) : c_(c) {}
  double value(const Vec&, double) const override { return c_; }
  Vec gradient(const Vec& x, double) const override { return Vec::Zero(x.size()); }
  double time_derivative(const Vec&, double) const override { return 0.0; }

 private:
  double c_;
};

/// A·exp(−|x − c(t)|²/2σ²) with c(t) = c + t·velocity.
class GaussianBump final : public TestFunction {
 public:
  GaussianBump(Vec center, double width, double amplitude = 1.0, Vec velocity = {});
  double value(const Vec& x, double t) const override;
  Vec gradient(const Vec& x, double t) const override;
  double time_derivative(const Vec& x, double t) const override;

 private:
  Vec center_;
  double width_;
  double amplitude_;
  Vec velocity_;
};

/// (1 − |x − c|²/R²)³ on B_R(c), 0 outside.
class PolynomialCutoff final : public TestFunction {
 public:
  PolynomialCutoff(Vec center, double radius);
  double value(const Vec& x, double t) const override;
  Vec gradient(const Vec& x, double t) const override;
  double time_derivative(const Vec&, double) const override { return 0.0; }

 private:
  Vec center_;
  double radius_;
};

/// ‖V‖(φ(·, t)).
double mass_against(const Varifold& v, const TestFunction& phi, double t);

/// |‖V(b)‖(φ_b) − ‖V(a)‖(φ_a) − Σ τ_ℓ [δ(V_ℓ, φ(t_ℓ))(h_ℓ) + ‖V_ℓ‖(∂_tφ(t_ℓ))]|
/// with the sum over the steps between a and b.
double brakke_residual(const Trajectory& traj, const TestFunction& phi, double a, double b);

struct RefineRow {
  int level = 0;
  double step = 0.0;
  double distance = 0.0;  ///< Δ(V_j(T), V_{j+1}(T))
  std::optional<double> ratio;
};

/// Dyadic subdivisions of [0, T] for levels j₁..j₂ + 1; one row per j ≤ j₂.
std::vector<RefineRow> refine_study(const Varifold& v0, const FlowConfig& base, double horizon,
                                    int first_level, int last_level);

/// Δ between the linear-interpolation and piecewise-constant extensions at t.
double interp_vs_pc_gap(const Trajectory& traj, double t);
double interp_vs_pc_gap(const Varifold& v0, const FlowConfig& config, double t);

}  // namespace vflow
