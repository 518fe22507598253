#pragma once

#include <span>
#include <vector>

#include "vflow/geometry.hpp"

namespace vflow {

/// One Dirac term m·δ_x ⊗ δ_S of a point-cloud varifold.
struct Atom {
  Vec position;
  Plane plane;
  double mass = 0.0;
};

/// A point-cloud d-varifold in ℝⁿ: V = Σ mⱼ δ_{xⱼ} ⊗ δ_{Sⱼ}.
class Varifold {
 public:
  Varifold(int d, int n);
  Varifold(int d, int n, std::vector<Atom> atoms);

  int dim() const { return d_; }
  int ambient() const { return n_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }

  /// Validates and appends one atom.
  void add(Atom atom);

  double total_mass() const;

 private:
  void validate(const Atom& atom) const;

  int d_;
  int n_;
  std::vector<Atom> atoms_;
};

inline double total_mass(const Varifold& v) { return v.total_mass(); }

/// A C¹ map sampled at the atoms of a varifold: f(xⱼ) = xⱼ + τ·values[j],
/// Df(xⱼ) = I + τ·differentials[j].
struct SampledMap {
  std::vector<Vec> values;
  std::vector<Mat> differentials;

  std::size_t size() const { return values.size(); }

  /// The zero displacement on `v`.
  static SampledMap zero(const Varifold& v);
};

/// δV(X) = Σⱼ mⱼ tr(P_{Sⱼ} DX(xⱼ)).
double first_variation(const Varifold& v, std::span<const Mat> jacobians);

/// δ(V, φ)(X) = Σⱼ mⱼ [φ(xⱼ) tr(P_{Sⱼ} DX(xⱼ)) + ∇φ(xⱼ)·X(xⱼ)].
double weighted_first_variation(const Varifold& v, std::span<const double> phi,
                                std::span<const Vec> grad_phi, std::span<const Vec> field,
                                std::span<const Mat> jacobians);

struct PushForwardOptions {
  /// The sampled diffeomorphism certificate τ·maxⱼ‖differentialⱼ‖ ≤ eta must hold.
  double eta = 0.5;
  bool enforce_certificate = true;
};

struct PushForwardReport {
  double certificate = 0.0;  ///< τ·maxⱼ‖differentialⱼ‖ (operator norm)
  double jacobian_min = 1.0;
  double jacobian_max = 1.0;
};

/// Atom-wise push-forward: x ↦ x + τ·value, S ↦ Df(S), m ↦ m·J_S f.
///
/// Throws CertificateViolation when the certificate fails (no partial result)
/// and DegeneratePushForward naming the first crushed atom.
Varifold push_forward(const Varifold& v, const SampledMap& f, double tau,
                      const PushForwardOptions& options = {},
                      PushForwardReport* report = nullptr);

/// Chain rule on samples (both maps taken with τ = 1): `g` sampled on the
/// atoms of V, `f` sampled on the atoms of g#V.
SampledMap compose(const SampledMap& f, const SampledMap& g);

/// Max over atoms of the position, mass and plane discrepancies between
/// f#(g#V) and (f∘g)#V.
double compose_check(const Varifold& v, const SampledMap& f, const SampledMap& g,
                     const PushForwardOptions& options = {});

}  // namespace vflow
