#include "vflow/kernel.hpp"

#include <algorithm>
#include <limits>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "vflow/errors.hpp"

namespace vflow {

CutoffValues cutoff(double r) {
  if (r <= 0.5) {
    return {1.0, 0.0, 0.0};
  }
  if (r >= 1.0) {
    return {0.0, 0.0, 0.0};
  }
  const double s = 2.0 * r - 1.0;
  return {1.0 - s * s * (3.0 - 2.0 * s), -12.0 * s * (1.0 - s), -24.0 * (1.0 - 2.0 * s)};
}

namespace {

constexpr double kNormalizationTol = 1e-10;

double sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

double gauss_hat(int n, double eps, double r) {
  return std::pow(2.0 * std::numbers::pi * eps * eps, -0.5 * n) * std::exp(-0.5 * r * r / (eps * eps));
}

// The L1 integrands have kinks, so the adaptive rule cannot reach 1e-12.
constexpr double kL1Tol = 1e-6;

struct Piece {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
};

Piece integrate_piece(const std::function<double(double)>& g, double a, double b, double tol) {
  Piece p;
  p.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 20, tol, &p.error,
                                                                          &p.l1);
  return p;
}

// Accepts the summed pieces when the combined error is within tol of the combined magnitude.
double checked_sum(const std::vector<Piece>& pieces, double tol, double extra_magnitude = 0.0) {
  double value = 0.0;
  double error = 0.0;
  double l1 = extra_magnitude;
  for (const Piece& p : pieces) {
    value += p.value;
    error += p.error;
    l1 += p.l1;
  }
  if (!(error <= tol * l1 + std::numeric_limits<double>::min())) {
    std::ostringstream os;
    os << "radial quadrature did not converge (error " << error << ", magnitude " << l1 << ")";
    throw QuadratureNonConvergence(os.str());
  }
  return value;
}

double compute_normalization(int n, double eps) {
  // Inside B_½ the cutoff is 1 and the Gaussian mass is a χ² probability.
  const double inner = boost::math::gamma_p(0.5 * n, 1.0 / (8.0 * eps * eps));
  const double sigma = sphere_area(n);
  const auto outer_integrand = [&](double r) {
    return sigma * cutoff(r).value * gauss_hat(n, eps, r) * std::pow(r, n - 1);
  };
  const double outer = checked_sum({integrate_piece(outer_integrand, 0.5, 1.0, kNormalizationTol * 1e-2)},
                                   kNormalizationTol * 1e-2, inner);
  return 1.0 / (inner + outer);
}

// sup over ε ∈ (0, 1) of c(ε)·ε^{−2−n}(2π)^{−n/2}exp(−1/8ε²), without the cutoff factor.
double c0_supremum(int n) {
  const auto objective = [n](double log_eps) {
    const double eps = std::exp(log_eps);
    return normalization(n, eps) * std::pow(eps, -2.0 - n) * std::pow(2.0 * std::numbers::pi, -0.5 * n) *
           std::exp(-1.0 / (8.0 * eps * eps));
  };
  const double lo = std::log(0.02);
  const double hi = std::log(1.0 - 1e-9);
  constexpr int kGrid = 400;
  int best = 0;
  double best_value = -1.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double v = objective(lo + (hi - lo) * i / kGrid);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / kGrid;
  double b = lo + (hi - lo) * std::min(kGrid, best + 1) / kGrid;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double x1 = b - phi * (b - a);
    const double x2 = a + phi * (b - a);
    if (objective(x1) > objective(x2)) {
      b = x2;
    } else {
      a = x1;
    }
  }
  return std::max(best_value, objective(0.5 * (a + b)));
}

}  // namespace

double radial_integral(int n, const std::function<double(double)>& f, double scale, double tol) {
  const double sigma = sphere_area(n);
  const auto integrand = [&](double r) { return sigma * f(r) * std::pow(r, n - 1); };
  std::vector<double> cuts{0.0};
  for (double m : {1.0, 3.0, 6.0, 10.0}) {
    if (m * scale < 0.5) {
      cuts.push_back(m * scale);
    }
  }
  // The cutoff region is split further so kinks from |·| integrands stay local.
  for (double r : {0.5, 0.625, 0.75, 0.875, 1.0}) {
    cuts.push_back(r);
  }
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    pieces.push_back(integrate_piece(integrand, cuts[i], cuts[i + 1], tol));
  }
  return checked_sum(pieces, tol);
}

double normalization(int n, double eps) {
  if (n < 1) {
    throw InvalidArgument("kernel: ambient dimension must be positive");
  }
  if (!(eps > 0.0 && eps < 1.0)) {
    throw InvalidArgument("kernel: eps must lie in (0, 1)");
  }
  static std::mutex mutex;
  static std::map<std::pair<int, double>, double> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find({n, eps}); it != cache.end()) {
      return it->second;
    }
  }
  const double c = compute_normalization(n, eps);
  std::lock_guard lock(mutex);
  cache.emplace(std::pair{n, eps}, c);
  return c;
}

const KernelConstants& kernel_constants(int n) {
  if (n < 1) {
    throw InvalidArgument("kernel: ambient dimension must be positive");
  }
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<KernelConstants>> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) {
      return *it->second;
    }
  }
  auto k = std::make_unique<KernelConstants>();
  k->n = n;
  k->sphere_area = sphere_area(n);
  k->ball_volume = k->sphere_area / n;
  k->c_upper = 1.0 / boost::math::gamma_p(0.5 * n, 0.125);
  const double sup = c0_supremum(n);
  k->c0 = kCutoffHessianBound * sup;
  k->c0_published = kPublishedCutoffHessianBound * sup;
  k->c1 = 2.0 * (1.0 + k->ball_volume * k->c0) * (1.0 + k->c0);
  k->c1_published = 2.0 * (1.0 + k->ball_volume * k->c0_published) * (1.0 + k->c0_published);
  std::lock_guard lock(mutex);
  auto [it, inserted] = cache.emplace(n, std::move(k));
  return *it->second;
}

Kernel::Kernel(int n, double eps)
    : n_(n),
      eps_(eps),
      c_eps_(normalization(n, eps)),
      peak_(c_eps_ * std::pow(2.0 * std::numbers::pi * eps * eps, -0.5 * n)),
      inv_eps2_(1.0 / (eps * eps)),
      half_inv_eps2_(0.5 / (eps * eps)),
      constants_(&kernel_constants(n)) {}

void Kernel::profile(double r, double& value, double& d1, double& d2) const {
  value = d1 = d2 = 0.0;
  if (r >= 1.0) {
    return;
  }
  const double g = peak_ * std::exp(-r * r * half_inv_eps2_);
  const double g1 = -r * inv_eps2_ * g;
  const double g2 = (r * r * inv_eps2_ * inv_eps2_ - inv_eps2_) * g;
  const CutoffValues psi = cutoff(r);
  value = psi.value * g;
  d1 = psi.first * g + psi.value * g1;
  d2 = psi.second * g + 2.0 * psi.first * g1 + psi.value * g2;
}

void Kernel::radial_hessian(double r2, double& value, double& grad_factor,
                            double& hess_coef) const {
  hess_coef = 0.0;
  radial(r2, value, grad_factor);
  if (r2 >= 1.0) {
    return;
  }
  if (r2 <= 0.25) {
    hess_coef = value * inv_eps2_ * inv_eps2_;
    return;
  }
  const double r = std::sqrt(r2);
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  profile(r, v, d1, d2);
  hess_coef = (d2 - grad_factor) / r2;
}

double Kernel::value(const Vec& x) const {
  if (x.size() != n_) {
    throw DimensionMismatch("kernel: point has the wrong dimension");
  }
  double v = 0.0;
  double g = 0.0;
  radial(x.squaredNorm(), v, g);
  return v;
}

KernelEval Kernel::eval(const Vec& x) const {
  if (x.size() != n_) {
    throw DimensionMismatch("kernel: point has the wrong dimension");
  }
  KernelEval out;
  double g = 0.0;
  double h = 0.0;
  radial_hessian(x.squaredNorm(), out.value, g, h);
  out.gradient = g * x;
  out.hessian = g * Mat::Identity(n_, n_) + h * x * x.transpose();
  return out;
}

std::size_t KernelBoundReport::violations() const {
  std::size_t total = gradient_violations + hessian_violations + lipschitz_violations;
  if (!(l1_gradient <= l1_gradient_bound)) {
    ++total;
  }
  if (!(l1_hessian <= l1_hessian_bound)) {
    ++total;
  }
  if (!(std::abs(integral - 1.0) <= 1e-8)) {
    ++total;
  }
  return total;
}

namespace {

// Relative slack allowance for rounding in the pointwise comparisons.
bool within(double lhs, double rhs) { return lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs)); }

}  // namespace

KernelBoundReport kernel_bound_check(const Kernel& k, const std::vector<Vec>& samples) {
  KernelBoundReport rep;
  rep.n = k.ambient();
  rep.eps = k.eps();
  rep.c_eps = k.c_eps();
  rep.constants = k.constants();
  rep.samples = samples.size();

  const double eps = k.eps();
  const double e2 = 1.0 / (eps * eps);
  const double e4 = e2 * e2;
  const double c0 = rep.constants.c0;
  rep.worst_gradient_slack = std::numeric_limits<double>::infinity();
  rep.worst_hessian_slack = std::numeric_limits<double>::infinity();

  for (const Vec& x : samples) {
    const KernelEval ev = k.eval(x);
    const double chi = x.squaredNorm() < 1.0 ? 1.0 : 0.0;
    const double grad_bound = e2 * ev.value + c0 * chi;
    const double hess_bound = 2.0 * e4 * ev.value + 2.0 * c0 * chi;
    const double grad = ev.gradient.norm();
    const double hess = operator_norm(ev.hessian);
    rep.worst_gradient_slack = std::min(rep.worst_gradient_slack, grad_bound - grad);
    rep.worst_hessian_slack = std::min(rep.worst_hessian_slack, hess_bound - hess);
    if (!within(grad, grad_bound)) {
      ++rep.gradient_violations;
    }
    if (!within(hess, hess_bound)) {
      ++rep.hessian_violations;
    }
  }

  const double lip_scale = rep.constants.c_upper * std::pow(2.0 * std::numbers::pi, -0.5 * rep.n) + c0;
  rep.lipschitz_bound = lip_scale * std::pow(eps, -rep.n - 2.0);
  rep.gradient_lipschitz_bound = 2.0 * lip_scale * std::pow(eps, -rep.n - 4.0);
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double dist = (samples[i] - samples[i + 1]).norm();
    if (dist <= 0.0) {
      continue;
    }
    const KernelEval a = k.eval(samples[i]);
    const KernelEval b = k.eval(samples[i + 1]);
    const double lip = std::abs(a.value - b.value) / dist;
    const double glip = (a.gradient - b.gradient).norm() / dist;
    rep.lipschitz_empirical = std::max(rep.lipschitz_empirical, lip);
    rep.gradient_lipschitz_empirical = std::max(rep.gradient_lipschitz_empirical, glip);
    if (!within(lip, rep.lipschitz_bound) || !within(glip, rep.gradient_lipschitz_bound)) {
      ++rep.lipschitz_violations;
    }
  }
  if (samples.empty()) {
    rep.worst_gradient_slack = rep.worst_hessian_slack = 0.0;
  }

  const int n = rep.n;
  rep.integral = radial_integral(
      n,
      [&](double r) {
        double v, d1, d2;
        k.profile(r, v, d1, d2);
        return v;
      },
      eps);
  rep.l1_gradient = radial_integral(
      n,
      [&](double r) {
        double v, d1, d2;
        k.profile(r, v, d1, d2);
        return std::abs(d1);
      },
      eps, kL1Tol);
  rep.l1_hessian = radial_integral(
      n,
      [&](double r) {
        double v, d1, d2;
        k.profile(r, v, d1, d2);
        // Eigenvalues of the Hessian are Φ″ (radial) and Φ′/r (tangential).
        const double tangential = n > 1 ? (r > 0.0 ? std::abs(d1 / r) : std::abs(d2)) : 0.0;
        return std::max(std::abs(d2), tangential);
      },
      eps, kL1Tol);
  const double ball = rep.constants.ball_volume;
  rep.l1_gradient_bound = (1.0 + ball * c0) * e2;
  rep.l1_hessian_bound = 2.0 * (1.0 + ball * c0) * e4;
  return rep;
}

}  // namespace vflow
