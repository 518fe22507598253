#include "vflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "vflow/errors.hpp"

namespace vflow {

Subdivision::Subdivision(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 2) {
    throw InvalidArgument("subdivision needs at least two times");
  }
  if (times_.front() != 0.0) {
    throw InvalidArgument("subdivision must start at t = 0");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i])) {
      throw InvalidArgument("subdivision times must be finite and strictly increasing");
    }
  }
}

Subdivision Subdivision::uniform(double horizon, int steps) {
  if (!(horizon > 0.0) || steps < 1) {
    throw InvalidArgument("uniform subdivision needs T > 0 and at least one step");
  }
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    t[i] = horizon * i / steps;
  }
  t.back() = horizon;
  return Subdivision(std::move(t));
}

Subdivision Subdivision::dyadic(double horizon, int level) {
  if (level < 0 || level > 30) {
    throw InvalidArgument("dyadic level must lie in [0, 30]");
  }
  return uniform(horizon, 1 << level);
}

double Subdivision::max_step() const {
  double best = 0.0;
  for (std::size_t i = 1; i < times_.size(); ++i) {
    best = std::max(best, times_[i] - times_[i - 1]);
  }
  return best;
}

std::optional<std::size_t> Subdivision::index_of(double t, double tol) const {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (std::abs(times_[i] - t) <= tol) {
      return i;
    }
  }
  return std::nullopt;
}

std::string to_string(StepMode mode) {
  return mode == StepMode::Practical ? "practical" : "strict-paper";
}

StepMode parse_step_mode(const std::string& name) {
  if (name == "practical") {
    return StepMode::Practical;
  }
  if (name == "strict-paper") {
    return StepMode::StrictPaper;
  }
  throw InvalidArgument("unknown step mode '" + name + "'");
}

StepResult step(const Varifold& v, const Kernel& k, double tau, const QuadratureSpec& q,
                const StepOptions& options) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("step: tau must be positive");
  }
  if (!(options.eta > 0.0 && options.eta < 1.0)) {
    throw InvalidArgument("step: eta must lie in (0, 1)");
  }
  StepDiagnostics diag;
  diag.tau = tau;
  diag.mass_before = v.total_mass();
  diag.gate = to_string(options.mode);

  if (options.mode == StepMode::StrictPaper) {
    const double limit = std::pow(diag.mass_before + 1.0, -3.0) * std::pow(k.eps(), 8.0);
    const double value = options.c3 * tau;
    if (!(value <= limit)) {
      std::ostringstream os;
      os << "step-size condition violated: c3*tau = " << value << " > (M+1)^-3 eps^8 = " << limit;
      throw CertificateViolation(os.str(), value, limit);
    }
  }

  CurvatureField field = curvature_field(v, k, q);
  diag.h_sup = field.h_sup;
  diag.dh_sup = field.dh_sup;
  diag.first_variation = first_variation(v, field.dh);

  PushForwardOptions push;
  push.eta = options.eta;
  PushForwardReport report;
  Varifold next = push_forward(v, field.as_map(), tau, push, &report);
  diag.certificate = report.certificate;
  diag.jacobian_min = report.jacobian_min;
  diag.jacobian_max = report.jacobian_max;
  diag.mass_after = next.total_mass();
  diag.mass_bound_ok = diag.mass_after <= diag.mass_before + tau;
  if (options.compute_dissipation) {
    diag.dissipation = dissipation(v, k, q);
  }
  return {std::move(next), diag, std::move(field)};
}

void FlowConfig::validate() const {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw InvalidArgument("flow: eps must lie in (0, 1)");
  }
  if (!(step.eta > 0.0 && step.eta < 1.0)) {
    throw InvalidArgument("flow: eta must lie in (0, 1)");
  }
  if (!(step.c3 > 0.0)) {
    throw InvalidArgument("flow: c3 must be positive");
  }
  if (subdivision.steps() == 0) {
    throw InvalidArgument("flow: the subdivision has no steps");
  }
  if (max_halvings < 0) {
    throw InvalidArgument("flow: max_halvings must be nonnegative");
  }
  quadrature.validate();
}

std::size_t Trajectory::mass_violations() const {
  return static_cast<std::size_t>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                                [](const StepDiagnostics& s) { return !s.mass_bound_ok; }));
}

Varifold Trajectory::sample_at(double t, Extension ext) const {
  if (snapshots.empty()) {
    throw InvalidArgument("sample_at: empty trajectory");
  }
  constexpr double kTol = 1e-12;
  if (t < -kTol || t > times.back() + kTol) {
    std::ostringstream os;
    os << "sample_at: t = " << t << " outside [0, " << times.back() << "]";
    throw InvalidArgument(os.str());
  }
  std::size_t i = 0;
  while (i + 1 < times.size() && times[i + 1] <= t + kTol) {
    ++i;
  }
  if (std::abs(times[i] - t) <= kTol || ext == Extension::PiecewiseConstant) {
    return snapshots[i];
  }
  PushForwardOptions push;
  push.enforce_certificate = false;
  return push_forward(snapshots[i], fields[i], t - times[i], push);
}

Trajectory evolve(const Varifold& v0, const FlowConfig& config, const StepObserver& observer) {
  config.validate();
  if (v0.empty()) {
    throw InvalidArgument("evolve: the initial varifold has no atoms");
  }
  const Kernel kernel(v0.ambient(), config.eps);
  Trajectory traj;
  traj.d = v0.dim();
  traj.n = v0.ambient();
  traj.eps = config.eps;
  traj.times.push_back(0.0);
  traj.snapshots.push_back(v0);
  if (config.subdivision.horizon() > 1.0) {
    traj.warnings.push_back("horizon T > 1 lies outside the unit time interval of the theory");
  }

  struct Interval {
    double a;
    double b;
    int depth;
  };
  const auto& t = config.subdivision.times();
  std::deque<Interval> pending;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    pending.push_back({t[i], t[i + 1], 0});
  }
  while (!pending.empty()) {
    const Interval iv = pending.front();
    pending.pop_front();
    const double tau = iv.b - iv.a;
    try {
      StepResult r = step(traj.snapshots.back(), kernel, tau, config.quadrature, config.step);
      r.diagnostics.index = traj.diagnostics.size();
      r.diagnostics.t = iv.a;
      if (observer) {
        observer(r.diagnostics);
      }
      traj.diagnostics.push_back(r.diagnostics);
      traj.fields.push_back(r.field.as_map());
      traj.snapshots.push_back(std::move(r.next));
      traj.times.push_back(iv.b);
    } catch (const CertificateViolation& e) {
      if (config.retry_halving && iv.depth < config.max_halvings) {
        const double mid = 0.5 * (iv.a + iv.b);
        pending.push_front({mid, iv.b, iv.depth + 1});
        pending.push_front({iv.a, mid, iv.depth + 1});
        std::ostringstream os;
        os << "step at t = " << iv.a << " halved to tau = " << 0.5 * tau;
        traj.warnings.push_back(os.str());
        continue;
      }
      traj.failure = FailureRecord{traj.diagnostics.size(), iv.a, tau, e.what(), e.value(), e.limit()};
      break;
    } catch (const DegeneratePushForward& e) {
      traj.failure = FailureRecord{traj.diagnostics.size(), iv.a, tau, e.what(), e.gram_determinant(),
                                   kDegenerateGram};
      break;
    }
  }
  if (config.final_field && traj.complete()) {
    traj.fields.push_back(curvature_field(traj.snapshots.back(), kernel, config.quadrature).as_map());
  }
  return traj;
}

GaussianBump::GaussianBump(Vec center, double width, double amplitude, Vec velocity)
    : center_(std::move(center)), width_(width), amplitude_(amplitude), velocity_(std::move(velocity)) {
  if (!(width_ > 0.0)) {
    throw InvalidArgument("GaussianBump: width must be positive");
  }
  if (velocity_.size() == 0) {
    velocity_ = Vec::Zero(center_.size());
  }
  if (velocity_.size() != center_.size()) {
    throw DimensionMismatch("GaussianBump: velocity and center dimensions differ");
  }
}

double GaussianBump::value(const Vec& x, double t) const {
  const Vec diff = x - center_ - t * velocity_;
  return amplitude_ * std::exp(-0.5 * diff.squaredNorm() / (width_ * width_));
}

Vec GaussianBump::gradient(const Vec& x, double t) const {
  const Vec diff = x - center_ - t * velocity_;
  return (-value(x, t) / (width_ * width_)) * diff;
}

double GaussianBump::time_derivative(const Vec& x, double t) const {
  const Vec diff = x - center_ - t * velocity_;
  return value(x, t) * diff.dot(velocity_) / (width_ * width_);
}

PolynomialCutoff::PolynomialCutoff(Vec center, double radius) : center_(std::move(center)), radius_(radius) {
  if (!(radius_ > 0.0)) {
    throw InvalidArgument("PolynomialCutoff: radius must be positive");
  }
}

double PolynomialCutoff::value(const Vec& x, double) const {
  const double u = 1.0 - (x - center_).squaredNorm() / (radius_ * radius_);
  return u > 0.0 ? u * u * u : 0.0;
}

Vec PolynomialCutoff::gradient(const Vec& x, double) const {
  const Vec diff = x - center_;
  const double u = 1.0 - diff.squaredNorm() / (radius_ * radius_);
  if (u <= 0.0) {
    return Vec::Zero(x.size());
  }
  return (-6.0 * u * u / (radius_ * radius_)) * diff;
}

double mass_against(const Varifold& v, const TestFunction& phi, double t) {
  double sum = 0.0;
  for (const Atom& a : v.atoms()) {
    sum += a.mass * phi.value(a.position, t);
  }
  return sum;
}

double brakke_residual(const Trajectory& traj, const TestFunction& phi, double a, double b) {
  const auto find = [&](double t) {
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      if (std::abs(traj.times[i] - t) <= 1e-12) {
        return i;
      }
    }
    std::ostringstream os;
    os << "brakke_residual: t = " << t << " is not a subdivision time of the trajectory";
    throw InvalidArgument(os.str());
  };
  const std::size_t ia = find(a);
  const std::size_t ib = find(b);
  if (ia > ib) {
    throw InvalidArgument("brakke_residual: requires a <= b");
  }
  const double lhs = mass_against(traj.snapshots[ib], phi, traj.times[ib]) -
                     mass_against(traj.snapshots[ia], phi, traj.times[ia]);
  double rhs = 0.0;
  for (std::size_t l = ia; l < ib; ++l) {
    const Varifold& v = traj.snapshots[l];
    const double tl = traj.times[l];
    const double tau = traj.times[l + 1] - tl;
    std::vector<double> values(v.size());
    std::vector<Vec> grads(v.size());
    double dt_term = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      values[j] = phi.value(v[j].position, tl);
      grads[j] = phi.gradient(v[j].position, tl);
      dt_term += v[j].mass * phi.time_derivative(v[j].position, tl);
    }
    const SampledMap& h = traj.fields[l];
    rhs += tau * (weighted_first_variation(v, values, grads, h.values, h.differentials) + dt_term);
  }
  return std::abs(lhs - rhs);
}

std::vector<RefineRow> refine_study(const Varifold& v0, const FlowConfig& base, double horizon,
                                    int first_level, int last_level) {
  if (first_level < 0 || last_level < first_level) {
    throw InvalidArgument("refine_study: needs 0 <= j1 <= j2");
  }
  std::vector<Varifold> finals;
  for (int j = first_level; j <= last_level + 1; ++j) {
    FlowConfig config = base;
    config.subdivision = Subdivision::dyadic(horizon, j);
    config.final_field = false;
    config.step.compute_dissipation = false;
    const Trajectory traj = evolve(v0, config);
    if (!traj.complete()) {
      std::ostringstream os;
      os << "refine_study: level " << j << " aborted at t = " << traj.failure->t << ": "
         << traj.failure->reason;
      throw CertificateViolation(os.str(), traj.failure->value, traj.failure->limit);
    }
    finals.push_back(traj.snapshots.back());
  }
  std::vector<RefineRow> rows;
  for (int j = first_level; j <= last_level; ++j) {
    const std::size_t i = static_cast<std::size_t>(j - first_level);
    RefineRow row;
    row.level = j;
    row.step = horizon / static_cast<double>(1 << j);
    row.distance = bl_distance(finals[i], finals[i + 1]);
    if (!rows.empty() && rows.back().distance > 0.0) {
      row.ratio = row.distance / rows.back().distance;
    }
    rows.push_back(row);
  }
  return rows;
}

double interp_vs_pc_gap(const Trajectory& traj, double t) {
  return bl_distance(traj.sample_at(t, Extension::LinearInterpolation),
                     traj.sample_at(t, Extension::PiecewiseConstant));
}

double interp_vs_pc_gap(const Varifold& v0, const FlowConfig& config, double t) {
  const Trajectory traj = evolve(v0, config);
  if (!traj.complete() && t > traj.times.back()) {
    throw CertificateViolation("interp_vs_pc_gap: the flow aborted before t: " + traj.failure->reason,
                               traj.failure->value, traj.failure->limit);
  }
  return interp_vs_pc_gap(traj, t);
}

}  // namespace vflow
