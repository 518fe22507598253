#include "vflow/varifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vflow/errors.hpp"

namespace vflow {

Varifold::Varifold(int d, int n) : d_(d), n_(n) {
  if (d < 1 || d > n) {
    throw DimensionMismatch("varifold needs 1 <= d <= n");
  }
}

Varifold::Varifold(int d, int n, std::vector<Atom> atoms) : Varifold(d, n) {
  for (const Atom& a : atoms) {
    validate(a);
  }
  atoms_ = std::move(atoms);
}

void Varifold::validate(const Atom& atom) const {
  if (atom.position.size() != n_ || atom.plane.ambient() != n_ || atom.plane.dim() != d_) {
    throw DimensionMismatch("atom dimensions do not match the varifold's (d, n)");
  }
  if (!(atom.mass >= 0.0) || !std::isfinite(atom.mass)) {
    throw InvalidArgument("atom mass must be finite and nonnegative");
  }
  if (!atom.position.allFinite()) {
    throw InvalidArgument("atom position must be finite");
  }
}

void Varifold::add(Atom atom) {
  validate(atom);
  atoms_.push_back(std::move(atom));
}

double Varifold::total_mass() const {
  double sum = 0.0;
  for (const Atom& a : atoms_) {
    sum += a.mass;
  }
  return sum;
}

SampledMap SampledMap::zero(const Varifold& v) {
  SampledMap map;
  map.values.assign(v.size(), Vec::Zero(v.ambient()));
  map.differentials.assign(v.size(), Mat::Zero(v.ambient(), v.ambient()));
  return map;
}

namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << what << ": expected " << want << " samples, got " << got;
    throw DimensionMismatch(os.str());
  }
}

// tr(P·A) without forming the product.
double trace_of_product(const Mat& p, const Mat& a) {
  return p.cwiseProduct(a.transpose()).sum();
}

}  // namespace

double first_variation(const Varifold& v, std::span<const Mat> jacobians) {
  require_length(jacobians.size(), v.size(), "first_variation");
  double sum = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    sum += v[j].mass * trace_of_product(v[j].plane.projector(), jacobians[j]);
  }
  return sum;
}

double weighted_first_variation(const Varifold& v, std::span<const double> phi,
                                std::span<const Vec> grad_phi, std::span<const Vec> field,
                                std::span<const Mat> jacobians) {
  require_length(phi.size(), v.size(), "weighted_first_variation (phi)");
  require_length(grad_phi.size(), v.size(), "weighted_first_variation (grad phi)");
  require_length(field.size(), v.size(), "weighted_first_variation (X)");
  require_length(jacobians.size(), v.size(), "weighted_first_variation (DX)");
  double sum = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double div = trace_of_product(v[j].plane.projector(), jacobians[j]);
    sum += v[j].mass * (phi[j] * div + grad_phi[j].dot(field[j]));
  }
  return sum;
}

Varifold push_forward(const Varifold& v, const SampledMap& f, double tau,
                      const PushForwardOptions& options, PushForwardReport* report) {
  require_length(f.values.size(), v.size(), "push_forward (values)");
  require_length(f.differentials.size(), v.size(), "push_forward (differentials)");
  if (!(tau >= 0.0)) {
    throw InvalidArgument("push_forward: tau must be nonnegative");
  }
  PushForwardReport local;
  if (tau == 0.0) {
    if (report != nullptr) {
      *report = local;
    }
    return v;
  }

  const int n = v.ambient();
  double sup_diff = 0.0;
  for (const Mat& diff : f.differentials) {
    if (diff.rows() != n || diff.cols() != n) {
      throw DimensionMismatch("push_forward: differential must be n x n");
    }
    sup_diff = std::max(sup_diff, operator_norm(diff));
  }
  local.certificate = tau * sup_diff;
  if (options.enforce_certificate && !(local.certificate <= options.eta)) {
    std::ostringstream os;
    os << "diffeomorphism certificate violated: tau*max||Dh|| = " << local.certificate
       << " > eta = " << options.eta;
    throw CertificateViolation(os.str(), local.certificate, options.eta);
  }

  const Mat identity = Mat::Identity(n, n);
  std::vector<Atom> atoms;
  atoms.reserve(v.size());
  local.jacobian_min = std::numeric_limits<double>::infinity();
  local.jacobian_max = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < v.size(); ++j) {
    const Atom& a = v[j];
    if (f.values[j].size() != n) {
      throw DimensionMismatch("push_forward: value must live in R^n");
    }
    TangentialJacobian tj;
    try {
      tj = tangential_jacobian(identity + tau * f.differentials[j], a.plane);
    } catch (const DegeneratePushForward& e) {
      throw DegeneratePushForward(e.gram_determinant(), j);
    }
    local.jacobian_min = std::min(local.jacobian_min, tj.jacobian);
    local.jacobian_max = std::max(local.jacobian_max, tj.jacobian);
    atoms.push_back({a.position + tau * f.values[j], std::move(tj.image), a.mass * tj.jacobian});
  }
  if (atoms.empty()) {
    local.jacobian_min = local.jacobian_max = 1.0;
  }
  if (report != nullptr) {
    *report = local;
  }
  return Varifold(v.dim(), n, std::move(atoms));
}

SampledMap compose(const SampledMap& f, const SampledMap& g) {
  require_length(f.size(), g.size(), "compose");
  SampledMap out;
  out.values.reserve(g.size());
  out.differentials.reserve(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.values.push_back(g.values[j] + f.values[j]);
    // (I + F)(I + G) − I
    out.differentials.push_back(f.differentials[j] + g.differentials[j] +
                                f.differentials[j] * g.differentials[j]);
  }
  return out;
}

double compose_check(const Varifold& v, const SampledMap& f, const SampledMap& g,
                     const PushForwardOptions& options) {
  const Varifold gv = push_forward(v, g, 1.0, options);
  const Varifold fgv = push_forward(gv, f, 1.0, options);
  PushForwardOptions composite = options;
  composite.enforce_certificate = false;
  const Varifold direct = push_forward(v, compose(f, g), 1.0, composite);
  double worst = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    worst = std::max(worst, (fgv[j].position - direct[j].position).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, std::abs(fgv[j].mass - direct[j].mass));
    worst = std::max(worst, plane_distance(fgv[j].plane, direct[j].plane));
  }
  return worst;
}

}  // namespace vflow
