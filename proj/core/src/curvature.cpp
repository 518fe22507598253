#include "vflow/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

constexpr int kMaxAmbient = 16;
constexpr double kNeighbourRadiusFactor = 10.0;
constexpr std::size_t kMaxGridCells = 4'000'000;

// Flat copies of the atom data for the inner loops.
struct AtomTable {
  int n = 0;
  std::size_t count = 0;
  std::vector<double> x;  // count × n
  std::vector<double> p;  // count × n × n, row-major projectors
  std::vector<double> m;

  explicit AtomTable(const Varifold& v) : n(v.ambient()), count(v.size()) {
    x.resize(count * n);
    p.resize(count * n * n);
    m.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
      const Atom& a = v[j];
      for (int i = 0; i < n; ++i) {
        x[j * n + i] = a.position(i);
        for (int c = 0; c < n; ++c) {
          p[(j * n + i) * n + c] = a.plane.projector()(i, c);
        }
      }
      m[j] = a.mass;
    }
  }
};

// Uniform cell grid over the atom bounding box with cell size equal to the
// query radius; falls back to a full scan when the grid would be too large.
class NeighbourIndex {
 public:
  NeighbourIndex(const AtomTable& atoms, double radius) : n_(atoms.n), count_(atoms.count), cell_(radius) {
    if (count_ == 0 || n_ > 3) {
      return;
    }
    lo_.assign(n_, std::numeric_limits<double>::infinity());
    std::vector<double> hi(n_, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < count_; ++j) {
      for (int i = 0; i < n_; ++i) {
        lo_[i] = std::min(lo_[i], atoms.x[j * n_ + i]);
        hi[i] = std::max(hi[i], atoms.x[j * n_ + i]);
      }
    }
    dims_.resize(n_);
    strides_.resize(n_);
    std::size_t total = 1;
    for (int i = 0; i < n_; ++i) {
      const double cells = std::floor((hi[i] - lo_[i]) / cell_) + 1.0;
      if (cells > static_cast<double>(kMaxGridCells)) {
        return;
      }
      dims_[i] = static_cast<long>(cells);
      strides_[i] = static_cast<long>(total);
      total *= static_cast<std::size_t>(dims_[i]);
      if (total > kMaxGridCells) {
        return;
      }
    }
    std::vector<std::size_t> cell_of(count_);
    std::vector<std::size_t> counts(total + 1, 0);
    for (std::size_t j = 0; j < count_; ++j) {
      std::size_t id = 0;
      for (int i = 0; i < n_; ++i) {
        long c = static_cast<long>(std::floor((atoms.x[j * n_ + i] - lo_[i]) / cell_));
        c = std::clamp(c, 0L, dims_[i] - 1);
        id += static_cast<std::size_t>(c * strides_[i]);
      }
      cell_of[j] = id;
      ++counts[id + 1];
    }
    for (std::size_t c = 0; c < total; ++c) {
      counts[c + 1] += counts[c];
    }
    start_ = counts;
    order_.resize(count_);
    for (std::size_t j = 0; j < count_; ++j) {
      order_[counts[cell_of[j]]++] = j;
    }
    grid_ = true;
  }

  template <class F>
  void for_each(const double* z, F&& f) const {
    if (!grid_) {
      for (std::size_t j = 0; j < count_; ++j) {
        f(j);
      }
      return;
    }
    long base[3] = {0, 0, 0};
    for (int i = 0; i < n_; ++i) {
      base[i] = static_cast<long>(std::floor((z[i] - lo_[i]) / cell_));
      if (base[i] < -1 || base[i] > dims_[i]) {
        return;
      }
    }
    long lo[3] = {0, 0, 0};
    long hi[3] = {0, 0, 0};
    for (int i = 0; i < n_; ++i) {
      lo[i] = std::max(0L, base[i] - 1);
      hi[i] = std::min(dims_[i] - 1, base[i] + 1);
    }
    const long hi1 = n_ > 1 ? hi[1] : 0;
    const long hi2 = n_ > 2 ? hi[2] : 0;
    for (long c2 = lo[2]; c2 <= hi2; ++c2) {
      for (long c1 = lo[1]; c1 <= hi1; ++c1) {
        long row = 0;
        if (n_ > 1) {
          row += c1 * strides_[1];
        }
        if (n_ > 2) {
          row += c2 * strides_[2];
        }
        const auto first = static_cast<std::size_t>(row + lo[0]);
        const auto last = static_cast<std::size_t>(row + hi[0]);
        for (std::size_t k = start_[first]; k < start_[last + 1]; ++k) {
          f(order_[k]);
        }
      }
    }
  }

 private:
  int n_;
  std::size_t count_;
  double cell_;
  bool grid_ = false;
  std::vector<double> lo_;
  std::vector<long> dims_;
  std::vector<long> strides_;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> order_;
};

// Truncated neighbour sums for ‖V‖∗Φ_ε and δV∗Φ_ε at arbitrary points.
class ConvolutionEngine {
 public:
  ConvolutionEngine(const Varifold& v, const Kernel& k)
      : atoms_(v), kernel_(k), radius2_(std::pow(neighbour_radius(k.eps()), 2)),
        index_(atoms_, neighbour_radius(k.eps())) {}

  int ambient() const { return atoms_.n; }

  // cfv must hold n entries.
  void convolve(const double* z, double& cm, double* cfv) const {
    const int n = atoms_.n;
    cm = 0.0;
    std::fill(cfv, cfv + n, 0.0);
    index_.for_each(z, [&](std::size_t j) {
      const double* xj = &atoms_.x[j * n];
      double diff[kMaxAmbient];
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) {
        diff[i] = xj[i] - z[i];
        r2 += diff[i] * diff[i];
      }
      if (r2 >= radius2_) {
        return;
      }
      double value = 0.0;
      double g = 0.0;
      kernel_.radial(r2, value, g);
      if (value == 0.0 && g == 0.0) {
        return;
      }
      const double mj = atoms_.m[j];
      cm += mj * value;
      const double mg = mj * g;
      const double* pj = &atoms_.p[j * n * n];
      for (int a = 0; a < n; ++a) {
        double acc = 0.0;
        for (int b = 0; b < n; ++b) {
          acc += pj[a * n + b] * diff[b];
        }
        cfv[a] += mg * acc;
      }
    });
  }

  void h_tilde(const double* z, double* out) const {
    double cm = 0.0;
    convolve(z, cm, out);
    const double scale = -1.0 / (cm + kernel_.eps());
    for (int i = 0; i < atoms_.n; ++i) {
      out[i] *= scale;
    }
  }

  const AtomTable& atoms() const { return atoms_; }

 private:
  AtomTable atoms_;
  const Kernel& kernel_;
  double radius2_;
  NeighbourIndex index_;
};

void check_inputs(const Varifold& v, const Kernel& k) {
  if (v.ambient() != k.ambient()) {
    throw DimensionMismatch("kernel and varifold ambient dimensions differ");
  }
  if (v.ambient() > kMaxAmbient) {
    throw DimensionMismatch("curvature: ambient dimension above 16 is not supported");
  }
}

// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(q, 0.0);
  weights.assign(q, 0.0);
  for (int i = 0; i < (q + 1) / 2; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = t;
      for (int k = 2; k <= q; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (t * p1 - p0) / (t * t - 1.0);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-16) {
        break;
      }
    }
    nodes[i] = -t;
    nodes[q - 1 - i] = t;
    weights[i] = weights[q - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

using LatticeKey = std::vector<std::int64_t>;

// Calls f(key, node) for every lattice node (i + ½)·s strictly inside B_r(x).
template <class F>
void for_each_lattice_node(const double* x, int n, double r, double s, F&& f) {
  LatticeKey lo(n), hi(n), key(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = static_cast<std::int64_t>(std::ceil((x[i] - r) / s - 0.5));
    hi[i] = static_cast<std::int64_t>(std::floor((x[i] + r) / s - 0.5));
    if (hi[i] < lo[i]) {
      return;
    }
  }
  key = lo;
  double node[kMaxAmbient];
  const double r2 = r * r;
  while (true) {
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) {
      node[i] = (static_cast<double>(key[i]) + 0.5) * s;
      d2 += (node[i] - x[i]) * (node[i] - x[i]);
    }
    if (d2 < r2) {
      f(key, node);
    }
    int axis = 0;
    while (axis < n && key[axis] == hi[axis]) {
      key[axis] = lo[axis];
      ++axis;
    }
    if (axis == n) {
      break;
    }
    ++key[axis];
  }
}

// The sorted union of lattice nodes over all atom balls.
std::map<LatticeKey, std::size_t> lattice_union(const AtomTable& atoms, double r, double s,
                                                std::size_t budget) {
  std::map<LatticeKey, std::size_t> nodes;
  for (std::size_t j = 0; j < atoms.count; ++j) {
    for_each_lattice_node(&atoms.x[j * atoms.n], atoms.n, r, s,
                          [&](const LatticeKey& key, const double*) { nodes.emplace(key, 0); });
    if (nodes.size() > budget) {
      std::ostringstream os;
      os << "quadrature lattice exceeds the node budget of " << budget;
      throw QuadratureBudgetExceeded(os.str());
    }
  }
  std::size_t index = 0;
  for (auto& [key, slot] : nodes) {
    slot = index++;
  }
  return nodes;
}

double outer_radius(const Kernel& k, const QuadratureSpec& q) {
  return std::min(1.0, q.radius_factor * k.eps());
}

double lattice_spacing(const Kernel& k, const QuadratureSpec& q) {
  return 2.0 * outer_radius(k, q) / q.points_per_axis;
}

double dissipation_spacing(const Kernel& k, const QuadratureSpec& q) {
  if (q.rule == QuadratureSpec::Rule::TensorMidpoint) {
    return lattice_spacing(k, q);
  }
  return std::min(lattice_spacing(k, q), 0.5 * k.eps());
}

void summarise(CurvatureField& field) {
  field.h_sup = 0.0;
  field.dh_sup = 0.0;
  for (std::size_t j = 0; j < field.h.size(); ++j) {
    field.h_sup = std::max(field.h_sup, field.h[j].norm());
    field.dh_sup = std::max(field.dh_sup, operator_norm(field.dh[j]));
  }
}

CurvatureField gauss_field(const ConvolutionEngine& engine, const Kernel& k, const QuadratureSpec& q) {
  const AtomTable& atoms = engine.atoms();
  const int n = atoms.n;
  const double r = outer_radius(k, q);
  std::vector<double> t;
  std::vector<double> w;
  gauss_legendre(q.points_per_axis, t, w);

  // Offsets o inside the ball with w·Φ(o) and w·g(o); ∇Φ(x − z) = −g·o.
  std::vector<double> offsets;
  std::vector<double> w_value;
  std::vector<double> w_grad;
  std::vector<int> idx(n, 0);
  const int ppa = q.points_per_axis;
  const double jac = std::pow(r, n);
  while (true) {
    double o[kMaxAmbient];
    double r2 = 0.0;
    double weight = jac;
    for (int i = 0; i < n; ++i) {
      o[i] = r * t[idx[i]];
      r2 += o[i] * o[i];
      weight *= w[idx[i]];
    }
    if (r2 < r * r) {
      double value = 0.0;
      double g = 0.0;
      k.radial(r2, value, g);
      offsets.insert(offsets.end(), o, o + n);
      w_value.push_back(weight * value);
      w_grad.push_back(weight * g);
    }
    int axis = 0;
    while (axis < n && idx[axis] == ppa - 1) {
      idx[axis] = 0;
      ++axis;
    }
    if (axis == n) {
      break;
    }
    ++idx[axis];
  }
  const std::size_t per_atom = w_value.size();
  if (per_atom > 0 && atoms.count > q.max_nodes / per_atom) {
    std::ostringstream os;
    os << "curvature quadrature needs " << atoms.count << " x " << per_atom
       << " nodes, above the budget of " << q.max_nodes;
    throw QuadratureBudgetExceeded(os.str());
  }

  CurvatureField field;
  field.h.assign(atoms.count, Vec::Zero(n));
  field.dh.assign(atoms.count, Mat::Zero(n, n));
  field.nodes = per_atom * atoms.count;
  const auto count = static_cast<std::ptrdiff_t>(atoms.count);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t jj = 0; jj < count; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    const double* x = &atoms.x[j * n];
    double h[kMaxAmbient] = {};
    double dh[kMaxAmbient * kMaxAmbient] = {};
    double z[kMaxAmbient];
    double ht[kMaxAmbient];
    for (std::size_t node = 0; node < per_atom; ++node) {
      const double* o = &offsets[node * n];
      for (int i = 0; i < n; ++i) {
        z[i] = x[i] + o[i];
      }
      engine.h_tilde(z, ht);
      const double wv = w_value[node];
      const double wg = -w_grad[node];
      for (int a = 0; a < n; ++a) {
        h[a] += wv * ht[a];
        const double s = wg * ht[a];
        for (int b = 0; b < n; ++b) {
          dh[a * n + b] += s * o[b];
        }
      }
    }
    for (int a = 0; a < n; ++a) {
      field.h[j](a) = h[a];
      for (int b = 0; b < n; ++b) {
        field.dh[j](a, b) = dh[a * n + b];
      }
    }
  }
  return field;
}

CurvatureField midpoint_field(const ConvolutionEngine& engine, const Kernel& k, const QuadratureSpec& q) {
  const AtomTable& atoms = engine.atoms();
  const int n = atoms.n;
  const double r = outer_radius(k, q);
  const double s = lattice_spacing(k, q);
  const double cell = std::pow(s, n);
  const auto nodes = lattice_union(atoms, r, s, q.max_nodes);

  // h̃ once per lattice node, shared by every atom whose ball contains it.
  std::vector<const LatticeKey*> keys;
  keys.reserve(nodes.size());
  for (const auto& entry : nodes) {
    keys.push_back(&entry.first);
  }
  std::vector<double> cache(nodes.size() * n);
  const auto total = static_cast<std::ptrdiff_t>(keys.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < total; ++ii) {
    double z[kMaxAmbient];
    for (int i = 0; i < n; ++i) {
      z[i] = (static_cast<double>((*keys[ii])[i]) + 0.5) * s;
    }
    engine.h_tilde(z, &cache[ii * n]);
  }

  CurvatureField field;
  field.h.assign(atoms.count, Vec::Zero(n));
  field.dh.assign(atoms.count, Mat::Zero(n, n));
  field.nodes = nodes.size();
  const auto count = static_cast<std::ptrdiff_t>(atoms.count);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t jj = 0; jj < count; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    const double* x = &atoms.x[j * n];
    double h[kMaxAmbient] = {};
    double dh[kMaxAmbient * kMaxAmbient] = {};
    for_each_lattice_node(x, n, r, s, [&](const LatticeKey& key, const double* z) {
      const double* ht = &cache[nodes.at(key) * n];
      double diff[kMaxAmbient];
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) {
        diff[i] = x[i] - z[i];
        r2 += diff[i] * diff[i];
      }
      double value = 0.0;
      double g = 0.0;
      k.radial(r2, value, g);
      for (int a = 0; a < n; ++a) {
        h[a] += cell * value * ht[a];
        const double c = cell * g * ht[a];
        for (int b = 0; b < n; ++b) {
          dh[a * n + b] += c * diff[b];
        }
      }
    });
    for (int a = 0; a < n; ++a) {
      field.h[j](a) = h[a];
      for (int b = 0; b < n; ++b) {
        field.dh[j](a, b) = dh[a * n + b];
      }
    }
  }
  return field;
}

}  // namespace

void QuadratureSpec::validate() const {
  if (points_per_axis < 4) {
    throw InvalidArgument("quadrature: points_per_axis must be at least 4");
  }
  if (!(radius_factor >= 4.0)) {
    throw InvalidArgument("quadrature: radius_factor must be at least 4");
  }
  if (max_nodes == 0) {
    throw InvalidArgument("quadrature: max_nodes must be positive");
  }
}

QuadratureSpec QuadratureSpec::refined() const {
  QuadratureSpec out = *this;
  out.points_per_axis *= 2;
  return out;
}

std::string to_string(QuadratureSpec::Rule rule) {
  return rule == QuadratureSpec::Rule::TensorGauss ? "tensor-gauss" : "tensor-midpoint";
}

QuadratureSpec::Rule parse_quadrature_rule(const std::string& name) {
  if (name == "tensor-gauss") {
    return QuadratureSpec::Rule::TensorGauss;
  }
  if (name == "tensor-midpoint") {
    return QuadratureSpec::Rule::TensorMidpoint;
  }
  throw InvalidArgument("unknown quadrature rule '" + name + "'");
}

double neighbour_radius(double eps) { return std::min(1.0, kNeighbourRadiusFactor * eps); }

double conv_mass(const Varifold& v, const Kernel& k, const Vec& y) {
  check_inputs(v, k);
  if (y.size() != v.ambient()) {
    throw DimensionMismatch("conv_mass: point has the wrong dimension");
  }
  double sum = 0.0;
  for (const Atom& a : v.atoms()) {
    sum += a.mass * k.value(a.position - y);
  }
  return sum;
}

Vec conv_first_variation(const Varifold& v, const Kernel& k, const Vec& y) {
  check_inputs(v, k);
  if (y.size() != v.ambient()) {
    throw DimensionMismatch("conv_first_variation: point has the wrong dimension");
  }
  Vec sum = Vec::Zero(v.ambient());
  for (const Atom& a : v.atoms()) {
    const Vec diff = a.position - y;
    double value = 0.0;
    double g = 0.0;
    k.radial(diff.squaredNorm(), value, g);
    sum += (a.mass * g) * (a.plane.projector() * diff);
  }
  return sum;
}

Vec h_tilde(const Varifold& v, const Kernel& k, const Vec& y) {
  return -conv_first_variation(v, k, y) / (conv_mass(v, k, y) + k.eps());
}

CurvatureField curvature_field(const Varifold& v, const Kernel& k, const QuadratureSpec& q) {
  check_inputs(v, k);
  q.validate();
  const ConvolutionEngine engine(v, k);
  CurvatureField field = q.rule == QuadratureSpec::Rule::TensorGauss ? gauss_field(engine, k, q)
                                                                      : midpoint_field(engine, k, q);
  field.truncation_bound = std::exp(-0.5 * q.radius_factor * q.radius_factor);
  summarise(field);
  return field;
}

double dissipation(const Varifold& v, const Kernel& k, const QuadratureSpec& q) {
  check_inputs(v, k);
  q.validate();
  if (v.empty()) {
    return 0.0;
  }
  const ConvolutionEngine engine(v, k);
  const int n = v.ambient();
  const double r = outer_radius(k, q);
  const double s = dissipation_spacing(k, q);
  const auto nodes = lattice_union(engine.atoms(), r, s, q.max_nodes);
  std::vector<const LatticeKey*> keys;
  keys.reserve(nodes.size());
  for (const auto& entry : nodes) {
    keys.push_back(&entry.first);
  }
  std::vector<double> integrand(keys.size());
  const auto total = static_cast<std::ptrdiff_t>(keys.size());
  const double eps = k.eps();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < total; ++ii) {
    double z[kMaxAmbient];
    double cfv[kMaxAmbient];
    for (int i = 0; i < n; ++i) {
      z[i] = (static_cast<double>((*keys[ii])[i]) + 0.5) * s;
    }
    double cm = 0.0;
    engine.convolve(z, cm, cfv);
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      sq += cfv[i] * cfv[i];
    }
    integrand[ii] = sq / (cm + eps);
  }
  double sum = 0.0;
  for (double value : integrand) {
    sum += value;
  }
  return sum * std::pow(s, n);
}

}  // namespace vflow
