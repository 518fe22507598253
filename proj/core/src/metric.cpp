#include "vflow/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

constexpr double kFeasibilityTol = 1e-9;
constexpr double kGroundCost = 1.0;

void check_pair(const Varifold& v, const Varifold& w) {
  if (v.dim() != w.dim() || v.ambient() != w.ambient()) {
    throw DimensionMismatch("bounded-Lipschitz distance needs varifolds of equal (d, n)");
  }
}

bool same_point(const Atom& a, const SupportPoint& p, double tol) {
  return max_abs(a.position - p.position) <= tol &&
         max_abs(a.plane.projector() - p.plane.projector()) <= tol;
}

// Transport between the positive part, the negative part and a ground node
// standing for the constraint |φ| ≤ 1. Costs are min(d, 2).
class TransportSolver {
 public:
  explicit TransportSolver(const std::vector<SupportPoint>& support) : support_(support) {
    const std::size_t k = support.size();
    double excess = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      excess += support[i].weight;
      if (support[i].weight > 0.0) {
        sources_.push_back(i);
        supply_.push_back(support[i].weight);
      } else if (support[i].weight < 0.0) {
        sinks_.push_back(i);
        demand_.push_back(-support[i].weight);
      }
    }
    ground_ = k;
    if (excess > 0.0) {
      sinks_.push_back(ground_);
      demand_.push_back(excess);
    } else if (excess < 0.0) {
      sources_.push_back(ground_);
      supply_.push_back(-excess);
    }
    total_supply_ = std::accumulate(supply_.begin(), supply_.end(), 0.0);
  }

  double cost(std::size_t a, std::size_t b) const {
    if (a == b) {
      return 0.0;
    }
    if (a == ground_ || b == ground_) {
      return kGroundCost;
    }
    const SupportPoint& p = support_[a];
    const SupportPoint& q = support_[b];
    return std::min(2.0 * kGroundCost, product_distance(p.position, p.plane, q.position, q.plane));
  }

  void solve() {
    const std::size_t ns = sources_.size();
    const std::size_t nt = sinks_.size();
    cost_.assign(ns * nt, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t t = 0; t < nt; ++t) {
        cost_[s * nt + t] = cost(sources_[s], sinks_[t]);
      }
    }
    flow_.assign(ns * nt, 0.0);
    pot_s_.assign(ns, 0.0);
    pot_t_.assign(nt, std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t t = 0; t < nt; ++t) {
        pot_t_[t] = std::min(pot_t_[t], cost_[s * nt + t]);
      }
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist_s(ns);
    std::vector<double> dist_t(nt);
    std::vector<std::size_t> pred_t(nt);  // source preceding a sink
    std::vector<std::size_t> pred_s(ns);  // sink preceding a source (backward arc)
    std::vector<char> done_s(ns);
    std::vector<char> done_t(nt);
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    while (true) {
      bool work = false;
      for (std::size_t s = 0; s < ns; ++s) {
        work = work || supply_[s] > 0.0;
      }
      if (!work) {
        break;
      }
      std::fill(dist_s.begin(), dist_s.end(), inf);
      std::fill(dist_t.begin(), dist_t.end(), inf);
      std::fill(done_s.begin(), done_s.end(), 0);
      std::fill(done_t.begin(), done_t.end(), 0);
      std::fill(pred_s.begin(), pred_s.end(), kNone);
      for (std::size_t s = 0; s < ns; ++s) {
        if (supply_[s] > 0.0) {
          dist_s[s] = 0.0;
        }
      }
      std::size_t target = kNone;
      // Dense Dijkstra on reduced costs c + π_u − π_v.
      while (true) {
        double best = inf;
        std::size_t pick = kNone;
        bool pick_sink = false;
        for (std::size_t s = 0; s < ns; ++s) {
          if (!done_s[s] && dist_s[s] < best) {
            best = dist_s[s];
            pick = s;
            pick_sink = false;
          }
        }
        for (std::size_t t = 0; t < nt; ++t) {
          if (!done_t[t] && dist_t[t] < best) {
            best = dist_t[t];
            pick = t;
            pick_sink = true;
          }
        }
        if (pick == kNone) {
          break;
        }
        if (pick_sink) {
          done_t[pick] = 1;
          if (demand_[pick] > 0.0) {
            target = pick;
            break;
          }
          for (std::size_t s = 0; s < ns; ++s) {
            if (done_s[s] || flow_[s * nt + pick] <= 0.0) {
              continue;
            }
            const double reduced = std::max(0.0, -cost_[s * nt + pick] + pot_t_[pick] - pot_s_[s]);
            if (best + reduced < dist_s[s]) {
              dist_s[s] = best + reduced;
              pred_s[s] = pick;
            }
          }
        } else {
          done_s[pick] = 1;
          for (std::size_t t = 0; t < nt; ++t) {
            if (done_t[t]) {
              continue;
            }
            const double reduced = std::max(0.0, cost_[pick * nt + t] + pot_s_[pick] - pot_t_[t]);
            if (best + reduced < dist_t[t]) {
              dist_t[t] = best + reduced;
              pred_t[t] = pick;
            }
          }
        }
      }
      if (target == kNone) {
        // Supply and demand totals can differ by rounding; a remainder at
        // that level is dropped.
        const double left = std::accumulate(supply_.begin(), supply_.end(), 0.0);
        if (left <= 1e-12 * total_supply_) {
          break;
        }
        throw Error("bounded-Lipschitz transport: no augmenting path (unbalanced problem)");
      }
      const double reach = dist_t[target];
      for (std::size_t s = 0; s < ns; ++s) {
        pot_s_[s] += std::min(dist_s[s], reach);
      }
      for (std::size_t t = 0; t < nt; ++t) {
        pot_t_[t] += std::min(dist_t[t], reach);
      }

      // Bottleneck along the path, walking back from the target sink.
      double delta = demand_[target];
      std::size_t t = target;
      std::size_t s = pred_t[t];
      while (true) {
        if (pred_s[s] == kNone) {
          delta = std::min(delta, supply_[s]);
          break;
        }
        const std::size_t back = pred_s[s];
        delta = std::min(delta, flow_[s * nt + back]);
        t = back;
        s = pred_t[t];
      }
      t = target;
      s = pred_t[t];
      demand_[target] -= delta;
      while (true) {
        flow_[s * nt + t] += delta;
        if (pred_s[s] == kNone) {
          supply_[s] -= delta;
          break;
        }
        const std::size_t back = pred_s[s];
        flow_[s * nt + back] -= delta;
        t = back;
        s = pred_t[t];
      }
      ++iterations_;
    }
  }

  double transport_cost() const {
    double total = 0.0;
    for (std::size_t i = 0; i < flow_.size(); ++i) {
      total += flow_[i] * cost_[i];
    }
    return total;
  }

  // McShane extension of the sink values φ = −π over the support and the
  // ground, shifted so the ground sits at 0.
  std::vector<double> test_function() const {
    const std::size_t k = support_.size();
    std::vector<double> phi(k + 1, std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p <= k; ++p) {
      for (std::size_t t = 0; t < sinks_.size(); ++t) {
        phi[p] = std::min(phi[p], -pot_t_[t] + cost(p, sinks_[t]));
      }
    }
    if (sinks_.empty()) {
      std::fill(phi.begin(), phi.end(), 0.0);
    }
    const double shift = phi[k];
    for (double& value : phi) {
      value -= shift;
    }
    phi.pop_back();
    return phi;
  }

  std::size_t iterations() const { return iterations_; }

 private:
  const std::vector<SupportPoint>& support_;
  std::vector<std::size_t> sources_;
  std::vector<std::size_t> sinks_;
  std::vector<double> supply_;
  std::vector<double> demand_;
  std::size_t ground_ = 0;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<double> pot_s_;
  std::vector<double> pot_t_;
  std::size_t iterations_ = 0;
  double total_supply_ = 0.0;
};

}  // namespace

double product_distance(const Vec& x, const Plane& s, const Vec& y, const Plane& t) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("product_distance: positions have different dimensions");
  }
  return (x - y).norm() + plane_distance(s, t);
}

std::vector<SupportPoint> merged_support(const Varifold& v, const Varifold& w, double tol) {
  check_pair(v, w);
  // Masses of each side are summed separately so that swapping v and w negates
  // every weight exactly.
  std::vector<SupportPoint> support;
  std::vector<double> from_v;
  std::vector<double> from_w;
  const auto absorb = [&](const Varifold& src, std::vector<double>& sums) {
    for (const Atom& a : src.atoms()) {
      auto it = std::find_if(support.begin(), support.end(),
                             [&](const SupportPoint& p) { return same_point(a, p, tol); });
      if (it == support.end()) {
        support.push_back({a.position, a.plane, 0.0});
        from_v.push_back(0.0);
        from_w.push_back(0.0);
        it = support.end() - 1;
      }
      sums[static_cast<std::size_t>(it - support.begin())] += a.mass;
    }
  };
  absorb(v, from_v);
  absorb(w, from_w);
  for (std::size_t i = 0; i < support.size(); ++i) {
    support[i].weight = from_v[i] - from_w[i];
  }
  return support;
}

BLResult bl_distance_report(const Varifold& v, const Varifold& w) {
  const std::vector<SupportPoint> support = merged_support(v, w);
  const std::size_t k = support.size();
  // Solve in an order and sign that do not depend on which argument comes
  // first, so the distance is symmetric bit for bit.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  const auto key_less = [&](std::size_t a, std::size_t b) {
    const Vec& pa = support[a].position;
    const Vec& pb = support[b].position;
    for (Eigen::Index i = 0; i < pa.size(); ++i) {
      if (pa(i) != pb(i)) {
        return pa(i) < pb(i);
      }
    }
    const Mat& qa = support[a].plane.projector();
    const Mat& qb = support[b].plane.projector();
    for (Eigen::Index i = 0; i < qa.size(); ++i) {
      if (qa(i) != qb(i)) {
        return qa(i) < qb(i);
      }
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), key_less);
  double sign = 1.0;
  for (std::size_t i : order) {
    if (support[i].weight != 0.0) {
      sign = support[i].weight > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  std::vector<SupportPoint> canonical;
  canonical.reserve(k);
  for (std::size_t i : order) {
    canonical.push_back(support[i]);
    canonical.back().weight *= sign;
  }
  BLResult result;
  result.support_size = k;
  TransportSolver solver(canonical);
  solver.solve();
  result.iterations = solver.iterations();
  const std::vector<double> phi = solver.test_function();
  result.test_function.assign(k, 0.0);
  double objective = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    objective += canonical[c].weight * phi[c];
    result.test_function[order[c]] = sign * phi[c];
  }
  result.gap = solver.transport_cost() - objective;
  result.distance = std::max(0.0, objective);
  return result;
}

double bl_lower_bound(const Varifold& v, const Varifold& w, const PointFunction& phi) {
  const std::vector<SupportPoint> support = merged_support(v, w);
  std::vector<double> values(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    values[i] = phi(support[i].position, support[i].plane);
    if (!(std::abs(values[i]) <= 1.0 + kFeasibilityTol)) {
      std::ostringstream os;
      os << "test function exceeds 1 in absolute value at support point " << i;
      throw InfeasibleTestFunction(os.str());
    }
  }
  for (std::size_t i = 0; i < support.size(); ++i) {
    for (std::size_t j = i + 1; j < support.size(); ++j) {
      const double d = product_distance(support[i].position, support[i].plane, support[j].position,
                                        support[j].plane);
      if (std::abs(values[i] - values[j]) > d + kFeasibilityTol) {
        std::ostringstream os;
        os << "test function is not 1-Lipschitz between support points " << i << " and " << j;
        throw InfeasibleTestFunction(os.str());
      }
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    sum += support[i].weight * values[i];
  }
  return std::abs(sum);
}

}  // namespace vflow
