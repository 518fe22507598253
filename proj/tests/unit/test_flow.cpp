#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"
#include "vflow/curvature.hpp"
#include "vflow/errors.hpp"
#include "vflow/flow.hpp"
#include "vflow/ingest.hpp"

namespace vflow {
namespace {

using testing::loglog_slope;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Varifold circle(int samples) {
  ShapeSpec spec;
  spec.samples = samples;
  return generate(spec);
}

Varifold single_atom() {
  Varifold v(1, 2);
  v.add({vec2(0.3, 0.1), Plane::coordinate(1, 2), 1.0});
  return v;
}

FlowConfig config(double eps, double horizon, int steps) {
  FlowConfig c;
  c.eps = eps;
  c.subdivision = Subdivision::uniform(horizon, steps);
  return c;
}

double mean_radius(const Varifold& v) {
  double sum = 0.0;
  for (const Atom& a : v.atoms()) {
    sum += a.position.norm();
  }
  return sum / static_cast<double>(v.size());
}

TEST(Subdivision, Construction) {
  const Subdivision u = Subdivision::uniform(0.2, 4);
  ASSERT_EQ(u.steps(), 4u);
  EXPECT_DOUBLE_EQ(u.times()[2], 0.1);
  EXPECT_DOUBLE_EQ(u.horizon(), 0.2);
  EXPECT_NEAR(u.max_step(), 0.05, 1e-15);
  const Subdivision d = Subdivision::dyadic(0.25, 3);
  EXPECT_EQ(d.steps(), 8u);
  EXPECT_NEAR(d.max_step(), 0.25 / 8.0, 1e-15);
  const Subdivision irregular({0.0, 0.1, 0.15, 0.4});
  EXPECT_NEAR(irregular.max_step(), 0.25, 1e-15);
  EXPECT_EQ(irregular.index_of(0.15), 2u);
  EXPECT_FALSE(irregular.index_of(0.2).has_value());
}

TEST(Subdivision, Validation) {
  EXPECT_THROW(Subdivision({0.0}), InvalidArgument);
  EXPECT_THROW(Subdivision({0.1, 0.2}), InvalidArgument);
  EXPECT_THROW(Subdivision({0.0, 0.2, 0.2}), InvalidArgument);
  EXPECT_THROW(Subdivision::uniform(0.0, 3), InvalidArgument);
  EXPECT_THROW(Subdivision::uniform(1.0, 0), InvalidArgument);
  EXPECT_THROW(Subdivision::dyadic(1.0, -1), InvalidArgument);
}

TEST(StepMode, Names) {
  EXPECT_EQ(parse_step_mode("strict-paper"), StepMode::StrictPaper);
  EXPECT_EQ(to_string(StepMode::Practical), "practical");
  EXPECT_THROW(parse_step_mode("fast"), InvalidArgument);
}

TEST(Step, SingleAtomKeepsPositionAndShrinksMass) {
  // h vanishes at the atom, but Dh does not, so only the mass changes: J = 1 + τ·tr(P·Dh).
  const Varifold v = single_atom();
  const Kernel k(2, 0.1);
  const double tau = 1e-3;
  const CurvatureField f = curvature_field(v, k);
  const StepResult r = step(v, k, tau, {});
  EXPECT_LE((r.next[0].position - v[0].position).norm(), 1e-8);
  EXPECT_LE(plane_distance(r.next[0].plane, v[0].plane), 1e-12);
  const double trace = (v[0].plane.projector() * f.dh[0]).trace();
  EXPECT_LT(trace, 0.0);
  EXPECT_NEAR(r.next[0].mass, v[0].mass * (1.0 + tau * trace), 1e-8);
}

TEST(Step, CircleShrinks) {
  const Varifold v = circle(400);
  const StepResult r = step(v, Kernel(2, 0.05), 1e-3, {});
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_LT(r.next[i].position.norm(), v[i].position.norm());
  }
  EXPECT_LT(r.diagnostics.mass_after, r.diagnostics.mass_before);
  EXPECT_TRUE(r.diagnostics.mass_bound_ok);
  EXPECT_LT(r.diagnostics.first_variation, 0.0);
  EXPECT_GE(r.diagnostics.jacobian_min, 0.5);
  EXPECT_LE(r.diagnostics.jacobian_max, 1.5);
  // R' = -1/R at first order.
  EXPECT_NEAR(mean_radius(r.next), 1.0 - 1e-3, 1e-4);
}

TEST(Step, CertificateFailureThrows) {
  const Varifold v = circle(50);
  EXPECT_THROW(step(v, Kernel(2, 0.1), 10.0, {}), CertificateViolation);
  EXPECT_THROW(step(v, Kernel(2, 0.1), 0.0, {}), InvalidArgument);
}

TEST(Step, StrictModeGate) {
  const Varifold v = circle(50);
  StepOptions strict;
  strict.mode = StepMode::StrictPaper;
  EXPECT_THROW(step(v, Kernel(2, 0.5), 1e-3, {}, strict), CertificateViolation);
  const double limit = std::pow(v.total_mass() + 1.0, -3.0) * std::pow(0.5, 8.0);
  const StepResult r = step(v, Kernel(2, 0.5), 0.9 * limit, {}, strict);
  EXPECT_EQ(r.diagnostics.gate, "strict-paper");
}

TEST(Evolve, SingleAtomStaysPut) {
  const Trajectory traj = evolve(single_atom(), config(0.1, 0.02, 10));
  ASSERT_TRUE(traj.complete());
  ASSERT_EQ(traj.snapshots.size(), 11u);
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const Atom& a = traj.snapshots[i][0];
    EXPECT_LE((a.position - single_atom()[0].position).norm(), 1e-8);
    EXPECT_LE(plane_distance(a.plane, single_atom()[0].plane), 1e-12);
    if (i > 0) {
      EXPECT_LT(a.mass, traj.snapshots[i - 1][0].mass);
    }
  }
}

TEST(Evolve, CrossingLinesCentreIsFixed) {
  ShapeSpec spec;
  spec.kind = ShapeKind::CrossingLines;
  spec.samples = 41;
  const Varifold v = generate(spec);
  const Trajectory traj = evolve(v, config(0.1, 0.05, 20));
  ASSERT_TRUE(traj.complete());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].position.norm() == 0.0) {
      EXPECT_LE(traj.snapshots.back()[i].position.norm(), 1e-6);
    }
  }
}

TEST(Evolve, InvariantsAlongCircleRun) {
  const Trajectory traj = evolve(circle(100), config(0.1, 0.05, 25));
  ASSERT_TRUE(traj.complete());
  EXPECT_EQ(traj.times.size(), 26u);
  EXPECT_EQ(traj.fields.size(), 26u);
  EXPECT_EQ(traj.mass_violations(), 0u);
  double budget = 0.0;
  for (const StepDiagnostics& s : traj.diagnostics) {
    EXPECT_EQ(s.gate, "practical");
    EXPECT_LE(s.mass_after, s.mass_before + s.tau);
    EXPECT_LE(s.first_variation, 1e-9);
    EXPECT_GE(s.jacobian_min, 0.5);
    EXPECT_LE(s.jacobian_max, 1.5);
    EXPECT_LE(s.certificate, 0.5);
    budget += s.tau * s.dissipation;
  }
  for (const Varifold& s : traj.snapshots) {
    EXPECT_EQ(s.size(), 100u);
  }
  const double m0 = traj.snapshots.front().total_mass();
  const double m1 = traj.snapshots.back().total_mass();
  const double delta = 0.05 / 25.0;
  EXPECT_LE(budget, m0 + 5.0 * delta * 0.05);
  EXPECT_LE(std::abs(m1 - m0 + budget), 5.0 * delta * 0.05);
}

TEST(Evolve, MassDefectIsSecondOrder) {
  // |Δmass − τ δV(h)| = O(τ²) on the first step.
  const Varifold v = circle(60);
  const Kernel k(2, 0.1);
  std::vector<double> taus{4e-3, 2e-3, 1e-3, 5e-4};
  std::vector<double> defects;
  for (double tau : taus) {
    const StepResult r = step(v, k, tau, {});
    defects.push_back(std::abs(r.diagnostics.mass_after - r.diagnostics.mass_before -
                               tau * r.diagnostics.first_variation));
  }
  const double slope = loglog_slope(taus, defects);
  EXPECT_GE(slope, 1.8);
  EXPECT_LE(slope, 2.2);
}

TEST(Evolve, AbortKeepsPartialTrajectory) {
  // |Dh| is close to 1 on the unit circle, so τ = 0.9 breaks the certificate.
  FlowConfig c = config(0.1, 0.9, 2);
  c.subdivision = Subdivision({0.0, 0.9, 0.95});
  const Trajectory traj = evolve(circle(60), c);
  ASSERT_FALSE(traj.complete());
  EXPECT_EQ(traj.failure->step, 0u);
  EXPECT_GT(traj.failure->value, traj.failure->limit);
  EXPECT_EQ(traj.snapshots.size(), 1u);
  EXPECT_EQ(traj.fields.size(), 0u);
}

TEST(Evolve, RetryHalvingRecovers) {
  FlowConfig c = config(0.1, 0.02, 1);
  c.step.eta = 0.01;
  c.retry_halving = true;
  const Trajectory traj = evolve(circle(60), c);
  ASSERT_TRUE(traj.complete());
  EXPECT_GT(traj.diagnostics.size(), 1u);
  EXPECT_FALSE(traj.warnings.empty());
  EXPECT_NEAR(traj.times.back(), 0.02, 1e-15);
}

TEST(Evolve, LongHorizonWarns) {
  FlowConfig c = config(0.1, 1.5, 3);
  const Trajectory traj = evolve(single_atom(), c);
  EXPECT_FALSE(traj.warnings.empty());
}

TEST(Evolve, RejectsBadInput) {
  EXPECT_THROW(evolve(Varifold(1, 2), config(0.1, 0.1, 2)), InvalidArgument);
  EXPECT_THROW(evolve(single_atom(), config(1.0, 0.1, 2)), InvalidArgument);
}

TEST(Extensions, AgreeAtSubdivisionTimes) {
  const Trajectory traj = evolve(circle(60), config(0.1, 0.02, 4));
  for (double t : traj.times) {
    EXPECT_EQ(interp_vs_pc_gap(traj, t), 0.0);
  }
  // For a fixed atom the two extensions differ by half a step of mass loss.
  const Trajectory atom = evolve(single_atom(), config(0.1, 0.02, 4));
  const double half_step = 0.5 * std::abs(atom.snapshots[2][0].mass - atom.snapshots[1][0].mass);
  EXPECT_NEAR(interp_vs_pc_gap(atom, 0.0075), half_step, 1e-9);
  EXPECT_THROW(traj.sample_at(0.5), InvalidArgument);
}

TEST(Extensions, GapScalesWithStep) {
  const Varifold v = circle(60);
  std::vector<double> steps, gaps;
  for (int m : {4, 8, 16}) {
    const Trajectory traj = evolve(v, config(0.1, 0.04, m));
    const double delta = 0.04 / m;
    steps.push_back(delta);
    gaps.push_back(interp_vs_pc_gap(traj, 0.5 * delta));
  }
  const double slope = loglog_slope(steps, gaps);
  EXPECT_GE(slope, 0.8);
  EXPECT_LE(slope, 1.2);
}

TEST(BrakkeResidual, Reductions) {
  const Trajectory traj = evolve(circle(60), config(0.1, 0.02, 5));
  const ConstantTest one;
  EXPECT_EQ(brakke_residual(traj, one, 0.008, 0.008), 0.0);
  double integral = 0.0;
  for (const StepDiagnostics& s : traj.diagnostics) {
    integral += s.tau * s.first_variation;
  }
  const double dm = traj.snapshots.back().total_mass() - traj.snapshots.front().total_mass();
  EXPECT_NEAR(brakke_residual(traj, one, 0.0, 0.02), std::abs(dm - integral), 1e-12);
  EXPECT_THROW(brakke_residual(traj, one, 0.0, 0.011), InvalidArgument);
  EXPECT_THROW(brakke_residual(traj, one, 0.02, 0.0), InvalidArgument);
}

TEST(BrakkeResidual, FirstOrderInStep) {
  const Varifold v = circle(60);
  const GaussianBump phi(vec2(1.0, 0.0), 0.5);
  std::vector<double> steps, residuals;
  for (int m : {10, 20, 40}) {
    const Trajectory traj = evolve(v, config(0.1, 0.05, m));
    steps.push_back(0.05 / m);
    residuals.push_back(brakke_residual(traj, phi, 0.0, 0.05));
  }
  const double slope = loglog_slope(steps, residuals);
  EXPECT_GE(slope, 0.7);
  EXPECT_LE(slope, 1.3);
}

TEST(TestFunctions, DerivativesMatchFiniteDifferences) {
  Vec velocity(2);
  velocity << 0.3, -0.2;
  const GaussianBump bump(vec2(0.2, 0.1), 0.4, 1.5, velocity);
  const PolynomialCutoff poly(vec2(-0.1, 0.2), 0.8);
  const Vec x = vec2(0.4, -0.3);
  const double t = 0.3;
  const double h = 1e-6;
  for (const TestFunction* f : std::vector<const TestFunction*>{&bump, &poly}) {
    Vec fd(2);
    for (int i = 0; i < 2; ++i) {
      Vec e = Vec::Zero(2);
      e(i) = h;
      fd(i) = (f->value(x + e, t) - f->value(x - e, t)) / (2.0 * h);
    }
    EXPECT_LE((fd - f->gradient(x, t)).norm(), 1e-7);
    EXPECT_NEAR((f->value(x, t + h) - f->value(x, t - h)) / (2.0 * h), f->time_derivative(x, t), 1e-7);
  }
  EXPECT_EQ(poly.value(vec2(5, 5), 0.0), 0.0);
  EXPECT_THROW(GaussianBump(vec2(0, 0), 0.0), InvalidArgument);
}

TEST(RefineStudy, SingleAtomDistancesAreMassGaps) {
  // The atom never moves, so each distance is the gap between final masses.
  const auto rows = refine_study(single_atom(), config(0.1, 0.01, 1), 0.01, 2, 4);
  ASSERT_EQ(rows.size(), 3u);
  for (const RefineRow& r : rows) {
    const double coarse = evolve(single_atom(), config(0.1, 0.01, 1 << r.level)).snapshots.back()[0].mass;
    const double fine = evolve(single_atom(), config(0.1, 0.01, 2 << r.level)).snapshots.back()[0].mass;
    EXPECT_NEAR(r.distance, std::abs(coarse - fine), 1e-9);
  }
  ASSERT_TRUE(rows[1].ratio && rows[2].ratio);
  EXPECT_NEAR(*rows[1].ratio, 0.5, 0.1);
  EXPECT_NEAR(*rows[2].ratio, 0.5, 0.1);
}

TEST(RefineStudy, SingleLevelHasNoRatio) {
  const auto rows = refine_study(circle(40), config(0.1, 0.1, 1), 0.05, 2, 2);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].ratio.has_value());
  EXPECT_GT(rows[0].distance, 0.0);
}

TEST(Stability, ContinuousInInitialData) {
  const Varifold v = circle(40);
  const FlowConfig c = config(0.1, 0.02, 8);
  const Varifold vt = evolve(v, c).snapshots.back();
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {1e-2, 1e-3, 1e-4}) {
    const Varifold w = jitter(v, a, 5);
    const double d = bl_distance(vt, evolve(w, c).snapshots.back());
    EXPECT_TRUE(std::isfinite(d));
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-2);
}

}  // namespace
}  // namespace vflow
