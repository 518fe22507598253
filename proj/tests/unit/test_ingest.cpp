#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "test_support.hpp"
#include "vflow/errors.hpp"
#include "vflow/ingest.hpp"

namespace vflow {
namespace {

const std::string kData = VFLOW_TEST_DATA;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

RawCloud cloud_of(const Varifold& v) {
  RawCloud c;
  c.n = v.ambient();
  for (const Atom& a : v.atoms()) {
    c.points.push_back(a.position);
  }
  return c;
}

Mat rotation3(double a, double b) {
  Mat rz = Mat::Identity(3, 3);
  rz(0, 0) = std::cos(a);
  rz(0, 1) = -std::sin(a);
  rz(1, 0) = std::sin(a);
  rz(1, 1) = std::cos(a);
  Mat rx = Mat::Identity(3, 3);
  rx(1, 1) = std::cos(b);
  rx(1, 2) = -std::sin(b);
  rx(2, 1) = std::sin(b);
  rx(2, 2) = std::cos(b);
  return rz * rx;
}

TEST(Load, CsvWithMasses) {
  const RawCloud c = load(kData + "/two_points.csv");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.n, 2);
  EXPECT_FALSE(c.frames.has_value());
  ASSERT_TRUE(c.masses.has_value());
  EXPECT_EQ((*c.masses)[1], 1.5);
  EXPECT_EQ(c.points[1](1), 2.0);
}

TEST(Load, CsvWithFrames) {
  const Varifold v = to_varifold(load(kData + "/framed.csv"));
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v.dim(), 1);
  EXPECT_LE(plane_distance(v[1].plane, testing::line(std::numbers::pi / 2)), 1e-15);
  EXPECT_EQ(v[1].mass, 2.0);
}

TEST(Load, JsonFramesAreRepaired) {
  const RawCloud c = load(kData + "/framed.json");
  ASSERT_TRUE(c.frames.has_value());
  const Mat& f = (*c.frames)[1];
  EXPECT_LE(std::abs((f * f.transpose())(0, 0) - 1.0), 1e-12);
  EXPECT_NEAR(f(0, 1), 0.8, 1e-6);
  EXPECT_NO_THROW(to_varifold(c));
}

TEST(Load, JsonBadFrameRejected) {
  EXPECT_THROW(load(kData + "/bad_frame.json"), ParseError);
}

TEST(Load, MalformedRowNamesRow) {
  try {
    load(kData + "/bad_row.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    // Data rows are indexed from 0, like atoms.
    EXPECT_NE(what.find("row 1 (line 3)"), std::string::npos) << what;
  }
}

TEST(Load, Errors) {
  EXPECT_THROW(load(kData + "/missing.csv"), ParseError);
  EXPECT_THROW(load(kData + "/two_points.txt"), ParseError);
  std::istringstream unknown("x1,y2\n1,2\n");
  EXPECT_THROW(parse_csv(unknown), ParseError);
  std::istringstream ragged("x1,x2\n1,2,3\n");
  EXPECT_THROW(parse_csv(ragged), ParseError);
  EXPECT_THROW(parse_json("{\"atoms\": [{\"y\": 1}]}"), ParseError);
  EXPECT_THROW(parse_json("not json"), ParseError);
  EXPECT_THROW(to_varifold(load(kData + "/two_points.csv")), InvalidArgument);
}

TEST(EstimatePlanes, LineIsExact) {
  RawCloud c;
  c.n = 2;
  for (int i = 0; i < 20; ++i) {
    c.points.push_back(vec2(0.1 * i, 0.05 * i));
  }
  const Varifold v = estimate_planes(c, 1, 5);
  const Plane expected = testing::line(std::atan(0.5));
  for (const Atom& a : v.atoms()) {
    EXPECT_LE(plane_distance(a.plane, expected), 1e-8);
  }
}

TEST(EstimatePlanes, CircleTangents) {
  ShapeSpec spec;
  spec.samples = 200;
  const Varifold truth = generate(spec);
  const Varifold v = estimate_planes(cloud_of(truth), 1, 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_LE(plane_distance(v[i].plane, truth[i].plane), std::sin(2.0 * std::numbers::pi / 180.0));
  }
  // Mass per point tracks the arc length spacing.
  EXPECT_NEAR(v.total_mass(), 2.0 * std::numbers::pi, 0.05 * 2.0 * std::numbers::pi);
  EXPECT_NEAR(estimate_planes(cloud_of(truth), 1, 8, MassMode::UnitPerAtom).total_mass(), 200.0, 1e-12);
}

TEST(EstimatePlanes, RigidMotionEquivariance) {
  ShapeSpec spec;
  spec.kind = ShapeKind::Sphere;
  spec.samples = 300;
  const RawCloud c = cloud_of(generate(spec));
  const Mat r = rotation3(0.4, 1.1);
  Vec shift(3);
  shift << 0.3, -0.2, 0.5;
  RawCloud moved = c;
  for (Vec& p : moved.points) {
    p = r * p + shift;
  }
  const Varifold a = estimate_planes(c, 2, 10);
  const Varifold b = estimate_planes(moved, 2, 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(max_abs(r * a[i].plane.projector() * r.transpose() - b[i].plane.projector()), 1e-8);
    EXPECT_NEAR(a[i].mass, b[i].mass, 1e-10);
  }
}

TEST(EstimatePlanes, DuplicatedPoints) {
  RawCloud c;
  c.n = 2;
  for (int i = 0; i < 10; ++i) {
    c.points.push_back(vec2(0.5, 0.5));
  }
  try {
    estimate_planes(c, 1, 4);
    FAIL() << "expected DegenerateNeighborhood";
  } catch (const DegenerateNeighborhood& e) {
    EXPECT_EQ(e.point(), 0u);
  }
}

TEST(EstimatePlanes, Preconditions) {
  RawCloud c;
  c.n = 2;
  for (int i = 0; i < 5; ++i) {
    c.points.push_back(vec2(i, 0));
  }
  EXPECT_THROW(estimate_planes(c, 1, 1), InvalidArgument);
  EXPECT_THROW(estimate_planes(c, 1, 5), InvalidArgument);
  EXPECT_THROW(estimate_planes(c, 3, 3), DimensionMismatch);
}

TEST(Generate, CircleOfFour) {
  ShapeSpec spec;
  spec.samples = 4;
  const Varifold v = generate(spec);
  ASSERT_EQ(v.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const double a = i * std::numbers::pi / 2.0;
    EXPECT_LE((v[i].position - vec2(std::cos(a), std::sin(a))).norm(), 1e-15);
    EXPECT_NEAR((v[i].plane.projector() * v[i].position).norm(), 0.0, 1e-15);
    EXPECT_NEAR(v[i].mass, std::numbers::pi / 2.0, 1e-15);
  }
}

TEST(Generate, CircleMassIsExact) {
  ShapeSpec spec;
  spec.samples = 137;
  spec.radius = 2.5;
  EXPECT_NEAR(generate(spec).total_mass(), 2.0 * std::numbers::pi * 2.5, 1e-12);
  spec.mass_mode = MassMode::UnitPerAtom;
  EXPECT_NEAR(generate(spec).total_mass(), 137.0, 1e-12);
}

TEST(Generate, CrossingLinesSingleCentre) {
  ShapeSpec spec;
  spec.kind = ShapeKind::CrossingLines;
  spec.samples = 21;
  spec.centre = CrossingCentre::Single;
  const Varifold v = generate(spec);
  int at_origin = 0;
  for (const Atom& a : v.atoms()) {
    if (a.position.norm() == 0.0) {
      ++at_origin;
      EXPECT_LE(plane_distance(a.plane, Plane::coordinate(1, 2)), 1e-15);
    }
  }
  EXPECT_EQ(at_origin, 1);
  spec.centre = CrossingCentre::Split;
  int split = 0;
  const Varifold both = generate(spec);
  for (const Atom& a : both.atoms()) {
    split += a.position.norm() == 0.0 ? 1 : 0;
  }
  EXPECT_EQ(split, 2);
}

TEST(Generate, SphereArea) {
  ShapeSpec spec;
  spec.kind = ShapeKind::Sphere;
  spec.samples = 2000;
  const Varifold v = generate(spec);
  EXPECT_EQ(v.dim(), 2);
  EXPECT_EQ(v.ambient(), 3);
  EXPECT_NEAR(v.total_mass(), 4.0 * std::numbers::pi, 0.005 * 4.0 * std::numbers::pi);
  for (const Atom& a : v.atoms()) {
    EXPECT_NEAR(a.position.norm(), 1.0, 1e-12);
    EXPECT_LE((a.plane.projector() * a.position).norm(), 1e-12);
  }
}

TEST(Generate, OtherShapes) {
  for (ShapeKind kind : {ShapeKind::Segment, ShapeKind::Torus, ShapeKind::Dumbbell, ShapeKind::CustomGraph}) {
    ShapeSpec spec;
    spec.kind = kind;
    spec.samples = 400;
    const Varifold v = generate(spec);
    EXPECT_EQ(v.size(), 400u) << to_string(kind);
    EXPECT_GT(v.total_mass(), 0.0);
    EXPECT_EQ(parse_shape_kind(to_string(kind)), kind);
  }
  ShapeSpec torus;
  torus.kind = ShapeKind::Torus;
  torus.samples = 4000;
  EXPECT_NEAR(generate(torus).total_mass(), 4.0 * std::numbers::pi * std::numbers::pi * 0.3, 0.01 * 11.84);
  ShapeSpec segment;
  segment.kind = ShapeKind::Segment;
  segment.samples = 10;
  EXPECT_NEAR(generate(segment).total_mass(), 2.0, 1e-12);
}

TEST(Generate, InvalidSpecs) {
  ShapeSpec spec;
  spec.samples = 2;
  EXPECT_THROW(generate(spec), InvalidArgument);
  spec = {};
  spec.radius = -1.0;
  EXPECT_THROW(generate(spec), InvalidArgument);
  EXPECT_THROW(parse_shape_kind("blob"), InvalidArgument);
}

TEST(Jitter, DeterministicAndBounded) {
  ShapeSpec spec;
  spec.samples = 50;
  const Varifold v = generate(spec);
  const Varifold a = jitter(v, 0.01, 42);
  const Varifold b = jitter(v, 0.01, 42);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_TRUE(a[i].position == b[i].position);
    EXPECT_LE((a[i].position - v[i].position).norm(), 0.01 * std::sqrt(2.0) + 1e-15);
    EXPECT_EQ(a[i].mass, v[i].mass);
  }
}

}  // namespace
}  // namespace vflow
