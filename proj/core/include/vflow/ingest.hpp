#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vflow/varifold.hpp"

namespace vflow {

/// Points with optional tangent frames (d×n) and masses.
struct RawCloud {
  int n = 0;
  int d = 0;  ///< 0 when the cloud carries no frames
  std::vector<Vec> points;
  std::optional<std::vector<Mat>> frames;
  std::optional<std::vector<double>> masses;

  std::size_t size() const { return points.size(); }
};

enum class CloudFormat { Json, Csv };

/// Reads a cloud; the format defaults to the file extension (.csv or .json).
RawCloud load(const std::string& path, std::optional<CloudFormat> format = std::nullopt);

/// CSV with a header naming the columns x1..xn, optional t11..tdn (frame
/// entries, row-major) and optional m.
RawCloud parse_csv(std::istream& in, const std::string& source = "<csv>");

/// A varifold document {d, n, atoms: [{x, frame, m}]} or a trajectory
/// document, in which case the last snapshot is read.
RawCloud parse_json(const std::string& text, const std::string& source = "<json>");

/// Frames off by at most this much are re-orthonormalised; beyond it they are rejected.
inline constexpr double kFrameRepairTol = 1e-6;

/// Builds a varifold from a cloud that carries frames; missing masses default to 1.
Varifold to_varifold(const RawCloud& cloud);

enum class MassMode { UniformPerLength, UnitPerAtom };

std::string to_string(MassMode mode);
MassMode parse_mass_mode(const std::string& name);

/// Tangent planes from the covariance of each point and its k nearest
/// neighbours (ties broken by index). Masses come from the cloud when present,
/// otherwise from `mode`: 1 per atom, or the local d-volume estimate
/// ω_d·r_k^d / k with r_k the distance to the k-th neighbour.
Varifold estimate_planes(const RawCloud& cloud, int d, int k, MassMode mode = MassMode::UniformPerLength);

enum class ShapeKind { Circle, Sphere, Segment, Torus, Dumbbell, CrossingLines, CustomGraph };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& name);

/// How crossing lines treat the intersection point (N odd).
enum class CrossingCentre {
  Split,   ///< one atom per line at the origin, each with its line's plane and full mass
  Single,  ///< one atom at the origin carrying the first line's plane
};

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Circle;
  int samples = 100;  ///< per line for crossing lines
  MassMode mass_mode = MassMode::UniformPerLength;
  double radius = 1.0;        ///< circle, sphere, torus major radius
  double minor_radius = 0.3;  ///< torus
  double neck = 0.3;          ///< dumbbell half-width at x = 0
  double angle = 1.5707963267948966;
  double half_length = 1.0;   ///< segment and crossing lines
  CrossingCentre centre = CrossingCentre::Split;
  /// custom graph y = Σ cₖ xᵏ on [x_min, x_max]
  std::vector<double> coefficients{0.0, 0.0, 0.5};
  double x_min = -1.0;
  double x_max = 1.0;

  void validate() const;
};

Varifold generate(const ShapeSpec& spec);

/// Adds independent uniform noise in [−a, a] to every coordinate of every position.
Varifold jitter(const Varifold& v, double amplitude, std::uint64_t seed);

}  // namespace vflow
