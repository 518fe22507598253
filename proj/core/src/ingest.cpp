#include "vflow/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

bool parse_number(const std::string& s, double& value) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

// Returns an orthonormal frame, repairing small defects.
Mat checked_frame(const Mat& frame, std::size_t atom, const std::string& source) {
  const Mat gram = frame * frame.transpose();
  const double err = max_abs(gram - Mat::Identity(frame.rows(), frame.rows()));
  if (err <= 1e-12) {
    return frame;
  }
  if (err <= kFrameRepairTol) {
    return Plane::from_spanning_rows(frame).frame();
  }
  std::ostringstream os;
  os << source << ": frame of atom " << atom << " is not orthonormal (|F F^T - I|_inf = " << err << ")";
  throw ParseError(os.str());
}

struct Column {
  enum Kind { X, T, M } kind;
  int row = 0;
  int col = 0;
};

bool parse_index(const std::string& s, int& out) {
  if (s.empty()) {
    return false;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && out >= 1;
}

Column classify(const std::string& name, const std::string& source) {
  Column c{Column::M};
  if (name == "m") {
    return c;
  }
  if (name.size() >= 2 && name[0] == 'x') {
    c.kind = Column::X;
    if (parse_index(name.substr(1), c.col)) {
      return c;
    }
  }
  if (name.size() >= 3 && name[0] == 't') {
    c.kind = Column::T;
    const std::string rest = name.substr(1);
    const auto us = rest.find('_');
    bool ok = false;
    if (us != std::string::npos) {
      ok = parse_index(rest.substr(0, us), c.row) && parse_index(rest.substr(us + 1), c.col);
    } else if (rest.size() == 2) {
      ok = parse_index(rest.substr(0, 1), c.row) && parse_index(rest.substr(1, 1), c.col);
    }
    if (ok) {
      return c;
    }
  }
  throw ParseError(source + ": unknown CSV column '" + name + "' (expected x<i>, t<r><c> or m)");
}

Vec json_vector(const json& j, const std::string& what) {
  if (!j.is_array()) {
    throw ParseError(what + " must be an array of numbers");
  }
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ParseError(what + " must be an array of numbers");
    }
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

std::string atom_context(const std::string& source, std::size_t i) {
  return source + ": atom " + std::to_string(i);
}

}  // namespace

RawCloud parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Column> columns;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      break;
    }
  }
  if (trim(line).empty()) {
    throw ParseError(source + ": empty CSV file");
  }
  const std::vector<std::string> header = split(line);
  int n = 0;
  int d = 0;
  bool has_mass = false;
  for (const std::string& name : header) {
    columns.push_back(classify(name, source));
    const Column& c = columns.back();
    if (c.kind == Column::X) {
      n = std::max(n, c.col);
    } else if (c.kind == Column::T) {
      d = std::max(d, c.row);
    } else {
      if (has_mass) {
        throw ParseError(source + ": duplicate mass column");
      }
      has_mass = true;
    }
  }
  std::vector<int> seen_x(n, 0);
  int t_count = 0;
  for (const Column& c : columns) {
    if (c.kind == Column::X) {
      ++seen_x[c.col - 1];
    } else if (c.kind == Column::T) {
      if (c.col > n) {
        throw ParseError(source + ": frame column index exceeds the number of coordinates");
      }
      ++t_count;
    }
  }
  if (n == 0 || std::any_of(seen_x.begin(), seen_x.end(), [](int s) { return s != 1; })) {
    throw ParseError(source + ": header must name each of x1..xn exactly once");
  }
  if (d > 0 && t_count != d * n) {
    throw ParseError(source + ": frame columns must cover t11..tdn");
  }

  RawCloud cloud;
  cloud.n = n;
  cloud.d = d;
  if (d > 0) {
    cloud.frames.emplace();
  }
  if (has_mass) {
    cloud.masses.emplace();
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const std::vector<std::string> fields = split(line);
    std::ostringstream where;
    where << source << ": row " << row << " (line " << line_no << ")";
    if (fields.size() != columns.size()) {
      throw ParseError(where.str() + ": expected " + std::to_string(columns.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    Vec x(n);
    Mat frame = Mat::Zero(std::max(d, 1), n);
    double mass = 1.0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double value = 0.0;
      if (!parse_number(fields[c], value)) {
        throw ParseError(where.str() + ", column '" + header[c] + "': not a number: '" + fields[c] + "'");
      }
      const Column& col = columns[c];
      if (col.kind == Column::X) {
        x(col.col - 1) = value;
      } else if (col.kind == Column::T) {
        frame(col.row - 1, col.col - 1) = value;
      } else {
        if (value < 0.0) {
          throw ParseError(where.str() + ": negative mass");
        }
        mass = value;
      }
    }
    cloud.points.push_back(x);
    if (d > 0) {
      cloud.frames->push_back(checked_frame(frame, row, source));
    }
    if (has_mass) {
      cloud.masses->push_back(mass);
    }
    ++row;
  }
  return cloud;
}

RawCloud parse_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError(source + ": top level must be an object");
  }
  const json* atoms = nullptr;
  if (doc.contains("snapshots")) {
    const json& snaps = doc["snapshots"];
    if (!snaps.is_array() || snaps.empty()) {
      throw ParseError(source + ": trajectory has no snapshots");
    }
    atoms = &snaps.back()["atoms"];
  } else if (doc.contains("atoms")) {
    atoms = &doc["atoms"];
  } else {
    throw ParseError(source + ": expected an 'atoms' or 'snapshots' field");
  }
  if (!atoms->is_array()) {
    throw ParseError(source + ": 'atoms' must be an array");
  }
  RawCloud cloud;
  cloud.n = doc.contains("n") ? doc["n"].get<int>() : 0;
  cloud.d = doc.contains("d") ? doc["d"].get<int>() : 0;
  bool any_frame = false;
  bool any_mass = false;
  for (const json& a : *atoms) {
    any_frame = any_frame || a.contains("frame");
    any_mass = any_mass || a.contains("m");
  }
  if (any_frame) {
    cloud.frames.emplace();
  }
  if (any_mass) {
    cloud.masses.emplace();
  }
  for (std::size_t i = 0; i < atoms->size(); ++i) {
    const json& a = (*atoms)[i];
    const std::string ctx = atom_context(source, i);
    if (!a.is_object() || !a.contains("x")) {
      throw ParseError(ctx + ": missing 'x'");
    }
    Vec x = json_vector(a["x"], ctx + " 'x'");
    if (cloud.n == 0) {
      cloud.n = static_cast<int>(x.size());
    }
    if (x.size() != cloud.n || !x.allFinite()) {
      throw ParseError(ctx + ": 'x' must hold " + std::to_string(cloud.n) + " finite numbers");
    }
    cloud.points.push_back(std::move(x));
    if (any_frame) {
      if (!a.contains("frame") || !a["frame"].is_array() || a["frame"].empty()) {
        throw ParseError(ctx + ": missing 'frame'");
      }
      const json& rows = a["frame"];
      if (cloud.d == 0) {
        cloud.d = static_cast<int>(rows.size());
      }
      if (static_cast<int>(rows.size()) != cloud.d) {
        throw ParseError(ctx + ": 'frame' must have " + std::to_string(cloud.d) + " rows");
      }
      Mat frame(cloud.d, cloud.n);
      for (int r = 0; r < cloud.d; ++r) {
        const Vec row = json_vector(rows[r], ctx + " 'frame'");
        if (row.size() != cloud.n) {
          throw ParseError(ctx + ": frame rows must have " + std::to_string(cloud.n) + " entries");
        }
        frame.row(r) = row.transpose();
      }
      cloud.frames->push_back(checked_frame(frame, i, source));
    }
    if (any_mass) {
      if (!a.contains("m") || !a["m"].is_number() || a["m"].get<double>() < 0.0) {
        throw ParseError(ctx + ": 'm' must be a nonnegative number");
      }
      cloud.masses->push_back(a["m"].get<double>());
    }
  }
  if (cloud.points.empty() && cloud.n == 0) {
    throw ParseError(source + ": empty atom list without an 'n' field");
  }
  return cloud;
}

RawCloud load(const std::string& path, std::optional<CloudFormat> format) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open input file '" + path + "'");
  }
  CloudFormat fmt;
  if (format) {
    fmt = *format;
  } else if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    fmt = CloudFormat::Csv;
  } else if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    fmt = CloudFormat::Json;
  } else {
    throw ParseError("cannot infer the format of '" + path + "' (use .csv or .json)");
  }
  if (fmt == CloudFormat::Csv) {
    return parse_csv(in, path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_json(buffer.str(), path);
}

Varifold to_varifold(const RawCloud& cloud) {
  if (!cloud.frames) {
    throw InvalidArgument("cloud carries no frames; use estimate_planes");
  }
  if (cloud.d < 1) {
    throw DimensionMismatch("cloud frames have no rows");
  }
  Varifold v(cloud.d, cloud.n);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double m = cloud.masses ? (*cloud.masses)[i] : 1.0;
    v.add({cloud.points[i], Plane::from_frame((*cloud.frames)[i], 1e-10), m});
  }
  return v;
}

std::string to_string(MassMode mode) {
  return mode == MassMode::UniformPerLength ? "uniform-per-length" : "unit-per-atom";
}

MassMode parse_mass_mode(const std::string& name) {
  if (name == "uniform-per-length") {
    return MassMode::UniformPerLength;
  }
  if (name == "unit-per-atom") {
    return MassMode::UnitPerAtom;
  }
  throw InvalidArgument("unknown mass mode '" + name + "'");
}

Varifold estimate_planes(const RawCloud& cloud, int d, int k, MassMode mode) {
  const std::size_t count = cloud.size();
  if (d < 1 || d > cloud.n) {
    throw DimensionMismatch("estimate_planes: needs 1 <= d <= n");
  }
  if (k < d + 1) {
    throw InvalidArgument("estimate_planes: k must be at least d + 1");
  }
  if (count <= static_cast<std::size_t>(k)) {
    throw InvalidArgument("estimate_planes: needs more points than neighbours");
  }
  const int n = cloud.n;
  const double ball = std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
  Varifold v(d, n);
  std::vector<std::pair<double, std::size_t>> order(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) {
      order[j] = {(cloud.points[j] - cloud.points[i]).squaredNorm(), j};
    }
    order[i].first = -1.0;  // the point itself sorts first
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end());
    Vec mean = Vec::Zero(n);
    for (int q = 0; q <= k; ++q) {
      mean += cloud.points[order[q].second];
    }
    mean /= static_cast<double>(k + 1);
    Mat cov = Mat::Zero(n, n);
    for (int q = 0; q <= k; ++q) {
      const Vec c = cloud.points[order[q].second] - mean;
      cov += c * c.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    const Vec& lambda = eig.eigenvalues();  // ascending
    const double top = lambda(n - 1);
    const double scale = std::max(1.0, mean.squaredNorm());
    if (!(top > 1e-24 * scale) || !(lambda(n - d) > 1e-12 * top)) {
      throw DegenerateNeighborhood(i);
    }
    Mat frame(d, n);
    for (int r = 0; r < d; ++r) {
      frame.row(r) = eig.eigenvectors().col(n - 1 - r).transpose();
    }
    double mass = 1.0;
    if (cloud.masses) {
      mass = (*cloud.masses)[i];
    } else if (mode == MassMode::UniformPerLength) {
      mass = ball * std::pow(std::sqrt(order[k].first), d) / k;
    }
    v.add({cloud.points[i], Plane::from_spanning_rows(frame), mass});
  }
  return v;
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Segment: return "segment";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Dumbbell: return "dumbbell";
    case ShapeKind::CrossingLines: return "crossing-lines";
    case ShapeKind::CustomGraph: return "custom-graph";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(const std::string& name) {
  for (ShapeKind k : {ShapeKind::Circle, ShapeKind::Sphere, ShapeKind::Segment, ShapeKind::Torus,
                      ShapeKind::Dumbbell, ShapeKind::CrossingLines, ShapeKind::CustomGraph}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw InvalidArgument("unknown shape kind '" + name + "'");
}

void ShapeSpec::validate() const {
  if (samples < 3) {
    throw InvalidArgument("shape: needs at least 3 samples");
  }
  if (!(radius > 0.0) || !(minor_radius > 0.0) || !(neck > 0.0) || !(half_length > 0.0)) {
    throw InvalidArgument("shape: parameters must be positive");
  }
  if (kind == ShapeKind::Torus && !(minor_radius < radius)) {
    throw InvalidArgument("shape: torus needs minor radius < radius");
  }
  if (kind == ShapeKind::Dumbbell && !(neck < 1.0)) {
    throw InvalidArgument("shape: dumbbell neck must be below 1");
  }
  if (kind == ShapeKind::CrossingLines && !(std::sin(angle) != 0.0)) {
    throw InvalidArgument("shape: crossing lines must not be parallel");
  }
  if (kind == ShapeKind::CustomGraph && (coefficients.empty() || !(x_max > x_min))) {
    throw InvalidArgument("shape: custom graph needs coefficients and x_min < x_max");
  }
}

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Plane line_plane(double tx, double ty) {
  Mat f(1, 2);
  f << tx, ty;
  return Plane::from_spanning_rows(f);
}

// Tangent plane of a surface in ℝ³ with unit normal nu.
Plane surface_plane(const Eigen::Vector3d& nu) {
  const Eigen::Vector3d helper =
      std::abs(nu.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d a = helper.cross(nu).normalized();
  const Eigen::Vector3d b = nu.cross(a).normalized();
  Mat f(2, 3);
  f.row(0) = a.transpose();
  f.row(1) = b.transpose();
  return Plane::from_spanning_rows(f);
}

// Arc-length resampling of a planar curve γ(t), t ∈ [t0, t1].
template <class Curve, class Tangent>
std::vector<std::pair<Vec, Plane>> resample(Curve gamma, Tangent tangent, double t0, double t1, int count,
                                            bool closed, double& length) {
  constexpr int kFine = 20000;
  std::vector<double> ts(kFine + 1);
  std::vector<double> cum(kFine + 1, 0.0);
  Vec prev = gamma(t0);
  ts[0] = t0;
  for (int i = 1; i <= kFine; ++i) {
    ts[i] = t0 + (t1 - t0) * i / kFine;
    const Vec cur = gamma(ts[i]);
    cum[i] = cum[i - 1] + (cur - prev).norm();
    prev = cur;
  }
  length = cum.back();
  std::vector<std::pair<Vec, Plane>> out;
  for (int k = 0; k < count; ++k) {
    const double s = closed ? length * k / count : length * (k + 0.5) / count;
    const auto it = std::lower_bound(cum.begin(), cum.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(cum.begin(), it));
    i = std::clamp<std::size_t>(i, 1, kFine);
    const double seg = cum[i] - cum[i - 1];
    const double w = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
    const double t = ts[i - 1] + w * (ts[i] - ts[i - 1]);
    const Vec tan = tangent(t);
    out.emplace_back(gamma(t), line_plane(tan(0), tan(1)));
  }
  return out;
}

double uniform_mass(const ShapeSpec& spec, double total, std::size_t count) {
  return spec.mass_mode == MassMode::UnitPerAtom ? 1.0 : total / static_cast<double>(count);
}

Varifold circle(const ShapeSpec& spec) {
  const int n = spec.samples;
  const double r = spec.radius;
  const double m = uniform_mass(spec, 2.0 * std::numbers::pi * r, n);
  Varifold v(1, 2);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    v.add({vec2(r * std::cos(a), r * std::sin(a)), line_plane(-std::sin(a), std::cos(a)), m});
  }
  return v;
}

Varifold sphere(const ShapeSpec& spec) {
  const int n = spec.samples;
  const double r = spec.radius;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double m = uniform_mass(spec, 4.0 * std::numbers::pi * r * r, n);
  Varifold v(2, 3);
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    const Eigen::Vector3d nu(rho * std::cos(phi), rho * std::sin(phi), z);
    v.add({Vec(r * nu), surface_plane(nu), m});
  }
  return v;
}

Varifold segment(const ShapeSpec& spec) {
  const int n = spec.samples;
  const double len = 2.0 * spec.half_length;
  const double s = len / n;
  const double m = uniform_mass(spec, len, n);
  Varifold v(1, 2);
  for (int i = 0; i < n; ++i) {
    v.add({vec2(-spec.half_length + (i + 0.5) * s, 0.0), line_plane(1.0, 0.0), m});
  }
  return v;
}

Varifold torus(const ShapeSpec& spec) {
  const double big = spec.radius;
  const double small = spec.minor_radius;
  const int n = spec.samples;
  const int max_rings = std::max(1, n / 3);
  const int rings = std::clamp(static_cast<int>(std::lround(std::sqrt(n * small / big))),
                               std::min(3, max_rings), max_rings);
  const double area = 4.0 * std::numbers::pi * std::numbers::pi * big * small;
  const double m = uniform_mass(spec, area, n);
  Varifold out(2, 3);
  for (int i = 0; i < rings; ++i) {
    // Equal-area rings: (R v + r sin v) / (2πR) = (i + ½) / rings.
    const double target = 2.0 * std::numbers::pi * big * (i + 0.5) / rings;
    double vv = 2.0 * std::numbers::pi * (i + 0.5) / rings;
    for (int it = 0; it < 50; ++it) {
      const double f = big * vv + small * std::sin(vv) - target;
      vv -= f / (big + small * std::cos(vv));
    }
    const int per_ring = n / rings + (i < n % rings ? 1 : 0);
    for (int j = 0; j < per_ring; ++j) {
      const double u = 2.0 * std::numbers::pi * (j + 0.5 * (i % 2)) / per_ring;
      const Eigen::Vector3d nu(std::cos(vv) * std::cos(u), std::cos(vv) * std::sin(u), std::sin(vv));
      const Eigen::Vector3d x((big + small * std::cos(vv)) * std::cos(u),
                              (big + small * std::cos(vv)) * std::sin(u), small * std::sin(vv));
      out.add({Vec(x), surface_plane(nu), m});
    }
  }
  return out;
}

Varifold dumbbell(const ShapeSpec& spec) {
  const double neck = spec.neck;
  const auto gamma = [neck](double t) {
    const double c = std::cos(t);
    return vec2(1.6 * c, std::sin(t) * (neck + (1.0 - neck) * c * c));
  };
  const auto tangent = [neck](double t) {
    const double c = std::cos(t);
    const double s = std::sin(t);
    return vec2(-1.6 * s, c * (neck + (1.0 - neck) * c * c) - 2.0 * (1.0 - neck) * s * s * c);
  };
  double length = 0.0;
  const auto samples = resample(gamma, tangent, 0.0, 2.0 * std::numbers::pi, spec.samples, true, length);
  const double m = uniform_mass(spec, length, samples.size());
  Varifold v(1, 2);
  for (const auto& [x, plane] : samples) {
    v.add({x, plane, m});
  }
  return v;
}

Varifold crossing_lines(const ShapeSpec& spec) {
  const int n = spec.samples;
  const double len = 2.0 * spec.half_length;
  const double s = len / n;
  const double m = uniform_mass(spec, len, n);
  const double ca = std::cos(spec.angle);
  const double sa = std::sin(spec.angle);
  const bool has_centre = n % 2 == 1;
  Varifold v(1, 2);
  for (int line = 0; line < 2; ++line) {
    const double tx = line == 0 ? 1.0 : ca;
    const double ty = line == 0 ? 0.0 : sa;
    for (int i = 0; i < n; ++i) {
      const bool centre = has_centre && 2 * i + 1 == n;
      if (centre && line == 1 && spec.centre == CrossingCentre::Single) {
        continue;
      }
      const double p = centre ? 0.0 : -spec.half_length + (i + 0.5) * s;
      v.add({vec2(p * tx, p * ty), line_plane(tx, ty), m});
    }
  }
  return v;
}

Varifold custom_graph(const ShapeSpec& spec) {
  const std::vector<double>& c = spec.coefficients;
  const auto poly = [&c](double x) {
    double y = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
      y = y * x + c[k];
    }
    return y;
  };
  const auto dpoly = [&c](double x) {
    double y = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
      y = y * x + static_cast<double>(k) * c[k];
    }
    return y;
  };
  const auto gamma = [&](double t) { return vec2(t, poly(t)); };
  const auto tangent = [&](double t) { return vec2(1.0, dpoly(t)); };
  double length = 0.0;
  const auto samples = resample(gamma, tangent, spec.x_min, spec.x_max, spec.samples, false, length);
  const double m = uniform_mass(spec, length, samples.size());
  Varifold v(1, 2);
  for (const auto& [x, plane] : samples) {
    v.add({x, plane, m});
  }
  return v;
}

}  // namespace

Varifold generate(const ShapeSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ShapeKind::Circle: return circle(spec);
    case ShapeKind::Sphere: return sphere(spec);
    case ShapeKind::Segment: return segment(spec);
    case ShapeKind::Torus: return torus(spec);
    case ShapeKind::Dumbbell: return dumbbell(spec);
    case ShapeKind::CrossingLines: return crossing_lines(spec);
    case ShapeKind::CustomGraph: return custom_graph(spec);
  }
  throw InvalidArgument("unknown shape kind");
}

Varifold jitter(const Varifold& v, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) {
    throw InvalidArgument("jitter: amplitude must be nonnegative");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-amplitude, amplitude);
  std::vector<Atom> atoms;
  atoms.reserve(v.size());
  for (const Atom& a : v.atoms()) {
    Vec x = a.position;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) += noise(rng);
    }
    atoms.push_back({std::move(x), a.plane, a.mass});
  }
  return Varifold(v.dim(), v.ambient(), std::move(atoms));
}

}  // namespace vflow
