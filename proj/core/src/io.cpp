#include "vflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vflow/errors.hpp"
#include "vflow/ingest.hpp"

namespace vflow {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

ordered atom_json(const Atom& a) {
  ordered j;
  j["x"] = std::vector<double>(a.position.data(), a.position.data() + a.position.size());
  ordered frame = ordered::array();
  const Mat& f = a.plane.frame();
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(f.cols()));
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = f(r, c);
    }
    frame.push_back(row);
  }
  j["frame"] = frame;
  j["m"] = a.mass;
  return j;
}

ordered atoms_json(const Varifold& v) {
  ordered atoms = ordered::array();
  for (const Atom& a : v.atoms()) {
    atoms.push_back(atom_json(a));
  }
  return atoms;
}

ordered diagnostics_json(const StepDiagnostics& s) {
  ordered j;
  j["step"] = s.index;
  j["t"] = s.t;
  j["tau"] = s.tau;
  j["mass_before"] = s.mass_before;
  j["mass_after"] = s.mass_after;
  j["dissipation"] = s.dissipation;
  j["first_variation"] = s.first_variation;
  j["certificate"] = s.certificate;
  j["h_sup"] = s.h_sup;
  j["dh_sup"] = s.dh_sup;
  j["jacobian_min"] = s.jacobian_min;
  j["jacobian_max"] = s.jacobian_max;
  j["mass_bound_ok"] = s.mass_bound_ok;
  j["gate"] = s.gate;
  return j;
}

StepDiagnostics diagnostics_from(const json& j) {
  StepDiagnostics s;
  s.index = j.at("step").get<std::size_t>();
  s.t = j.at("t").get<double>();
  s.tau = j.at("tau").get<double>();
  s.mass_before = j.at("mass_before").get<double>();
  s.mass_after = j.at("mass_after").get<double>();
  s.dissipation = j.at("dissipation").get<double>();
  s.first_variation = j.at("first_variation").get<double>();
  s.certificate = j.at("certificate").get<double>();
  s.h_sup = j.at("h_sup").get<double>();
  s.dh_sup = j.at("dh_sup").get<double>();
  s.jacobian_min = j.at("jacobian_min").get<double>();
  s.jacobian_max = j.at("jacobian_max").get<double>();
  s.mass_bound_ok = j.at("mass_bound_ok").get<bool>();
  s.gate = j.at("gate").get<std::string>();
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open input file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string varifold_to_json(const Varifold& v) {
  ordered j;
  j["d"] = v.dim();
  j["n"] = v.ambient();
  j["atoms"] = atoms_json(v);
  return j.dump(1);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParseError("cannot write output file '" + path + "'");
  }
  out << text;
  if (!out) {
    throw ParseError("failed writing '" + path + "'");
  }
}

void save_varifold(const std::string& path, const Varifold& v) {
  write_text_file(path, varifold_to_json(v) + "\n");
}

Varifold load_varifold(const std::string& path) {
  const RawCloud cloud = load(path);
  if (!cloud.frames) {
    throw ParseError(path + ": atoms carry no frames (estimate planes first)");
  }
  if (cloud.points.empty()) {
    if (cloud.d < 1) {
      throw ParseError(path + ": empty varifold needs 'd' and 'n' fields");
    }
    return Varifold(cloud.d, cloud.n);
  }
  return to_varifold(cloud);
}

std::string trajectory_to_json(const Trajectory& traj, const std::string& config_json) {
  ordered j;
  try {
    j["config"] = ordered::parse(config_json);
  } catch (const ordered::parse_error& e) {
    throw InvalidArgument(std::string("trajectory config is not valid JSON: ") + e.what());
  }
  j["d"] = traj.d;
  j["n"] = traj.n;
  j["eps"] = traj.eps;
  ordered snaps = ordered::array();
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    ordered s;
    s["t"] = traj.times[i];
    s["atoms"] = atoms_json(traj.snapshots[i]);
    snaps.push_back(std::move(s));
  }
  j["snapshots"] = std::move(snaps);
  ordered diags = ordered::array();
  for (const StepDiagnostics& s : traj.diagnostics) {
    diags.push_back(diagnostics_json(s));
  }
  j["diagnostics"] = std::move(diags);
  if (traj.failure) {
    const FailureRecord& f = *traj.failure;
    j["failure"] = {{"step", f.step}, {"t", f.t}, {"tau", f.tau}, {"reason", f.reason},
                    {"value", f.value}, {"limit", f.limit}};
  } else {
    j["failure"] = nullptr;
  }
  j["warnings"] = traj.warnings;
  return j.dump(1);
}

void save_trajectory(const std::string& path, const Trajectory& traj, const std::string& config_json) {
  write_text_file(path, trajectory_to_json(traj, config_json) + "\n");
}

LoadedTrajectory parse_trajectory(const std::string& text, const std::string& source) {
  ordered doc;
  try {
    doc = ordered::parse(text);
  } catch (const ordered::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  LoadedTrajectory out;
  Trajectory& traj = out.trajectory;
  try {
    out.config_json = doc.at("config").dump();
    traj.d = doc.at("d").get<int>();
    traj.n = doc.at("n").get<int>();
    traj.eps = doc.at("eps").get<double>();
    for (const auto& snap : doc.at("snapshots")) {
      ordered single;
      single["d"] = traj.d;
      single["n"] = traj.n;
      single["atoms"] = snap.at("atoms");
      const RawCloud cloud = parse_json(single.dump(), source);
      traj.times.push_back(snap.at("t").get<double>());
      traj.snapshots.push_back(cloud.points.empty() ? Varifold(traj.d, traj.n) : to_varifold(cloud));
    }
    for (const auto& d : doc.at("diagnostics")) {
      traj.diagnostics.push_back(diagnostics_from(d));
    }
    if (doc.contains("failure") && !doc["failure"].is_null()) {
      const auto& f = doc["failure"];
      traj.failure = FailureRecord{f.at("step").get<std::size_t>(), f.at("t").get<double>(),
                                   f.at("tau").get<double>(),       f.at("reason").get<std::string>(),
                                   f.at("value").get<double>(),     f.at("limit").get<double>()};
    }
    if (doc.contains("warnings")) {
      traj.warnings = doc["warnings"].get<std::vector<std::string>>();
    }
  } catch (const ordered::exception& e) {
    throw ParseError(source + ": malformed trajectory: " + e.what());
  }
  return out;
}

LoadedTrajectory load_trajectory(const std::string& path) { return parse_trajectory(read_file(path), path); }

void write_diagnostics_csv(std::ostream& out, const Trajectory& traj) {
  out << "step,t,tau,mass_before,mass_after,dissipation,first_variation,certificate,h_sup,dh_sup,"
         "jacobian_min,jacobian_max,mass_bound_ok,gate\n";
  for (const StepDiagnostics& s : traj.diagnostics) {
    out << s.index << ',' << format_double(s.t) << ',' << format_double(s.tau) << ','
        << format_double(s.mass_before) << ',' << format_double(s.mass_after) << ','
        << format_double(s.dissipation) << ',' << format_double(s.first_variation) << ','
        << format_double(s.certificate) << ',' << format_double(s.h_sup) << ',' << format_double(s.dh_sup)
        << ',' << format_double(s.jacobian_min) << ',' << format_double(s.jacobian_max) << ','
        << (s.mass_bound_ok ? 1 : 0) << ',' << s.gate << '\n';
  }
}

void write_varifold_csv(std::ostream& out, const Varifold& v) {
  const int n = v.ambient();
  const int d = v.dim();
  for (int i = 1; i <= n; ++i) {
    out << (i > 1 ? "," : "") << 'x' << i;
  }
  const bool wide = n > 9 || d > 9;
  for (int r = 1; r <= d; ++r) {
    for (int c = 1; c <= n; ++c) {
      out << ",t" << r << (wide ? "_" : "") << c;
    }
  }
  out << ",m\n";
  for (const Atom& a : v.atoms()) {
    for (int i = 0; i < n; ++i) {
      out << (i > 0 ? "," : "") << format_double(a.position(i));
    }
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < n; ++c) {
        out << ',' << format_double(a.plane.frame()(r, c));
      }
    }
    out << ',' << format_double(a.mass) << '\n';
  }
}

void write_plot_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,atom_id";
  for (int i = 1; i <= traj.n; ++i) {
    out << ",x" << i;
  }
  out << ",m,h_norm\n";
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const Varifold& v = traj.snapshots[s];
    const bool has_field = s < traj.fields.size();
    for (std::size_t j = 0; j < v.size(); ++j) {
      out << format_double(traj.times[s]) << ',' << j;
      for (Eigen::Index i = 0; i < v[j].position.size(); ++i) {
        out << ',' << format_double(v[j].position(i));
      }
      out << ',' << format_double(v[j].mass) << ',';
      if (has_field) {
        out << format_double(traj.fields[s].values[j].norm());
      }
      out << '\n';
    }
  }
}

}  // namespace vflow
