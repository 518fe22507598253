#pragma once

#include <iosfwd>
#include <string>

#include "vflow/flow.hpp"
#include "vflow/varifold.hpp"

namespace vflow {

/// %.17g, enough digits for an exact round trip.
std::string format_double(double x);

/// {d, n, atoms: [{x, frame, m}]}.
std::string varifold_to_json(const Varifold& v);
void save_varifold(const std::string& path, const Varifold& v);
/// Reads a varifold document, a trajectory (last snapshot) or a CSV with frames.
Varifold load_varifold(const std::string& path);

/// {config, d, n, eps, snapshots: [{t, atoms}], diagnostics: [...], failure, warnings}.
/// `config_json` must be a JSON document; it is embedded verbatim.
std::string trajectory_to_json(const Trajectory& traj, const std::string& config_json = "{}");
void save_trajectory(const std::string& path, const Trajectory& traj,
                     const std::string& config_json = "{}");

struct LoadedTrajectory {
  Trajectory trajectory;  ///< without velocity fields
  std::string config_json;
};

LoadedTrajectory parse_trajectory(const std::string& text, const std::string& source = "<json>");
LoadedTrajectory load_trajectory(const std::string& path);

/// One row per step.
void write_diagnostics_csv(std::ostream& out, const Trajectory& traj);
/// Columns t, atom_id, x1..xn, m, h_norm; h_norm is empty where no field is stored.
void write_plot_csv(std::ostream& out, const Trajectory& traj);

/// CSV with header x1..xn, t11..tdn, m (readable by load()).
void write_varifold_csv(std::ostream& out, const Varifold& v);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace vflow
