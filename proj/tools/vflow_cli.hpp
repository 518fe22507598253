#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vflow/flow.hpp"
#include "vflow/ingest.hpp"

namespace vflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitCertificateAbort = 2;

inline constexpr int kSchemaVersion = 1;

struct InputSpec {
  std::optional<std::string> file;
  std::optional<ShapeSpec> shape;
  /// When set, planes are estimated from the file's points.
  int planes_d = 0;
  int planes_k = 0;
  MassMode planes_mass = MassMode::UniformPerLength;
  /// Uniform position noise amplitude, drawn with the run seed.
  double jitter = 0.0;
};

struct OutputSpec {
  std::string trajectory;
  std::string diagnostics;
  std::string csv;
};

struct RefineSpec {
  double horizon = 0.25;
  int first_level = 3;
  int last_level = 5;
};

struct RunConfig {
  InputSpec input;
  FlowConfig flow;
  OutputSpec outputs;
  RefineSpec refine;
  std::uint64_t seed = 0;
  /// The parsed document re-serialised, embedded in trajectory files.
  std::string canonical_json;
};

/// Validates the whole document (unknown keys are errors) before any compute.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);

/// The flow section alone, as embedded in a trajectory's config.
FlowConfig parse_flow_section(const std::string& json_text, const std::string& source);

Varifold build_input(const RunConfig& config);

int cmd_generate(const ShapeSpec& spec, const std::string& output, std::ostream& out, std::ostream& err);
int cmd_evolve(const std::string& config_path, std::ostream& out, std::ostream& err, bool quiet = true);
int cmd_distance(const std::string& file_a, const std::string& file_b, std::ostream& out, std::ostream& err);
int cmd_refine_study(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_kernel_check(int n, double eps, std::size_t samples, std::uint64_t seed, std::ostream& out,
                     std::ostream& err);

struct DiagnoseOptions {
  std::string phi = "constant";  ///< constant | gaussian | polynomial
  std::vector<double> center;
  double width = 0.5;
  std::optional<double> a;
  std::optional<double> b;
};

int cmd_diagnose(const std::string& trajectory_path, const DiagnoseOptions& options, std::ostream& out,
                 std::ostream& err);

/// Full command line entry point (used by main and by tests).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vflow::cli
