#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "vflow/ingest.hpp"
#include "vflow/io.hpp"
#include "vflow_cli.hpp"

namespace vflow::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "vflow");
    std::vector<const char*> argv;
    for (const std::string& a : args) {
      argv.push_back(a.c_str());
    }
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string circle_config(int steps, double horizon, const std::string& extra = "", int samples = 40) const {
    std::ostringstream os;
    os << R"({"schema": 1, "input": {"shape": {"kind": "circle", "samples": )" << samples << "}}, "
       << R"("flow": {"eps": 0.1, "subdivision": {"uniform": {"horizon": )" << horizon
       << R"(, "steps": )" << steps << "}}" << extra << "}, "
       << R"("outputs": {"trajectory": ")" << path("traj.json") << R"(", "diagnostics": ")"
       << path("diag.csv") << R"(", "csv": ")" << path("plot.csv") << R"("}})";
    return os.str();
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, EvolveWritesOutputs) {
  const std::string cfg = write("c.json", circle_config(5, 0.01));
  EXPECT_EQ(invoke({"evolve", cfg}), kExitOk) << err_.str();
  ASSERT_TRUE(fs::exists(path("traj.json")));
  ASSERT_TRUE(fs::exists(path("plot.csv")));
  const std::string diag = slurp(path("diag.csv"));
  EXPECT_EQ(std::count(diag.begin(), diag.end(), '\n'), 6);
  const json doc = json::parse(slurp(path("traj.json")));
  EXPECT_EQ(doc["config"]["schema"], 1);
  EXPECT_EQ(doc["snapshots"].size(), 6u);
}

TEST_F(CliTest, EvolveIsDeterministic) {
  const std::string cfg = write("c.json", circle_config(3, 0.01, R"(, "dissipation": true)"));
  ASSERT_EQ(invoke({"evolve", cfg}), kExitOk) << err_.str();
  const std::string first = slurp(path("traj.json"));
  ASSERT_EQ(invoke({"--threads", "1", "evolve", cfg}), kExitOk);
  EXPECT_EQ(slurp(path("traj.json")), first);
}

TEST_F(CliTest, CertificateAbortKeepsPartialOutputs) {
  const std::string cfg = write("c.json", circle_config(1, 0.9));
  EXPECT_EQ(invoke({"evolve", cfg}), kExitCertificateAbort);
  const json doc = json::parse(slurp(path("traj.json")));
  ASSERT_FALSE(doc["failure"].is_null());
  EXPECT_EQ(doc["failure"]["step"], 0);
  EXPECT_NE(err_.str().find("step 0"), std::string::npos) << err_.str();
}

TEST_F(CliTest, MissingInputFileNamesPath) {
  const std::string cfg = write("c.json", R"({"schema": 1, "input": {"file": "nowhere.csv"}})");
  EXPECT_EQ(invoke({"evolve", cfg}), kExitInputError);
  EXPECT_NE(err_.str().find("nowhere.csv"), std::string::npos) << err_.str();
}

TEST_F(CliTest, SchemaValidation) {
  const std::string shape = R"("input": {"shape": {"kind": "circle"}})";
  EXPECT_EQ(invoke({"evolve", write("a.json", "{" + shape + "}")}), kExitInputError);
  EXPECT_NE(err_.str().find("schema"), std::string::npos);
  EXPECT_EQ(invoke({"evolve", write("b.json", R"({"schema": 2, )" + shape + "}")}), kExitInputError);
  EXPECT_EQ(invoke({"evolve", write("c.json", R"({"schema": 1, "colour": 3, )" + shape + "}")}), kExitInputError);
  EXPECT_NE(err_.str().find("colour"), std::string::npos);
  EXPECT_EQ(invoke({"evolve", write("d.json", R"({"schema": 1, "flow": {"epsilon": 0.1}, )" + shape + "}")}),
            kExitInputError);
  EXPECT_EQ(invoke({"evolve", write("e.json", R"({"schema": 1, "flow": {"eps": 1.5}, )" + shape + "}")}),
            kExitInputError);
  EXPECT_EQ(invoke({"evolve", write("f.json", "{not json")}), kExitInputError);
  EXPECT_EQ(invoke({"evolve", path("absent.json")}), kExitInputError);
}

TEST_F(CliTest, ParseRunConfigSections) {
  const RunConfig cfg = parse_run_config(R"({
    "schema": 1,
    "input": {"shape": {"kind": "crossing-lines", "samples": 11, "centre": "single"}},
    "flow": {"eps": 0.2, "subdivision": {"dyadic": {"horizon": 0.5, "level": 3}},
             "quadrature": {"rule": "tensor-midpoint", "points_per_axis": 8},
             "step_mode": "strict-paper", "c3": 0.5, "retry_halving": true},
    "refine": {"horizon": 0.1, "first_level": 1, "last_level": 2},
    "seed": 99})");
  ASSERT_TRUE(cfg.input.shape.has_value());
  EXPECT_EQ(cfg.input.shape->centre, CrossingCentre::Single);
  EXPECT_EQ(cfg.flow.eps, 0.2);
  EXPECT_EQ(cfg.flow.subdivision.steps(), 8u);
  EXPECT_EQ(cfg.flow.quadrature.rule, QuadratureSpec::Rule::TensorMidpoint);
  EXPECT_EQ(cfg.flow.quadrature.points_per_axis, 8);
  EXPECT_EQ(cfg.flow.step.mode, StepMode::StrictPaper);
  EXPECT_EQ(cfg.flow.step.c3, 0.5);
  EXPECT_TRUE(cfg.flow.retry_halving);
  EXPECT_EQ(cfg.refine.last_level, 2);
  EXPECT_EQ(cfg.seed, 99u);
}

TEST_F(CliTest, FileInputWithPlaneEstimation) {
  std::ofstream(path("pts.csv")) << "x1,x2\n";
  {
    std::ofstream pts(path("pts.csv"), std::ios::app);
    for (int i = 0; i < 60; ++i) {
      const double t = 2.0 * 3.141592653589793 * i / 60.0;
      pts << format_double(std::cos(t)) << ',' << format_double(std::sin(t)) << '\n';
    }
  }
  const std::string cfg = write("c.json", R"({"schema": 1,
    "input": {"file": "pts.csv", "planes": {"d": 1, "k": 6}},
    "flow": {"eps": 0.1, "subdivision": {"uniform": {"horizon": 0.004, "steps": 2}}},
    "outputs": {"diagnostics": ")" + path("d.csv") + R"("}})");
  EXPECT_EQ(invoke({"evolve", cfg}), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(path("d.csv")));
}

TEST_F(CliTest, Distance) {
  const Plane s = Plane::coordinate(1, 2);
  Varifold a(1, 2), b(1, 2);
  a.add({Vec::Zero(2), s, 0.5});
  b.add({Vec::Unit(2, 0) * 0.7, s, 0.5});
  save_varifold(path("a.json"), a);
  save_varifold(path("b.json"), b);
  ASSERT_EQ(invoke({"distance", path("a.json"), path("a.json")}), kExitOk);
  EXPECT_EQ(json::parse(out_.str())["distance"], 0.0);
  ASSERT_EQ(invoke({"distance", path("a.json"), path("b.json")}), kExitOk);
  const json r = json::parse(out_.str());
  EXPECT_NEAR(r["distance"].get<double>(), 0.35, 1e-9);
  EXPECT_EQ(r["support_size"], 2);
  EXPECT_TRUE(r.contains("iterations"));
  Varifold c(1, 3);
  c.add({Vec::Zero(3), Plane::coordinate(1, 3), 1.0});
  save_varifold(path("c.json"), c);
  EXPECT_EQ(invoke({"distance", path("a.json"), path("c.json")}), kExitInputError);
}

TEST_F(CliTest, RefineStudy) {
  const std::string single = write("s.json", R"({"schema": 1,
    "input": {"file": ")" + path("atom.json") + R"("},
    "flow": {"eps": 0.1}, "refine": {"horizon": 0.01, "first_level": 2, "last_level": 4}})");
  Varifold atom(1, 2);
  atom.add({Vec::Zero(2), Plane::coordinate(1, 2), 1.0});
  save_varifold(path("atom.json"), atom);
  ASSERT_EQ(invoke({"refine-study", single}), kExitOk) << err_.str();
  std::istringstream table(out_.str());
  std::string line;
  std::getline(table, line);
  EXPECT_EQ(line, "j,step,distance,ratio");
  // A lone atom only loses mass, so the level gaps halve with the step.
  int rows = 0;
  while (std::getline(table, line)) {
    ++rows;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    const auto third = line.find(',', second + 1);
    EXPECT_GT(std::stod(line.substr(second + 1, third - second - 1)), 0.0);
    if (rows > 1) {
      EXPECT_NEAR(std::stod(line.substr(third + 1)), 0.5, 0.1);
    }
  }
  EXPECT_EQ(rows, 3);

  const std::string one = write("o.json", R"({"schema": 1,
    "input": {"shape": {"kind": "circle", "samples": 30}},
    "flow": {"eps": 0.1}, "refine": {"horizon": 0.02, "first_level": 2, "last_level": 2}})");
  ASSERT_EQ(invoke({"refine-study", one}), kExitOk) << err_.str();
  const std::string text = out_.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text[text.size() - 2], ',');
}

TEST_F(CliTest, KernelCheck) {
  EXPECT_EQ(invoke({"kernel-check", "--n", "2", "--eps", "1.0"}), kExitInputError);
  ASSERT_EQ(invoke({"kernel-check", "--n", "2", "--eps", "0.3"}), kExitOk) << err_.str();
  const json r = json::parse(out_.str());
  EXPECT_EQ(r["violations"], 0);
  EXPECT_EQ(r["samples"], 10000);
  EXPECT_TRUE(r["constants"].contains("c0"));
  EXPECT_TRUE(r["published_constants"].contains("c0"));
  EXPECT_GT(r["constants"]["c0"].get<double>(), r["published_constants"]["c0"].get<double>());
}

TEST_F(CliTest, Generate) {
  ASSERT_EQ(invoke({"generate", "--kind", "circle", "-N", "8"}), kExitOk);
  const json doc = json::parse(out_.str());
  EXPECT_EQ(doc["atoms"].size(), 8u);
  ASSERT_EQ(invoke({"generate", "--kind", "sphere", "-N", "20", "-o", path("s.csv")}), kExitOk);
  EXPECT_EQ(load_varifold(path("s.csv")).size(), 20u);
  EXPECT_EQ(invoke({"generate", "--kind", "blob"}), kExitInputError);
  EXPECT_EQ(invoke({"generate", "--kind", "circle", "-N", "2"}), kExitInputError);
}

TEST_F(CliTest, Diagnose) {
  // The identity needs sample spacing below eps, so this circle is finer than the others.
  const std::string cfg = write("c.json", circle_config(4, 0.008, "", 100));
  ASSERT_EQ(invoke({"evolve", cfg}), kExitOk) << err_.str();
  ASSERT_EQ(invoke({"diagnose", path("traj.json")}), kExitOk) << err_.str();
  const json r = json::parse(out_.str());
  EXPECT_LT(r["brakke_residual"].get<double>(), 1e-6);
  EXPECT_TRUE(r["energy_budget_ok"].get<bool>());
  EXPECT_EQ(r["mass_violations"], 0);
  EXPECT_LE(r["cumulative_identity_residual"].get<double>(), r["tolerance"].get<double>());
  ASSERT_EQ(invoke({"diagnose", path("traj.json"), "--phi", "gaussian", "--center", "1", "0", "--width", "0.5",
                    "--from", "0.002", "--to", "0.006"}),
            kExitOk)
      << err_.str();
  EXPECT_EQ(json::parse(out_.str())["a"], 0.002);
  EXPECT_EQ(invoke({"diagnose", path("traj.json"), "--from", "0.003"}), kExitInputError);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}), kExitInputError);
  EXPECT_EQ(invoke({"frobnicate"}), kExitInputError);
  EXPECT_EQ(invoke({"--help"}), kExitOk);
}

TEST(ExampleConfigs, AllParse) {
  for (const auto& entry : fs::directory_iterator(VFLOW_CONFIG_DIR)) {
    if (entry.path().extension() == ".json") {
      EXPECT_NO_THROW(load_run_config(entry.path().string())) << entry.path();
    }
  }
}

}  // namespace
}  // namespace vflow::cli
