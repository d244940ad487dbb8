#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "iongate/rng.hpp"
#include "iongate/scenario.hpp"
#include "iongate/tomography.hpp"

using namespace iongate;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("iongate_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scenario parsing and schema errors") {
  const Scenario s = Scenario::parse(
      R"({"kind": "pumping-bound", "seed": 42, "params": {"t_b": 1e-3}, "output_dir": "x"})");
  CHECK(s.kind == "pumping-bound");
  CHECK(s.seed == 42);
  CHECK(s.params["t_b"].get<double>() == 1e-3);
  CHECK(s.output_dir == "x");

  const Scenario defaults = Scenario::parse(R"({"kind": "rb", "seed": 1})");
  CHECK(defaults.params.is_object());
  CHECK(defaults.output_dir == ".");

  CHECK_THROWS_WITH_AS(Scenario::parse(""), doctest::Contains("parse error"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(Scenario::parse("{}"), doctest::Contains("kind"), std::runtime_error);
  CHECK_THROWS_WITH_AS(Scenario::parse(R"({"kind": "rb"})"), doctest::Contains("seed"),
                       std::runtime_error);
  CHECK_THROWS(Scenario::parse(R"({"kind": "rb", "seed": 1, "params": 3})"));
}

TEST_CASE("scenario hash is canonical and sensitive") {
  const Scenario a = Scenario::parse(R"({"kind": "rb", "seed": 1, "params": {"a": 1, "b": 2}})");
  const Scenario b = Scenario::parse(R"({"kind": "rb", "seed": 1, "params": {"b": 2, "a": 1}})");
  CHECK(a.hash() == b.hash());
  const Scenario c = Scenario::parse(R"({"kind": "rb", "seed": 2, "params": {"a": 1, "b": 2}})");
  CHECK(a.hash() != c.hash());
  Scenario d = a;
  d.output_dir = "elsewhere";  // output location is not part of the content hash
  CHECK(a.hash() == d.hash());
}

TEST_CASE("validation catches physics violations") {
  CHECK(validate_scenario(Scenario::parse(R"({"kind": "rb", "seed": 1})")).ok());
  CHECK(validate_scenario(Scenario::parse(R"({"kind": "error-budget", "seed": 1})")).ok());

  const ValidationReport unknown =
      validate_scenario(Scenario::parse(R"({"kind": "nope", "seed": 1})"));
  CHECK_FALSE(unknown.ok());

  // explicit detuning inconsistent with the closed 30 us window
  const ValidationReport closure = validate_scenario(Scenario::parse(
      R"({"kind": "error-budget", "seed": 1, "params": {"delta_hz": 12345.0}})"));
  CHECK_FALSE(closure.ok());
  CHECK(closure.to_text().find("closure") != std::string::npos);

  const ValidationReport pump = validate_scenario(Scenario::parse(
      R"({"kind": "pumping-bound", "seed": 1, "params": {"l": 0.2, "t_bar_b": 0.3}})"));
  CHECK_FALSE(pump.ok());

  // hot mode with a small Fock truncation: warning with a suggestion, not an error
  const ValidationReport tail = validate_scenario(Scenario::parse(
      R"({"kind": "error-budget", "seed": 1, "params": {"noise": {"nbar_S": 5.0}}})"));
  CHECK(tail.ok());
  REQUIRE_FALSE(tail.issues.empty());
  CHECK(tail.to_text().find("suggest n_max") != std::string::npos);
}

TEST_CASE("pumping-bound scenario writes provenance-tagged tables") {
  const fs::path dir = fresh_dir("pump");
  Scenario s = Scenario::parse(
      R"({"kind": "pumping-bound", "seed": 7, "params": {"t_b": 8e-4, "l": 0.8}})");
  s.output_dir = dir.string();
  const RunManifest manifest = run_scenario(s);
  CHECK(manifest.kind == "pumping-bound");
  CHECK(manifest.seed == 7);
  CHECK(manifest.scenario_hash == s.hash());
  REQUIRE(manifest.outputs.size() == 1);

  const std::string table = slurp(manifest.outputs[0]);
  CHECK(table.find("# seed 7") != std::string::npos);
  CHECK(table.find("# scenario " + s.hash()) != std::string::npos);
  CHECK(table.find("bound 1.000000000000e-03") != std::string::npos);
  CHECK(fs::exists(dir / "manifest.txt"));
}

TEST_CASE("identical scenarios produce byte-identical tables") {
  Scenario s = Scenario::parse(
      R"({"kind": "rb", "seed": 11, "params": {"per_length": 8, "lengths": [1, 10, 100]}})");
  const fs::path d1 = fresh_dir("det_a"), d2 = fresh_dir("det_b");
  s.output_dir = d1.string();
  run_scenario(s);
  s.output_dir = d2.string();
  run_scenario(s, /*threads=*/4);  // thread budget must not affect results
  CHECK(slurp(d1 / "rb_decay.dat") == slurp(d2 / "rb_decay.dat"));
  CHECK(slurp(d1 / "rb_fit.dat") == slurp(d2 / "rb_fit.dat"));
}

TEST_CASE("rb scenario emits a sane fit report") {
  const fs::path dir = fresh_dir("rb");
  Scenario s = Scenario::parse(R"({"kind": "rb", "seed": 11, "params": {"per_length": 10}})");
  s.output_dir = dir.string();
  run_scenario(s);
  const std::string report = slurp(dir / "rb_fit.dat");
  std::istringstream in(report);
  std::string label;
  double value = -1.0, epg = -1.0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    row >> label >> value;
    if (label == "epg") epg = value;
  }
  CHECK(epg > 0.0);
  CHECK(epg < 1e-3);
}

TEST_CASE("tomography-fit consumes external histogram files") {
  // build an input file from the simulator, then fit it through the harness
  const TomographySetup setup = TomographySetup::standard();
  const OpticsModel optics;
  Eigen::Vector4cd phi;
  phi << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
  const Eigen::Matrix4cd pure = phi * phi.adjoint();
  const double f = 0.98;
  const Eigen::Matrix4cd rho =
      f * pure + (1.0 - f) / 3.0 * (Eigen::Matrix4cd::Identity() - pure);
  const TomographyData td = simulate_detection(rho, setup, optics, 5000, 31);

  const fs::path dir = fresh_dir("tomo_fit");
  fs::create_directories(dir);
  nlohmann::json input;
  for (int i = 0; i < 4; ++i) input["reference"].push_back(td.reference[i].counts);
  for (int k = 0; k < 9; ++k) input["data"].push_back(td.data[k].counts);
  const fs::path in_path = dir / "histograms.json";
  std::ofstream(in_path) << input;

  Scenario s = Scenario::parse(R"({"kind": "tomography-fit", "seed": 37})");
  s.params["input"] = in_path.string();
  s.output_dir = dir.string();
  run_scenario(s);
  const std::string table = slurp(dir / "tomography_fit.dat");
  std::istringstream in(table);
  std::string line;
  double fidelity = -1.0;
  while (std::getline(in, line)) {
    if (line.rfind("fidelity ", 0) == 0) fidelity = std::stod(line.substr(9));
  }
  CHECK(fidelity > 0.95);
  CHECK(fidelity < 1.0);

  // missing input is a diagnosable validation error
  Scenario bad = Scenario::parse(R"({"kind": "tomography-fit", "seed": 37})");
  bad.output_dir = dir.string();
  CHECK_THROWS_WITH_AS(run_scenario(bad), doctest::Contains("input"), std::runtime_error);
}

TEST_CASE("running an invalid scenario throws with the validation text") {
  Scenario s = Scenario::parse(
      R"({"kind": "pumping-bound", "seed": 1, "params": {"l": 0.1, "t_bar_b": 0.2}})");
  s.output_dir = fresh_dir("invalid").string();
  CHECK_THROWS_WITH_AS(run_scenario(s), doctest::Contains("invalid"), std::runtime_error);
}
