#ifndef IONGATE_SCENARIO_HPP
#define IONGATE_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "iongate/hilbert.hpp"
#include "iongate/ms_gate.hpp"

namespace iongate {

inline constexpr const char* kVersion = "iongate 1.0";

// One experiment description: a kind tag, a kind-specific parameter block, a
// mandatory master seed, and an output directory.
struct Scenario {
  std::string kind;
  nlohmann::json params;
  std::uint64_t seed = 0;
  std::string output_dir = ".";

  static Scenario parse(const std::string& text, const std::string& source = "<string>");
  static Scenario load(const std::string& path);

  // stable content hash over the canonical serialization (kind, params, seed)
  std::string hash() const;
};

struct ValidationIssue {
  bool error = false;  // false = warning
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const;
  std::string to_text() const;
};

// Schema and physics-sanity checks without running the scenario.
ValidationReport validate_scenario(const Scenario& s);

struct RunManifest {
  std::string scenario_hash;
  std::string kind;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  int threads = 1;
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;  // file paths written

  std::string to_text() const;
};

// Execute a scenario: writes '#'-headed tabular outputs plus manifest.txt in
// the scenario's output directory. Tabular outputs are byte-identical across
// reruns of the same (scenario, seed).
RunManifest run_scenario(const Scenario& s, int threads = 1, double tolerance = 1e-9);

// One quasi-static + scattering realization of the Table-I gate channel
// applied to an arbitrary pure spin input; used for F_avg evaluation.
Eigen::Matrix4cd table_one_noisy_state(const GateConfig& cfg, const NoiseModel& model,
                                       const Eigen::Vector4cd& psi, std::uint64_t draw_seed);

}  // namespace iongate

#endif
