#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "iongate/scenario.hpp"

namespace {

struct CommonOpts {
  std::string scenario_file;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  double tolerance = 1e-9;
};

iongate::Scenario load_scenario(const CommonOpts& opts) {
  iongate::Scenario s = iongate::Scenario::load(opts.scenario_file);
  if (opts.seed_set) s.seed = opts.seed;
  if (!opts.out_dir.empty()) s.output_dir = opts.out_dir;
  return s;
}

int cmd_run(const CommonOpts& opts) {
  const iongate::Scenario s = load_scenario(opts);
  const iongate::RunManifest manifest =
      iongate::run_scenario(s, opts.threads, opts.tolerance);
  std::cout << manifest.to_text();
  return 0;
}

int cmd_validate(const CommonOpts& opts) {
  const iongate::Scenario s = load_scenario(opts);
  const iongate::ValidationReport report = iongate::validate_scenario(s);
  std::cout << report.to_text();
  return report.ok() ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  const auto mpath = std::filesystem::path(dir) / "manifest.txt";
  std::ifstream manifest(mpath);
  if (!manifest) {
    std::cerr << "no manifest found in " << dir << "\n";
    return 1;
  }
  std::cout << manifest.rdbuf();
  // echo the header (provenance) lines of every referenced table
  manifest.clear();
  manifest.seekg(0);
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.rfind("output ", 0) != 0) continue;
    const std::string file = line.substr(7);
    std::ifstream table(file);
    if (!table) {
      std::cerr << "missing output file " << file << "\n";
      return 1;
    }
    std::cout << "\n" << file << "\n";
    std::string header;
    while (std::getline(table, header) && header.rfind("#", 0) == 0)
      std::cout << "  " << header << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reproducible trapped-ion gate experiment runner"};
  app.require_subcommand(1);
  CommonOpts opts;

  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    if (needs_scenario)
      sub->add_option("--scenario", opts.scenario_file, "scenario file (JSON)")
          ->required()
          ->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "master seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    sub->add_option("--out", opts.out_dir, "output directory override");
    sub->add_option("--threads", opts.threads, "worker thread budget")
        ->check(CLI::PositiveNumber);
    sub->add_option("--tolerance", opts.tolerance, "numeric tolerance override")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* run = app.add_subcommand("run", "execute a scenario");
  add_common(run, true);
  CLI::App* validate = app.add_subcommand("validate", "check a scenario without running");
  add_common(validate, true);
  CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
  std::string report_dir = ".";
  report->add_option("--out", report_dir, "run directory containing manifest.txt");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opts);
    if (validate->parsed()) return cmd_validate(opts);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
