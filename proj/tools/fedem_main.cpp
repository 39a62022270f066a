#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "fedem/dataset.hpp"
#include "fedem/harness.hpp"
#include "fedem/manifest.hpp"

using namespace fedem;

int main(int argc, char** argv) {
  CLI::App app{"Federated training with gradient-leakage defenses and a reconstruction attack"};
  app.require_subcommand(1);

  std::string manifest_path, run_dir, spec_path, out_csv;
  std::vector<std::string> report_dirs;

  CLI::App* cmd_train = app.add_subcommand("train", "Run one experiment from a manifest");
  cmd_train->add_option("manifest", manifest_path, "manifest file")->required();

  CLI::App* cmd_attack =
      app.add_subcommand("attack", "Re-run the reconstruction phase of a finished run");
  cmd_attack->add_option("run_dir", run_dir, "run directory with stored artifacts")->required();

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "Run every point of a sweep description");
  cmd_sweep->add_option("spec", spec_path, "sweep file")->required();

  CLI::App* cmd_report = app.add_subcommand("report", "Tabulate finished runs");
  cmd_report->add_option("run_dirs", report_dirs, "run directories")->required();
  cmd_report->add_option("--csv", out_csv, "also write the combined table here");

  CLI::App* cmd_selftest = app.add_subcommand("selftest", "Fast numeric sanity checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help exits clean; any parse problem is a usage error
  }

  try {
    if (cmd_train->parsed()) {
      ExperimentManifest m = ExperimentManifest::load(manifest_path);
      return run_experiment(m, std::cout);
    }
    if (cmd_attack->parsed()) return run_attack_phase(run_dir, std::cout);
    if (cmd_sweep->parsed()) return run_sweep(SweepSpec::load(spec_path), std::cout);
    if (cmd_report->parsed()) return render_report(report_dirs, out_csv, std::cout);
    if (cmd_selftest->parsed()) return selftest(std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
