#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fedem/dataset.hpp"
#include "fedem/federation.hpp"
#include "fedem/manifest.hpp"
#include "fedem/metrics.hpp"

namespace fedem {

/// File layout of one run directory.
struct RunPaths {
  std::string dir;

  std::string manifest() const { return dir + "/manifest.toml"; }
  std::string status() const { return dir + "/status.txt"; }
  std::string rounds() const { return dir + "/rounds.csv"; }
  std::string best() const { return dir + "/best.bin"; }
  std::string final_model() const { return dir + "/final.bin"; }
  std::string report() const { return dir + "/report.csv"; }
  std::string attack_csv() const { return dir + "/attack.csv"; }
  std::string round_dir(int r) const { return dir + "/artifacts/round_" + std::to_string(r); }
  std::string theta(int r) const { return round_dir(r) + "/theta.bin"; }
  std::string targets_index(int r) const { return round_dir(r) + "/targets.csv"; }
  std::string target(int r, int client, int sample) const;
  std::string images_dir(int r) const { return dir + "/images/round_" + std::to_string(r); }
  std::string traces_dir(int r) const { return dir + "/traces/round_" + std::to_string(r); }
};

/// Output root from the manifest, overridable by FEDEM_OUTPUT_ROOT.
std::string resolve_output_root(const ExperimentManifest& m);
RunPaths run_paths(const ExperimentManifest& m);

struct LoadedData {
  Dataset train, test;
  NormalizationTransform transform;
};

/// Loads the train/test pair named by the manifest (synth is generated
/// from the run seed) and resolves the normalization statistics.
LoadedData load_data(const ExperimentManifest& m);

/// Normalization statistics without touching the dataset files; the
/// channel count comes from stored artifacts.
NormalizationTransform transform_for(const ExperimentManifest& m, std::size_t channels);

/// Model spec with geometry and class count filled in from the data.
ModelSpec resolve_model(const ExperimentManifest& m, const LoadedData& d);

/// Attack-target blob: ASCII header (tag; round/client/sample/label;
/// geometry; element counts), then original pixels and the uploaded
/// gradient as little-endian doubles. The stored doubles are exact.
void save_target(const std::string& path, const AttackTarget& t, std::size_t channels,
                 std::size_t height, std::size_t width);
AttackTarget load_target(const std::string& path, std::size_t* channels, std::size_t* height,
                         std::size_t* width);

/// Full pipeline: train, persist artifacts, then (when enabled) run the
/// reconstruction phase off the stored artifacts — the identical code path
/// the standalone attack command uses. Returns the process exit code and
/// records the outcome in status.txt.
int run_experiment(const ExperimentManifest& m, std::ostream& log);

/// Re-runs the reconstruction phase of an existing run directory from its
/// stored manifest and artifacts.
int run_attack_phase(const std::string& run_dir, std::ostream& log);

/// Runs every point of a sweep, recording failures without stopping, and
/// writes sweep.csv plus an axis-vs-(accuracy, reconstruction MSE)
/// tradeoff table.
int run_sweep(const SweepSpec& sw, std::ostream& log);

/// Combined table over finished runs: aligned text to `log`, plus a
/// merged CSV when `out_csv` is non-empty. Incomplete runs are skipped
/// with a warning.
int render_report(const std::vector<std::string>& run_dirs, const std::string& out_csv,
                  std::ostream& log);

/// Fast self-contained checks of the numeric core. Prints one PASS/FAIL
/// line per check; returns 0 only if all pass.
int selftest(std::ostream& log);

}  // namespace fedem
