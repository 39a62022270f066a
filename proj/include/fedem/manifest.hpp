#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedem/attack.hpp"
#include "fedem/federation.hpp"
#include "fedem/ldp.hpp"
#include "fedem/model.hpp"
#include "fedem/perturb.hpp"

namespace fedem {

/// Invalid configuration (manifest syntax, types, ranges, cross-field
/// rules). Maps to exit code 1 at the CLI.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Value of one `key = ...` line in the manifest's TOML-compatible subset:
/// quoted strings, numbers, booleans, and flat homogeneous arrays.
struct TomlValue {
  enum class Kind { kString, kNumber, kBool, kNumberList, kStringList };
  Kind kind = Kind::kString;
  std::string str;
  double num = 0;
  bool boolean = false;
  std::vector<double> num_list;
  std::vector<std::string> str_list;
};

struct TomlDoc {
  std::map<std::string, std::map<std::string, TomlValue>> sections;

  bool has(const std::string& section, const std::string& key) const;
  const TomlValue& get(const std::string& section, const std::string& key) const;
};

TomlDoc parse_toml(const std::string& text, const std::string& origin);
TomlDoc parse_toml_file(const std::string& path);

/// Everything one run needs; `echo()` serializes back to canonical text so
/// a run directory fully describes itself.
struct ExperimentManifest {
  // [run]
  std::string name = "run";
  std::uint64_t seed = 1;
  std::string output_root = "runs";
  std::vector<int> attack_rounds;  // empty = {1, rounds}

  // [dataset]
  std::string dataset_kind = "synth";  // synth | idx | cifar10
  std::string dataset_name = "synth";
  std::string dataset_dir;
  bool normalize = true;
  std::vector<double> mean_override, std_override;
  int synth_classes = 4, synth_per_class = 60;
  std::size_t synth_dims = 16;

  // [model] — input geometry and class count are resolved from the dataset.
  ModelSpec model;

  // [federation]
  FederationConfig fed;

  // [fedem]
  PerturbationConfig perturb;

  // [ldp]
  NoiseSpec noise;

  // [attack]
  AttackConfig attack;

  static ExperimentManifest load(const std::string& path);
  static ExperimentManifest from_doc(const TomlDoc& doc, const std::string& origin);
  std::string echo() const;

  std::vector<int> resolved_attack_rounds() const;
};

struct SweepSpec {
  enum class Axis { kIterations, kRhoMin, kMethod };
  Axis axis = Axis::kIterations;
  std::vector<double> num_values;
  std::vector<std::string> str_values;  // method axis
  std::string base_path;
  ExperimentManifest base;

  static SweepSpec load(const std::string& path);
  /// The base manifest with the axis value applied and a derived run name.
  ExperimentManifest instantiate(std::size_t i) const;
  std::size_t count() const;
  std::string value_label(std::size_t i) const;
};

const char* axis_name(SweepSpec::Axis a);

}  // namespace fedem
