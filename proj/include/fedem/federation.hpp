#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedem/dataset.hpp"
#include "fedem/ldp.hpp"
#include "fedem/model.hpp"
#include "fedem/perturb.hpp"
#include "fedem/rng.hpp"

namespace fedem {

enum class Defense { kNone, kFedem, kLdpGaussian, kLdpLaplace, kDpClip };
const char* defense_name(Defense d);
Defense defense_from(const std::string& s);

struct FederationConfig {
  int clients = 4;
  int rounds = 50;
  int per_round = 4;  // |C_t|
  double lr = 1.0;
  int patience = 30;
  std::size_t batch = 0;  // samples per client per round; 0 = full shard
  Defense defense = Defense::kNone;

  void validate() const;
};

struct RoundRecord {
  int round = 0;  // 1-based
  std::vector<int> selected;
  std::vector<double> grad_norms;  // aligned with `selected`
  double val_acc = 0, test_acc = 0;
  double elapsed_ms = 0;
};

/// One intercepted upload the attacker will try to invert: a single
/// image's defended gradient, plus the clean original for scoring.
struct AttackTarget {
  int round = 0, client = 0, sample = 0;
  Tensor original;  // [1, d] raw pixels
  int label = 0;
  std::vector<double> gradient;
};

struct RoundArtifacts {
  int round = 0;
  ParameterSet theta;  // global model as distributed this round
  std::vector<AttackTarget> targets;
};

struct TrainSetup {
  ModelSpec model;
  FederationConfig fed;
  PerturbationConfig perturb;  // FedEM defense settings
  NoiseSpec noise;             // LDP defense settings
  NormalizationTransform transform;
  std::uint64_t master_seed = 1;
  std::vector<int> attack_rounds;  // rounds whose artifacts are retained
  int images_per_client = 2;       // attack targets collected per client
};

struct TrainResult {
  ParameterSet best;  // best-validation snapshot (initial params when rounds == 0)
  ParameterSet final_params;
  std::vector<RoundRecord> records;
  std::vector<RoundArtifacts> artifacts;
  std::string stop_reason;  // "completed" or "early-stop"
  int best_round = 0;
  double best_val_acc = 0;
};

/// Uniform sample of `count` distinct ids from 0..k-1, sorted ascending.
std::vector<int> select_clients(int k, int count, int round, const SeedSplitter& seeds);

/// Weighted mean sum_k (w_k / sum_j w_j) * g_k in the given order.
std::vector<double> aggregate(const std::vector<std::vector<double>>& grads,
                              const std::vector<double>& weights);

/// The round loop: distribute theta, collect one defended gradient per
/// selected client, aggregate, step, evaluate, early-stop on validation
/// accuracy. Gradients are combined in ascending client-id order so client
/// scheduling can never change the result.
TrainResult train(const TrainSetup& setup, const Dataset& train_ds, const Dataset& test_ds);

/// rounds.csv. Wall times are recorded in memory but written as 0 so
/// repeated runs stay byte-identical.
std::string rounds_csv(const std::vector<RoundRecord>& records);

}  // namespace fedem
