#include "fedem/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedem/metrics.hpp"

namespace fedem {

const char* defense_name(Defense d) {
  switch (d) {
    case Defense::kNone: return "none";
    case Defense::kFedem: return "fedem";
    case Defense::kLdpGaussian: return "ldp-gaussian";
    case Defense::kLdpLaplace: return "ldp-laplace";
    case Defense::kDpClip: return "dp-clip";
  }
  return "?";
}

Defense defense_from(const std::string& s) {
  if (s == "none") return Defense::kNone;
  if (s == "fedem") return Defense::kFedem;
  if (s == "ldp-gaussian") return Defense::kLdpGaussian;
  if (s == "ldp-laplace") return Defense::kLdpLaplace;
  if (s == "dp-clip") return Defense::kDpClip;
  throw std::invalid_argument("unknown defense: " + s);
}

void FederationConfig::validate() const {
  if (clients < 1) throw std::invalid_argument("federation: need at least one client");
  if (per_round < 1 || per_round > clients)
    throw std::invalid_argument("federation: clients per round must be in [1, clients]");
  if (rounds < 0) throw std::invalid_argument("federation: negative round count");
  if (lr <= 0) throw std::invalid_argument("federation: learning rate must be positive");
  if (patience < 1) throw std::invalid_argument("federation: patience must be at least 1");
}

std::vector<int> select_clients(int k, int count, int round, const SeedSplitter& seeds) {
  if (count > k) throw std::invalid_argument("select_clients: count exceeds client pool");
  std::vector<int> ids(static_cast<std::size_t>(k));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = seeds.stream("selection", static_cast<std::uint64_t>(round));
  for (int i = 0; i < count; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) + rng.uniform_int(static_cast<std::uint64_t>(k - i));
    std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
  }
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& grads,
                              const std::vector<double>& weights) {
  if (grads.empty() || grads.size() != weights.size())
    throw std::invalid_argument("aggregate: gradient/weight count mismatch");
  const std::size_t len = grads[0].size();
  double total = 0.0;
  for (double w : weights) {
    if (w <= 0) throw std::invalid_argument("aggregate: weights must be positive");
    total += w;
  }
  std::vector<double> out(len, 0.0);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != len)
      throw std::invalid_argument("aggregate: gradient length mismatch at position " +
                                  std::to_string(k));
    const double w = weights[k] / total;
    for (std::size_t i = 0; i < len; ++i) out[i] += w * grads[k][i];
  }
  return out;
}

namespace {

std::vector<std::size_t> round_batch(const ClientShard& shard, std::size_t batch, int client,
                                     int round, const SeedSplitter& seeds) {
  if (batch == 0 || batch >= shard.count()) return shard.indices;
  std::vector<std::size_t> pool = shard.indices;
  Rng rng = seeds.stream("batch", static_cast<std::uint64_t>(client),
                         static_cast<std::uint64_t>(round));
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t j = i + rng.uniform_int(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch);
  return pool;
}

Tensor single_row(const Tensor& batch, std::size_t i) {
  const std::size_t d = batch.cols();
  Tensor out({1, d});
  std::copy_n(batch.data.begin() + i * d, d, out.data.begin());
  return out;
}

}  // namespace

TrainResult train(const TrainSetup& setup, const Dataset& train_ds, const Dataset& test_ds) {
  setup.fed.validate();
  if (setup.fed.defense == Defense::kFedem) setup.perturb.validate();
  if (setup.fed.defense == Defense::kLdpGaussian || setup.fed.defense == Defense::kLdpLaplace ||
      setup.fed.defense == Defense::kDpClip)
    setup.noise.validate();
  if (train_ds.flat_dim() != setup.model.input_dim())
    throw std::invalid_argument("dataset geometry " + std::to_string(train_ds.flat_dim()) +
                                " does not match model input " +
                                std::to_string(setup.model.input_dim()));
  for (int y : train_ds.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= setup.model.classes)
      throw std::invalid_argument("training label " + std::to_string(y) +
                                  " outside model class count");

  const SeedSplitter seeds(setup.master_seed);
  const TrainValSplit split = split_train_val(train_ds.size());
  const auto shards =
      partition_iid(split.train.size(), setup.fed.clients, seeds.derive("partition"));

  const Tensor x_val = split.val.empty() ? Tensor() : gather_flat(train_ds, split.val);
  const auto y_val = gather_labels(train_ds, split.val);
  std::vector<std::size_t> test_idx(test_ds.size());
  std::iota(test_idx.begin(), test_idx.end(), std::size_t{0});
  const Tensor x_test = gather_flat(test_ds, test_idx);
  const auto& y_test = test_ds.labels;

  TrainResult result;
  ParameterSet theta = init_params(setup.model, seeds.derive("init"));
  result.best = theta;
  result.best_round = 0;
  result.best_val_acc = -1.0;
  result.stop_reason = "completed";

  const bool is_ldp = setup.fed.defense == Defense::kLdpGaussian ||
                      setup.fed.defense == Defense::kLdpLaplace ||
                      setup.fed.defense == Defense::kDpClip;
  int since_improvement = 0;

  for (int t = 1; t <= setup.fed.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    const bool keep_artifacts =
        std::find(setup.attack_rounds.begin(), setup.attack_rounds.end(), t) !=
        setup.attack_rounds.end();
    RoundArtifacts artifacts;
    if (keep_artifacts) {
      artifacts.round = t;
      artifacts.theta = theta;
    }

    RoundRecord rec;
    rec.round = t;
    rec.selected = select_clients(setup.fed.clients, setup.fed.per_round, t, seeds);

    std::vector<std::vector<double>> grads;
    std::vector<double> weights;
    for (int k : rec.selected) {
      const auto batch_idx = round_batch(shards[static_cast<std::size_t>(k)], setup.fed.batch, k,
                                         t, seeds);
      Tensor x_raw = gather_flat(train_ds, batch_idx);
      const auto y = gather_labels(train_ds, batch_idx);

      Tensor x_upload = x_raw;  // what the defended gradient is computed on
      if (setup.fed.defense == Defense::kFedem) {
        Rng rng = seeds.stream("perturbation", static_cast<std::uint64_t>(k),
                               static_cast<std::uint64_t>(t));
        try {
          x_upload = generate_perturbation(theta, x_raw, y, setup.perturb, setup.transform, rng)
                         .x_perturbed_raw;
        } catch (const NumericsError& e) {
          throw NumericsError("client " + std::to_string(k) + " round " + std::to_string(t) +
                              ": perturbation diverged: " + e.what());
        }
      }

      std::vector<double> g = client_gradient(theta, x_upload, y, setup.transform);
      if (is_ldp) {
        Rng rng = seeds.stream("noise", static_cast<std::uint64_t>(k),
                               static_cast<std::uint64_t>(t));
        g = apply_ldp(std::move(g), setup.noise, rng);
      }

      if (keep_artifacts) {
        const std::size_t take = std::min<std::size_t>(
            static_cast<std::size_t>(std::max(setup.images_per_client, 0)), y.size());
        for (std::size_t i = 0; i < take; ++i) {
          AttackTarget target;
          target.round = t;
          target.client = k;
          target.sample = static_cast<int>(i);
          target.original = single_row(x_raw, i);
          target.label = y[i];
          std::vector<double> g1 = client_gradient(theta, single_row(x_upload, i), {y[i]},
                                                   setup.transform);
          if (is_ldp) {
            Rng rng = seeds.stream("attack-noise", static_cast<std::uint64_t>(k),
                                   static_cast<std::uint64_t>(t) * 10000 + i);
            g1 = apply_ldp(std::move(g1), setup.noise, rng);
          }
          target.gradient = std::move(g1);
          artifacts.targets.push_back(std::move(target));
        }
      }

      rec.grad_norms.push_back(std::sqrt(
          std::inner_product(g.begin(), g.end(), g.begin(), 0.0)));
      grads.push_back(std::move(g));
      weights.push_back(static_cast<double>(batch_idx.size()));
    }

    theta.step(aggregate(grads, weights), setup.fed.lr);

    rec.val_acc = split.val.empty() ? 0.0 : accuracy(theta, setup.transform, x_val, y_val);
    rec.test_acc = accuracy(theta, setup.transform, x_test, y_test);
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    result.records.push_back(rec);
    if (keep_artifacts) result.artifacts.push_back(std::move(artifacts));

    if (rec.val_acc > result.best_val_acc) {
      result.best_val_acc = rec.val_acc;
      result.best = theta;
      result.best_round = t;
      since_improvement = 0;
    } else if (++since_improvement >= setup.fed.patience) {
      result.stop_reason = "early-stop";
      break;
    }
  }

  result.final_params = std::move(theta);
  return result;
}

std::string rounds_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream os;
  os << "round,val_acc,test_acc,grad_norm_mean,elapsed_ms\n";
  for (const auto& r : records) {
    const double mean_norm =
        r.grad_norms.empty()
            ? 0.0
            : std::accumulate(r.grad_norms.begin(), r.grad_norms.end(), 0.0) /
                  static_cast<double>(r.grad_norms.size());
    os << r.round << ',' << format_double(r.val_acc) << ',' << format_double(r.test_acc) << ','
       << format_double(mean_norm) << ",0\n";
  }
  return os.str();
}

}  // namespace fedem
