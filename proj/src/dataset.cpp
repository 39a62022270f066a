#include "fedem/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace fedem {

namespace {

// Reads a whole file through zlib so .gz and plain files share one path.
std::vector<unsigned char> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open " + path);
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw DataError("read error in " + path);
  return out;
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto ib = read_all(images_path);
  if (ib.size() < 16) throw DataError("truncated IDX image file " + images_path);
  if (be32(ib.data()) != 0x00000803u)
    throw DataError("bad magic in " + images_path + " (want IDX ubyte images)");
  const std::size_t n = be32(ib.data() + 4), h = be32(ib.data() + 8), w = be32(ib.data() + 12);
  if (ib.size() != 16 + n * h * w) throw DataError("truncated IDX image file " + images_path);

  const auto lb = read_all(labels_path);
  if (lb.size() < 8) throw DataError("truncated IDX label file " + labels_path);
  if (be32(lb.data()) != 0x00000801u)
    throw DataError("bad magic in " + labels_path + " (want IDX ubyte labels)");
  const std::size_t ln = be32(lb.data() + 4);
  if (lb.size() != 8 + ln) throw DataError("truncated IDX label file " + labels_path);
  if (ln != n)
    throw DataError("image/label count mismatch: " + std::to_string(n) + " vs " +
                    std::to_string(ln));

  Dataset ds;
  ds.channels = 1;
  ds.height = h;
  ds.width = w;
  ds.images = Tensor({n, 1, h, w});
  for (std::size_t i = 0; i < n * h * w; ++i) ds.images.data[i] = ib[16 + i] / 255.0;
  ds.labels.assign(lb.begin() + 8, lb.end());
  return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
  if (batch_paths.empty()) throw DataError("no CIFAR-10 batch files given");
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  std::vector<unsigned char> all;
  for (const auto& p : batch_paths) {
    auto b = read_all(p);
    if (b.empty() || b.size() % kRecord != 0)
      throw DataError("file length " + std::to_string(b.size()) + " of " + p +
                      " is not a multiple of " + std::to_string(kRecord));
    all.insert(all.end(), b.begin(), b.end());
  }
  const std::size_t n = all.size() / kRecord;
  Dataset ds;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.images = Tensor({n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = &all[i * kRecord];
    ds.labels[i] = rec[0];
    for (std::size_t j = 0; j < 3 * 32 * 32; ++j)
      ds.images.data[i * 3 * 32 * 32 + j] = rec[1 + j] / 255.0;
  }
  return ds;
}

std::vector<ClientShard> partition_iid(std::size_t n, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("partition_iid: K=" + std::to_string(k) + " for n=" +
                                std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<ClientShard> shards(static_cast<std::size_t>(k));
  const std::size_t base = n / static_cast<std::size_t>(k), extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int c = 0; c < k; ++c) {
    const std::size_t take = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
    shards[c].client_id = c;
    shards[c].indices.assign(perm.begin() + pos, perm.begin() + pos + take);
    pos += take;
  }
  return shards;
}

Dataset synth_blobs(int classes, int per_class, std::size_t dims, std::uint64_t seed) {
  if (dims < 2) throw std::invalid_argument("synth_blobs: dims must be at least 2");
  if (classes < 1 || per_class < 1) throw std::invalid_argument("synth_blobs: empty dataset");
  const std::size_t n = static_cast<std::size_t>(classes) * per_class;
  Rng rng(seed);

  // Class centers spaced on distinct axes, spread well below the spacing,
  // so classes stay linearly separable after rescaling.
  const double spread = 0.04;
  Dataset ds;
  ds.name = "synth";
  ds.channels = 1;
  ds.height = 1;
  ds.width = dims;
  ds.images = Tensor({n, 1, 1, dims});
  ds.labels.resize(n);
  std::size_t row = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> center(dims, 0.3);
    center[c % dims] += 0.4 * (1.0 + c / static_cast<double>(dims));
    for (int s = 0; s < per_class; ++s, ++row) {
      ds.labels[row] = c;
      for (std::size_t j = 0; j < dims; ++j)
        ds.images.data[row * dims + j] = center[j] + spread * rng.normal();
    }
  }
  // Rescale into [0,1] preserving geometry.
  double lo = ds.images.data[0], hi = ds.images.data[0];
  for (double v : ds.images.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (double& v : ds.images.data) v = (v - lo) / span;

  // Mix the class blocks so any contiguous slice (like a held-out tail)
  // sees every class.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  Tensor mixed({n, 1, 1, dims});
  std::vector<int> mixed_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    mixed_labels[i] = ds.labels[perm[i]];
    std::copy_n(ds.images.data.begin() + perm[i] * dims, dims, mixed.data.begin() + i * dims);
  }
  ds.images = std::move(mixed);
  ds.labels = std::move(mixed_labels);
  return ds;
}

Tensor gather_flat(const Dataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t d = ds.flat_dim();
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= ds.size()) throw std::out_of_range("dataset index " + std::to_string(idx[i]));
    std::copy_n(ds.images.data.begin() + idx[i] * d, d, out.data.begin() + i * d);
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels.at(idx[i]);
  return out;
}

NormalizationTransform stats_for(const std::string& dataset_name) {
  if (dataset_name == "mnist" || dataset_name == "digits") return {{0.1307}, {0.3081}};
  if (dataset_name == "fmnist") return {{0.2860}, {0.3530}};
  if (dataset_name == "cifar10")
    return {{0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616}};
  return {};
}

namespace {

// Column-aligned mean / 1/std rows for a flattened [m, c*hw] layout.
void per_column(const NormalizationTransform& t, std::size_t channels, std::size_t hw,
                std::vector<double>& mean_row, std::vector<double>& inv_row) {
  mean_row.resize(channels * hw);
  inv_row.resize(channels * hw);
  for (std::size_t c = 0; c < channels; ++c) {
    const double m = t.mean.at(c), inv = 1.0 / t.stddev.at(c);
    for (std::size_t j = 0; j < hw; ++j) {
      mean_row[c * hw + j] = m;
      inv_row[c * hw + j] = inv;
    }
  }
}

}  // namespace

NodeId apply_normalize(Graph& g, const NormalizationTransform& t, NodeId x,
                       std::size_t channels, std::size_t hw) {
  if (t.identity()) return x;
  const std::size_t m = g.value(x).rows();
  std::vector<double> mean_row, inv_row;
  per_column(t, channels, hw, mean_row, inv_row);
  NodeId mu = g.constant(Tensor({channels * hw}, std::move(mean_row)));
  NodeId inv = g.constant(Tensor({channels * hw}, std::move(inv_row)));
  NodeId clamped = g.clamp(x, 0.0, 1.0);
  return g.mul(g.sub(clamped, g.tile_rows(mu, m)), g.tile_rows(inv, m));
}

Tensor normalize_eager(const NormalizationTransform& t, const Tensor& x, std::size_t channels,
                       std::size_t hw) {
  if (t.identity()) return x;
  std::vector<double> mean_row, inv_row;
  per_column(t, channels, hw, mean_row, inv_row);
  const std::size_t d = channels * hw;
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const std::size_t j = i % d;
    const double c = std::min(std::max(out.data[i], 0.0), 1.0);
    out.data[i] = (c - mean_row[j]) * inv_row[j];
  }
  return out;
}

Tensor denormalize(const NormalizationTransform& t, const Tensor& z, std::size_t channels,
                   std::size_t hw) {
  const std::size_t d = channels * hw;
  Tensor out = z;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double v = out.data[i];
    if (!t.identity()) {
      const std::size_t c = (i % d) / hw;
      v = v * t.stddev[c] + t.mean[c];
    }
    out.data[i] = std::min(std::max(v, 0.0), 1.0);
  }
  return out;
}

TrainValSplit split_train_val(std::size_t n) {
  const std::size_t v = n / 10;
  TrainValSplit s;
  s.train.resize(n - v);
  s.val.resize(v);
  std::iota(s.train.begin(), s.train.end(), std::size_t{0});
  std::iota(s.val.begin(), s.val.end(), n - v);
  return s;
}

}  // namespace fedem
