#include <doctest.h>
#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "fedem/dataset.hpp"
#include "fedem/rng.hpp"

using namespace fedem;
namespace fs = std::filesystem;

namespace {

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back((x >> 24) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back(x & 0xff);
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t h, std::uint32_t w,
                                      const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> v;
  push_be32(v, 0x00000803u);
  push_be32(v, n);
  push_be32(v, h);
  push_be32(v, w);
  v.insert(v.end(), pixels.begin(), pixels.end());
  return v;
}

std::vector<unsigned char> idx_labels(const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> v;
  push_be32(v, 0x00000801u);
  push_be32(v, static_cast<std::uint32_t>(labels.size()));
  v.insert(v.end(), labels.begin(), labels.end());
  return v;
}

struct TempDir {
  fs::path dir;
  explicit TempDir(const std::string& tag) {
    dir = fs::temp_directory_path() / ("fedem-test-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }

  std::string plain(const std::string& name, const std::vector<unsigned char>& bytes) const {
    fs::path p = dir / name;
    std::ofstream(p, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    return p.string();
  }

  std::string gz(const std::string& name, const std::vector<unsigned char>& bytes) const {
    fs::path p = dir / name;
    gzFile f = gzopen(p.c_str(), "wb");
    REQUIRE(f != nullptr);
    REQUIRE(gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())) ==
            static_cast<int>(bytes.size()));
    gzclose(f);
    return p.string();
  }
};

}  // namespace

TEST_CASE("idx files load from plain and gzip encodings identically") {
  TempDir td("idx");
  std::vector<unsigned char> pixels(3 * 2 * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<unsigned char>(20 * i);
  auto ib = idx_images(3, 2, 2, pixels);
  auto lb = idx_labels({0, 2, 1});

  Dataset plain = load_idx(td.plain("imgs", ib), td.plain("lbls", lb));
  CHECK(plain.size() == 3);
  CHECK(plain.channels == 1);
  CHECK(plain.height == 2);
  CHECK(plain.width == 2);
  CHECK(plain.images.shape == Shape{3, 1, 2, 2});
  for (std::size_t i = 0; i < pixels.size(); ++i)
    CHECK(plain.images.data[i] == pixels[i] / 255.0);
  CHECK(plain.labels == std::vector<int>{0, 2, 1});

  Dataset zipped = load_idx(td.gz("imgs.gz", ib), td.gz("lbls.gz", lb));
  CHECK(zipped.images.data == plain.images.data);
  CHECK(zipped.labels == plain.labels);

  Dataset mixed = load_idx(td.gz("imgs2.gz", ib), td.plain("lbls2", lb));
  CHECK(mixed.images.data == plain.images.data);
}

TEST_CASE("idx loader rejects malformed files") {
  TempDir td("idx-bad");
  std::vector<unsigned char> pixels(2 * 2 * 2, 7);
  auto ib = idx_images(2, 2, 2, pixels);
  auto lb = idx_labels({0, 1});
  std::string good_i = td.plain("good_i", ib), good_l = td.plain("good_l", lb);

  CHECK_THROWS_AS(load_idx(td.dir / "absent", good_l), DataError);

  auto wrong_magic = ib;
  wrong_magic[3] = 0x04;
  CHECK_THROWS_AS(load_idx(td.plain("magic_i", wrong_magic), good_l), DataError);

  auto short_i = ib;
  short_i.pop_back();
  CHECK_THROWS_AS(load_idx(td.plain("short_i", short_i), good_l), DataError);

  auto long_i = ib;
  long_i.push_back(0);
  CHECK_THROWS_AS(load_idx(td.plain("long_i", long_i), good_l), DataError);

  auto wrong_lmagic = lb;
  wrong_lmagic[3] = 0x03;
  CHECK_THROWS_AS(load_idx(good_i, td.plain("magic_l", wrong_lmagic)), DataError);

  auto short_l = lb;
  short_l.pop_back();
  CHECK_THROWS_AS(load_idx(good_i, td.plain("short_l", short_l)), DataError);

  CHECK_THROWS_AS(load_idx(good_i, td.plain("count_l", idx_labels({0, 1, 0}))), DataError);
}

TEST_CASE("cifar batches concatenate records") {
  TempDir td("cifar");
  constexpr std::size_t kPix = 3 * 32 * 32;
  std::vector<unsigned char> b1(2 * (1 + kPix)), b2(1 + kPix);
  b1[0] = 3;
  for (std::size_t i = 0; i < kPix; ++i) b1[1 + i] = static_cast<unsigned char>(i % 251);
  b1[1 + kPix] = 9;  // second record, all-zero pixels
  b2[0] = 5;
  for (std::size_t i = 0; i < kPix; ++i) b2[1 + i] = 255;

  Dataset ds = load_cifar10({td.plain("b1.bin", b1), td.gz("b2.bin.gz", b2)});
  CHECK(ds.size() == 3);
  CHECK(ds.channels == 3);
  CHECK(ds.flat_dim() == kPix);
  CHECK(ds.labels == std::vector<int>{3, 9, 5});
  CHECK(ds.images.data[0] == 0.0);
  CHECK(ds.images.data[1] == 1.0 / 255.0);
  CHECK(ds.images.data[2 * kPix] == 1.0);  // third image starts all-255

  CHECK_THROWS_AS(load_cifar10({}), DataError);
  std::vector<unsigned char> bad(1 + kPix - 1);
  CHECK_THROWS_AS(load_cifar10({td.plain("bad.bin", bad)}), DataError);
}

TEST_CASE("iid partition covers every index exactly once") {
  auto shards = partition_iid(10, 3, 5);
  REQUIRE(shards.size() == 3);
  CHECK(shards[0].count() == 4);  // n mod K extras go to the first shards
  CHECK(shards[1].count() == 3);
  CHECK(shards[2].count() == 3);
  std::set<std::size_t> seen;
  for (const auto& s : shards) seen.insert(s.indices.begin(), s.indices.end());
  CHECK(seen.size() == 10);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 9);

  auto again = partition_iid(10, 3, 5);
  for (int c = 0; c < 3; ++c) CHECK(again[c].indices == shards[c].indices);
  auto other = partition_iid(10, 3, 6);
  bool same = true;
  for (int c = 0; c < 3; ++c) same = same && other[c].indices == shards[c].indices;
  CHECK_FALSE(same);

  CHECK_THROWS_AS(partition_iid(3, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(partition_iid(3, 0, 1), std::invalid_argument);
}

TEST_CASE("synthetic blobs are deterministic, bounded, and balanced") {
  Dataset a = synth_blobs(4, 30, 16, 11);
  Dataset b = synth_blobs(4, 30, 16, 11);
  CHECK(a.images.data == b.images.data);
  CHECK(a.labels == b.labels);
  Dataset c = synth_blobs(4, 30, 16, 12);
  CHECK(a.images.data != c.images.data);

  double lo = 1e9, hi = -1e9;
  for (double v : a.images.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0);  // rescaling maps the extremes exactly
  CHECK(hi == 1.0);

  std::vector<int> counts(4, 0);
  for (int y : a.labels) counts[static_cast<std::size_t>(y)]++;
  CHECK(counts == std::vector<int>{30, 30, 30, 30});

  // Rows are shuffled: the held-out tail must not be single-class.
  std::set<int> tail(a.labels.end() - 12, a.labels.end());
  CHECK(tail.size() >= 2);

  CHECK_THROWS_AS(synth_blobs(4, 30, 1, 11), std::invalid_argument);
  CHECK_THROWS_AS(synth_blobs(0, 30, 16, 11), std::invalid_argument);
}

TEST_CASE("synthetic blobs separate under a nearest-centroid rule") {
  Dataset ds = synth_blobs(5, 40, 12, 31);
  const std::size_t d = ds.flat_dim();
  std::vector<std::vector<double>> centroid(5, std::vector<double>(d, 0.0));
  std::vector<int> counts(5, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int y = ds.labels[i];
    counts[static_cast<std::size_t>(y)]++;
    for (std::size_t j = 0; j < d; ++j)
      centroid[static_cast<std::size_t>(y)][j] += ds.images.data[i * d + j];
  }
  for (int k = 0; k < 5; ++k)
    for (std::size_t j = 0; j < d; ++j) centroid[static_cast<std::size_t>(k)][j] /= counts[k];

  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    int arg = 0;
    double best = 1e300;
    for (int k = 0; k < 5; ++k) {
      double dist = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = ds.images.data[i * d + j] - centroid[static_cast<std::size_t>(k)][j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        arg = k;
      }
    }
    if (arg == ds.labels[i]) ++hits;
  }
  CHECK(hits == ds.size());  // class blobs never overlap
}

TEST_CASE("gather selects rows by dataset index") {
  Dataset ds = synth_blobs(3, 4, 6, 2);
  Tensor rows = gather_flat(ds, {5, 0});
  CHECK(rows.shape == Shape{2, 6});
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(rows.at(0, j) == ds.images.data[5 * 6 + j]);
    CHECK(rows.at(1, j) == ds.images.data[j]);
  }
  CHECK(gather_labels(ds, {5, 0}) == std::vector<int>{ds.labels[5], ds.labels[0]});
  CHECK_THROWS_AS(gather_flat(ds, {12}), std::out_of_range);
  CHECK_THROWS_AS(gather_labels(ds, {12}), std::out_of_range);
}

TEST_CASE("bundled dataset statistics") {
  NormalizationTransform t = stats_for("digits");
  REQUIRE(t.mean.size() == 1);
  CHECK(t.mean[0] == 0.1307);
  CHECK(t.stddev[0] == 0.3081);
  CHECK(stats_for("mnist").mean == t.mean);
  CHECK(stats_for("cifar10").mean.size() == 3);
  CHECK(stats_for("unheard-of").identity());
}

TEST_CASE("normalization arithmetic and clamping") {
  NormalizationTransform t{{0.5}, {0.25}};
  Tensor x({1, 4}, {1.0, 0.25, 1.5, -0.2});
  Tensor z = normalize_eager(t, x, 1, 4);
  CHECK(z.data[0] == doctest::Approx(2.0));
  CHECK(z.data[1] == doctest::Approx(-1.0));
  CHECK(z.data[2] == doctest::Approx(2.0));   // clamped to 1 first
  CHECK(z.data[3] == doctest::Approx(-2.0));  // clamped to 0 first

  // Per-channel: second channel has its own stats.
  NormalizationTransform t2{{0.0, 1.0}, {1.0, 0.5}};
  Tensor x2({1, 4}, {0.25, 0.75, 0.25, 0.75});
  Tensor z2 = normalize_eager(t2, x2, 2, 2);
  CHECK(z2.data[0] == doctest::Approx(0.25));
  CHECK(z2.data[2] == doctest::Approx(-1.5));

  NormalizationTransform id;
  Tensor untouched = normalize_eager(id, x, 1, 4);
  CHECK(untouched.data == x.data);  // identity does not even clamp
}

TEST_CASE("normalize and denormalize invert each other on valid pixels") {
  NormalizationTransform t = stats_for("cifar10");
  Rng rng(77);
  Tensor x({2, 3 * 4});
  for (double& v : x.data) v = rng.uniform01();
  Tensor back = denormalize(t, normalize_eager(t, x, 3, 4), 3, 4);
  REQUIRE(back.numel() == x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(back.data[i] == doctest::Approx(x.data[i]).epsilon(1e-12));

  // Denormalized output always lands in [0,1], even from wild inputs.
  Tensor wild({1, 12}, std::vector<double>(12, 40.0));
  Tensor clipped = denormalize(t, wild, 3, 4);
  for (double v : clipped.data) CHECK(v == 1.0);
  NormalizationTransform id;
  Tensor neg({1, 3}, {-0.5, 0.5, 1.5});
  Tensor idc = denormalize(id, neg, 1, 3);
  CHECK(idc.data == std::vector<double>{0.0, 0.5, 1.0});  // identity still clamps
}

TEST_CASE("graph-side normalization matches the eager form") {
  NormalizationTransform t{{0.3, 0.6}, {0.2, 0.4}};
  Rng rng(5);
  Tensor x({3, 8});
  for (double& v : x.data) v = 1.4 * rng.uniform01() - 0.2;  // straddles the clamp
  Graph g;
  NodeId node = apply_normalize(g, t, g.constant(x), 2, 4);
  Tensor eager = normalize_eager(t, x, 2, 4);
  CHECK(max_abs_diff(g.value(node), eager) == 0.0);
}

TEST_CASE("validation split holds out the last tenth") {
  TrainValSplit s = split_train_val(100);
  CHECK(s.train.size() == 90);
  CHECK(s.val.size() == 10);
  CHECK(s.train.front() == 0);
  CHECK(s.train.back() == 89);
  CHECK(s.val.front() == 90);
  CHECK(s.val.back() == 99);
  TrainValSplit tiny = split_train_val(9);
  CHECK(tiny.train.size() == 9);
  CHECK(tiny.val.empty());
}
