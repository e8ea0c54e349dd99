#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <numeric>
#include <set>

#include "doctest.h"
#include "lcgan/data/corpus.hpp"
#include "lcgan/data/ingest.hpp"
#include "lcgan/data/sampling.hpp"
#include "lcgan/data/synthetic.hpp"
#include "test_support.hpp"

using namespace lcgan;
using namespace lcgan::data;
namespace fs = std::filesystem;

namespace {

DatasetManifest synthetic_manifest(Domain d, int k, int per_class, std::uint64_t seed) {
  DatasetManifest m;
  m.name = "digits";
  m.domain = d;
  m.class_count = k;
  m.image_shape = {32, 32, 3};
  m.item_count_per_class.assign(static_cast<std::size_t>(k), per_class);
  m.seed = seed;
  return m;
}

// Corpus of 16x16x1 images whose single varying pixel encodes the item id.
Corpus tagged_corpus(const std::vector<int>& labels, int k) {
  Corpus c(Domain::real, k, {16, 16, 1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<float> px(256, 0.0f);
    px[0] = static_cast<float>(i) / 10000.0f;
    c.append(px, labels[i]);
  }
  return c;
}

std::size_t tag_of(const Batch& b, std::size_t i) {
  return static_cast<std::size_t>(std::lround(b.images.item(static_cast<int>(i))[0] * 10000.0f));
}

double mean_pixel(const Corpus& c) {
  double s = 0;
  for (float v : c.pixels()) s += v;
  return s / static_cast<double>(c.pixels().size());
}

using testing::TempDir;

}  // namespace

TEST_CASE("synthetic corpus: declared counts, range and determinism") {
  const auto m = synthetic_manifest(Domain::simulated, 10, 100, 7);
  const Corpus c = build_synthetic_corpus(m);
  REQUIRE(c.size() == 1000);
  for (std::size_t n : c.class_counts()) CHECK(n == 100);
  for (float v : c.pixels()) REQUIRE((v >= -1.0f && v <= 1.0f));
  CHECK(build_synthetic_corpus(m) == c);

  auto other = m;
  other.seed = 8;
  CHECK(!(build_synthetic_corpus(other) == c));
}

TEST_CASE("synthetic corpus: the two domains differ measurably") {
  const Corpus sim = build_synthetic_corpus(synthetic_manifest(Domain::simulated, 3, 300, 1));
  const Corpus real = build_synthetic_corpus(synthetic_manifest(Domain::real, 3, 300, 1));
  const double ms = mean_pixel(sim), mr = mean_pixel(real);
  CHECK(std::fabs(ms - mr) > 0.05);
  // Regression fixtures for the renderer.
  CHECK(std::fabs(ms - 0.004222) < 1e-5);
  CHECK(std::fabs(mr - -0.692626) < 1e-5);

  // Real items carry identical channels.
  for (std::size_t i = 0; i < 10; ++i) {
    const auto px = real.image(i);
    for (std::size_t p = 0; p < px.size(); p += 3) {
      CHECK(px[p] == px[p + 1]);
      CHECK(px[p] == px[p + 2]);
    }
  }
}

TEST_CASE("synthetic corpus: item content does not depend on the other counts") {
  auto a = synthetic_manifest(Domain::real, 3, 5, 3);
  auto b = a;
  b.item_count_per_class = {5, 1, 9};
  const Corpus ca = build_synthetic_corpus(a), cb = build_synthetic_corpus(b);
  // The first item of class 2 is the same picture in both corpora.
  auto first_of = [](const Corpus& c, int k) {
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.label(i) == k) return std::vector<float>(c.image(i).begin(), c.image(i).end());
    return std::vector<float>{};
  };
  CHECK(first_of(ca, 2) == first_of(cb, 2));
}

TEST_CASE("synthetic corpus: horizontal flip doubles the corpus with mirrored copies") {
  auto m = synthetic_manifest(Domain::real, 2, 3, 4);
  m.horizontal_flip = true;
  const Corpus c = build_synthetic_corpus(m);
  REQUIRE(c.size() == 12);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(c.label(i + 6) == c.label(i));
    CHECK(c.image(i + 6)[0] == c.image(i)[31 * 3]);
  }
}

TEST_CASE("synthetic corpus: manifest errors") {
  auto m = synthetic_manifest(Domain::real, 1, 10, 1);
  m.item_count_per_class = {10};
  CHECK_THROWS_AS(build_synthetic_corpus(m), ConfigError);
  m = synthetic_manifest(Domain::real, 3, 10, 1);
  m.image_shape = {8, 8, 3};
  try {
    build_synthetic_corpus(m);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "image_shape");
  }
  m = synthetic_manifest(Domain::real, 11, 1, 1);
  CHECK_THROWS_AS(build_synthetic_corpus(m), ConfigError);
}

TEST_CASE("manifest JSON round-trip and field-named errors") {
  auto m = synthetic_manifest(Domain::simulated, 3, 300, 9);
  m.split = Split::test;
  const DatasetManifest back = manifest_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(to_json(back) == to_json(m));
  const auto j = to_json(m);
  for (const char* key : {"name", "domain", "class_count", "image_shape", "split", "item_count_per_class", "source", "seed"})
    CHECK(j.contains(key));

  auto expect_field = [](nlohmann::json bad, const std::string& field) {
    try {
      manifest_from_json(bad);
      FAIL("expected an error for " << field);
    } catch (const ConfigError& e) {
      CHECK(e.field() == field);
    }
  };
  auto bad = j;
  bad["class_count"] = "three";
  expect_field(bad, "class_count");
  bad = j;
  bad.erase("seed");
  expect_field(bad, "seed");
  bad = j;
  bad["image_shape"] = {32, 32};
  expect_field(bad, "image_shape");
  bad = j;
  bad["item_count_per_class"] = {1, -1, 1};
  expect_field(bad, "item_count_per_class");
  bad = j;
  bad["colour"] = "blue";
  expect_field(bad, "colour");
  bad = j;
  bad["split"] = "holdout";
  expect_field(bad, "split");

  TempDir dir("lcgan_test_manifest");
  std::ofstream(dir.path / "broken.json") << "{\"name\": \"x\", ";
  CHECK_THROWS_AS(load_manifest(dir.path / "broken.json"), ConfigError);
}

TEST_CASE("corpus files round-trip") {
  TempDir dir("lcgan_test_corpus");
  const Corpus c = build_synthetic_corpus(synthetic_manifest(Domain::simulated, 3, 4, 2));
  save_corpus(dir.path / "c.lcg", c);
  CHECK(load_corpus(dir.path / "c.lcg") == c);
}

TEST_CASE("IDX ingestion: byte mapping, resize and channel replication") {
  CHECK(byte_to_pixel(0) == -1.0f);
  CHECK(byte_to_pixel(255) == 1.0f);
  CHECK(byte_to_pixel(128) == doctest::Approx(2.0 * 128 / 255 - 1).epsilon(1e-6));
  CHECK(byte_to_pixel(128) == doctest::Approx(0.00392).epsilon(0.01));

  TempDir dir("lcgan_test_idx");
  IdxImages img;
  img.count = 6;
  img.rows = img.cols = 28;
  img.bytes.resize(6 * 28 * 28);
  for (std::size_t i = 0; i < img.bytes.size(); ++i) img.bytes[i] = static_cast<std::uint8_t>((i * 7) % 256);
  const std::vector<std::uint8_t> labels = {0, 1, 2, 1, 0, 2};
  write_idx_images(dir.path / "img.idx", img);
  write_idx_labels(dir.path / "lab.idx", labels);

  DatasetManifest m = synthetic_manifest(Domain::real, 3, 0, 0);
  m.source = Source::idx_files;
  m.item_count_per_class.clear();
  m.images_path = "img.idx";
  m.labels_path = "lab.idx";
  const Corpus c = build_corpus(m, dir.path);
  REQUIRE(c.size() == 6);
  CHECK(c.labels() == std::vector<int>{0, 1, 2, 1, 0, 2});
  CHECK(c.shape() == ImageShape{32, 32, 3});
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto px = c.image(i);
    for (std::size_t p = 0; p < px.size(); p += 3) {
      REQUIRE(px[p] == px[p + 1]);
      REQUIRE(px[p] == px[p + 2]);
      REQUIRE((px[p] >= -1.0f && px[p] <= 1.0f));
    }
  }

  // Per-class caps keep the first items of each class.
  m.item_count_per_class = {1, 2, 1};
  const Corpus capped = build_corpus(m, dir.path);
  CHECK(capped.labels() == std::vector<int>{0, 1, 2, 1});
  m.item_count_per_class = {3, 0, 0};
  CHECK_THROWS_AS(build_corpus(m, dir.path), ConfigError);
}

TEST_CASE("IDX ingestion: same-size input keeps exact byte values") {
  TempDir dir("lcgan_test_idx_exact");
  IdxImages img;
  img.count = 1;
  img.rows = img.cols = 16;
  img.bytes.assign(256, 128);
  img.bytes[0] = 0;
  img.bytes[255] = 255;
  write_idx_images(dir.path / "i", img);
  write_idx_labels(dir.path / "l", {1});
  DatasetManifest m = synthetic_manifest(Domain::real, 2, 0, 0);
  m.item_count_per_class.clear();
  m.image_shape = {16, 16, 1};
  const Corpus c = ingest_idx(dir.path / "i", dir.path / "l", m);
  CHECK(c.image(0)[0] == -1.0f);
  CHECK(c.image(0)[255] == 1.0f);
  CHECK(c.image(0)[17] == doctest::Approx(0.00392).epsilon(0.01));
}

TEST_CASE("IDX ingestion: malformed files") {
  TempDir dir("lcgan_test_idx_bad");
  IdxImages img;
  img.count = 2;
  img.rows = img.cols = 16;
  img.bytes.assign(2 * 256, 0);
  write_idx_images(dir.path / "img", img);
  write_idx_labels(dir.path / "lab", {0, 1, 1});
  DatasetManifest m = synthetic_manifest(Domain::real, 2, 0, 0);
  m.item_count_per_class.clear();
  CHECK_THROWS_AS(ingest_idx(dir.path / "img", dir.path / "lab", m), FormatError);  // count mismatch
  CHECK_THROWS_AS(ingest_idx(dir.path / "lab", dir.path / "lab", m), FormatError);  // wrong magic

  auto bytes = read_file_bytes(dir.path / "img");
  bytes.resize(bytes.size() - 10);
  write_file_bytes(dir.path / "short", bytes);
  write_idx_labels(dir.path / "lab2", {0, 1});
  CHECK_THROWS_AS(ingest_idx(dir.path / "short", dir.path / "lab2", m), FormatError);  // truncated
  CHECK_THROWS_AS(read_idx_labels(dir.path / "nothing-here"), IoError);
}

TEST_CASE("bilinear resize against a direct half-pixel oracle") {
  const ImageShape from{2, 3, 1};
  const std::vector<float> src = {0, 1, 2, 3, 4, 5};
  const auto out = resize_bilinear(src, from, 4, 5);
  auto sample = [&](double sy, double sx) {
    sy = std::clamp(sy, 0.0, 1.0);
    sx = std::clamp(sx, 0.0, 2.0);
    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, 1), x1 = std::min(x0 + 1, 2);
    const double ty = sy - y0, tx = sx - x0;
    auto v = [&](int y, int x) { return static_cast<double>(src[static_cast<std::size_t>(y * 3 + x)]); };
    return (v(y0, x0) * (1 - tx) + v(y0, x1) * tx) * (1 - ty) + (v(y1, x0) * (1 - tx) + v(y1, x1) * tx) * ty;
  };
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x)
      CHECK(out[static_cast<std::size_t>(y * 5 + x)] ==
            doctest::Approx(sample((y + 0.5) * 2 / 4 - 0.5, (x + 0.5) * 3 / 5 - 0.5)).epsilon(1e-6));

  const std::vector<float> flat(8 * 8, 0.25f);
  for (float v : resize_bilinear(flat, {8, 8, 1}, 13, 5)) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("PNG directory ingestion") {
  TempDir dir("lcgan_test_png");
  for (int label = 0; label < 2; ++label)
    for (int i = 0; i < 3; ++i) {
      PngImage img{20, 20, 1, std::vector<std::uint8_t>(400, static_cast<std::uint8_t>(label * 100 + i))};
      write_png(dir.path / std::to_string(label) / ("img" + std::to_string(2 - i) + ".png"), img);
    }
  DatasetManifest m = synthetic_manifest(Domain::simulated, 2, 0, 0);
  m.source = Source::png_directory;
  m.root = dir.path.string();
  m.item_count_per_class = {2, 3};
  const Corpus c = build_corpus(m);
  REQUIRE(c.size() == 5);
  CHECK(c.labels() == std::vector<int>{0, 0, 1, 1, 1});
  // Lexicographic order within a class: img0.png holds i = 2.
  CHECK(c.image(0)[0] == doctest::Approx(byte_to_pixel(2)));
  CHECK(c.image(1)[0] == doctest::Approx(byte_to_pixel(1)));
  CHECK(c.shape() == ImageShape{32, 32, 3});

  fs::create_directories(dir.path / "cats");
  CHECK_THROWS_AS(build_corpus(m), FormatError);
}

TEST_CASE("induce_imbalance: retained counts at the standard rates") {
  std::vector<int> labels(1000, 6);
  labels.resize(1300, 2);
  const Corpus c = tagged_corpus(labels, 10);
  const std::map<double, std::size_t> expect = {{0.5, 500}, {0.9, 100}, {0.99, 10}, {0.999, 1}};
  for (const auto& [rate, kept] : expect) {
    const Corpus r = induce_imbalance(c, {{6}, rate}, 5);
    CHECK(r.class_counts()[6] == kept);
    CHECK(r.class_counts()[2] == 300);
  }
}

TEST_CASE("induce_imbalance: exhaustive small corpora against integer arithmetic") {
  // rate = p / 1000, so ceil((1 - rate) n) = ceil((1000 - p) n / 1000).
  for (int p : {0, 1, 100, 250, 333, 500, 900, 990, 999})
    for (std::size_t n = 1; n <= 40; ++n) {
      const std::size_t oracle = ((1000 - p) * n + 999) / 1000;
      REQUIRE(retained_count(n, p / 1000.0) == oracle);
    }

  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> labels(10 + rng.below(30));
    for (auto& y : labels) y = static_cast<int>(rng.below(4));
    labels[0] = 1;
    const Corpus c = tagged_corpus(labels, 4);
    const ImbalanceSpec spec{{1}, 0.75};
    const Corpus r = induce_imbalance(c, spec, 100 + trial);
    const auto before = c.class_counts(), after = r.class_counts();
    for (int k = 0; k < 4; ++k)
      CHECK(after[static_cast<std::size_t>(k)] ==
            (k == 1 ? retained_count(before[1], 0.75) : before[static_cast<std::size_t>(k)]));
    // Survivors are a subsequence of the original items, labels intact.
    std::size_t j = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      while (j < c.size() && c.image(j)[0] != r.image(i)[0]) ++j;
      REQUIRE(j < c.size());
      CHECK(c.label(j) == r.label(i));
    }
    CHECK(induce_imbalance(c, spec, 100 + trial) == r);
  }
}

TEST_CASE("induce_imbalance: identity rate and errors") {
  const Corpus c = tagged_corpus({0, 1, 2, 1, 0, 2, 1}, 3);
  CHECK(induce_imbalance(c, {{1}, 0.0}, 1) == c);
  CHECK_THROWS_AS(induce_imbalance(tagged_corpus({0, 0, 2}, 3), {{1}, 0.5}, 1), InvalidArgument);
  CHECK_THROWS_AS(induce_imbalance(c, {{1}, 1.0}, 1), InvalidArgument);
  CHECK_THROWS_AS(induce_imbalance(c, {{3}, 0.5}, 1), InvalidArgument);
}

TEST_CASE("mixed stream: exact halves, epoch coverage, determinism") {
  std::vector<int> la(100), lb(100);
  for (std::size_t i = 0; i < 100; ++i) la[i] = lb[i] = static_cast<int>(i % 3);
  const Corpus a = tagged_corpus(la, 3), b = tagged_corpus(lb, 3);
  MixedMinibatchStream s(a, b, 20, 9), s2(a, b, 20, 9);
  CHECK(s.batches_per_epoch() == 10);
  std::set<std::size_t> seen_a, seen_b;
  for (int k = 0; k < 10; ++k) {
    const Batch x = s.next();
    REQUIRE(x.size() == 20);
    CHECK(std::count(x.source.begin(), x.source.end(), 0) == 10);
    CHECK(std::count(x.source.begin(), x.source.end(), 1) == 10);
    for (std::size_t i = 0; i < 20; ++i) {
      (x.source[i] == 0 ? seen_a : seen_b).insert(x.indices[i]);
      CHECK(tag_of(x, i) == x.indices[i]);
      CHECK(x.labels[i] == (x.source[i] == 0 ? a : b).label(x.indices[i]));
    }
    const Batch y = s2.next();
    CHECK(y.indices == x.indices);
    CHECK(y.images == x.images);
  }
  CHECK(seen_a.size() == 100);
  CHECK(seen_b.size() == 100);
}

TEST_CASE("mixed stream: batch 64 is always 32 + 32, unequal corpora") {
  const Corpus a = tagged_corpus(std::vector<int>(70, 0), 2), b = tagged_corpus(std::vector<int>(333, 1), 2);
  MixedMinibatchStream s(a, b, 64, 3);
  std::vector<std::size_t> a_order;
  for (int k = 0; k < 30; ++k) {
    const Batch x = s.next();
    CHECK(std::count(x.source.begin(), x.source.end(), 0) == 32);
    CHECK(std::count(x.source.begin(), x.source.end(), 1) == 32);
    for (std::size_t i = 0; i < 64; ++i)
      if (x.source[i] == 0) a_order.push_back(x.indices[i]);
  }
  // Every consecutive window of |a| draws from side a is a permutation.
  for (std::size_t start = 0; start + 70 <= a_order.size(); start += 70) {
    std::set<std::size_t> w(a_order.begin() + static_cast<std::ptrdiff_t>(start),
                            a_order.begin() + static_cast<std::ptrdiff_t>(start + 70));
    CHECK(w.size() == 70);
  }
}

TEST_CASE("mixed stream: errors") {
  const Corpus a = tagged_corpus({0, 1, 0, 1}, 2), empty(Domain::real, 2, {16, 16, 1});
  CHECK_THROWS_AS(MixedMinibatchStream(a, a, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(MixedMinibatchStream(a, a, 10, 1), InvalidArgument);
  CHECK_NOTHROW(MixedMinibatchStream(a, a, 10, 1, false));
  CHECK_THROWS_AS(MixedMinibatchStream(a, empty, 2, 1), InvalidArgument);
}

TEST_CASE("paired stream: coverage, labels and determinism") {
  const Corpus real = tagged_corpus({2, 0, 1}, 3), sim = tagged_corpus({1, 1, 0, 2, 2}, 3);
  PairedDomainStream s(real, sim, 1, 4), s2(real, sim, 1, 4);
  CHECK(s.batches_per_epoch() == 3);
  std::set<std::size_t> seen;
  for (int k = 0; k < 3; ++k) {
    const auto [r, m] = s.next();
    REQUIRE(r.size() == 1);
    REQUIRE(m.size() == 1);
    seen.insert(r.indices[0]);
    CHECK(r.labels[0] == real.label(r.indices[0]));
    CHECK(m.labels[0] == sim.label(m.indices[0]));
    CHECK(tag_of(r, 0) == r.indices[0]);
    const auto [r2, m2] = s2.next();
    CHECK(r2.indices == r.indices);
    CHECK(m2.indices == m.indices);
  }
  CHECK(seen.size() == 3);

  // skip(n) lands where n calls to next() would.
  PairedDomainStream p(real, sim, 2, 8), q(real, sim, 2, 8);
  for (int k = 0; k < 4; ++k) p.next();
  q.skip(4);
  CHECK(p.next().first.indices == q.next().first.indices);
  CHECK_THROWS_AS(PairedDomainStream(real, Corpus(Domain::simulated, 3, {16, 16, 1}), 1, 1), InvalidArgument);
}

TEST_CASE("single-source stream covers the corpus once per epoch") {
  const Corpus c = tagged_corpus(std::vector<int>(10, 0), 1 + 1);
  SingleSourceStream s(c, 4, 2);
  CHECK(s.batches_per_epoch() == 3);
  std::multiset<std::size_t> seen;
  std::vector<std::size_t> sizes;
  for (int k = 0; k < 3; ++k) {
    const Batch b = s.next();
    sizes.push_back(b.size());
    seen.insert(b.indices.begin(), b.indices.end());
  }
  CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
  CHECK(seen.size() == 10);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
}
