#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "lcgan/eval/gradcheck.hpp"
#include "lcgan/losses/losses.hpp"
#include "lcgan/models/label_map.hpp"
#include "lcgan/models/networks.hpp"
#include "lcgan/models/serialization.hpp"

using namespace lcgan;
using namespace lcgan::models;

namespace {

template <typename T>
Tensor<T> random_images(Shape s, Rng& rng) {
  Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return t;
}

GeneratorArch tiny_generator(int residual_blocks) {
  GeneratorArch a;
  a.image = {8, 8, 1};
  a.base_channels = residual_blocks > 0 ? 1 : 2;
  a.downsample_stages = 1;
  a.residual_blocks = residual_blocks;
  a.label_channels = 2;
  a.init_std = 0.4;
  return a;
}

// Gradient check of sum_i w_i * net(x)_i with respect to every parameter and
// the input image.
template <typename Net, typename Fwd>
eval::GradcheckResult check_readout(Net& net, Fwd&& fwd, Shape in, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> x = random_images<double>(in, rng);
  std::vector<nn::NamedParam<double>> probes = net.params();
  CHECK(parameter_count(probes) <= 500);
  probes.push_back({"input", &x});
  Tensor<double> w;
  auto evaluate = [&](nn::Gradients<double>* grads) {
    nn::Tape<double> tape;
    const Tensor<double> y = fwd(x, grads ? &tape : nullptr);
    if (w.empty()) w = random_images<double>(y.shape(), rng);
    double loss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) loss += w[i] * y[i];
    if (grads) {
      const Tensor<double> gx = net.backward(w, tape, grads);
      auto& slot = grads->slot(x);
      for (std::size_t i = 0; i < gx.size(); ++i) slot[i] += gx[i];
      CHECK(tape.empty());
    }
    return loss;
  };
  // A larger step keeps round-off small for gradients that are exactly zero
  // (conv biases feeding instance norm).
  return eval::gradcheck(evaluate, probes, 1e-4);
}

}  // namespace

TEST_CASE("embed_label_map: single pixel one-hot") {
  Tensor<float> b(Shape{1, 1, 1, 0});
  const Tensor<float> out = embed_label_map(b, 2, 3);
  REQUIRE(out.shape() == Shape{1, 1, 1, 3});
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == 1.0f);
}

TEST_CASE("embed_label_map: 8x8x128 bottleneck with 10 classes, brute-force scan") {
  Rng rng(7);
  const Tensor<float> b = random_images<float>({1, 8, 8, 128}, rng);
  const Tensor<float> out = embed_label_map(b, 4, 10);
  REQUIRE(out.shape() == Shape{1, 8, 8, 138});
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      for (int c = 0; c < 128; ++c) CHECK(out.at(0, i, j, c) == b.at(0, i, j, c));
      for (int c = 128; c < 138; ++c) CHECK(out.at(0, i, j, c) == (c == 132 ? 1.0f : 0.0f));
    }
}

TEST_CASE("embed_label_map: n = 0 is the identity") {
  Rng rng(8);
  const Tensor<float> b = random_images<float>({2, 4, 4, 5}, rng);
  const int labels[2] = {0, 0};
  CHECK(embed_label_map(b, std::span<const int>(labels), 0) == b);
}

TEST_CASE("embed_label_map: argmax over label channels recovers the label") {
  Rng rng(9);
  const Tensor<float> b = random_images<float>({4, 3, 3, 6}, rng);
  const int labels[4] = {3, 0, 6, 3};
  const Tensor<float> out = embed_label_map(b, std::span<const int>(labels), 7);
  for (int n = 0; n < 4; ++n)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        int best = 0;
        for (int k = 1; k < 7; ++k)
          if (out.at(n, i, j, 6 + k) > out.at(n, i, j, 6 + best)) best = k;
        CHECK(best == labels[n]);
      }
}

TEST_CASE("embed_label_map: errors") {
  Tensor<float> b(Shape{1, 2, 2, 3});
  CHECK_THROWS_AS(embed_label_map(b, 3, 3), InvalidArgument);
  CHECK_THROWS_AS(embed_label_map(b, -1, 3), InvalidArgument);
  const int two[2] = {0, 1};
  CHECK_THROWS_AS(embed_label_map(b, std::span<const int>(two), 3), InvalidArgument);
}

TEST_CASE("strip_label_channels returns the bottleneck part of the gradient") {
  Rng rng(10);
  const Tensor<double> g = random_images<double>({2, 2, 2, 5}, rng);
  const Tensor<double> s = strip_label_channels(g, 2);
  REQUIRE(s.shape() == Shape{2, 2, 2, 3});
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) CHECK(s.at(n, 1, 0, c) == g.at(n, 1, 0, c));
}

TEST_CASE("generator: shape, range and determinism") {
  GeneratorArch a;
  a.base_channels = 8;
  a.label_channels = 3;
  Rng r1(42), r2(42);
  Generator<float> g1(a, r1), g2(a, r2);
  Rng rng(1);
  const Tensor<float> x = random_images<float>({2, 32, 32, 3}, rng);
  const int labels[2] = {0, 2};
  const Tensor<float> y = g1.forward(x, labels, nullptr);
  REQUIRE(y.shape() == x.shape());
  for (float v : y.values()) {
    CHECK(v > -1.0f);
    CHECK(v < 1.0f);
  }
  CHECK(g2.forward(x, labels, nullptr) == y);
  CHECK(g1.forward(x, labels, nullptr) == y);
}

TEST_CASE("generator: default bottleneck is 8x8x128 for 32x32 input") {
  GeneratorArch a;
  Rng rng(3);
  Generator<float> g(a, rng);
  const Tensor<float> h = g.encode(Tensor<float>(Shape{1, 32, 32, 3}), nullptr);
  CHECK(h.shape() == Shape{1, 8, 8, 128});
}

TEST_CASE("generator: label changes the output of a conditional generator") {
  GeneratorArch a;
  a.base_channels = 4;
  a.label_channels = 3;
  Rng rng(4);
  Generator<float> g(a, rng);
  const Tensor<float> x = random_images<float>({1, 32, 32, 3}, rng);
  const int y0[1] = {0}, y1[1] = {1};
  const Tensor<float> o0 = g.forward(x, y0, nullptr), o1 = g.forward(x, y1, nullptr);
  double dist = 0;
  for (std::size_t i = 0; i < o0.size(); ++i) dist += std::fabs(o0[i] - o1[i]);
  CHECK(dist > 0);
}

TEST_CASE("generator: unconditional forward is exactly decode(encode(x))") {
  GeneratorArch a;
  a.base_channels = 4;
  Rng rng(5);
  Generator<float> g(a, rng);
  const Tensor<float> x = random_images<float>({2, 16, 16, 3}, rng);
  const Tensor<float> direct = g.forward(x, {}, nullptr);
  const Tensor<float> halves = g.decode(g.encode(x, nullptr), nullptr);
  CHECK(std::memcmp(direct.data(), halves.data(), direct.size() * sizeof(float)) == 0);
}

TEST_CASE("generator: errors") {
  GeneratorArch a;
  a.base_channels = 2;
  a.label_channels = 2;
  Rng rng(6);
  Generator<float> g(a, rng);
  CHECK_THROWS_AS(g.forward(Tensor<float>(Shape{1, 32, 32, 3}), {}, nullptr), InvalidArgument);
  const int y[1] = {0};
  CHECK_THROWS_AS(g.forward(Tensor<float>(Shape{1, 30, 32, 3}), y, nullptr), ShapeError);
  CHECK_THROWS_AS(g.forward(Tensor<float>(Shape{1, 32, 32, 1}), y, nullptr), ShapeError);
  const int bad[1] = {2};
  CHECK_THROWS_AS(g.forward(Tensor<float>(Shape{1, 32, 32, 3}), bad, nullptr), InvalidArgument);
}

TEST_CASE("generator: passthrough returns its input") {
  GeneratorArch a;
  a.passthrough = true;
  Rng rng(1);
  Generator<float> g(a, rng);
  const Tensor<float> x = random_images<float>({1, 32, 32, 3}, rng);
  CHECK(g.forward(x, {}, nullptr) == x);
  CHECK(g.params().empty());
}

TEST_CASE("discriminator: 32x32x3 gives a 4x4 score map per image") {
  DiscriminatorArch a;
  a.base_channels = 8;
  Rng rng(11);
  Discriminator<float> d(a, rng);
  CHECK(d.score_shape(5) == Shape{5, 4, 4, 1});
  const Tensor<float> x = random_images<float>({3, 32, 32, 3}, rng);
  const Tensor<float> s = d.forward(x, nullptr);
  REQUIRE(s.shape() == Shape{3, 4, 4, 1});

  // Batch order is preserved and scores are a pure function of the image.
  Tensor<float> one(Shape{1, 32, 32, 3});
  std::copy(x.item(2), x.item(2) + x.shape().item_size(), one.data());
  const Tensor<float> s2 = d.forward(one, nullptr);
  for (int i = 0; i < 16; ++i) CHECK(s2[i] == s[32 + i]);
  CHECK(d.forward(x, nullptr) == s);
  CHECK_THROWS_AS(d.forward(Tensor<float>(Shape{1, 16, 16, 3}), nullptr), ShapeError);
}

TEST_CASE("classifier: logits, softmax normalization and corrupt params") {
  ClassifierArch a;
  Rng rng(12);
  Classifier<float> f(a, rng);
  const Tensor<float> x = random_images<float>({4, 32, 32, 3}, rng);
  const Tensor<float> logits = f.forward(x, nullptr);
  REQUIRE(logits.shape() == Shape{4, 1, 1, 10});
  for (int n = 0; n < 4; ++n) {
    const std::span<const float> row(logits.item(n), 10);
    for (float v : row) CHECK(std::isfinite(v));
    const auto p = losses::softmax(row);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  const float zeros[10] = {};
  for (double p : losses::softmax(std::span<const float>(zeros))) CHECK(p == doctest::Approx(0.1).epsilon(1e-12));

  (*f.params()[0].value)[3] = std::nanf("");
  CHECK_THROWS_AS(f.forward(x, nullptr), NumericError);
}

TEST_CASE("argmax_rows breaks ties toward the lower index") {
  Tensor<float> l(Shape{2, 1, 1, 3}, std::vector<float>{1, 3, 3, 0, 0, 0});
  CHECK(argmax_rows(l) == std::vector<int>{1, 0});
}

TEST_CASE("tiny networks: analytic gradients match central differences") {
  SUBCASE("generator without residual blocks") {
    Rng rng(21);
    Generator<double> g(tiny_generator(0), rng);
    const int labels[2] = {1, 0};
    auto r = check_readout(g, [&](const Tensor<double>& x, nn::Tape<double>* t) { return g.forward(x, labels, t); },
                           {2, 8, 8, 1}, 31);
    INFO(r.worst_name << "[" << r.worst_index << "] " << r.analytic_at_worst << " vs " << r.numeric_at_worst);
    CHECK(r.max_rel_error <= 1e-3);
  }
  SUBCASE("generator with a residual block") {
    Rng rng(22);
    Generator<double> g(tiny_generator(1), rng);
    const int labels[2] = {0, 1};
    auto r = check_readout(g, [&](const Tensor<double>& x, nn::Tape<double>* t) { return g.forward(x, labels, t); },
                           {2, 8, 8, 1}, 32);
    INFO(r.worst_name << "[" << r.worst_index << "] " << r.analytic_at_worst << " vs " << r.numeric_at_worst);
    CHECK(r.max_rel_error <= 1e-3);
  }
  SUBCASE("discriminator") {
    DiscriminatorArch a;
    a.image = {8, 8, 1};
    a.base_channels = 2;
    a.stages = 2;
    a.init_std = 0.4;
    Rng rng(23);
    Discriminator<double> d(a, rng);
    auto r = check_readout(d, [&](const Tensor<double>& x, nn::Tape<double>* t) { return d.forward(x, t); },
                           {2, 8, 8, 1}, 33);
    INFO(r.worst_name << "[" << r.worst_index << "] " << r.analytic_at_worst << " vs " << r.numeric_at_worst);
    CHECK(r.max_rel_error <= 1e-3);
  }
  SUBCASE("classifier") {
    ClassifierArch a;
    a.image = {8, 8, 1};
    a.classes = 2;
    a.conv1_channels = 2;
    a.conv2_channels = 2;
    a.init_std = 0.4;
    Rng rng(24);
    Classifier<double> f(a, rng);
    auto r = check_readout(f, [&](const Tensor<double>& x, nn::Tape<double>* t) { return f.forward(x, t); },
                           {2, 8, 8, 1}, 34);
    INFO(r.worst_name << "[" << r.worst_index << "] " << r.analytic_at_worst << " vs " << r.numeric_at_worst);
    CHECK(r.max_rel_error <= 1e-3);
  }
}

TEST_CASE("serialization: networks round-trip through an archive file") {
  const auto dir = std::filesystem::temp_directory_path() / "lcgan_test_models";
  std::filesystem::remove_all(dir);
  Rng rng(13);
  const Tensor<float> x = random_images<float>({2, 32, 32, 3}, rng);

  GeneratorArch ga;
  ga.base_channels = 4;
  ga.label_channels = 3;
  ga.direction = Direction::r2s;
  Generator<float> g(ga, rng);
  save_generator(dir / "g.lcg", g);
  Generator<float> g2 = load_generator(dir / "g.lcg");
  CHECK(g2.arch().direction == Direction::r2s);
  CHECK(g2.arch().label_channels == 3);
  const int labels[2] = {2, 1};
  CHECK(g2.forward(x, labels, nullptr) == g.forward(x, labels, nullptr));

  ClassifierArch ca;
  ca.classes = 3;
  ca.side = DomainSide::sim_side;
  Classifier<float> f(ca, rng);
  save_classifier(dir / "f.lcg", f);
  Classifier<float> f2 = load_classifier(dir / "f.lcg");
  CHECK(f2.arch().side == DomainSide::sim_side);
  CHECK(f2.forward(x, nullptr) == f.forward(x, nullptr));

  // A classifier file is not a generator.
  CHECK_THROWS(load_generator(dir / "f.lcg"));
  std::filesystem::remove_all(dir);
}
