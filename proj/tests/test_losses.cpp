#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lcgan/eval/gradcheck.hpp"
#include "lcgan/losses/losses.hpp"

using namespace lcgan;
using namespace lcgan::losses;
using doctest::Approx;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-scale, scale));
  return t;
}

// Independent CE oracle: direct log-sum-exp without max shifting.
double ce_oracle(const std::vector<double>& logits, int label) {
  double z = 0;
  for (double v : logits) z += std::exp(v);
  return std::log(z) - logits[static_cast<std::size_t>(label)];
}

models::ClassifierArch tiny_classifier() {
  models::ClassifierArch a;
  a.image = {8, 8, 1};
  a.classes = 3;
  a.conv1_channels = 2;
  a.conv2_channels = 2;
  a.init_std = 0.5;
  return a;
}

// Per-item CE of a classifier, the oracle for label_loss.
std::vector<double> per_item_ce(const models::Classifier<double>& f, const Tensor<double>& x,
                                const std::vector<int>& labels) {
  const Tensor<double> logits = f.forward(x, nullptr);
  std::vector<double> out;
  for (int n = 0; n < x.shape().n; ++n) {
    std::vector<double> row(logits.item(n), logits.item(n) + f.classes());
    out.push_back(ce_oracle(row, labels[static_cast<std::size_t>(n)]));
  }
  return out;
}

Tensor<double> take(const Tensor<double>& x, const std::vector<int>& idx) {
  Tensor<double> out(x.shape().with_batch(static_cast<int>(idx.size())));
  const std::size_t sz = x.shape().item_size();
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy(x.item(idx[i]), x.item(idx[i]) + sz, out.data() + i * sz);
  return out;
}

}  // namespace

TEST_CASE("cross_entropy fixtures") {
  const std::vector<double> zeros(10, 0.0);
  CHECK(cross_entropy(std::span<const double>(zeros), 3) == Approx(2.302585).epsilon(1e-6));
  CHECK(cross_entropy(std::span<const double>(zeros), 3) == Approx(std::log(10.0)).epsilon(1e-12));

  std::vector<double> saturated(10, 0.0);
  saturated[7] = 1000.0;
  CHECK(cross_entropy(std::span<const double>(saturated), 7) == Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(cross_entropy(std::span<const double>(saturated), 2)));

  const std::vector<double> l = {2.0, 1.0, 0.1};
  const double e2 = std::exp(2.0), e1 = std::exp(1.0), e01 = std::exp(0.1);
  const double oracle = -std::log(e2 / (e2 + e1 + e01));
  CHECK(oracle == Approx(0.41703).epsilon(1e-5));
  CHECK(cross_entropy(std::span<const double>(l), 0) == Approx(oracle).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(std::span<const double>(l), 3), InvalidArgument);
  CHECK_THROWS_AS(cross_entropy(std::span<const double>(l), -1), InvalidArgument);
}

TEST_CASE("cross_entropy: non-negative on random logits, matches oracle") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> l(5);
    for (auto& v : l) v = rng.uniform(-8, 8);
    const int y = static_cast<int>(rng.below(5));
    const double ce = cross_entropy(std::span<const double>(l), y);
    CHECK(ce >= 0.0);
    CHECK(ce == Approx(ce_oracle(l, y)).epsilon(1e-10));
  }
}

TEST_CASE("adversarial_loss fixtures") {
  CHECK(adversarial_loss(Tensor<float>(Shape{2, 4, 4, 1}, 1.0f), true).value == 0.0);
  CHECK(adversarial_loss(Tensor<float>(Shape{2, 4, 4, 1}, 0.0f), true).value == 1.0);
  const Tensor<float> s(Shape{1, 1, 2, 1}, std::vector<float>{0.5f, -0.5f});
  CHECK(adversarial_loss(s, false).value == Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(adversarial_loss(Tensor<float>(), true), InvalidArgument);
}

TEST_CASE("adversarial_loss: BCE form") {
  const Tensor<double> zero(Shape{1, 2, 2, 1}, 0.0);
  CHECK(adversarial_loss(zero, true, AdversarialForm::binary_cross_entropy).value == Approx(std::log(2.0)));
  const Tensor<double> big(Shape{1, 1, 1, 1}, 50.0);
  CHECK(adversarial_loss(big, true, AdversarialForm::binary_cross_entropy).value == Approx(0.0).epsilon(1e-12));
  CHECK(adversarial_loss(big, false, AdversarialForm::binary_cross_entropy).value == Approx(50.0));
}

TEST_CASE("cycle and self-regularization fixtures") {
  Rng rng(2);
  const Tensor<float> x = random_tensor<float>({2, 4, 4, 3}, rng);
  CHECK(cycle_loss(x, x).value == 0.0);
  CHECK(cycle_loss(Tensor<float>(Shape{1, 4, 4, 3}, -1.0f), Tensor<float>(Shape{1, 4, 4, 3}, 1.0f)).value == 2.0);

  const Tensor<double> a = random_tensor<double>({1, 2, 2, 1}, rng), b = random_tensor<double>({1, 2, 2, 1}, rng);
  double oracle = 0;
  for (int i = 0; i < 4; ++i) oracle += std::fabs(a[i] - b[i]);
  CHECK(cycle_loss(a, b).value == Approx(oracle / 4).epsilon(1e-14));
  CHECK(self_regularization_loss(a, b).value == Approx(oracle / 4).epsilon(1e-14));

  CHECK(self_regularization_loss(x, x).value == 0.0);
  Tensor<double> shifted = a;
  for (auto& v : shifted.values()) v += -0.3;
  CHECK(self_regularization_loss(a, shifted).value == Approx(0.3).epsilon(1e-12));

  CHECK_THROWS_AS(cycle_loss(x, Tensor<float>(Shape{2, 4, 4, 1})), ShapeError);
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(3);
  SUBCASE("cross entropy wrt logits") {
    Tensor<double> l = random_tensor<double>({1, 1, 1, 4}, rng, 3.0);
    std::vector<nn::NamedParam<double>> probes = {{"logits", &l}};
    auto r = eval::gradcheck(
        [&](nn::Gradients<double>* g) {
          if (g) cross_entropy_backward(std::span<const double>(l.values()), 2, 1.0, g->slot(l).values());
          return cross_entropy(std::span<const double>(l.values()), 2);
        },
        probes, 1e-6);
    CHECK(r.max_rel_error <= 1e-3);
  }
  SUBCASE("adversarial, both forms and targets") {
    Tensor<double> s = random_tensor<double>({2, 2, 2, 1}, rng, 2.0);
    std::vector<nn::NamedParam<double>> probes = {{"scores", &s}};
    for (auto form : {AdversarialForm::least_squares, AdversarialForm::binary_cross_entropy})
      for (bool real : {true, false}) {
        auto r = eval::gradcheck(
            [&](nn::Gradients<double>* g) {
              auto out = adversarial_loss(s, real, form);
              if (g) g->slot(s) = out.grad;
              return out.value;
            },
            probes, 1e-6);
        CHECK(r.max_rel_error <= 1e-3);
      }
  }
  SUBCASE("cycle wrt reconstruction") {
    const Tensor<double> x = random_tensor<double>({2, 3, 3, 2}, rng);
    Tensor<double> rec = random_tensor<double>({2, 3, 3, 2}, rng);
    std::vector<nn::NamedParam<double>> probes = {{"rec", &rec}};
    auto r = eval::gradcheck(
        [&](nn::Gradients<double>* g) {
          auto out = cycle_loss(x, rec);
          if (g) g->slot(rec) = out.grad;
          return out.value;
        },
        probes, 1e-6);
    CHECK(r.max_rel_error <= 1e-3);
  }
  SUBCASE("label loss wrt both image streams through a frozen classifier") {
    models::Classifier<double> f(tiny_classifier(), rng);
    Tensor<double> xt = random_tensor<double>({3, 8, 8, 1}, rng), xc = random_tensor<double>({2, 8, 8, 1}, rng);
    const std::vector<int> yt = {0, 1, 2}, yc = {2, 1};
    std::vector<nn::NamedParam<double>> probes = {{"transformed", &xt}, {"cycle", &xc}};
    auto r = eval::gradcheck(
        [&](nn::Gradients<double>* g) {
          auto out = label_loss(f, xt, yt, xc, yc, ClassSet{1}, g != nullptr);
          if (g) {
            g->slot(xt) = out.grad_transformed;
            g->slot(xc) = out.grad_cycle;
          }
          return out.value;
        },
        probes, 1e-6);
    CHECK(r.max_rel_error <= 1e-3);
  }
}

TEST_CASE("label_loss: fixtures") {
  Rng rng(4);
  models::Classifier<double> f(tiny_classifier(), rng);
  const Tensor<double> x = random_tensor<double>({2, 8, 8, 1}, rng);
  const std::vector<int> y = {0, 2};

  SUBCASE("every item excluded gives exactly zero") {
    auto r = label_loss(f, x, y, x, y, ClassSet{0, 2}, true);
    CHECK(r.value == 0.0);
    CHECK(r.masked_fraction == 1.0);
    for (double v : r.grad_transformed.values()) CHECK(v == 0.0);
  }
  SUBCASE("mean of two items with CE 2.302585 and 0") {
    // Zero weights everywhere give uniform logits; a dense bias of 1000 on
    // one class makes the second classifier saturate on that class.
    models::ClassifierArch a = tiny_classifier();
    a.classes = 10;
    Rng r1(5);
    models::Classifier<double> uniform(a, r1);
    for (auto& p : uniform.params()) p.value->fill(0.0);
    models::Classifier<double> saturated = uniform;
    auto sp = saturated.params();
    (*sp.back().value)[4] = 1000.0;
    const Tensor<double> one = take(x, {0});
    const std::vector<int> y4 = {4};
    const double ce_uniform = label_loss(uniform, one, y4, Tensor<double>(), {}, {}, false).value;
    const double ce_sat = label_loss(saturated, one, y4, Tensor<double>(), {}, {}, false).value;
    CHECK(ce_uniform == Approx(2.302585).epsilon(1e-6));
    CHECK(ce_sat == Approx(0.0).epsilon(1e-12));
    CHECK((ce_uniform + ce_sat) / 2 == Approx(1.151293).epsilon(1e-6));
  }
  SUBCASE("saturated correct logits give zero") {
    models::Classifier<double> sat = f;
    auto sp = sat.params();
    for (auto& p : sp) p.value->fill(0.0);
    (*sp.back().value)[1] = 1000.0;
    const std::vector<int> ones = {1, 1};
    CHECK(label_loss(sat, x, ones, x, ones, {}, false).value == Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("length mismatch") {
    const std::vector<int> one = {0};
    CHECK_THROWS_AS(label_loss(f, x, one, x, y, {}, false), InvalidArgument);
    CHECK_THROWS_AS(label_loss(f, Tensor<double>(), {}, x, y, {}, false), InvalidArgument);
  }
}

TEST_CASE("label_loss: permutation, concatenation and exclusion properties") {
  Rng rng(6);
  models::Classifier<double> f(tiny_classifier(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    const int n1 = 1 + static_cast<int>(rng.below(4)), n2 = static_cast<int>(rng.below(4));
    const Tensor<double> a = random_tensor<double>({n1, 8, 8, 1}, rng);
    const Tensor<double> b = random_tensor<double>({n2, 8, 8, 1}, rng);
    std::vector<int> ya(static_cast<std::size_t>(n1)), yb(static_cast<std::size_t>(n2));
    for (auto& v : ya) v = static_cast<int>(rng.below(3));
    for (auto& v : yb) v = static_cast<int>(rng.below(3));
    const ClassSet exclude = {static_cast<int>(rng.below(3))};

    // Oracle: per-item CE over the items whose class is not excluded.
    auto ce_a = per_item_ce(f, a, ya), ce_b = n2 ? per_item_ce(f, b, yb) : std::vector<double>{};
    double sum = 0;
    int kept = 0;
    for (int i = 0; i < n1; ++i)
      if (!exclude.contains(ya[i])) sum += ce_a[i], ++kept;
    for (int i = 0; i < n2; ++i)
      if (!exclude.contains(yb[i])) sum += ce_b[i], ++kept;
    const auto r = label_loss(f, a, ya, b, yb, exclude, false);
    CHECK(r.used == static_cast<std::size_t>(kept));
    CHECK(r.masked_fraction == Approx(1.0 - double(kept) / (n1 + n2)));
    CHECK(r.value == Approx(kept ? sum / kept : 0.0).epsilon(1e-10));

    // Deleting the excluded items first gives the same value.
    std::vector<int> keep_idx, keep_y;
    for (int i = 0; i < n1; ++i)
      if (!exclude.contains(ya[i])) keep_idx.push_back(i), keep_y.push_back(ya[i]);
    if (!keep_idx.empty()) {
      const auto pruned = label_loss(f, take(a, keep_idx), keep_y, Tensor<double>(), {}, {}, false);
      const auto only_a = label_loss(f, a, ya, Tensor<double>(), {}, exclude, false);
      CHECK(pruned.value == Approx(only_a.value).epsilon(1e-12));
    }

    // Reversing batch order leaves the value unchanged.
    std::vector<int> rev(static_cast<std::size_t>(n1));
    std::iota(rev.rbegin(), rev.rend(), 0);
    std::vector<int> ya_rev(ya.rbegin(), ya.rend());
    CHECK(label_loss(f, take(a, rev), ya_rev, b, yb, exclude, false).value == Approx(r.value).epsilon(1e-12));

    // Concatenation: the pooled mean is the count-weighted mean of the parts.
    const auto ra = label_loss(f, a, ya, Tensor<double>(), {}, {}, false);
    if (n2 > 0) {
      const auto rb = label_loss(f, b, yb, Tensor<double>(), {}, {}, false);
      const auto all = label_loss(f, a, ya, b, yb, {}, false);
      CHECK(all.value == Approx((ra.value * n1 + rb.value * n2) / (n1 + n2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("total_objective fixtures and mode reductions") {
  const LossWeights w = LossWeights::defaults();
  LossReport c;
  c.adv_r = 1;
  c.adv_s = 1;
  c.cycle = 0.5;
  CHECK(total_objective(c, w, Mode::cyclegan) == Approx(7.0).epsilon(1e-15));

  LossReport s;
  s.adv_r = 0.25;
  s.selfreg = 0.1;
  CHECK(total_objective(s, w, Mode::simgan) == Approx(0.35).epsilon(1e-15));

  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    LossReport r;
    r.adv_r = rng.uniform(0, 2);
    r.adv_s = rng.uniform(0, 2);
    r.cycle = rng.uniform(0, 2);
    r.lab_r = rng.uniform(0, 2);
    r.lab_s = rng.uniform(0, 2);
    LossWeights zero_lab = w;
    zero_lab.lambda_lab_r = 0.0;
    zero_lab.lambda_lab_s = 0.0;
    CHECK(total_objective(r, zero_lab, Mode::label_cyclegan) == total_objective(r, w, Mode::cyclegan));
    const double expected = r.adv_r + r.adv_s + 10 * r.cycle + r.lab_r + r.lab_s;
    CHECK(std::fabs(total_objective(r, w, Mode::label_cyclegan) - expected) <= 1e-6);
  }
}

TEST_CASE("total_objective errors") {
  LossReport r;
  LossWeights w;
  w.lambda_cyc = 10.0;
  CHECK_NOTHROW(total_objective(r, w, Mode::cyclegan));
  CHECK_THROWS_AS(total_objective(r, w, Mode::label_cyclegan), InvalidArgument);
  CHECK_THROWS_AS(total_objective(r, w, Mode::simgan), InvalidArgument);
  w.lambda_cyc = -1.0;
  CHECK_THROWS_AS(total_objective(r, w, Mode::cyclegan), InvalidArgument);
  r.cycle = std::nan("");
  CHECK_THROWS_AS(total_objective(r, LossWeights::defaults(), Mode::cyclegan), NumericError);
}

TEST_CASE("LossReport serializes with exactly its field names") {
  LossReport r{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const auto j = to_json(r);
  CHECK(j.size() == 8);
  for (const char* k : {"adv_r", "adv_s", "cycle", "lab_r", "lab_s", "selfreg", "total", "masked_fraction"})
    CHECK(j.contains(k));
  CHECK(loss_report_from_json(nlohmann::json::parse(j.dump())) == r);
}

TEST_CASE("mode names round-trip") {
  for (auto m : {Mode::cyclegan, Mode::label_cyclegan, Mode::simgan}) CHECK(mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(mode_from_string("pix2pix"), InvalidArgument);
}
