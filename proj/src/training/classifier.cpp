#include "lcgan/training/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lcgan/data/sampling.hpp"
#include "lcgan/losses/losses.hpp"
#include "lcgan/training/optimizer.hpp"

namespace lcgan::training {

using nlohmann::json;

models::ClassifierArch classifier_arch(const TrainConfig& cfg, const data::Corpus& corpus, models::DomainSide side) {
  models::ClassifierArch a;
  a.image = corpus.shape();
  a.classes = corpus.class_count();
  a.conv1_channels = cfg.classifier_conv1;
  a.conv2_channels = cfg.classifier_conv2;
  a.side = side;
  return a;
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) { return mix_seed(mix_seed(seed) ^ tag); }

void require_two_classes(const data::Corpus& c) {
  const auto counts = c.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t n) { return n > 0; }) < 2)
    throw InvalidArgument("classifier training needs items from at least two classes");
}

// Mean cross-entropy over the batch; accumulates parameter gradients.
double batch_step(const models::Classifier<float>& net, const data::Batch& b, nn::Gradients<float>& grads) {
  nn::Tape<float> tape;
  const auto logits = net.forward(b.images, &tape);
  const auto k = static_cast<std::size_t>(net.classes());
  Tensor<float> g(logits.shape());
  const double inv = 1.0 / static_cast<double>(b.size());
  double sum = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::span<const float> row(logits.data() + i * k, k);
    sum += losses::cross_entropy(row, b.labels[i]);
    losses::cross_entropy_backward(row, b.labels[i], inv, std::span<float>(g.data() + i * k, k));
  }
  net.backward(g, tape, &grads);
  return sum * inv;
}

template <typename Stream>
ClassifierRun run(Stream& stream, const data::Corpus& shape_source, const TrainConfig& cfg, models::DomainSide side,
                  std::ostream* log, std::size_t* from_a, std::size_t* from_b) {
  Rng init = Rng::derive(cfg.seed, 201);
  ClassifierRun r{models::Classifier<float>(classifier_arch(cfg, shape_source, side), init), {}, 0};
  Adam<float> opt(r.net.params(), cfg.adam());
  const std::size_t per_epoch = stream.batches_per_epoch();
  for (int e = 1; e <= cfg.epochs; ++e) {
    const double lr = scheduled_lr(cfg.learning_rate, cfg.lr_decay, e, cfg.epochs);
    double loss = 0;
    std::size_t a = 0, b = 0;
    for (std::size_t s = 0; s < per_epoch; ++s) {
      const data::Batch batch = stream.next();
      const auto second = static_cast<std::size_t>(std::count(batch.source.begin(), batch.source.end(), 1));
      a += batch.size() - second;
      b += second;
      // Mixed retraining records the make-up of every batch.
      if (log && from_b)
        *log << json{{"epoch", e}, {"batch", s}, {"real", batch.size() - second}, {"transformed", second}}.dump()
             << '\n';
      nn::Gradients<float> grads;
      const double l = batch_step(r.net, batch, grads);
      if (!std::isfinite(l)) throw NumericError("non-finite classifier loss in epoch " + std::to_string(e));
      opt.step(grads, lr);
      loss += l;
      ++r.steps;
    }
    r.epoch_loss.push_back(loss / static_cast<double>(per_epoch));
    if (from_a) *from_a += a;
    if (from_b) *from_b += b;
    if (log)
      *log << json{{"epoch", e}, {"lr", lr}, {"loss", r.epoch_loss.back()}, {"batches", per_epoch},
                   {"items_first", a}, {"items_second", b}}.dump()
           << '\n';
  }
  return r;
}

}  // namespace

ClassifierRun train_classifier(const data::Corpus& train, const TrainConfig& cfg, models::DomainSide side,
                               std::ostream* log) {
  cfg.validate();
  if (train.empty()) throw InvalidArgument("classifier training corpus is empty");
  require_two_classes(train);
  data::SingleSourceStream stream(train, static_cast<std::size_t>(cfg.batch_size), stream_seed(cfg.seed, 202));
  return run(stream, train, cfg, side, log, nullptr, nullptr);
}

PretrainResult pretrain_classifier(const data::Corpus& train, const data::Corpus& heldout, const TrainConfig& cfg,
                                   models::DomainSide side, std::ostream* log) {
  if (heldout.empty()) throw InvalidArgument("held-out corpus is empty");
  PretrainResult p{train_classifier(train, cfg, side, log), 0.0};
  p.heldout_accuracy = eval::evaluate_classifier(p.run.net, heldout).overall_accuracy;
  return p;
}

RetrainResult retrain_classifier(const data::Corpus& real, const data::Corpus& transformed, const data::Corpus& test,
                                 const TrainConfig& cfg, bool strict, std::ostream* log) {
  cfg.validate();
  if (real.empty()) throw InvalidArgument("real training corpus is empty");
  require_two_classes(real);
  std::size_t from_real = 0, from_transformed = 0;
  bool fell_back = false;
  ClassifierRun trained = [&] {
    if (transformed.empty()) {
      if (strict) throw InvalidArgument("transformed corpus is empty; refusing to retrain in strict mode");
      if (log) *log << json{{"warning", "transformed corpus is empty; training on real items only"}}.dump() << '\n';
      fell_back = true;
      data::SingleSourceStream stream(real, static_cast<std::size_t>(cfg.batch_size), stream_seed(cfg.seed, 203));
      return run(stream, real, cfg, models::DomainSide::real_side, log, &from_real, nullptr);
    }
    const auto mixed_seed = stream_seed(cfg.seed, 204);
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    if (b > 2 * std::min(real.size(), transformed.size())) {
      const std::string msg = "batch size " + std::to_string(b) + " exceeds twice the smaller corpus (" +
                              std::to_string(std::min(real.size(), transformed.size())) + " items)";
      if (strict) throw InvalidArgument(msg);
      if (log) *log << json{{"warning", msg + "; items repeat within a batch"}}.dump() << '\n';
    }
    auto stream = std::make_unique<data::MixedMinibatchStream>(real, transformed, b, mixed_seed, false);
    return run(*stream, real, cfg, models::DomainSide::real_side, log, &from_real, &from_transformed);
  }();
  RetrainResult out{std::move(trained), {}, from_real, from_transformed, fell_back};
  out.report = eval::evaluate_classifier(out.run.net, test);
  out.report.metadata["seed"] = cfg.seed;
  out.report.metadata["config_hash"] = config_hash(cfg);
  out.report.metadata["steps"] = out.run.steps;
  out.report.metadata["items_from_real"] = out.items_from_real;
  out.report.metadata["items_from_transformed"] = out.items_from_transformed;
  return out;
}

}  // namespace lcgan::training
