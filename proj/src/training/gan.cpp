#include "lcgan/training/gan.hpp"

#include <cmath>
#include <cstdio>

#include "lcgan/models/serialization.hpp"

namespace lcgan::training {

using losses::Mode;
using nlohmann::json;

namespace {

template <typename T>
std::span<const int> labels_for(const models::Generator<T>& g, std::span<const int> y) {
  return g.conditional() ? y : std::span<const int>{};
}

// dst += scale * src
template <typename T>
void axpy(Tensor<T>& dst, double scale, const Tensor<T>& src) {
  require_same_shape(dst.shape(), src.shape(), "gradient accumulation");
  const T a = static_cast<T>(scale);
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += a * s[i];
}

template <typename T>
Tensor<T> scaled(const Tensor<T>& src, double scale) {
  Tensor<T> out(src.shape());
  axpy(out, scale, src);
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) { return mix_seed(mix_seed(seed) ^ tag); }

}  // namespace

template <typename T>
GeneratorPass<T> run_generators(const GanNets<T>& nets, const Tensor<T>& x_r, std::span<const int> y_r,
                                const Tensor<T>& x_s, std::span<const int> y_s, Mode mode, bool record) {
  if (!nets.s2r) throw InvalidArgument("the simulated-to-real generator is required");
  GeneratorPass<T> p;
  const auto& s2r = *nets.s2r;
  p.fake_r = s2r.forward(x_s, labels_for(s2r, y_s), record ? &p.tape_fake_r : nullptr);
  if (mode == Mode::simgan) return p;
  if (!nets.r2s) throw InvalidArgument("the real-to-simulated generator is required outside simgan mode");
  const auto& r2s = *nets.r2s;
  p.rec_s = r2s.forward(p.fake_r, labels_for(r2s, y_s), record ? &p.tape_rec_s : nullptr);
  p.fake_s = r2s.forward(x_r, labels_for(r2s, y_r), record ? &p.tape_fake_s : nullptr);
  p.rec_r = s2r.forward(p.fake_s, labels_for(s2r, y_r), record ? &p.tape_rec_r : nullptr);
  return p;
}

template <typename T>
losses::LossReport generator_objective(const GanNets<T>& nets, GeneratorPass<T>& pass, const Tensor<T>& x_r,
                                       std::span<const int> y_r, const Tensor<T>& x_s, std::span<const int> y_s,
                                       const ObjectiveSettings& s, nn::Gradients<T>* grads) {
  const auto cw = losses::component_weights(s.weights, s.mode);
  losses::LossReport rep;
  const bool want = grads != nullptr;

  // Adversarial term of one generator: value and gradient w.r.t. its output.
  auto adversarial = [&](const models::Discriminator<T>& d, const Tensor<T>& fake, double& value) {
    nn::Tape<T> tape;
    const auto scores = d.forward(fake, want ? &tape : nullptr);
    auto a = losses::adversarial_loss(scores, true, s.adversarial);
    value = a.value;
    return want ? d.backward(a.grad, tape, nullptr) : Tensor<T>();
  };

  if (!nets.d_r) throw InvalidArgument("the real-domain discriminator is required");
  Tensor<T> g_adv_r = adversarial(*nets.d_r, pass.fake_r, rep.adv_r);

  if (s.mode == Mode::simgan) {
    auto sr = losses::self_regularization_loss(x_s, pass.fake_r);
    rep.selfreg = sr.value;
    rep.total = losses::total_objective(rep, s.weights, s.mode);
    if (want) {
      Tensor<T> g = scaled(g_adv_r, cw.adv_r);
      axpy(g, cw.selfreg, sr.grad);
      nets.s2r->backward(g, pass.tape_fake_r, grads);
    }
    return rep;
  }

  if (!nets.d_s) throw InvalidArgument("the simulated-domain discriminator is required outside simgan mode");
  Tensor<T> g_adv_s = adversarial(*nets.d_s, pass.fake_s, rep.adv_s);
  auto cyc_s = losses::cycle_loss(x_s, pass.rec_s);
  auto cyc_r = losses::cycle_loss(x_r, pass.rec_r);
  rep.cycle = cyc_s.value + cyc_r.value;

  std::optional<losses::LabelLossResult<T>> lab_r, lab_s;
  if (s.mode == Mode::label_cyclegan) {
    if (!nets.f_r || !nets.f_s) throw InvalidArgument("label_cyclegan mode needs both domain classifiers");
    lab_r = losses::label_loss(*nets.f_r, pass.fake_r, y_s, pass.rec_r, y_r, s.exclude, want && cw.lab_r != 0);
    lab_s = losses::label_loss(*nets.f_s, pass.fake_s, y_r, pass.rec_s, y_s, s.exclude, want && cw.lab_s != 0);
    rep.lab_r = lab_r->value;
    rep.lab_s = lab_s->value;
    rep.masked_fraction = lab_r->masked_fraction;
  }
  rep.total = losses::total_objective(rep, s.weights, s.mode);
  if (!want) return rep;

  Tensor<T> g_rec_s = scaled(cyc_s.grad, cw.cycle);
  Tensor<T> g_rec_r = scaled(cyc_r.grad, cw.cycle);
  if (lab_s && cw.lab_s != 0) axpy(g_rec_s, cw.lab_s, lab_s->grad_cycle);
  if (lab_r && cw.lab_r != 0) axpy(g_rec_r, cw.lab_r, lab_r->grad_cycle);
  Tensor<T> g_fake_r = nets.r2s->backward(g_rec_s, pass.tape_rec_s, grads);
  Tensor<T> g_fake_s = nets.s2r->backward(g_rec_r, pass.tape_rec_r, grads);
  axpy(g_fake_r, cw.adv_r, g_adv_r);
  axpy(g_fake_s, cw.adv_s, g_adv_s);
  if (lab_r && cw.lab_r != 0) axpy(g_fake_r, cw.lab_r, lab_r->grad_transformed);
  if (lab_s && cw.lab_s != 0) axpy(g_fake_s, cw.lab_s, lab_s->grad_transformed);
  nets.s2r->backward(g_fake_r, pass.tape_fake_r, grads);
  nets.r2s->backward(g_fake_s, pass.tape_fake_s, grads);
  return rep;
}

template <typename T>
double discriminator_objective(const models::Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake,
                               losses::AdversarialForm form, nn::Gradients<T>* grads) {
  nn::Tape<T> t_real, t_fake;
  const auto on_real = losses::adversarial_loss(d.forward(real, grads ? &t_real : nullptr), true, form);
  const auto on_fake = losses::adversarial_loss(d.forward(fake, grads ? &t_fake : nullptr), false, form);
  if (grads) {
    d.backward(scaled(on_real.grad, 0.5), t_real, grads);
    d.backward(scaled(on_fake.grad, 0.5), t_fake, grads);
  }
  return 0.5 * (on_real.value + on_fake.value);
}

#define LCGAN_INSTANTIATE(T)                                                                                        \
  template GeneratorPass<T> run_generators(const GanNets<T>&, const Tensor<T>&, std::span<const int>,              \
                                           const Tensor<T>&, std::span<const int>, Mode, bool);                     \
  template losses::LossReport generator_objective(const GanNets<T>&, GeneratorPass<T>&, const Tensor<T>&,          \
                                                  std::span<const int>, const Tensor<T>&, std::span<const int>,     \
                                                  const ObjectiveSettings&, nn::Gradients<T>*);                     \
  template double discriminator_objective(const models::Discriminator<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                          losses::AdversarialForm, nn::Gradients<T>*);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)
#undef LCGAN_INSTANTIATE

// ------------------------------------------------------------ GanTrainer

namespace {

data::Corpus without_classes(const data::Corpus& c, const std::set<int>& drop) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!drop.contains(c.label(i))) keep.push_back(i);
  return c.subset(keep);
}

template <typename Net>
std::vector<nn::NamedParam<float>> prefixed(Net& net, const std::string& prefix) {
  auto ps = net.params();
  for (auto& p : ps) p.name = prefix + "/" + p.name;
  return ps;
}

bool finite(const losses::LossReport& r) {
  for (double v : {r.adv_r, r.adv_s, r.cycle, r.lab_r, r.lab_s, r.selfreg, r.total, r.masked_fraction})
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

GanTrainer::GanTrainer(const TrainConfig& cfg, const data::Corpus& real, const data::Corpus& sim,
                       const models::Classifier<float>* f_r, const models::Classifier<float>* f_s)
    : cfg_(cfg),
      f_r_(f_r),
      f_s_(f_s),
      pool_r_(static_cast<std::size_t>(cfg.pool_size), stream_seed(cfg.seed, 0x706f6f6c72)),
      pool_s_(static_cast<std::size_t>(cfg.pool_size), stream_seed(cfg.seed, 0x706f6f6c73)) {
  cfg_.validate();
  if (real.shape() != sim.shape()) throw ShapeError("real and simulated corpora differ in image shape");
  if (real.class_count() != sim.class_count()) throw InvalidArgument("real and simulated class counts differ");
  const int k = real.class_count();
  for (int c : cfg_.minor_classes)
    if (c >= k) throw ConfigError("minor_classes", "class " + std::to_string(c) + " outside [0, K)");
  real_ = cfg_.drop_minor_from_gan_batches ? without_classes(real, cfg_.minor_classes) : real;
  sim_ = cfg_.drop_minor_from_gan_batches ? without_classes(sim, cfg_.minor_classes) : sim;

  const Mode mode = cfg_.mode;
  if (mode == Mode::label_cyclegan) {
    if (!f_r_ || !f_s_) throw InvalidArgument("label_cyclegan mode needs both pretrained domain classifiers");
    if (f_r_->classes() != k || f_s_->classes() != k)
      throw InvalidArgument("classifier class count does not match the corpora");
    if (f_r_->arch().image != real.shape() || f_s_->arch().image != real.shape())
      throw ShapeError("classifier input shape does not match the corpora");
    if (f_r_->arch().side != models::DomainSide::real_side || f_s_->arch().side != models::DomainSide::sim_side)
      throw InvalidArgument("classifiers are attached to the wrong domains");
  }

  models::GeneratorArch ga;
  ga.image = real.shape();
  ga.base_channels = cfg_.generator_channels;
  ga.downsample_stages = cfg_.downsample_stages;
  ga.residual_blocks = cfg_.residual_blocks;
  models::DiscriminatorArch da;
  da.image = real.shape();
  da.base_channels = cfg_.discriminator_channels;
  da.stages = cfg_.discriminator_stages;

  ga.direction = models::Direction::s2r;
  ga.label_channels = cfg_.conditional_s2r_resolved() ? k : 0;
  Rng r1 = Rng::derive(cfg_.seed, 101);
  g_s2r_.emplace(ga, r1);
  da.side = models::DomainSide::real_side;
  Rng r3 = Rng::derive(cfg_.seed, 103);
  d_r_.emplace(da, r3);
  auto gparams = prefixed(*g_s2r_, "s2r");
  if (mode != Mode::simgan) {
    ga.direction = models::Direction::r2s;
    ga.label_channels = cfg_.conditional_r2s_resolved() ? k : 0;
    Rng r2 = Rng::derive(cfg_.seed, 102);
    g_r2s_.emplace(ga, r2);
    da.side = models::DomainSide::sim_side;
    Rng r4 = Rng::derive(cfg_.seed, 104);
    d_s_.emplace(da, r4);
    auto more = prefixed(*g_r2s_, "r2s");
    gparams.insert(gparams.end(), more.begin(), more.end());
  }
  opt_g_ = std::make_unique<Adam<float>>(gparams, cfg_.adam());
  opt_dr_ = std::make_unique<Adam<float>>(d_r_->params(), cfg_.adam());
  if (d_s_) opt_ds_ = std::make_unique<Adam<float>>(d_s_->params(), cfg_.adam());

  stream_ = std::make_unique<data::PairedDomainStream>(real_, sim_, static_cast<std::size_t>(cfg_.batch_size),
                                                       stream_seed(cfg_.seed, 3));
  steps_per_epoch_ = stream_->batches_per_epoch();
  if (cfg_.max_steps_per_epoch > 0)
    steps_per_epoch_ = std::min(steps_per_epoch_, static_cast<std::size_t>(cfg_.max_steps_per_epoch));

  objective_.mode = mode;
  objective_.weights = cfg_.weights;
  objective_.adversarial = cfg_.adversarial;
  if (cfg_.exclude_minor_from_label_loss) objective_.exclude = cfg_.minor_classes;
}

GanNets<float> GanTrainer::nets() const {
  GanNets<float> n;
  n.s2r = &*g_s2r_;
  n.r2s = g_r2s_ ? &*g_r2s_ : nullptr;
  n.d_r = &*d_r_;
  n.d_s = d_s_ ? &*d_s_ : nullptr;
  n.f_r = f_r_;
  n.f_s = f_s_;
  return n;
}

double GanTrainer::current_lr() const {
  const int total = std::max(1, cfg_.epochs);
  const int epoch = std::min(total, static_cast<int>(steps_ / steps_per_epoch_) + 1);
  return scheduled_lr(cfg_.learning_rate, cfg_.lr_decay, epoch, total);
}

losses::LossReport GanTrainer::step() {
  const double lr = current_lr();
  auto [rb, sb] = stream_->next();
  const GanNets<float> n = nets();
  auto pass = run_generators(n, rb.images, rb.labels, sb.images, sb.labels, cfg_.mode, true);

  nn::Gradients<float> g_dr;
  const double loss_dr = discriminator_objective(*d_r_, rb.images, pool_r_.query(pass.fake_r), cfg_.adversarial, &g_dr);
  if (!std::isfinite(loss_dr)) throw NumericError("non-finite real-domain discriminator loss at step " + std::to_string(steps_));
  opt_dr_->step(g_dr, lr);
  if (d_s_) {
    nn::Gradients<float> g_ds;
    const double loss_ds = discriminator_objective(*d_s_, sb.images, pool_s_.query(pass.fake_s), cfg_.adversarial, &g_ds);
    if (!std::isfinite(loss_ds))
      throw NumericError("non-finite simulated-domain discriminator loss at step " + std::to_string(steps_));
    opt_ds_->step(g_ds, lr);
  }

  nn::Gradients<float> g_gen;
  const auto rep = generator_objective(n, pass, rb.images, rb.labels, sb.images, sb.labels, objective_, &g_gen);
  if (!finite(rep)) throw NumericError("non-finite generator loss at step " + std::to_string(steps_) + ": " + to_json(rep).dump());
  opt_g_->step(g_gen, lr);
  ++steps_;
  return rep;
}

void GanTrainer::train(const TrainHooks& hooks) {
  const std::size_t total = steps_per_epoch_ * static_cast<std::size_t>(cfg_.epochs);
  if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);
  losses::LossReport sum;
  std::size_t in_epoch = 0;
  while (steps_ < total) {
    losses::LossReport rep;
    const double lr = current_lr();
    try {
      rep = step();
    } catch (const NumericError&) {
      if (!hooks.checkpoint_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof name, "diagnostic_step_%06zu.ckpt", steps_);
        save_checkpoint(hooks.checkpoint_dir / name);
      }
      throw;
    }
    if (hooks.log) *hooks.log << to_json(rep, cfg_.mode).dump() << '\n';
    sum.adv_r += rep.adv_r;
    sum.adv_s += rep.adv_s;
    sum.cycle += rep.cycle;
    sum.lab_r += rep.lab_r;
    sum.lab_s += rep.lab_s;
    sum.selfreg += rep.selfreg;
    sum.total += rep.total;
    sum.masked_fraction += rep.masked_fraction;
    ++in_epoch;
    if (steps_ % steps_per_epoch_ != 0) continue;

    const int epoch = epochs_done();
    const double inv = 1.0 / static_cast<double>(in_epoch);
    json mean = to_json(sum, cfg_.mode);
    for (auto& [k, v] : mean.items())
      if (!v.is_null()) v = v.get<double>() * inv;
    if (hooks.log) {
      *hooks.log << json{{"epoch", epoch}, {"steps", in_epoch}, {"lr", lr}, {"mean", mean}}.dump() << '\n';
      hooks.log->flush();
    }
    if (!hooks.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
      save_checkpoint(hooks.checkpoint_dir / name);
      std::filesystem::copy_file(hooks.checkpoint_dir / name, hooks.checkpoint_dir / "latest.ckpt",
                                 std::filesystem::copy_options::overwrite_existing);
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch);
    sum = {};
    in_epoch = 0;
  }
}

void GanTrainer::save_checkpoint(const std::filesystem::path& path) const {
  auto& self = const_cast<GanTrainer&>(*this);  // params() hands out mutable views; nothing is modified here
  TensorArchive ar;
  ar.metadata["kind"] = "gan_checkpoint";
  ar.metadata["config"] = to_json(cfg_);
  ar.metadata["config_hash"] = config_hash(cfg_);
  ar.metadata["steps"] = steps_;
  ar.metadata["steps_per_epoch"] = steps_per_epoch_;
  ar.metadata["architectures"]["g_s2r"] = models::to_json(g_s2r_->arch());
  ar.metadata["architectures"]["d_r"] = models::to_json(d_r_->arch());
  models::store_params(ar, "g_s2r", self.g_s2r_->params());
  models::store_params(ar, "d_r", self.d_r_->params());
  if (g_r2s_) {
    ar.metadata["architectures"]["g_r2s"] = models::to_json(g_r2s_->arch());
    ar.metadata["architectures"]["d_s"] = models::to_json(d_s_->arch());
    models::store_params(ar, "g_r2s", self.g_r2s_->params());
    models::store_params(ar, "d_s", self.d_s_->params());
  }
  opt_g_->store(ar, "adam_g");
  opt_dr_->store(ar, "adam_d_r");
  if (opt_ds_) opt_ds_->store(ar, "adam_d_s");
  pool_r_.store(ar, "pool_r");
  pool_s_.store(ar, "pool_s");
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  ar.save(tmp);
  std::filesystem::rename(tmp, path);
}

void GanTrainer::load_checkpoint(const std::filesystem::path& path) {
  const TensorArchive ar = TensorArchive::load(path);
  if (ar.metadata.value("kind", "") != "gan_checkpoint") throw FormatError(path.string() + " is not a GAN checkpoint");
  if (ar.metadata.value("config_hash", "") != config_hash(cfg_))
    throw ConfigError("config", "checkpoint " + path.string() + " was written with a different configuration");
  models::load_params(ar, "g_s2r", g_s2r_->params());
  models::load_params(ar, "d_r", d_r_->params());
  if (g_r2s_) {
    models::load_params(ar, "g_r2s", g_r2s_->params());
    models::load_params(ar, "d_s", d_s_->params());
  }
  opt_g_->load(ar, "adam_g");
  opt_dr_->load(ar, "adam_d_r");
  if (opt_ds_) opt_ds_->load(ar, "adam_d_s");
  pool_r_.load(ar, "pool_r");
  pool_s_.load(ar, "pool_s");
  steps_ = ar.metadata.at("steps").get<std::size_t>();
  stream_ = std::make_unique<data::PairedDomainStream>(real_, sim_, static_cast<std::size_t>(cfg_.batch_size),
                                                       stream_seed(cfg_.seed, 3));
  stream_->skip(steps_);
}

// ------------------------------------------------------------- transform

data::Corpus transform_corpus(const models::Generator<float>& g, const data::Corpus& corpus, std::size_t batch) {
  const auto& a = g.arch();
  const bool s2r = a.direction == models::Direction::s2r;
  const data::Domain from = s2r ? data::Domain::simulated : data::Domain::real;
  if (corpus.domain() != from)
    throw InvalidArgument("a " + models::to_string(a.direction) + " generator cannot transform a " +
                          data::to_string(corpus.domain()) + " corpus");
  if (a.image != corpus.shape()) throw ShapeError("generator and corpus image shapes differ");
  if (g.conditional() && a.label_channels != corpus.class_count())
    throw ShapeError("generator has " + std::to_string(a.label_channels) + " label channels, corpus has " +
                     std::to_string(corpus.class_count()) + " classes");
  data::Corpus out(s2r ? data::Domain::real : data::Domain::simulated, corpus.class_count(), corpus.shape());
  out.reserve(corpus.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < corpus.size(); start += batch) {
    const std::size_t end = std::min(corpus.size(), start + batch);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto labels = corpus.gather_labels(idx);
    const auto y = g.forward(corpus.gather(idx), labels_for(g, std::span<const int>(labels)), nullptr);
    for (std::size_t i = 0; i < idx.size(); ++i)
      out.append(std::span<const float>(y.item(static_cast<int>(i)), corpus.shape().size()), labels[i]);
  }
  return out;
}

}  // namespace lcgan::training
