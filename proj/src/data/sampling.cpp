#include "lcgan/data/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lcgan::data {

void ImbalanceSpec::validate(int class_count) const {
  if (!(reduction_rate >= 0.0 && reduction_rate < 1.0))
    throw InvalidArgument("reduction_rate must lie in [0, 1), got " + std::to_string(reduction_rate));
  for (int c : minor_classes)
    if (c < 0 || c >= class_count)
      throw InvalidArgument("minor class " + std::to_string(c) + " outside [0, " + std::to_string(class_count) + ")");
}

std::size_t retained_count(std::size_t n, double rate) {
  const double exact = static_cast<double>(n) * (1.0 - rate);
  // Tolerance scaled to the magnitude absorbs the representation error of
  // 1 - rate without ever dropping a genuinely fractional remainder.
  const double slack = 1e-9 * std::max(1.0, exact);
  return static_cast<std::size_t>(std::ceil(exact - slack));
}

Corpus induce_imbalance(const Corpus& corpus, const ImbalanceSpec& spec, std::uint64_t seed) {
  spec.validate(corpus.class_count());
  std::vector<bool> keep(corpus.size(), true);
  for (int c : spec.minor_classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus.label(i) == c) members.push_back(i);
    if (members.empty()) throw InvalidArgument("minor class " + std::to_string(c) + " is absent from the corpus");
    const std::size_t retain = retained_count(members.size(), spec.reduction_rate);
    if (retain == 0)
      throw InvalidArgument("reduction rate " + std::to_string(spec.reduction_rate) + " would empty class " +
                            std::to_string(c));
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(c));
    rng.shuffle(members);
    for (std::size_t j = retain; j < members.size(); ++j) keep[members[j]] = false;
  }
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) survivors.push_back(i);
  return corpus.subset(survivors);
}

Batch make_batch(const Corpus& corpus, std::vector<std::size_t> indices, int source_tag) {
  Batch b;
  b.images = corpus.gather(indices);
  b.labels = corpus.gather_labels(indices);
  b.source.assign(indices.size(), source_tag);
  b.indices = std::move(indices);
  return b;
}

// ------------------------------------------------------------ IndexCycle

IndexCycle::IndexCycle(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)), pos_(n) {
  if (n == 0) throw InvalidArgument("cannot sample from an empty corpus");
}

std::size_t IndexCycle::next() {
  if (pos_ == n_) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
    pos_ = 0;
    ++passes_;
  }
  return order_[pos_++];
}

// ---------------------------------------------------- SingleSourceStream

SingleSourceStream::SingleSourceStream(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed)
    : corpus_(&corpus), batch_(batch_size), rng_(seed) {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  if (corpus.empty()) throw InvalidArgument("cannot sample from an empty corpus");
  pos_ = corpus.size();
}

std::size_t SingleSourceStream::batches_per_epoch() const { return (corpus_->size() + batch_ - 1) / batch_; }

Batch SingleSourceStream::next() {
  if (pos_ >= corpus_->size()) {
    order_.resize(corpus_->size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
    pos_ = 0;
  }
  const std::size_t end = std::min(pos_ + batch_, corpus_->size());
  std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  return make_batch(*corpus_, std::move(idx));
}

// --------------------------------------------------- MixedMinibatchStream

namespace {
std::size_t checked_half(std::size_t b) {
  if (b == 0 || b % 2 != 0) throw InvalidArgument("mixed batches need an even batch size, got " + std::to_string(b));
  return b / 2;
}
const Corpus& non_empty(const Corpus& c, const char* what) {
  if (c.empty()) throw InvalidArgument(std::string(what) + " corpus is empty");
  return c;
}
}  // namespace

MixedMinibatchStream::MixedMinibatchStream(const Corpus& a, const Corpus& b, std::size_t batch_size,
                                           std::uint64_t seed, bool strict)
    : a_(&non_empty(a, "first")),
      b_(&non_empty(b, "second")),
      half_(checked_half(batch_size)),
      side_a_(a.size(), Rng::derive(seed, 0)),
      side_b_(b.size(), Rng::derive(seed, 1)) {
  if (strict && batch_size > 2 * std::min(a.size(), b.size()))
    throw InvalidArgument("batch size " + std::to_string(batch_size) + " exceeds twice the smaller corpus (" +
                          std::to_string(std::min(a.size(), b.size())) + " items)");
  if (a.shape() != b.shape() || a.class_count() != b.class_count())
    throw ShapeError("mixed stream corpora differ in image shape or class count");
}

std::size_t MixedMinibatchStream::batches_per_epoch() const {
  return (std::min(a_->size(), b_->size()) + half_ - 1) / half_;
}

Batch MixedMinibatchStream::next() {
  std::vector<std::size_t> ia(half_), ib(half_);
  for (auto& i : ia) i = side_a_.next();
  for (auto& i : ib) i = side_b_.next();
  Batch first = make_batch(*a_, ia, 0);
  Batch second = make_batch(*b_, ib, 1);
  Batch out;
  out.images = Tensor<float>(a_->shape().batch(static_cast<int>(2 * half_)));
  std::copy(first.images.values().begin(), first.images.values().end(), out.images.data());
  std::copy(second.images.values().begin(), second.images.values().end(), out.images.data() + first.images.size());
  out.labels = first.labels;
  out.labels.insert(out.labels.end(), second.labels.begin(), second.labels.end());
  out.indices = ia;
  out.indices.insert(out.indices.end(), ib.begin(), ib.end());
  out.source = first.source;
  out.source.insert(out.source.end(), second.source.begin(), second.source.end());
  return out;
}

// ----------------------------------------------------- PairedDomainStream

PairedDomainStream::PairedDomainStream(const Corpus& real, const Corpus& sim, std::size_t batch_size,
                                       std::uint64_t seed)
    : real_(&non_empty(real, "real")),
      sim_(&non_empty(sim, "simulated")),
      batch_(batch_size),
      side_real_(real.size(), Rng::derive(seed, 0)),
      side_sim_(sim.size(), Rng::derive(seed, 1)) {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  if (real.shape() != sim.shape()) throw ShapeError("real and simulated corpora have different image shapes");
}

std::size_t PairedDomainStream::batches_per_epoch() const {
  return (std::min(real_->size(), sim_->size()) + batch_ - 1) / batch_;
}

std::pair<Batch, Batch> PairedDomainStream::next() {
  std::vector<std::size_t> ir(batch_), is(batch_);
  for (auto& i : ir) i = side_real_.next();
  for (auto& i : is) i = side_sim_.next();
  return {make_batch(*real_, std::move(ir), 0), make_batch(*sim_, std::move(is), 1)};
}

void PairedDomainStream::skip(std::size_t n) {
  for (std::size_t k = 0; k < n * batch_; ++k) {
    side_real_.next();
    side_sim_.next();
  }
}

}  // namespace lcgan::data
