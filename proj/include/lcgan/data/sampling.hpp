#pragma once

// Imbalance induction and the minibatch streams that feed training.

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "lcgan/core/rng.hpp"
#include "lcgan/data/corpus.hpp"

namespace lcgan::data {

struct ImbalanceSpec {
  std::set<int> minor_classes;
  double reduction_rate = 0.0;  // in [0, 1)

  /// Throws InvalidArgument unless classes lie in [0, K) and the rate in [0, 1).
  void validate(int class_count) const;
};

/// ceil((1 - rate) * n), computed so that float round-off in (1 - rate) never
/// adds an item (for example 1000 at rate 0.99 gives exactly 10).
std::size_t retained_count(std::size_t n, double rate);

/// Keeps retained_count(n_c, rate) uniformly chosen items of every minor class
/// c and all other items; survivors keep their original relative order.
Corpus induce_imbalance(const Corpus& corpus, const ImbalanceSpec& spec, std::uint64_t seed);

/// One minibatch. source[i] is 0 for corpus_a items and 1 for corpus_b items
/// in mixed streams; indices refer into the source corpus.
struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
  std::vector<int> source;

  std::size_t size() const { return labels.size(); }
};

/// Endless draw of item indices without replacement: a fresh permutation is
/// drawn whenever the previous one is used up.
class IndexCycle {
 public:
  IndexCycle(std::size_t n, Rng rng);
  std::size_t next();
  /// Number of permutations started so far.
  std::size_t passes() const { return passes_; }

 private:
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t passes_ = 0;
};

/// Single-corpus batches: each epoch is one permutation; the last batch of an
/// epoch may be short.
class SingleSourceStream {
 public:
  SingleSourceStream(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  Batch next();

 private:
  const Corpus* corpus_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// b/2 items from corpus_a followed by b/2 from corpus_b in every batch. Each
/// side walks its own permutation and reshuffles when exhausted; an epoch is
/// ceil(min(|a|, |b|) / (b/2)) batches.
class MixedMinibatchStream {
 public:
  /// Throws on odd b or an empty corpus; in strict mode also when
  /// b > 2 * min(|a|, |b|).
  MixedMinibatchStream(const Corpus& a, const Corpus& b, std::size_t batch_size, std::uint64_t seed,
                       bool strict = true);

  std::size_t batches_per_epoch() const;
  Batch next();

 private:
  const Corpus* a_;
  const Corpus* b_;
  std::size_t half_;
  IndexCycle side_a_;
  IndexCycle side_b_;
};

/// (real, simulated) batch pairs of size b for GAN training. Both sides are
/// independently shuffled; an epoch is ceil(min(|real|, |sim|) / b) pairs.
class PairedDomainStream {
 public:
  PairedDomainStream(const Corpus& real, const Corpus& sim, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  std::pair<Batch, Batch> next();
  /// Advances by n pairs without gathering pixels (used when resuming).
  void skip(std::size_t n);

 private:
  const Corpus* real_;
  const Corpus* sim_;
  std::size_t batch_;
  IndexCycle side_real_;
  IndexCycle side_sim_;
};

/// Builds a batch from item indices of one corpus.
Batch make_batch(const Corpus& corpus, std::vector<std::size_t> indices, int source_tag = 0);

}  // namespace lcgan::data
