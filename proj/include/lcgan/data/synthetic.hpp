#pragma once

// Procedural digit-pair corpus. Class k is the digit k drawn from a stroke
// font. Simulated items are crisp glyphs on random colored backgrounds with
// partial neighbouring digits as clutter; real items are elastically deformed
// white strokes on black, replicated to every channel.

#include "lcgan/data/corpus.hpp"

namespace lcgan::data {

/// Up to 10 classes. Item (class k, index i) depends only on (seed, domain,
/// split, k, i).
Corpus build_synthetic_corpus(const DatasetManifest& m);

/// Renders one item; exposed for previews and tests.
std::vector<float> render_digit(int digit, Domain domain, ImageShape shape, std::uint64_t item_seed);

}  // namespace lcgan::data
