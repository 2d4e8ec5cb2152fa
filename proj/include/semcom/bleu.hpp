#pragma once

#include "semcom/vocab.hpp"

namespace semcom::codec {

// Sentence-level BLEU in [0, 1]: geometric mean of modified n-gram precisions
// with uniform weights times the brevity penalty. The order cap is lowered to
// the shorter sentence so identical short sentences score 1. Any zero
// precision gives 0. Throws EmptySentenceError on empty input.
double bleu(const Sentence& candidate, const Sentence& reference, int max_n = 4);

}  // namespace semcom::codec
