#include "semcom/bleu.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "semcom/errors.hpp"

namespace semcom::codec {

namespace {

using Ngram = std::vector<uint32_t>;

std::map<Ngram, int> ngram_counts(const Sentence& s, int n) {
  std::map<Ngram, int> counts;
  if (s.size() < static_cast<size_t>(n)) return counts;
  for (size_t start = 0; start + n <= s.size(); ++start) {
    Ngram g(s.ids.begin() + static_cast<long>(start),
            s.ids.begin() + static_cast<long>(start + n));
    ++counts[g];
  }
  return counts;
}

}  // namespace

double bleu(const Sentence& candidate, const Sentence& reference, int max_n) {
  if (candidate.size() == 0 || reference.size() == 0)
    throw EmptySentenceError("bleu requires nonempty sentences");
  if (max_n < 1) throw OutOfRangeError("max_n must be >= 1");

  const int order = std::min<int>(
      max_n, static_cast<int>(std::min(candidate.size(), reference.size())));

  double log_precision = 0.0;
  for (int n = 1; n <= order; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    long total = 0, clipped = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(count, it->second);
    }
    if (total == 0 || clipped == 0) return 0.0;
    log_precision += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }

  double brevity = 1.0;
  if (candidate.size() < reference.size())
    brevity = std::exp(1.0 - static_cast<double>(reference.size()) /
                                 static_cast<double>(candidate.size()));

  return brevity * std::exp(log_precision / order);
}

}  // namespace semcom::codec
