#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace acqa {

// SQuAD-v1.1 answer normalization: lowercase, strip ASCII punctuation,
// drop whole-word articles (a, an, the), collapse whitespace. Applied in
// that order, matching the official evaluation script.
std::string normalize_answer(std::string_view text);

struct F1EM {
    double f1 = 0.0; // token-bag harmonic mean in [0, 1]
    int em = 0;      // 1 iff normalized strings match
};

// Max over golds of per-gold (f1, em). Token bags are multisets of
// whitespace-split normalized tokens. Two empty normalized strings count as
// a perfect match, so em = 1 always implies f1 = 1.
F1EM f1_em(const std::string& prediction, const std::vector<std::string>& golds);

} // namespace acqa
