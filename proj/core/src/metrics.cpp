#include "acqa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

namespace acqa {

namespace {

bool is_ascii_punct(unsigned char c) {
    return std::ispunct(c) != 0;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
        out.push_back(tok);
    }
    return out;
}

} // namespace

std::string normalize_answer(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (unsigned char c : text) {
        if (c < 0x80) {
            if (is_ascii_punct(c)) {
                continue; // strip punctuation
            }
            lowered.push_back(static_cast<char>(std::tolower(c)));
        } else {
            lowered.push_back(static_cast<char>(c));
        }
    }

    std::string out;
    for (const auto& tok : split_ws(lowered)) {
        if (tok == "a" || tok == "an" || tok == "the") {
            continue;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += tok;
    }
    return out;
}

F1EM f1_em(const std::string& prediction, const std::vector<std::string>& golds) {
    const std::string norm_pred = normalize_answer(prediction);
    const auto pred_tokens = split_ws(norm_pred);

    F1EM best;
    for (const auto& gold : golds) {
        const std::string norm_gold = normalize_answer(gold);
        const auto gold_tokens = split_ws(norm_gold);

        F1EM cur;
        cur.em = (norm_pred == norm_gold) ? 1 : 0;

        if (pred_tokens.empty() && gold_tokens.empty()) {
            cur.f1 = 1.0;
        } else if (pred_tokens.empty() || gold_tokens.empty()) {
            cur.f1 = 0.0;
        } else {
            std::unordered_map<std::string, int> counts;
            for (const auto& t : gold_tokens) {
                counts[t] += 1;
            }
            int overlap = 0;
            for (const auto& t : pred_tokens) {
                auto it = counts.find(t);
                if (it != counts.end() && it->second > 0) {
                    it->second -= 1;
                    overlap += 1;
                }
            }
            if (overlap == 0) {
                cur.f1 = 0.0;
            } else {
                const double precision = static_cast<double>(overlap) / pred_tokens.size();
                const double recall = static_cast<double>(overlap) / gold_tokens.size();
                cur.f1 = 2.0 * precision * recall / (precision + recall);
            }
        }

        best.f1 = std::max(best.f1, cur.f1);
        best.em = std::max(best.em, cur.em);
    }
    return best;
}

} // namespace acqa
