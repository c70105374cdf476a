#include "acqa/textio.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "acqa/errors.hpp"
#include "acqa/log.hpp"
#include "acqa/metrics.hpp"

namespace acqa {

namespace {

// ----------------------------- UTF-8 walk -----------------------------

struct CodePoint {
    char32_t cp;
    int byte_start;
    int byte_end;
};

// Decodes the code point starting at byte i. Malformed sequences fall back
// to one byte at a time.
CodePoint decode_utf8(std::string_view s, int i) {
    const auto b = [&](int k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char c0 = b(i);
    const int n = static_cast<int>(s.size());

    auto cont = [&](int k) { return k < n && (b(k) & 0xC0) == 0x80; };

    if (c0 < 0x80) {
        return {c0, i, i + 1};
    }
    if ((c0 & 0xE0) == 0xC0 && cont(i + 1)) {
        char32_t cp = (static_cast<char32_t>(c0 & 0x1F) << 6) | (b(i + 1) & 0x3F);
        return {cp, i, i + 2};
    }
    if ((c0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
        char32_t cp = (static_cast<char32_t>(c0 & 0x0F) << 12) |
                      (static_cast<char32_t>(b(i + 1) & 0x3F) << 6) | (b(i + 2) & 0x3F);
        return {cp, i, i + 3};
    }
    if ((c0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        char32_t cp = (static_cast<char32_t>(c0 & 0x07) << 18) |
                      (static_cast<char32_t>(b(i + 1) & 0x3F) << 12) |
                      (static_cast<char32_t>(b(i + 2) & 0x3F) << 6) | (b(i + 3) & 0x3F);
        return {cp, i, i + 4};
    }
    return {c0, i, i + 1};
}

bool is_ws_cp(char32_t cp) {
    switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_punct_cp(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    if (cp >= 0xA1 && cp <= 0xBF) return true;               // Latin-1 marks
    if (cp >= 0x2010 && cp <= 0x2027) return true;           // dashes, quotes, ellipsis
    if (cp >= 0x2030 && cp <= 0x206F) return true;           // rest of general punctuation
    if (cp >= 0x3001 && cp <= 0x303F) return true;           // CJK symbols
    if (cp >= 0xFF01 && cp <= 0xFF0F) return true;           // fullwidth forms
    if (cp >= 0xFF1A && cp <= 0xFF20) return true;
    if (cp >= 0xFF3B && cp <= 0xFF40) return true;
    if (cp >= 0xFF5B && cp <= 0xFF65) return true;
    return false;
}

// Converts a code-point index (SQuAD's answer_start unit) to a byte offset.
int codepoint_to_byte(std::string_view s, int cp_index) {
    int i = 0;
    int seen = 0;
    const int n = static_cast<int>(s.size());
    while (i < n && seen < cp_index) {
        i = decode_utf8(s, i).byte_end;
        seen += 1;
    }
    return i;
}

// ----------------------------- stop words -----------------------------

// Fixed ~50-entry English list: articles, copulas, prepositions, pronouns,
// question words. Punctuation is deliberately absent. Shipped verbatim so
// scope=non_stop_words generation is reproducible.
const std::unordered_set<std::string>& stop_word_set() {
    static const std::unordered_set<std::string> words = {
        // articles
        "a", "an", "the",
        // copulas / auxiliaries
        "am", "is", "are", "was", "were", "be", "been", "being",
        // prepositions
        "of", "in", "on", "at", "by", "for", "with", "to", "from", "as", "into", "over", "under",
        // pronouns & demonstratives
        "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
        "his", "its", "their", "this", "that", "these", "those",
        // question words
        "what", "which", "who", "whom", "whose", "when", "where", "why", "how",
    };
    return words;
}

} // namespace

// ----------------------------- tokenizer -----------------------------

TokenizedText tokenize(std::string_view text) {
    TokenizedText out;
    std::string word;
    int word_start = -1;

    auto flush = [&](int end_byte) {
        if (!word.empty()) {
            out.tokens.push_back(word);
            out.offsets.emplace_back(word_start, end_byte);
            word.clear();
            word_start = -1;
        }
    };

    int i = 0;
    const int n = static_cast<int>(text.size());
    while (i < n) {
        const CodePoint c = decode_utf8(text, i);
        if (is_ws_cp(c.cp)) {
            flush(c.byte_start);
        } else if (is_punct_cp(c.cp)) {
            flush(c.byte_start);
            out.tokens.emplace_back(text.substr(c.byte_start, c.byte_end - c.byte_start));
            out.offsets.emplace_back(c.byte_start, c.byte_end);
        } else {
            if (word.empty()) {
                word_start = c.byte_start;
            }
            if (c.cp >= 'A' && c.cp <= 'Z') {
                word.push_back(static_cast<char>(c.cp + 32));
            } else {
                word.append(text.substr(c.byte_start, c.byte_end - c.byte_start));
            }
        }
        i = c.byte_end;
    }
    flush(n);
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

bool is_stop_word(std::string_view token) {
    return stop_word_set().count(std::string(token)) != 0;
}

const std::vector<std::string>& stop_word_list() {
    static const std::vector<std::string> sorted = [] {
        std::vector<std::string> v(stop_word_set().begin(), stop_word_set().end());
        std::sort(v.begin(), v.end());
        return v;
    }();
    return sorted;
}

// ----------------------------- vocabulary -----------------------------

Vocabulary::Vocabulary() {
    id_to_token_ = {kPadToken, kBosToken, kUnkToken};
    token_to_id_ = {{kPadToken, kPadId}, {kBosToken, kBosId}, {kUnkToken, kUnkId}};
}

int Vocabulary::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) {
        return it->second;
    }
    const int id = static_cast<int>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(token);
    return id;
}

int Vocabulary::id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw ModelError("Vocabulary: id " + std::to_string(id) + " out of range [0," +
                         std::to_string(size()) + ")");
    }
    return id_to_token_[id];
}

Vocabulary Vocabulary::from_list(const std::vector<std::string>& tokens) {
    if (tokens.size() < 3 || tokens[0] != kPadToken || tokens[1] != kBosToken ||
        tokens[2] != kUnkToken) {
        throw ModelError("Vocabulary::from_list: specials must be <pad>, <bos>, <unk> at ids 0,1,2");
    }
    Vocabulary v;
    for (std::size_t i = 3; i < tokens.size(); ++i) {
        v.add(tokens[i]);
    }
    return v;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        ids.push_back(id(t));
    }
    return ids;
}

// ----------------------------- alignment -----------------------------

std::optional<std::pair<int, int>> align_answer(const TokenizedText& passage,
                                                const std::string& answer, int char_start) {
    if (passage.empty() || answer.empty() || char_start < 0) {
        return std::nullopt;
    }
    const int window_end = char_start + static_cast<int>(answer.size());

    // start = token containing char_start; if char_start falls between
    // tokens, snap forward to the next one.
    int start = -1;
    for (std::size_t t = 0; t < passage.size(); ++t) {
        if (passage.offsets[t].second > char_start) {
            start = static_cast<int>(t);
            break;
        }
    }
    if (start < 0 || passage.offsets[start].first >= window_end) {
        return std::nullopt;
    }

    int end = start;
    for (std::size_t t = start; t < passage.size(); ++t) {
        if (passage.offsets[t].first < window_end) {
            end = static_cast<int>(t);
        } else {
            break;
        }
    }

    std::vector<std::string> span(passage.tokens.begin() + start, passage.tokens.begin() + end + 1);
    if (normalize_answer(detokenize(span)).find(normalize_answer(answer)) == std::string::npos) {
        return std::nullopt;
    }
    return std::make_pair(start, end);
}

// ----------------------------- SQuAD loader -----------------------------

Dataset load_squad(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("load_squad: cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_squad: malformed JSON in " + path.string() + ": " + e.what());
    }

    Dataset ds;
    try {
        for (const auto& article : j.at("data")) {
            for (const auto& para : article.at("paragraphs")) {
                const std::string context = para.at("context").get<std::string>();
                const TokenizedText ctx_tokens = tokenize(context);

                for (const auto& qa : para.at("qas")) {
                    QAExample ex;
                    ex.id = qa.at("id").get<std::string>();
                    ex.question = tokenize(qa.at("question").get<std::string>());
                    ex.passage = ctx_tokens;
                    ex.passage_text = context;

                    for (const auto& ans : qa.at("answers")) {
                        const std::string text = ans.at("text").get<std::string>();
                        bool seen = false;
                        for (const auto& g : ex.gold_answers) {
                            seen = seen || g == text;
                        }
                        if (!seen) {
                            ex.gold_answers.push_back(text);
                        }
                    }

                    // First answer that aligns AND whose span detokenizes to
                    // one of the gold strings wins.
                    bool aligned = false;
                    for (const auto& ans : qa.at("answers")) {
                        const std::string text = ans.at("text").get<std::string>();
                        const int cp_start = ans.at("answer_start").get<int>();
                        const int byte_start = codepoint_to_byte(context, cp_start);
                        const auto span = align_answer(ctx_tokens, text, byte_start);
                        if (!span) {
                            continue;
                        }
                        std::vector<std::string> span_tokens(
                            ctx_tokens.tokens.begin() + span->first,
                            ctx_tokens.tokens.begin() + span->second + 1);
                        const std::string norm_span = normalize_answer(detokenize(span_tokens));
                        bool exact = false;
                        for (const auto& g : ex.gold_answers) {
                            exact = exact || normalize_answer(g) == norm_span;
                        }
                        if (!exact) {
                            continue;
                        }
                        ex.span_start = span->first;
                        ex.span_end = span->second;
                        aligned = true;
                        break;
                    }

                    if (!aligned) {
                        ds.skipped += 1;
                        log_warn("load_squad: no alignable answer for qa '" + ex.id + "', skipping");
                        continue;
                    }
                    ds.examples.push_back(std::move(ex));
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_squad: unexpected schema in " + path.string() + ": " + e.what());
    }

    if (ds.examples.empty()) {
        throw DataError("load_squad: zero alignable examples in " + path.string());
    }

    for (const auto& ex : ds.examples) {
        for (const auto& t : ex.question.tokens) {
            ds.vocab.add(t);
        }
        for (const auto& t : ex.passage.tokens) {
            ds.vocab.add(t);
        }
    }
    return ds;
}

} // namespace acqa
