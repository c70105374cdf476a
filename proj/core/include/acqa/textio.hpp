#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace acqa {

// Lowercased tokens plus their byte ranges [start, end) in the original
// UTF-8 text. Offsets are strictly increasing and non-overlapping.
struct TokenizedText {
    std::vector<std::string> tokens;
    std::vector<std::pair<int, int>> offsets;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

// Lowercase + whitespace split; punctuation characters become standalone
// single-character tokens. Only ASCII letters are case-folded; non-ASCII
// code points pass through verbatim. Recognized punctuation: the ASCII set
// plus the common Unicode punctuation blocks (Latin-1 marks, general
// punctuation, CJK symbols, fullwidth forms).
TokenizedText tokenize(std::string_view text);

// Inverse up to whitespace: tokens joined by single spaces.
std::string detokenize(const std::vector<std::string>& tokens);

// Membership in the fixed stop-word list shipped in textio.cpp (articles,
// copulas, prepositions, pronouns, question words; no punctuation).
bool is_stop_word(std::string_view token);
const std::vector<std::string>& stop_word_list();

// Token ids with fixed specials: PAD=0, BOS=1, UNK=2. Lookup is total;
// unknown tokens map to UNK.
class Vocabulary {
public:
    static constexpr int kPadId = 0;
    static constexpr int kBosId = 1;
    static constexpr int kUnkId = 2;
    static constexpr const char* kPadToken = "<pad>";
    static constexpr const char* kBosToken = "<bos>";
    static constexpr const char* kUnkToken = "<unk>";

    Vocabulary();

    // Inserts if absent; returns the id either way.
    int add(const std::string& token);
    int id(std::string_view token) const; // kUnkId when absent
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(id_to_token_.size()); }

    std::vector<std::string> to_list() const { return id_to_token_; }
    static Vocabulary from_list(const std::vector<std::string>& tokens);

    std::vector<int> encode(const std::vector<std::string>& tokens) const;

private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

// One question/passage pair with its golden token span.
struct QAExample {
    std::string id;
    TokenizedText question;
    TokenizedText passage;
    std::string passage_text; // original text; answers are sliced from it by offset
    int span_start = 0;       // inclusive token indices into passage
    int span_end = 0;
    std::vector<std::string> gold_answers;

    std::vector<std::string> gold_span_tokens() const {
        return {passage.tokens.begin() + span_start, passage.tokens.begin() + span_end + 1};
    }
};

struct Dataset {
    std::vector<QAExample> examples;
    Vocabulary vocab;
    int skipped = 0; // qas dropped because no answer aligned
};

// Maps a SQuAD answer (text + byte offset into the passage) to an inclusive
// token span. The start token is the one whose range contains char_start; the
// end token is the last one overlapping [char_start, char_start + len).
// Returns nullopt when no token covers the window or the covered tokens do
// not contain the normalized answer.
std::optional<std::pair<int, int>> align_answer(const TokenizedText& passage,
                                                const std::string& answer, int char_start);

// SQuAD v1.1 JSON -> Dataset. Adversarial "Add One Sent" files share the
// schema and load through here unchanged. answer_start counts code points
// per the SQuAD convention and is converted to a byte offset internally.
// Throws DataError on malformed JSON or when nothing aligns.
Dataset load_squad(const std::filesystem::path& path);

} // namespace acqa
