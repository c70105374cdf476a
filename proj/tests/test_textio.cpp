#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <fstream>

#include "acqa/errors.hpp"
#include "acqa/metrics.hpp"
#include "acqa/rng.hpp"
#include "acqa/textio.hpp"
#include "testutil.hpp"

using namespace acqa;

namespace {

std::string strip_ws(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            out.push_back(c);
        }
    }
    return out;
}

std::string lower_ascii(std::string s) {
    for (auto& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

// random printable ASCII with words, punctuation and double spaces
std::string random_ascii(Rng& rng, int len) {
    static const std::string alpha = "abcdefghijKLMNopqrstUVwxyz";
    static const std::string punct = ".,?!;:()'\"-";
    std::string s;
    while (static_cast<int>(s.size()) < len) {
        const auto pick = rng.bounded(10);
        if (pick < 6) {
            s.push_back(alpha[rng.bounded(alpha.size())]);
        } else if (pick < 8) {
            s.push_back(punct[rng.bounded(punct.size())]);
        } else if (pick == 8) {
            s.push_back(' ');
        } else {
            s += "  ";
        }
    }
    return s;
}

const char* kTinySquad = R"({
  "version": "1.1",
  "data": [{
    "title": "fixture",
    "paragraphs": [{
      "context": "The Grotto is a Marian place of prayer and reflection.",
      "qas": [
        {"id": "q1", "question": "What is the Grotto?",
         "answers": [{"text": "a Marian place of prayer", "answer_start": 14}]},
        {"id": "q2", "question": "What kind of place is it?",
         "answers": [{"text": "Marian place", "answer_start": 16}]}
      ]
    }]
  }]
})";

} // namespace

TEST_CASE("tokenize lowercases, splits whitespace, detaches punctuation") {
    const auto t = tokenize("What is the Grotto?");
    CHECK(t.tokens == std::vector<std::string>({"what", "is", "the", "grotto", "?"}));
}

TEST_CASE("tokenize of empty text is empty") {
    const auto t = tokenize("");
    CHECK(t.tokens.empty());
    CHECK(t.offsets.empty());
}

TEST_CASE("tokenize offsets point into the original text") {
    const auto t = tokenize("a  b");
    REQUIRE(t.tokens == std::vector<std::string>({"a", "b"}));
    CHECK(t.offsets[0] == std::make_pair(0, 1));
    CHECK(t.offsets[1] == std::make_pair(3, 4));
}

TEST_CASE("offsets are strictly increasing and non-overlapping") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const std::string text = random_ascii(rng, 120);
        const auto t = tokenize(text);
        int prev_end = -1;
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(!t.tokens[i].empty());
            CHECK(t.offsets[i].first >= prev_end);
            CHECK(t.offsets[i].second > t.offsets[i].first);
            prev_end = t.offsets[i].second;
        }
    }
}

TEST_CASE("round trip differs from lowercase only in whitespace") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const std::string text = random_ascii(rng, 80);
        const auto t = tokenize(text);
        CHECK(strip_ws(detokenize(t.tokens)) == strip_ws(lower_ascii(text)));
    }
}

TEST_CASE("stop word membership") {
    CHECK(is_stop_word("the"));
    CHECK(!is_stop_word("grotto"));
    CHECK(!is_stop_word("?")); // punctuation is not a stop word
    // the shipped list stays in the documented ~50-entry range
    CHECK(stop_word_list().size() >= 45);
    CHECK(stop_word_list().size() <= 60);
    for (const auto& w : stop_word_list()) {
        CHECK(is_stop_word(w));
    }
}

TEST_CASE("vocabulary specials and totality") {
    Vocabulary v;
    CHECK(v.size() == 3);
    CHECK(v.id(Vocabulary::kPadToken) == Vocabulary::kPadId);
    CHECK(v.id(Vocabulary::kBosToken) == Vocabulary::kBosId);
    CHECK(v.id(Vocabulary::kUnkToken) == Vocabulary::kUnkId);

    const int a = v.add("alpha");
    const int b = v.add("beta");
    CHECK(a == 3);
    CHECK(b == 4);
    CHECK(v.add("alpha") == a); // idempotent

    // totality: unknown tokens resolve to UNK
    CHECK(v.id("nonexistent") == Vocabulary::kUnkId);

    // bijective over non-special entries
    for (int id = 3; id < v.size(); ++id) {
        CHECK(v.id(v.token(id)) == id);
    }

    const auto list = v.to_list();
    const Vocabulary round = Vocabulary::from_list(list);
    CHECK(round.size() == v.size());
    CHECK(round.id("beta") == b);
}

TEST_CASE("align_answer maps char windows to token spans") {
    const auto passage = tokenize("a marian place of prayer");

    SUBCASE("interior span") {
        const auto span = align_answer(passage, "marian place", 2);
        REQUIRE(span.has_value());
        CHECK(*span == std::make_pair(1, 2));
    }
    SUBCASE("whole passage") {
        const auto span = align_answer(passage, "a marian place of prayer", 0);
        REQUIRE(span.has_value());
        CHECK(*span == std::make_pair(0, 4));
    }
    SUBCASE("char_start beyond the text is an alignment error") {
        CHECK(!align_answer(passage, "prayer", 400).has_value());
    }
    SUBCASE("mid-token start snaps to the containing token") {
        const auto span = align_answer(passage, "marian place", 3); // inside "marian"
        REQUIRE(span.has_value());
        CHECK(*span == std::make_pair(1, 2));
    }
    SUBCASE("deep mid-token start widens by the overlap rule") {
        // window [4, 16) grazes "of" at offset 15, so the span includes it
        const auto span = align_answer(passage, "marian place", 4);
        REQUIRE(span.has_value());
        CHECK(*span == std::make_pair(1, 3));
    }
    SUBCASE("answer absent at the offset fails containment") {
        CHECK(!align_answer(passage, "grotto", 2).has_value());
    }
}

TEST_CASE("load_squad ingests a fixture") {
    const auto dir = testutil::scratch_dir("textio_fixture");
    const auto path = dir / "tiny.json";
    {
        std::ofstream f(path);
        f << kTinySquad;
    }

    const Dataset ds = load_squad(path);
    REQUIRE(ds.examples.size() == 2);
    CHECK(ds.skipped == 0);

    const auto& ex = ds.examples[0];
    CHECK(ex.id == "q1");
    CHECK(ex.question.tokens ==
          std::vector<std::string>({"what", "is", "the", "grotto", "?"}));
    // gold span slices back to the answer
    const auto span_toks = ex.gold_span_tokens();
    CHECK(detokenize(span_toks) == "a marian place of prayer");

    // every loaded example satisfies the normalized-equality invariant
    for (const auto& e : ds.examples) {
        const std::string norm_span = normalize_answer(detokenize(e.gold_span_tokens()));
        bool matches = false;
        for (const auto& g : e.gold_answers) {
            matches = matches || normalize_answer(g) == norm_span;
        }
        CHECK(matches);
    }

    // vocabulary covers every token
    for (const auto& e : ds.examples) {
        for (const auto& tok : e.passage.tokens) {
            CHECK(ds.vocab.id(tok) != Vocabulary::kUnkId);
        }
    }
}

TEST_CASE("load_squad skips unalignable answers with a count") {
    const auto dir = testutil::scratch_dir("textio_skip");
    const auto path = dir / "skip.json";
    {
        std::ofstream f(path);
        f << R"({"data": [{"paragraphs": [{
            "context": "alpha beta gamma",
            "qas": [
              {"id": "ok", "question": "which word?",
               "answers": [{"text": "beta", "answer_start": 6}]},
              {"id": "bad", "question": "which word?",
               "answers": [{"text": "delta", "answer_start": 6}]}
            ]}]}]})";
    }
    const Dataset ds = load_squad(path);
    CHECK(ds.examples.size() == 1);
    CHECK(ds.skipped == 1);
}

TEST_CASE("load_squad fatal paths") {
    const auto dir = testutil::scratch_dir("textio_fatal");
    SUBCASE("malformed JSON") {
        const auto path = dir / "broken.json";
        {
            std::ofstream f(path);
            f << "{not json";
        }
        CHECK_THROWS_AS(load_squad(path), DataError);
    }
    SUBCASE("zero alignable examples") {
        const auto path = dir / "empty.json";
        {
            std::ofstream f(path);
            f << R"({"data": [{"paragraphs": [{"context": "alpha beta",
                 "qas": [{"id": "x", "question": "?", "answers":
                 [{"text": "zzz", "answer_start": 0}]}]}]}]})";
        }
        CHECK_THROWS_AS(load_squad(path), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_squad(dir / "absent.json"), DataError);
    }
}

TEST_CASE("synthetic corpus loads through the SQuAD path") {
    const auto dir = testutil::scratch_dir("textio_synth");
    testutil::SynthConfig cfg;
    cfg.n_examples = 25;
    cfg.seed = 5;
    const auto path = testutil::write_synth_squad(dir / "synth.json", cfg);
    const Dataset ds = load_squad(path);
    CHECK(ds.examples.size() == 25);
    CHECK(ds.skipped == 0);
    for (const auto& ex : ds.examples) {
        CHECK(ex.span_end - ex.span_start + 1 == 3); // entity predicate answer
    }
}
