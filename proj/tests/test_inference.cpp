#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <optional>

#include "acqa/inference.hpp"
#include "acqa/rng.hpp"
#include "testutil.hpp"

using namespace acqa;

namespace {

using testutil::enumerate_best_span;

QAExample make_example(const std::string& passage_text, const std::string& question_text) {
    QAExample ex;
    ex.id = "t";
    ex.passage = tokenize(passage_text);
    ex.passage_text = passage_text;
    ex.question = tokenize(question_text);
    ex.gold_answers = {"x"};
    return ex;
}

CriticScorer constant_scorer(float p) {
    return [p](const std::vector<std::string>&, const std::vector<std::string>&) { return p; };
}

} // namespace

TEST_CASE("select_span picks the best joint pair") {
    const std::vector<float> starts = {2.0f, 0.5f, 1.0f};
    const std::vector<float> ends = {0.1f, 1.5f, 2.5f};

    SUBCASE("no exclusions") {
        const auto best = select_span(starts, ends, ExclusionSet{}, 3);
        REQUIRE(best.has_value());
        CHECK(best->start == 0);
        CHECK(best->end == 2);
        CHECK(best->joint_score == doctest::Approx(4.5));
    }
    SUBCASE("endpoint exclusions") {
        ExclusionSet ex;
        ex.starts = {0};
        ex.ends = {2};
        const auto best = select_span(starts, ends, ex, 3);
        REQUIRE(best.has_value());
        CHECK(best->start == 1);
        CHECK(best->end == 1);
        CHECK(best->joint_score == doctest::Approx(2.0));
    }
    SUBCASE("span-mode exclusion of everything empties the candidates") {
        ExclusionSet ex;
        ex.positions = {0, 1, 2};
        CHECK(!select_span(starts, ends, ex, 3).has_value());
    }
    SUBCASE("length mismatch is fatal") {
        const std::vector<float> short_ends = {0.1f};
        CHECK_THROWS_AS(select_span(starts, short_ends, ExclusionSet{}, 3), ModelError);
    }
    SUBCASE("max span length binds: end - start < max_span_len") {
        const auto best = select_span(starts, ends, ExclusionSet{}, 1);
        REQUIRE(best.has_value());
        CHECK(best->start == best->end); // only single-token spans allowed
        CHECK(best->start == 2);         // 1.0 + 2.5 beats 2.0 + 0.1
    }
    SUBCASE("ties break to the smallest start, then end") {
        const std::vector<float> s2 = {1.0f, 1.0f};
        const std::vector<float> e2 = {1.0f, 1.0f};
        const auto best = select_span(s2, e2, ExclusionSet{}, 2);
        REQUIRE(best.has_value());
        CHECK(best->start == 0);
        CHECK(best->end == 0);
    }
}

TEST_CASE("select_span equals exhaustive enumeration on 1000 random instances") {
    Rng rng(1234);
    int nonempty = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.bounded(49)); // lengths 2..50
        std::vector<float> starts(n), ends(n);
        for (auto& v : starts) {
            v = rng.uniform_float(-5.0f, 5.0f);
        }
        for (auto& v : ends) {
            v = rng.uniform_float(-5.0f, 5.0f);
        }

        ExclusionSet ex;
        // random exclusion sets, alternating endpoint- and span-style trials
        const bool span_mode = trial % 2 == 1;
        for (std::uint64_t k = 0, kk = rng.bounded(n); k < kk; ++k) {
            if (span_mode) {
                ex.positions.insert(static_cast<int>(rng.bounded(n)));
            } else {
                ex.starts.insert(static_cast<int>(rng.bounded(n)));
                if (rng.bounded(2)) {
                    ex.ends.insert(static_cast<int>(rng.bounded(n)));
                }
            }
        }
        const int max_len = 1 + static_cast<int>(rng.bounded(n));

        const auto got = select_span(starts, ends, ex, max_len);
        const auto want = enumerate_best_span(starts, ends, ex, max_len);
        REQUIRE(got.has_value() == want.has_value());
        if (got) {
            nonempty += 1;
            CHECK(got->start == want->start);
            CHECK(got->end == want->end);
            CHECK(got->joint_score == want->joint_score);
        }
    }
    CHECK(nonempty > 500); // the random sets leave most instances solvable
}

TEST_CASE("predict_with_critic consults and rejects") {
    // passage of 3 tokens matching the select_span example logits
    const QAExample ex = make_example("alpha beta gamma", "which token ?");
    ActorOutput out;
    out.start_logits = {2.0f, 0.5f, 1.0f};
    out.end_logits = {0.1f, 1.5f, 2.5f};

    InferenceConfig cfg;
    cfg.max_span_len = 3;

    SUBCASE("threshold 0 accepts the first proposal") {
        cfg.threshold = 0.0f;
        const auto pred = predict_with_critic(out, ex, constant_scorer(1e-6f), cfg);
        CHECK(pred.start == 0);
        CHECK(pred.end == 2);
        CHECK(pred.rejections_used == 0);
        CHECK(!pred.fell_back);
    }
    SUBCASE("a distrusted proposal is re-argmaxed under endpoint exclusions") {
        cfg.threshold = 0.3f;
        cfg.reject_budget = 1;
        const auto pred = predict_with_critic(out, ex, constant_scorer(0.1f), cfg);
        CHECK(pred.start == 1);
        CHECK(pred.end == 1);
        CHECK(pred.rejections_used == 1);
        CHECK(pred.first_start == 0);
        CHECK(pred.first_end == 2);
        CHECK(!pred.fell_back);
        CHECK(pred.critic_prob == doctest::Approx(0.1f));
    }
    SUBCASE("span mode excludes interior positions") {
        cfg.threshold = 0.3f;
        cfg.rejection_mode = InferenceConfig::RejectionMode::span;
        cfg.reject_budget = 2;
        const auto pred = predict_with_critic(out, ex, constant_scorer(0.1f), cfg);
        // first proposal (0,2) covers everything: nothing remains, fail open
        CHECK(pred.fell_back);
        CHECK(pred.start == 0);
        CHECK(pred.end == 2);
        CHECK(pred.rejections_used == 1);
    }
    SUBCASE("budget 0 returns the first proposal without rejecting") {
        cfg.reject_budget = 0;
        const auto pred = predict_with_critic(out, ex, constant_scorer(0.0f), cfg);
        CHECK(pred.start == 0);
        CHECK(pred.end == 2);
        CHECK(pred.rejections_used == 0);
    }
}

TEST_CASE("rejected proposals never beat the returned score") {
    Rng rng(55);
    const QAExample ex =
        make_example("t0 t1 t2 t3 t4 t5 t6 t7 t8 t9", "which token ?");
    for (int trial = 0; trial < 200; ++trial) {
        ActorOutput out;
        out.start_logits.resize(10);
        out.end_logits.resize(10);
        for (auto& v : out.start_logits) {
            v = rng.uniform_float(-3.0f, 3.0f);
        }
        for (auto& v : out.end_logits) {
            v = rng.uniform_float(-3.0f, 3.0f);
        }
        InferenceConfig cfg;
        cfg.threshold = 0.5f;
        cfg.reject_budget = 1 + static_cast<int>(rng.bounded(3));
        cfg.rejection_mode = trial % 2 ? InferenceConfig::RejectionMode::span
                                       : InferenceConfig::RejectionMode::endpoints;
        const float p = rng.uniform_float(0.0f, 1.0f);
        const auto pred = predict_with_critic(out, ex, constant_scorer(p), cfg);

        const auto first = select_span(out.start_logits, out.end_logits, ExclusionSet{},
                                       cfg.max_span_len);
        CHECK(first->joint_score >= pred.joint_score);
        if (!pred.fell_back && pred.rejections_used > 0) {
            // returned span respects the exclusions: it must differ from the first
            CHECK((pred.start != first->start || pred.end != first->end));
        }
    }
}

TEST_CASE("rejection count is monotone in the threshold for a fixed scorer") {
    Rng rng(77);
    const QAExample ex = make_example("t0 t1 t2 t3 t4 t5", "q ?");
    std::vector<ActorOutput> outs;
    std::vector<float> probs;
    for (int i = 0; i < 60; ++i) {
        ActorOutput out;
        out.start_logits.resize(6);
        out.end_logits.resize(6);
        for (auto& v : out.start_logits) {
            v = rng.uniform_float(-2.0f, 2.0f);
        }
        for (auto& v : out.end_logits) {
            v = rng.uniform_float(-2.0f, 2.0f);
        }
        outs.push_back(out);
        probs.push_back(rng.uniform_float(0.0f, 1.0f));
    }

    int prev = -1;
    for (int step = 0; step <= 9; ++step) {
        InferenceConfig cfg;
        cfg.threshold = 0.1f * step;
        int rejected = 0;
        for (std::size_t i = 0; i < outs.size(); ++i) {
            const auto pred = predict_with_critic(outs[i], ex, constant_scorer(probs[i]), cfg);
            rejected += pred.rejections_used > 0 ? 1 : 0;
        }
        CHECK(rejected >= prev);
        prev = rejected;
    }
}

TEST_CASE("predict_baseline equals threshold-0 gating and handles one-token passages") {
    const auto dir = testutil::scratch_dir("inference_baseline");
    testutil::SynthConfig synth;
    synth.n_examples = 6;
    synth.seed = 5;
    const Dataset ds = load_squad(testutil::write_synth_squad(dir / "s.json", synth));

    ActorModel actor;
    actor.embed_dim = 8;
    actor.hidden_dim = 8;
    actor.vocab = ds.vocab;
    Rng arng(3);
    actor.init(arng);

    CriticModel critic;
    critic.embed_dim = 8;
    critic.hidden_dim = 8;
    critic.head_dim1 = 16;
    critic.head_dim2 = 8;
    critic.vocab = ds.vocab;
    Rng crng(4);
    critic.init(crng);

    InferenceConfig cfg;
    cfg.threshold = 0.0f;
    for (const auto& ex : ds.examples) {
        const auto base = predict_baseline(actor, ex, cfg.max_span_len);
        const auto gated = predict_with_critic(actor, critic, ex, cfg);
        CHECK(base.start == gated.start);
        CHECK(base.end == gated.end);
        CHECK(base.critic_prob == 1.0f); // sentinel
        // deterministic across calls
        const auto again = predict_baseline(actor, ex, cfg.max_span_len);
        CHECK(again.start == base.start);
        CHECK(again.end == base.end);
    }

    const QAExample single = make_example("lonely", "q ?");
    ActorOutput out;
    out.start_logits = {0.7f};
    out.end_logits = {-0.3f};
    const auto pred = predict_with_critic(out, single, constant_scorer(0.9f), cfg);
    CHECK(pred.start == 0);
    CHECK(pred.end == 0);
}

TEST_CASE("critic_query_tokens windows the passage prefix") {
    const QAExample ex = make_example("t0 t1 t2 t3 t4 t5 t6 t7", "q ?");
    const auto q0 = critic_query_tokens(ex, 0, 4);
    CHECK(q0 == std::vector<std::string>({Vocabulary::kBosToken}));
    const auto q3 = critic_query_tokens(ex, 3, 4);
    CHECK(q3 == std::vector<std::string>({Vocabulary::kBosToken, "t0", "t1", "t2"}));
    const auto q7 = critic_query_tokens(ex, 7, 4);
    CHECK(q7 == std::vector<std::string>({Vocabulary::kBosToken, "t3", "t4", "t5", "t6"}));
}

TEST_CASE("inference config validation") {
    InferenceConfig cfg;
    cfg.threshold = 1.5f;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.threshold = 0.3f;
    cfg.reject_budget = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.reject_budget = 1;
    cfg.max_span_len = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
