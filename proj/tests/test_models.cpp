#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "acqa/inference.hpp"
#include "acqa/models.hpp"
#include "acqa/training.hpp"
#include "testutil.hpp"

using namespace acqa;

namespace {

// Double-precision oracle for Luong attention: scores -> row softmax ->
// context -> tanh([context ; decoder] W_c). Matches the graph op contract.
std::vector<double> attention_oracle(const Tensor& D, const Tensor& E, const Tensor& Wa,
                                     const Tensor& Wc) {
    const int T = D.shape[0], S = E.shape[0], h = D.shape[1];
    auto at = [](const Tensor& t, int r, int c) { return static_cast<double>(t.at(r, c)); };

    std::vector<double> out(T * h, 0.0);
    for (int t = 0; t < T; ++t) {
        // score(t, s) = d_t Wa e_s
        std::vector<double> scores(S, 0.0);
        for (int s = 0; s < S; ++s) {
            double acc = 0.0;
            for (int i = 0; i < h; ++i) {
                double wa_e = 0.0;
                for (int j = 0; j < h; ++j) {
                    wa_e += at(Wa, i, j) * at(E, s, j);
                }
                acc += at(D, t, i) * wa_e;
            }
            scores[s] = acc;
        }
        double m = scores[0];
        for (double v : scores) m = std::max(m, v);
        double z = 0.0;
        std::vector<double> w(S);
        for (int s = 0; s < S; ++s) {
            w[s] = std::exp(scores[s] - m);
            z += w[s];
        }
        for (auto& v : w) v /= z;

        std::vector<double> ctx(h, 0.0);
        for (int s = 0; s < S; ++s) {
            for (int j = 0; j < h; ++j) {
                ctx[j] += w[s] * at(E, s, j);
            }
        }
        for (int j = 0; j < h; ++j) {
            double acc = 0.0;
            for (int i = 0; i < h; ++i) {
                acc += ctx[i] * at(Wc, i, j);
            }
            for (int i = 0; i < h; ++i) {
                acc += at(D, t, i) * at(Wc, h + i, j);
            }
            out[t * h + j] = std::tanh(acc);
        }
    }
    return out;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, float bound = 0.8f) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) {
        v = rng.uniform_float(-bound, bound);
    }
    return t;
}

Dataset load_synth(int n, std::uint64_t seed, const char* tag) {
    const auto dir = testutil::scratch_dir(std::string("models_") + tag);
    testutil::SynthConfig cfg;
    cfg.n_examples = n;
    cfg.seed = seed;
    return load_squad(testutil::write_synth_squad(dir / "synth.json", cfg));
}

CriticModel make_critic(const Vocabulary& vocab, int dim, std::uint64_t seed) {
    CriticModel critic;
    critic.embed_dim = dim;
    critic.hidden_dim = dim;
    critic.head_dim1 = 2 * dim;
    critic.head_dim2 = dim;
    critic.vocab = vocab;
    Rng rng(seed);
    critic.init(rng);
    return critic;
}

ActorModel make_actor(const Vocabulary& vocab, int dim, std::uint64_t seed) {
    ActorModel actor;
    actor.embed_dim = dim;
    actor.hidden_dim = dim;
    actor.vocab = vocab;
    Rng rng(seed);
    actor.init(rng);
    return actor;
}

} // namespace

TEST_CASE("zero-weight LSTM produces all-zero states") {
    ParamStore params;
    create_lstm_params(params, "z", 3, 4); // created zero-filled

    Graph g(&params);
    std::vector<NodeId> inputs;
    Rng rng(2);
    for (int t = 0; t < 3; ++t) {
        inputs.push_back(g.constant(random_tensor({1, 3}, rng)));
    }
    const auto trace = lstm_encode(g, lstm_nodes(g, "z"), inputs, 4);
    for (NodeId s : trace.states) {
        for (float v : g.value(s).data) {
            CHECK(v == 0.0f); // gates at sigmoid(0) = 0.5, candidate tanh(0) = 0
        }
    }
}

TEST_CASE("length-1 sequence has one state equal to the final state") {
    ParamStore params;
    create_lstm_params(params, "s", 3, 4);
    Rng rng(3);
    init_params_uniform(params, rng);

    Graph g(&params);
    const auto trace = lstm_encode(g, lstm_nodes(g, "s"), {g.constant(random_tensor({1, 3}, rng))}, 4);
    REQUIRE(trace.states.size() == 1);
    CHECK(g.value(trace.states[0]).data == g.value(trace.final_h).data);
}

TEST_CASE("empty sequence is fatal") {
    ParamStore params;
    create_lstm_params(params, "e", 3, 4);
    Graph g(&params);
    const auto nodes = lstm_nodes(g, "e");
    CHECK_THROWS_AS(lstm_encode(g, nodes, {}, 4), ModelError);
}

TEST_CASE("backward direction equals forward direction on reversed input") {
    ParamStore params;
    create_lstm_params(params, "bi.fwd", 3, 4);
    create_lstm_params(params, "bi.bwd", 3, 4);
    Rng rng(11);
    init_params_uniform(params, rng);

    std::vector<Tensor> xs;
    for (int t = 0; t < 5; ++t) {
        xs.push_back(random_tensor({1, 3}, rng));
    }

    Graph g(&params);
    std::vector<NodeId> inputs;
    for (const auto& x : xs) {
        inputs.push_back(g.constant(x));
    }
    const auto matrix = g.value(bilstm_matrix(g, "bi", inputs, 4));

    // manually run the bwd-direction cell over the reversed sequence
    Graph g2(&params);
    std::vector<NodeId> rev;
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) {
        rev.push_back(g2.constant(*it));
    }
    const auto bwd = lstm_encode(g2, lstm_nodes(g2, "bi.bwd"), rev, 4);

    for (int t = 0; t < 5; ++t) {
        const auto& manual = g2.value(bwd.states[4 - t]).data;
        for (int j = 0; j < 4; ++j) {
            CHECK(matrix.at(t, 4 + j) == manual[j]);
        }
    }
}

TEST_CASE("luong attention matches the double-precision oracle") {
    Rng rng(13);

    SUBCASE("random 2x3 case") {
        const Tensor D = random_tensor({2, 3}, rng);
        const Tensor E = random_tensor({4, 3}, rng);
        const Tensor Wa = random_tensor({3, 3}, rng);
        const Tensor Wc = random_tensor({6, 3}, rng);

        Graph g;
        const auto& out = g.value(luong_attention(g, g.constant(D), g.constant(E),
                                                  g.constant(Wa), g.constant(Wc)));
        const auto expect = attention_oracle(D, E, Wa, Wc);
        REQUIRE(out.shape == std::vector<int>({2, 3}));
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(out.data[i] == doctest::Approx(expect[i]).epsilon(1e-5));
        }
    }
    SUBCASE("single encoder state gets weight exactly 1") {
        const Tensor D = random_tensor({3, 2}, rng);
        const Tensor E = random_tensor({1, 2}, rng);
        const Tensor Wa = random_tensor({2, 2}, rng);
        const Tensor Wc = random_tensor({4, 2}, rng);
        Graph g;
        const auto& out = g.value(luong_attention(g, g.constant(D), g.constant(E),
                                                  g.constant(Wa), g.constant(Wc)));
        const auto expect = attention_oracle(D, E, Wa, Wc); // softmax of a singleton is 1
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(out.data[i] == doctest::Approx(expect[i]).epsilon(1e-5));
        }
    }
    SUBCASE("zero attention matrix gives uniform weights") {
        const Tensor D = random_tensor({2, 2}, rng);
        const Tensor E = random_tensor({3, 2}, rng);
        const Tensor Wa = Tensor({2, 2}); // zeros -> constant scores -> uniform
        const Tensor Wc = random_tensor({4, 2}, rng);
        Graph g;
        const auto& out = g.value(luong_attention(g, g.constant(D), g.constant(E),
                                                  g.constant(Wa), g.constant(Wc)));
        const auto expect = attention_oracle(D, E, Wa, Wc);
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(out.data[i] == doctest::Approx(expect[i]).epsilon(1e-5));
        }
    }
}

TEST_CASE("actor logits match passage length across sizes") {
    Vocabulary vocab;
    for (int i = 0; i < 20; ++i) {
        vocab.add("t" + std::to_string(i));
    }
    const ActorModel actor = make_actor(vocab, 8, 5);

    Rng rng(6);
    for (int len : {1, 2, 3, 7, 33, 128, 256}) {
        std::vector<int> question = {3, 4, 5};
        std::vector<int> passage;
        for (int i = 0; i < len; ++i) {
            passage.push_back(3 + static_cast<int>(rng.bounded(20)));
        }
        const ActorOutput out = actor_forward(actor, question, passage);
        CHECK(out.start_logits.size() == static_cast<std::size_t>(len));
        CHECK(out.end_logits.size() == static_cast<std::size_t>(len));
    }
}

TEST_CASE("actor depends on the question and is pure") {
    Vocabulary vocab;
    for (int i = 0; i < 12; ++i) {
        vocab.add("t" + std::to_string(i));
    }
    const ActorModel actor = make_actor(vocab, 8, 9);

    const std::vector<int> passage = {3, 4, 5, 6, 7, 8};
    const ActorOutput a = actor_forward(actor, {3, 4}, passage);
    const ActorOutput b = actor_forward(actor, {9, 10}, passage);
    const ActorOutput a2 = actor_forward(actor, {3, 4}, passage);

    CHECK(a.start_logits == a2.start_logits); // purity
    CHECK(a.end_logits == a2.end_logits);
    CHECK(a.start_logits != b.start_logits); // the summary enters bilinearly
}

TEST_CASE("actor rejects out-of-range token ids") {
    Vocabulary vocab;
    vocab.add("x");
    const ActorModel actor = make_actor(vocab, 4, 1);
    CHECK_THROWS_AS(actor_forward(actor, {3}, {99}), ModelError);
}

TEST_CASE("critic output contracts") {
    Vocabulary vocab;
    for (int i = 0; i < 10; ++i) {
        vocab.add("t" + std::to_string(i));
    }

    SUBCASE("zero-initialized head gives exactly 0.5") {
        CriticModel critic = make_critic(vocab, 8, 3);
        const float p = critic_forward(critic, {Vocabulary::kBosId, 3, 4}, {5, 6});
        CHECK(p == 0.5f);
    }
    SUBCASE("probability stays inside the clamped open interval") {
        CriticModel critic = make_critic(vocab, 8, 3);
        Rng rng(4);
        // exaggerate the head so the sigmoid saturates
        for (auto& v : critic.params.value("head.w3").data) {
            v = 50.0f * rng.uniform_float(0.5f, 1.0f);
        }
        for (auto& v : critic.params.value("head.b3").data) {
            v = 500.0f;
        }
        const float p = critic_forward(critic, {Vocabulary::kBosId, 3}, {5});
        CHECK(p <= 1.0f - 1e-7f);
        CHECK(p >= 1e-7f);
    }
    SUBCASE("purity") {
        CriticModel critic = make_critic(vocab, 8, 7);
        const float p1 = critic_forward(critic, {Vocabulary::kBosId, 3, 4}, {5, 6, 7});
        const float p2 = critic_forward(critic, {Vocabulary::kBosId, 3, 4}, {5, 6, 7});
        CHECK(p1 == p2);
    }
    SUBCASE("empty span is fatal") {
        CriticModel critic = make_critic(vocab, 8, 7);
        Graph g(&critic.params);
        CHECK_THROWS_AS(critic_forward_nodes(g, critic, {Vocabulary::kBosId}, {}), ModelError);
        CHECK_THROWS_AS(critic_forward_nodes(g, critic, {}, {3}), ModelError);
    }
}

TEST_CASE("gradient check passes on a full critic forward") {
    Vocabulary vocab;
    for (int i = 0; i < 8; ++i) {
        vocab.add("t" + std::to_string(i));
    }
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        CriticModel critic = make_critic(vocab, 3, seed);
        Rng rng(seed + 100);
        for (auto& v : critic.params.value("head.w3").data) {
            v = rng.uniform_float(-0.08f, 0.08f); // probe the final layer too
        }
        REQUIRE(critic.params.total_params() <= 1000);
        const std::vector<int> query = {Vocabulary::kBosId, 3, 4, 5};
        const std::vector<int> span = {6, 7};
        auto build = [&](auto& g) {
            return g.binary_cross_entropy(critic_forward_nodes(g, critic, query, span), 1);
        };
        const auto r = grad_check(critic.params, build, 1e-3f);
        worst = std::max(worst, r.max_rel_error);
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("checkpoint round trip reproduces outputs bitwise") {
    const auto dir = testutil::scratch_dir("models_ckpt");
    Vocabulary vocab;
    for (int i = 0; i < 10; ++i) {
        vocab.add("t" + std::to_string(i));
    }

    SUBCASE("actor") {
        const ActorModel actor = make_actor(vocab, 8, 21);
        save_actor(dir / "actor.ckpt", actor);
        const ActorModel loaded = load_actor(dir / "actor.ckpt");

        CHECK(loaded.vocab.size() == actor.vocab.size());
        const std::vector<int> q = {3, 4};
        const std::vector<int> p = {5, 6, 7, 8};
        const ActorOutput a = actor_forward(actor, q, p);
        const ActorOutput b = actor_forward(loaded, q, p);
        CHECK(a.start_logits == b.start_logits);
        CHECK(a.end_logits == b.end_logits);

        // saving the loaded model reproduces the checkpoint bytes
        save_actor(dir / "actor2.ckpt", loaded);
        CHECK(testutil::dirs_equal(dir / "actor.ckpt", dir / "actor2.ckpt"));
    }
    SUBCASE("critic") {
        CriticModel critic = make_critic(vocab, 8, 22);
        Rng rng(1);
        for (auto& v : critic.params.value("head.w3").data) {
            v = rng.uniform_float(-0.08f, 0.08f);
        }
        save_critic(dir / "critic.ckpt", critic);
        const CriticModel loaded = load_critic(dir / "critic.ckpt");
        const std::vector<int> q = {Vocabulary::kBosId, 3, 4};
        const std::vector<int> s = {5, 6};
        CHECK(critic_forward(critic, q, s) == critic_forward(loaded, q, s));
    }
    SUBCASE("kind mismatch is fatal") {
        const ActorModel actor = make_actor(vocab, 4, 23);
        save_actor(dir / "kind.ckpt", actor);
        CHECK_THROWS_AS(load_critic(dir / "kind.ckpt"), DataError);
    }
}

TEST_CASE("overfit sanity: actor reaches exact span match on a 16-example fixture") {
    const Dataset ds = load_synth(16, 31, "overfit_actor");

    ActorModel actor = make_actor(ds.vocab, 16, 31);
    CriticModel critic = make_critic(ds.vocab, 8, 31); // fresh head -> constant 0.5

    // initial span cross entropy, before any updates
    double initial_ce = 0.0;
    for (const auto& ex : ds.examples) {
        const ActorOutput out = actor_forward(actor, actor.vocab.encode(ex.question.tokens),
                                              actor.vocab.encode(ex.passage.tokens));
        initial_ce += combined_loss(out, {ex.span_start, ex.span_end}, 0.5f,
                                    TrainConfig::LossMode::additive, 5.0f)
                          .ce_span;
    }
    initial_ce /= ds.examples.size();

    TrainConfig cfg;
    cfg.epochs = 125; // batch 4 over 16 examples: 4 steps/epoch = 500 steps
    cfg.batch_size = 4;
    cfg.lr = 1e-2f;
    cfg.seed = 31;
    train_actor(actor, critic, ds, cfg);

    int exact = 0;
    double final_ce = 0.0;
    for (const auto& ex : ds.examples) {
        const SpanPrediction pred = predict_baseline(actor, ex, 30);
        exact += (pred.start == ex.span_start && pred.end == ex.span_end) ? 1 : 0;
        const ActorOutput out = actor_forward(actor, actor.vocab.encode(ex.question.tokens),
                                              actor.vocab.encode(ex.passage.tokens));
        final_ce += combined_loss(out, {ex.span_start, ex.span_end}, 0.5f,
                                  TrainConfig::LossMode::additive, 5.0f)
                        .ce_span;
    }
    final_ce /= ds.examples.size();

    CHECK(exact == 16);
    CHECK(final_ce < 0.01 * initial_ce); // loss decreases below 1% of initial
}

TEST_CASE("overfit sanity: critic reaches 100% train accuracy on a 32-pair fixture") {
    const Dataset ds = load_synth(16, 37, "overfit_critic");
    GenConfig gen;
    gen.replacement_prob = 0.9f;
    gen.seed = 37;
    const CriticDataset pairs = build_critic_dataset(ds, gen);
    REQUIRE(pairs.pairs.size() == 32);

    CriticModel critic = make_critic(build_pair_vocab(pairs), 16, 37);

    TrainConfig cfg;
    cfg.epochs = 125; // batch 8 over 32 pairs: 4 steps/epoch = 500 steps
    cfg.batch_size = 8;
    cfg.lr = 1e-2f;
    cfg.seed = 37;
    const auto trace = train_critic(critic, pairs, CriticDataset{}, cfg);

    double best = 0.0;
    for (const auto& e : trace) {
        best = std::max(best, e.accuracy);
    }
    CHECK(best == 1.0);
    CHECK(evaluate_critic(critic, pairs) >= 0.97);
}
