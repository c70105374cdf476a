#include "acqa/training.hpp"

#include <algorithm>
#include <numeric>

#include "acqa/errors.hpp"

namespace acqa {

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ConfigError("train: epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("train: batch_size must be >= 1");
    }
    if (!(bce_cap > 0.0f)) {
        throw ConfigError("train: bce_cap must be > 0");
    }
    if (!(lr > 0.0f)) {
        throw ConfigError("train: lr must be > 0");
    }
}

TrainConfig::LossMode loss_mode_from_string(const std::string& s) {
    if (s == "additive") {
        return TrainConfig::LossMode::additive;
    }
    if (s == "reweight") {
        return TrainConfig::LossMode::reweight;
    }
    throw ConfigError("train: unknown loss mode '" + s + "' (expected additive|reweight)");
}

std::string to_string(TrainConfig::LossMode m) {
    return m == TrainConfig::LossMode::additive ? "additive" : "reweight";
}

LossBreakdown compose_loss(float ce_start, float ce_end, float p_genuine,
                           TrainConfig::LossMode mode, float bce_cap) {
    LossBreakdown lb;
    lb.ce_start = ce_start;
    lb.ce_end = ce_end;
    lb.ce_span = (ce_start + ce_end) / 2.0f;
    lb.bce = std::min(binary_cross_entropy_value(p_genuine, 1), bce_cap);
    if (mode == TrainConfig::LossMode::additive) {
        lb.combined = 0.5f * lb.ce_span + 0.5f * lb.bce;
    } else {
        lb.combined = (1.0f + lb.bce) * lb.ce_span;
    }
    return lb;
}

LossBreakdown combined_loss(const ActorOutput& actor_out, std::pair<int, int> gold,
                            float p_genuine, TrainConfig::LossMode mode, float bce_cap) {
    const float ce_s = cross_entropy_value(actor_out.start_logits, gold.first);
    const float ce_e = cross_entropy_value(actor_out.end_logits, gold.second);
    return compose_loss(ce_s, ce_e, p_genuine, mode, bce_cap);
}

// ----------------------------- critic training -----------------------------

namespace {

struct EncodedPair {
    std::vector<int> query;
    std::vector<int> span;
    int label = 0;
};

std::vector<EncodedPair> encode_pairs(const Vocabulary& vocab, const CriticDataset& ds) {
    std::vector<EncodedPair> out;
    out.reserve(ds.pairs.size());
    for (const auto& p : ds.pairs) {
        out.push_back({vocab.encode(p.query), vocab.encode(p.span), p.label});
    }
    return out;
}

std::uint64_t params_digest(const ParamStore& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : params.entries()) {
        h ^= fnv1a64(e.name);
        h *= 0x100000001b3ULL;
        const auto* bytes = reinterpret_cast<const char*>(e.value.data.data());
        h ^= fnv1a64(std::string_view(bytes, e.value.numel() * sizeof(float)));
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

std::vector<CriticEpochStats> train_critic(CriticModel& critic, const CriticDataset& train,
                                           const CriticDataset& heldout, const TrainConfig& cfg) {
    cfg.validate();
    if (train.pairs.empty()) {
        throw DataError("train_critic: empty training corpus");
    }

    const auto train_enc = encode_pairs(critic.vocab, train);
    const auto eval_enc = encode_pairs(critic.vocab, heldout.pairs.empty() ? train : heldout);

    Adam opt(AdamConfig{.lr = cfg.lr});
    Rng shuffle_rng(cfg.seed);

    std::vector<std::size_t> order(train_enc.size());
    std::iota(order.begin(), order.end(), 0u);

    std::vector<CriticEpochStats> trace;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t base = 0; base < order.size(); base += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), base + cfg.batch_size);
            Graph g(&critic.params);
            Graph::NodeId batch_loss = -1;
            for (std::size_t k = base; k < stop; ++k) {
                const auto& pair = train_enc[order[k]];
                Graph::NodeId p = critic_forward_nodes(g, critic, pair.query, pair.span);
                Graph::NodeId loss = g.binary_cross_entropy(p, pair.label);
                batch_loss = (batch_loss < 0) ? loss : g.add(batch_loss, loss);
            }
            const float inv = 1.0f / static_cast<float>(stop - base);
            batch_loss = g.scale(batch_loss, inv);
            loss_sum += static_cast<double>(g.scalar(batch_loss)) * (stop - base);
            seen += stop - base;
            g.backward(batch_loss);
            opt.step(critic.params);
        }

        std::size_t correct = 0;
        for (const auto& pair : eval_enc) {
            const float p = critic_forward(critic, pair.query, pair.span);
            const int predicted = p >= 0.5f ? 1 : 0;
            correct += predicted == pair.label ? 1 : 0;
        }

        trace.push_back({epoch, loss_sum / static_cast<double>(seen),
                         static_cast<double>(correct) / static_cast<double>(eval_enc.size())});
    }
    return trace;
}

double evaluate_critic(const CriticScorer& scorer, const CriticDataset& pairs) {
    if (pairs.pairs.empty()) {
        throw DataError("evaluate_critic: empty corpus");
    }
    std::size_t correct = 0;
    for (const auto& p : pairs.pairs) {
        const float prob = scorer(p.query, p.span);
        const int predicted = prob >= 0.5f ? 1 : 0;
        correct += predicted == p.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.pairs.size());
}

double evaluate_critic(const CriticModel& critic, const CriticDataset& pairs) {
    return evaluate_critic(make_critic_scorer(critic), pairs);
}

// ----------------------------- actor training -----------------------------

std::vector<ActorEpochStats> train_actor(ActorModel& actor, const CriticModel& frozen_critic,
                                         const Dataset& dataset, const TrainConfig& cfg,
                                         int query_window) {
    cfg.validate();
    if (dataset.examples.empty()) {
        throw DataError("train_actor: empty dataset");
    }
    if (query_window < 1) {
        throw ConfigError("train_actor: query_window must be >= 1");
    }

    const std::uint64_t critic_digest_before = params_digest(frozen_critic.params);

    // pre-encode token ids once
    struct EncodedExample {
        std::vector<int> question;
        std::vector<int> passage;
        int gold_start, gold_end;
        const QAExample* ex;
    };
    std::vector<EncodedExample> encoded;
    encoded.reserve(dataset.examples.size());
    for (const auto& ex : dataset.examples) {
        encoded.push_back({actor.vocab.encode(ex.question.tokens),
                           actor.vocab.encode(ex.passage.tokens), ex.span_start, ex.span_end, &ex});
    }

    const CriticScorer critic_score = make_critic_scorer(frozen_critic);

    Adam opt(AdamConfig{.lr = cfg.lr});
    Rng shuffle_rng(cfg.seed);

    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0u);

    std::vector<ActorEpochStats> trace;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        ActorEpochStats stats{epoch, 0.0, 0.0, 0.0};
        for (std::size_t base = 0; base < order.size(); base += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), base + cfg.batch_size);
            Graph g(&actor.params);
            Graph::NodeId batch_loss = -1;
            for (std::size_t k = base; k < stop; ++k) {
                const auto& ex = encoded[order[k]];
                ActorForwardNodes nodes = actor_forward_nodes(g, actor, ex.question, ex.passage);

                // proposal: unconstrained joint argmax over the whole passage
                const auto& start_vals = g.value(nodes.start_logits).data;
                const auto& end_vals = g.value(nodes.end_logits).data;
                const auto proposal = select_span(start_vals, end_vals, ExclusionSet{},
                                                  static_cast<int>(ex.passage.size()));

                // critic consulted on the proposal; a plain float, so no
                // gradient can flow into or through the frozen critic
                const auto query = critic_query_tokens(*ex.ex, proposal->start, query_window);
                std::vector<std::string> span(ex.ex->passage.tokens.begin() + proposal->start,
                                              ex.ex->passage.tokens.begin() + proposal->end + 1);
                const float p_genuine = critic_score(query, span);
                const float bce =
                    std::min(binary_cross_entropy_value(p_genuine, 1), cfg.bce_cap);

                Graph::NodeId ce_s = g.cross_entropy(nodes.start_logits, ex.gold_start);
                Graph::NodeId ce_e = g.cross_entropy(nodes.end_logits, ex.gold_end);
                Graph::NodeId ce_span = g.scale(g.add(ce_s, ce_e), 0.5f);

                Graph::NodeId combined;
                if (cfg.loss_mode == TrainConfig::LossMode::additive) {
                    combined = g.add(g.scale(ce_span, 0.5f),
                                     g.constant(Tensor::scalar(0.5f * bce)));
                } else {
                    combined = g.scale(ce_span, 1.0f + bce);
                }

                stats.ce_span += g.scalar(ce_span);
                stats.bce += bce;
                stats.combined += g.scalar(combined);
                batch_loss = (batch_loss < 0) ? combined : g.add(batch_loss, combined);
            }
            batch_loss = g.scale(batch_loss, 1.0f / static_cast<float>(stop - base));
            g.backward(batch_loss);
            opt.step(actor.params);
        }

        const double n = static_cast<double>(encoded.size());
        stats.ce_span /= n;
        stats.bce /= n;
        stats.combined /= n;
        trace.push_back(stats);
    }

    if (params_digest(frozen_critic.params) != critic_digest_before) {
        throw ModelError("train_actor: frozen critic parameters changed during training");
    }
    return trace;
}

} // namespace acqa
