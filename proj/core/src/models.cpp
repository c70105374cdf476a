#include "acqa/models.hpp"

#include <algorithm>

#include "acqa/errors.hpp"

namespace acqa {

namespace {

const char* kGateNames[4] = {"i", "f", "g", "o"};

template <class S>
std::vector<NodeId> embed_sequence(GraphT<S>& g, NodeId table, const std::vector<int>& ids) {
    std::vector<NodeId> rows;
    rows.reserve(ids.size());
    for (int id : ids) {
        rows.push_back(g.embedding_lookup(table, {id}));
    }
    return rows;
}

} // namespace

// ----------------------------- LSTM -----------------------------

void create_lstm_params(ParamStore& params, const std::string& prefix, int input_dim,
                        int hidden_dim) {
    for (const char* gate : kGateNames) {
        params.create(prefix + ".w" + gate, {input_dim, hidden_dim});
        params.create(prefix + ".u" + gate, {hidden_dim, hidden_dim});
        params.create(prefix + ".b" + gate, {1, hidden_dim});
    }
}

template <class S>
LstmNodes lstm_nodes(GraphT<S>& g, const std::string& prefix) {
    LstmNodes n;
    for (int k = 0; k < 4; ++k) {
        n.w[k] = g.param(prefix + ".w" + kGateNames[k]);
        n.u[k] = g.param(prefix + ".u" + kGateNames[k]);
        n.b[k] = g.param(prefix + ".b" + kGateNames[k]);
    }
    return n;
}

template <class S>
LstmTrace lstm_encode(GraphT<S>& g, const LstmNodes& p, const std::vector<NodeId>& inputs,
                      NodeId h0, NodeId c0) {
    if (inputs.empty()) {
        throw ModelError("lstm_encode: empty input sequence");
    }
    LstmTrace trace;
    trace.states.reserve(inputs.size());

    NodeId h = h0;
    NodeId c = c0;
    for (NodeId x : inputs) {
        auto gate = [&](int k) {
            return g.add(g.add(g.matmul(x, p.w[k]), g.matmul(h, p.u[k])), p.b[k]);
        };
        NodeId i = g.sigmoid_op(gate(0));
        NodeId f = g.sigmoid_op(gate(1));
        NodeId cand = g.tanh_op(gate(2));
        NodeId o = g.sigmoid_op(gate(3));
        c = g.add(g.mul(f, c), g.mul(i, cand));
        h = g.mul(o, g.tanh_op(c));
        trace.states.push_back(h);
    }
    trace.final_h = h;
    trace.final_c = c;
    return trace;
}

template <class S>
LstmTrace lstm_encode(GraphT<S>& g, const LstmNodes& p, const std::vector<NodeId>& inputs,
                      int hidden_dim) {
    NodeId zero = g.constant(TensorT<S>({1, hidden_dim}));
    return lstm_encode(g, p, inputs, zero, zero);
}

template <class S>
NodeId bilstm_matrix(GraphT<S>& g, const std::string& prefix, const std::vector<NodeId>& inputs,
                     int hidden_dim) {
    LstmTrace fwd = lstm_encode(g, lstm_nodes(g, prefix + ".fwd"), inputs, hidden_dim);

    std::vector<NodeId> reversed(inputs.rbegin(), inputs.rend());
    LstmTrace bwd = lstm_encode(g, lstm_nodes(g, prefix + ".bwd"), reversed, hidden_dim);

    std::vector<NodeId> rows;
    rows.reserve(inputs.size());
    const std::size_t n = inputs.size();
    for (std::size_t t = 0; t < n; ++t) {
        rows.push_back(g.concat(fwd.states[t], bwd.states[n - 1 - t], 1));
    }
    return g.stack_rows(rows);
}

// ----------------------------- attention -----------------------------

template <class S>
NodeId luong_attention(GraphT<S>& g, NodeId decoder_states, NodeId encoder_states,
                       NodeId w_attention, NodeId w_combine) {
    // scores[t][s] = d_t W_a e_s
    NodeId scores = g.matmul(g.matmul(decoder_states, w_attention), g.transpose(encoder_states));
    NodeId weights = g.softmax(scores, 1);
    NodeId context = g.matmul(weights, encoder_states);
    return g.tanh_op(g.matmul(g.concat(context, decoder_states, 1), w_combine));
}

// ----------------------------- parameter init -----------------------------

void init_params_uniform(ParamStore& params, Rng& rng, float bound) {
    for (auto& e : params.entries()) {
        const auto dot = e.name.rfind('.');
        const std::string leaf = dot == std::string::npos ? e.name : e.name.substr(dot + 1);
        if (!leaf.empty() && leaf[0] == 'b') {
            continue; // biases stay zero
        }
        for (auto& v : e.value.data) {
            v = rng.uniform_float(-bound, bound);
        }
    }
}

// ----------------------------- actor -----------------------------

void ActorModel::init(Rng& rng) {
    const int d = embed_dim;
    const int h = hidden_dim;
    params.create("emb", {vocab.size(), d});
    for (const char* enc : {"qenc", "penc"}) {
        create_lstm_params(params, std::string(enc) + ".fwd", d, h);
        create_lstm_params(params, std::string(enc) + ".bwd", d, h);
    }
    params.create("start.w", {2 * h, 2 * h});
    params.create("start.b", {1, 1});
    params.create("end.w", {2 * h, 2 * h});
    params.create("end.b", {1, 1});
    init_params_uniform(params, rng);
}

nlohmann::json ActorModel::hyperparameters() const {
    return {{"embed_dim", embed_dim}, {"hidden_dim", hidden_dim}};
}

template <class S>
ActorForwardNodes actor_forward_nodes(GraphT<S>& g, const ActorModel& actor,
                                      const std::vector<int>& question_ids,
                                      const std::vector<int>& passage_ids) {
    if (question_ids.empty() || passage_ids.empty()) {
        throw ModelError("actor_forward: empty question or passage");
    }
    NodeId emb = g.param("emb");

    auto q_rows = embed_sequence(g, emb, question_ids);
    auto p_rows = embed_sequence(g, emb, passage_ids);

    NodeId q_states = bilstm_matrix(g, "qenc", q_rows, actor.hidden_dim); // (Lq x 2h)
    NodeId p_states = bilstm_matrix(g, "penc", p_rows, actor.hidden_dim); // (Lp x 2h)

    NodeId q = g.mean(q_states, 0); // (1 x 2h) question summary

    const int len = static_cast<int>(passage_ids.size());
    auto head = [&](const char* which) {
        NodeId w = g.param(std::string(which) + ".w");
        NodeId b = g.param(std::string(which) + ".b");
        // (Lp x 2h)(2h x 2h)(2h x 1) -> (Lp x 1), + scalar bias
        NodeId scored = g.matmul(g.matmul(p_states, w), g.transpose(q));
        return g.reshape(g.add(scored, b), {len});
    };

    return {head("start"), head("end")};
}

ActorOutput actor_forward(const ActorModel& actor, const std::vector<int>& question_ids,
                          const std::vector<int>& passage_ids) {
    // forward-only graph; backward is never called, so the store stays intact
    Graph g(const_cast<ParamStore*>(&actor.params));
    ActorForwardNodes nodes = actor_forward_nodes(g, actor, question_ids, passage_ids);
    ActorOutput out;
    out.start_logits = g.value(nodes.start_logits).data;
    out.end_logits = g.value(nodes.end_logits).data;
    return out;
}

void save_actor(const std::filesystem::path& dir, const ActorModel& actor) {
    save_checkpoint(dir, {"actor", actor.hyperparameters(), actor.vocab.to_list()}, actor.params);
}

ActorModel load_actor(const std::filesystem::path& dir) {
    ActorModel actor;
    CheckpointMeta meta = load_checkpoint(dir, actor.params);
    if (meta.model_kind != "actor") {
        throw DataError("load_actor: checkpoint at " + dir.string() + " has model_kind '" +
                        meta.model_kind + "'");
    }
    actor.embed_dim = meta.hyperparameters.at("embed_dim").get<int>();
    actor.hidden_dim = meta.hyperparameters.at("hidden_dim").get<int>();
    actor.vocab = Vocabulary::from_list(meta.vocab);
    return actor;
}

// ----------------------------- critic -----------------------------

void CriticModel::init(Rng& rng) {
    const int d = embed_dim;
    const int h = hidden_dim;
    params.create("emb", {vocab.size(), d});
    create_lstm_params(params, "enc", d, h);
    create_lstm_params(params, "dec", d, h);
    params.create("attn.wa", {h, h});
    params.create("attn.wc", {2 * h, h});
    params.create("head.w1", {h, head_dim1});
    params.create("head.b1", {1, head_dim1});
    params.create("head.w2", {head_dim1, head_dim2});
    params.create("head.b2", {1, head_dim2});
    params.create("head.w3", {head_dim2, 1});
    params.create("head.b3", {1, 1});
    init_params_uniform(params, rng);
    // zero the final layer: a fresh critic emits sigmoid(0) = 0.5 exactly
    params.value("head.w3").fill(0.0f);
}

nlohmann::json CriticModel::hyperparameters() const {
    return {{"embed_dim", embed_dim},
            {"hidden_dim", hidden_dim},
            {"head_dim1", head_dim1},
            {"head_dim2", head_dim2}};
}

template <class S>
NodeId critic_forward_nodes(GraphT<S>& g, const CriticModel& critic,
                            const std::vector<int>& query_ids, const std::vector<int>& span_ids) {
    if (query_ids.empty()) {
        throw ModelError("critic_forward: empty query (callers must BOS-prefix)");
    }
    if (span_ids.empty()) {
        throw ModelError("critic_forward: empty span");
    }
    NodeId emb = g.param("emb");

    auto query_rows = embed_sequence(g, emb, query_ids);
    auto span_rows = embed_sequence(g, emb, span_ids);

    LstmTrace enc = lstm_encode(g, lstm_nodes(g, "enc"), query_rows, critic.hidden_dim);
    LstmTrace dec = lstm_encode(g, lstm_nodes(g, "dec"), span_rows, enc.final_h, enc.final_c);

    NodeId enc_states = g.stack_rows(enc.states); // (S x h)
    NodeId dec_states = g.stack_rows(dec.states); // (T x h)

    NodeId attended =
        luong_attention(g, dec_states, enc_states, g.param("attn.wa"), g.param("attn.wc"));

    NodeId pooled = g.mean(attended, 0); // averaged along the sentence dimension

    NodeId h1 = g.tanh_op(g.add(g.matmul(pooled, g.param("head.w1")), g.param("head.b1")));
    NodeId h2 = g.tanh_op(g.add(g.matmul(h1, g.param("head.w2")), g.param("head.b2")));
    NodeId z = g.add(g.matmul(h2, g.param("head.w3")), g.param("head.b3"));
    return g.sigmoid_op(z); // (1 x 1)
}

float critic_forward(const CriticModel& critic, const std::vector<int>& query_ids,
                     const std::vector<int>& span_ids) {
    Graph g(const_cast<ParamStore*>(&critic.params));
    NodeId p = critic_forward_nodes(g, critic, query_ids, span_ids);
    return bce_clamp(g.scalar(p));
}

void save_critic(const std::filesystem::path& dir, const CriticModel& critic) {
    save_checkpoint(dir, {"critic", critic.hyperparameters(), critic.vocab.to_list()},
                    critic.params);
}

CriticModel load_critic(const std::filesystem::path& dir) {
    CriticModel critic;
    CheckpointMeta meta = load_checkpoint(dir, critic.params);
    if (meta.model_kind != "critic") {
        throw DataError("load_critic: checkpoint at " + dir.string() + " has model_kind '" +
                        meta.model_kind + "'");
    }
    critic.embed_dim = meta.hyperparameters.at("embed_dim").get<int>();
    critic.hidden_dim = meta.hyperparameters.at("hidden_dim").get<int>();
    critic.head_dim1 = meta.hyperparameters.at("head_dim1").get<int>();
    critic.head_dim2 = meta.hyperparameters.at("head_dim2").get<int>();
    critic.vocab = Vocabulary::from_list(meta.vocab);
    return critic;
}

// ----------------------------- explicit instantiations -----------------------------

template LstmNodes lstm_nodes<float>(GraphT<float>&, const std::string&);
template LstmNodes lstm_nodes<double>(GraphT<double>&, const std::string&);
template LstmTrace lstm_encode<float>(GraphT<float>&, const LstmNodes&,
                                      const std::vector<NodeId>&, NodeId, NodeId);
template LstmTrace lstm_encode<double>(GraphT<double>&, const LstmNodes&,
                                       const std::vector<NodeId>&, NodeId, NodeId);
template LstmTrace lstm_encode<float>(GraphT<float>&, const LstmNodes&,
                                      const std::vector<NodeId>&, int);
template LstmTrace lstm_encode<double>(GraphT<double>&, const LstmNodes&,
                                       const std::vector<NodeId>&, int);
template NodeId bilstm_matrix<float>(GraphT<float>&, const std::string&,
                                     const std::vector<NodeId>&, int);
template NodeId bilstm_matrix<double>(GraphT<double>&, const std::string&,
                                      const std::vector<NodeId>&, int);
template NodeId luong_attention<float>(GraphT<float>&, NodeId, NodeId, NodeId, NodeId);
template NodeId luong_attention<double>(GraphT<double>&, NodeId, NodeId, NodeId, NodeId);
template ActorForwardNodes actor_forward_nodes<float>(GraphT<float>&, const ActorModel&,
                                                      const std::vector<int>&,
                                                      const std::vector<int>&);
template ActorForwardNodes actor_forward_nodes<double>(GraphT<double>&, const ActorModel&,
                                                       const std::vector<int>&,
                                                       const std::vector<int>&);
template NodeId critic_forward_nodes<float>(GraphT<float>&, const CriticModel&,
                                            const std::vector<int>&, const std::vector<int>&);
template NodeId critic_forward_nodes<double>(GraphT<double>&, const CriticModel&,
                                             const std::vector<int>&, const std::vector<int>&);

} // namespace acqa
