#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "acqa/checkpoint.hpp"
#include "acqa/graph.hpp"
#include "acqa/rng.hpp"
#include "acqa/textio.hpp"

namespace acqa {

// ----------------------------- LSTM building blocks -----------------------------

// Node ids are plain ints shared by the float32 production graph and the
// float64 twin used by gradient checks.
using NodeId = Graph::NodeId;

// Parameter node handles for one direction. Gate order: input, forget,
// candidate, output.
struct LstmNodes {
    NodeId w[4]; // input weights  (d x h)
    NodeId u[4]; // recurrent weights (h x h)
    NodeId b[4]; // biases (1 x h)
};

// Registers <prefix>.{w,u,b}{i,f,g,o} in the store.
void create_lstm_params(ParamStore& params, const std::string& prefix, int input_dim,
                        int hidden_dim);

template <class S>
LstmNodes lstm_nodes(GraphT<S>& g, const std::string& prefix);

struct LstmTrace {
    std::vector<NodeId> states; // h_t per step, each (1 x h)
    NodeId final_h;
    NodeId final_c;
};

// Standard LSTM recurrence:
//   i,f,o = sigmoid(x W + h U + b), g = tanh(x W + h U + b)
//   c' = f*c + i*g, h' = o * tanh(c')
// Inputs are per-step (1 x d) rows; the sequence must be non-empty.
template <class S>
LstmTrace lstm_encode(GraphT<S>& g, const LstmNodes& p, const std::vector<NodeId>& inputs,
                      NodeId h0, NodeId c0);
template <class S>
LstmTrace lstm_encode(GraphT<S>& g, const LstmNodes& p, const std::vector<NodeId>& inputs,
                      int hidden_dim); // zero initial state

// Runs <prefix>.fwd over the sequence and <prefix>.bwd over its reverse,
// concatenating the direction states per position into an (L x 2h) matrix.
template <class S>
NodeId bilstm_matrix(GraphT<S>& g, const std::string& prefix, const std::vector<NodeId>& inputs,
                     int hidden_dim);

// Luong attention with bilinear ("general") scoring:
//   score(t,s) = d_t W_a e_s, weights = softmax over s,
//   c_t = sum_s weight * e_s, out_t = tanh([c_t ; d_t] W_c)
// decoder_states (T x h), encoder_states (S x h) -> (T x h).
template <class S>
NodeId luong_attention(GraphT<S>& g, NodeId decoder_states, NodeId encoder_states,
                       NodeId w_attention, NodeId w_combine);

// ----------------------------- actor -----------------------------

// Span predictor: shared embeddings, bidirectional question and passage
// encoders, mean-pooled question summary q, and bilinear start/end heads
//   start_logits[i] = p_i W_s q + b_s,  end_logits[i] = p_i W_e q + b_e.
struct ActorModel {
    int embed_dim = 64;
    int hidden_dim = 64;
    Vocabulary vocab;
    ParamStore params;

    void init(Rng& rng);
    nlohmann::json hyperparameters() const;
};

struct ActorForwardNodes {
    NodeId start_logits; // {L}
    NodeId end_logits;   // {L}
};

template <class S>
ActorForwardNodes actor_forward_nodes(GraphT<S>& g, const ActorModel& actor,
                                      const std::vector<int>& question_ids,
                                      const std::vector<int>& passage_ids);

// Per-position start/end logits over the passage.
struct ActorOutput {
    std::vector<float> start_logits;
    std::vector<float> end_logits;
};

ActorOutput actor_forward(const ActorModel& actor, const std::vector<int>& question_ids,
                          const std::vector<int>& passage_ids);

void save_actor(const std::filesystem::path& dir, const ActorModel& actor);
ActorModel load_actor(const std::filesystem::path& dir);

// ----------------------------- critic -----------------------------

// Sequence-pair classifier: encoder LSTM over the BOS-prefixed query, decoder
// LSTM over the span seeded with the encoder final state, Luong attention,
// mean pooling along the sentence dimension, then a 3-layer dense head
// (tanh, tanh, sigmoid) emitting p(genuine).
struct CriticModel {
    int embed_dim = 64;
    int hidden_dim = 64;
    int head_dim1 = 128;
    int head_dim2 = 64;
    Vocabulary vocab;
    ParamStore params;

    void init(Rng& rng);
    nlohmann::json hyperparameters() const;
};

template <class S>
NodeId critic_forward_nodes(GraphT<S>& g, const CriticModel& critic,
                            const std::vector<int>& query_ids,
                            const std::vector<int>& span_ids);

// Probability that (query, span) are genuinely associated, clamped to
// [1e-7, 1 - 1e-7].
float critic_forward(const CriticModel& critic, const std::vector<int>& query_ids,
                     const std::vector<int>& span_ids);

void save_critic(const std::filesystem::path& dir, const CriticModel& critic);
CriticModel load_critic(const std::filesystem::path& dir);

// Uniform(-0.08, 0.08) for weight matrices in creation order; biases and the
// final head layer stay zero so a fresh critic outputs exactly 0.5.
void init_params_uniform(ParamStore& params, Rng& rng, float bound = 0.08f);

} // namespace acqa
