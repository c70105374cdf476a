#pragma once

#include <functional>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "acqa/models.hpp"
#include "acqa/textio.hpp"

namespace acqa {

struct InferenceConfig {
    enum class RejectionMode { endpoints, span };

    float threshold = 0.3f; // minimum p(genuine) to accept a proposal
    RejectionMode rejection_mode = RejectionMode::endpoints;
    int reject_budget = 1;
    int max_span_len = 30; // max tokens in a span: end - start < max_span_len
    int query_window = 64; // passage-prefix tokens fed to the critic

    void validate() const;
};

InferenceConfig::RejectionMode rejection_mode_from_string(const std::string& s);
std::string to_string(InferenceConfig::RejectionMode m);

struct ExclusionSet {
    std::unordered_set<int> starts;
    std::unordered_set<int> ends;
    std::unordered_set<int> positions; // span mode: no candidate may overlap these

    bool empty() const { return starts.empty() && ends.empty() && positions.empty(); }
};

struct SpanCandidate {
    int start = 0;
    int end = 0;
    float joint_score = 0.0f; // start_logit[start] + end_logit[end]
};

// Joint argmax of start_logit[s] + end_logit[e] over pairs with s <= e,
// e - s < max_span_len, s/e not excluded, and no overlap with excluded
// positions. Ties break toward smallest s, then smallest e. Empty optional
// when every candidate is excluded.
std::optional<SpanCandidate> select_span(std::span<const float> start_logits,
                                         std::span<const float> end_logits,
                                         const ExclusionSet& exclusions, int max_span_len);

struct SpanPrediction {
    int start = 0;
    int end = 0;
    float joint_score = 0.0f;
    float critic_prob = 1.0f; // 1.0 sentinel when no critic consulted
    int rejections_used = 0;
    bool fell_back = false;
    int first_start = 0; // the initial unconstrained proposal, for diagnostics
    int first_end = 0;
};

// Critic scoring hook: (query tokens incl. BOS, span tokens) -> p(genuine).
// predict_with_critic is written against this so tests can pin probabilities.
using CriticScorer =
    std::function<float(const std::vector<std::string>&, const std::vector<std::string>&)>;

CriticScorer make_critic_scorer(const CriticModel& critic);

// Propose, consult the critic, reject below threshold, re-argmax with the
// active exclusions. Fails open: when the candidate set empties, the original
// proposal is returned with fell_back = true.
SpanPrediction predict_with_critic(const ActorOutput& out, const QAExample& example,
                                   const CriticScorer& scorer, const InferenceConfig& cfg);
SpanPrediction predict_with_critic(const ActorModel& actor, const CriticModel& critic,
                                   const QAExample& example, const InferenceConfig& cfg);

// Unconstrained selection, critic_prob reported as the 1.0 sentinel.
SpanPrediction predict_baseline(const ActorModel& actor, const QAExample& example,
                                int max_span_len);

// The critic's first sequence for a proposal starting at `start`: BOS plus
// the last `query_window` passage tokens before it.
std::vector<std::string> critic_query_tokens(const QAExample& example, int start,
                                             int query_window);

} // namespace acqa
