#include "acqa/inference.hpp"

#include <algorithm>

#include "acqa/errors.hpp"

namespace acqa {

void InferenceConfig::validate() const {
    if (threshold < 0.0f || threshold > 1.0f) {
        throw ConfigError("infer: threshold must lie in [0,1]");
    }
    if (reject_budget < 0) {
        throw ConfigError("infer: reject_budget must be >= 0");
    }
    if (max_span_len < 1) {
        throw ConfigError("infer: max_span_len must be >= 1");
    }
    if (query_window < 1) {
        throw ConfigError("infer: query_window must be >= 1");
    }
}

InferenceConfig::RejectionMode rejection_mode_from_string(const std::string& s) {
    if (s == "endpoints") {
        return InferenceConfig::RejectionMode::endpoints;
    }
    if (s == "span") {
        return InferenceConfig::RejectionMode::span;
    }
    throw ConfigError("infer: unknown rejection mode '" + s + "' (expected endpoints|span)");
}

std::string to_string(InferenceConfig::RejectionMode m) {
    return m == InferenceConfig::RejectionMode::endpoints ? "endpoints" : "span";
}

std::optional<SpanCandidate> select_span(std::span<const float> start_logits,
                                         std::span<const float> end_logits,
                                         const ExclusionSet& exclusions, int max_span_len) {
    if (start_logits.size() != end_logits.size()) {
        throw ModelError("select_span: logit length mismatch " +
                         std::to_string(start_logits.size()) + " vs " +
                         std::to_string(end_logits.size()));
    }
    const int n = static_cast<int>(start_logits.size());

    std::optional<SpanCandidate> best;
    for (int s = 0; s < n; ++s) {
        if (exclusions.starts.count(s) || exclusions.positions.count(s)) {
            continue;
        }
        const int last = std::min(n - 1, s + max_span_len - 1);
        for (int e = s; e <= last; ++e) {
            if (exclusions.positions.count(e)) {
                break; // [s, e'] for e' >= e would all overlap this position
            }
            if (exclusions.ends.count(e)) {
                continue;
            }
            const float score = start_logits[s] + end_logits[e];
            if (!best || score > best->joint_score) { // strict: ties keep smallest (s, e)
                best = SpanCandidate{s, e, score};
            }
        }
    }
    return best;
}

std::vector<std::string> critic_query_tokens(const QAExample& example, int start,
                                             int query_window) {
    std::vector<std::string> query;
    const int begin = std::max(0, start - query_window);
    query.reserve(static_cast<std::size_t>(start - begin) + 1);
    query.push_back(Vocabulary::kBosToken);
    for (int i = begin; i < start; ++i) {
        query.push_back(example.passage.tokens[i]);
    }
    return query;
}

CriticScorer make_critic_scorer(const CriticModel& critic) {
    return [&critic](const std::vector<std::string>& query, const std::vector<std::string>& span) {
        return critic_forward(critic, critic.vocab.encode(query), critic.vocab.encode(span));
    };
}

namespace {

std::vector<std::string> span_tokens(const QAExample& example, int start, int end) {
    return {example.passage.tokens.begin() + start, example.passage.tokens.begin() + end + 1};
}

} // namespace

SpanPrediction predict_with_critic(const ActorOutput& out, const QAExample& example,
                                   const CriticScorer& scorer, const InferenceConfig& cfg) {
    cfg.validate();

    ExclusionSet exclusions;
    const auto first = select_span(out.start_logits, out.end_logits, exclusions, cfg.max_span_len);
    if (!first) {
        throw ModelError("predict_with_critic: no candidate spans for passage of length " +
                         std::to_string(out.start_logits.size()));
    }

    SpanPrediction pred;
    pred.first_start = first->start;
    pred.first_end = first->end;

    SpanCandidate proposal = *first;
    float first_prob = 1.0f;
    int budget = cfg.reject_budget;

    for (;;) {
        const float p = scorer(critic_query_tokens(example, proposal.start, cfg.query_window),
                               span_tokens(example, proposal.start, proposal.end));
        if (pred.rejections_used == 0) {
            first_prob = p;
        }
        if (p >= cfg.threshold || budget == 0) {
            pred.start = proposal.start;
            pred.end = proposal.end;
            pred.joint_score = proposal.joint_score;
            pred.critic_prob = p;
            return pred;
        }

        // reject: record exclusions, re-argmax
        if (cfg.rejection_mode == InferenceConfig::RejectionMode::endpoints) {
            exclusions.starts.insert(proposal.start);
            exclusions.ends.insert(proposal.end);
        } else {
            for (int i = proposal.start; i <= proposal.end; ++i) {
                exclusions.positions.insert(i);
            }
        }
        budget -= 1;
        pred.rejections_used += 1;

        const auto next = select_span(out.start_logits, out.end_logits, exclusions, cfg.max_span_len);
        if (!next) {
            // fail open: rejection must never leave the system unable to answer
            pred.start = first->start;
            pred.end = first->end;
            pred.joint_score = first->joint_score;
            pred.critic_prob = first_prob;
            pred.fell_back = true;
            return pred;
        }
        proposal = *next;
    }
}

SpanPrediction predict_with_critic(const ActorModel& actor, const CriticModel& critic,
                                   const QAExample& example, const InferenceConfig& cfg) {
    const ActorOutput out = actor_forward(actor, actor.vocab.encode(example.question.tokens),
                                          actor.vocab.encode(example.passage.tokens));
    return predict_with_critic(out, example, make_critic_scorer(critic), cfg);
}

SpanPrediction predict_baseline(const ActorModel& actor, const QAExample& example,
                                int max_span_len) {
    const ActorOutput out = actor_forward(actor, actor.vocab.encode(example.question.tokens),
                                          actor.vocab.encode(example.passage.tokens));
    const auto best = select_span(out.start_logits, out.end_logits, ExclusionSet{}, max_span_len);
    if (!best) {
        throw ModelError("predict_baseline: no candidate spans");
    }
    SpanPrediction pred;
    pred.start = pred.first_start = best->start;
    pred.end = pred.first_end = best->end;
    pred.joint_score = best->joint_score;
    pred.critic_prob = 1.0f; // sentinel: no critic consulted
    return pred;
}

} // namespace acqa
