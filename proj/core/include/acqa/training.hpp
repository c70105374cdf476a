#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "acqa/advgen.hpp"
#include "acqa/inference.hpp"
#include "acqa/models.hpp"

namespace acqa {

struct TrainConfig {
    enum class LossMode { additive, reweight };

    int epochs = 10;
    float lr = 1e-2f;
    int batch_size = 16;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::reweight;
    float bce_cap = 5.0f; // bound on the critic term and thus the reweight factor

    void validate() const;
};

TrainConfig::LossMode loss_mode_from_string(const std::string& s);
std::string to_string(TrainConfig::LossMode m);

// All terms of one combined-loss evaluation. ce_span is exactly
// (ce_start + ce_end) / 2; combined follows the active mode:
//   additive: 0.5 * ce_span + 0.5 * bce
//   reweight: (1 + bce) * ce_span
// with bce = binary cross entropy against label 1, clamped to bce_cap.
struct LossBreakdown {
    float ce_start = 0.0f;
    float ce_end = 0.0f;
    float ce_span = 0.0f;
    float bce = 0.0f;
    float combined = 0.0f;
};

LossBreakdown compose_loss(float ce_start, float ce_end, float p_genuine,
                           TrainConfig::LossMode mode, float bce_cap);

LossBreakdown combined_loss(const ActorOutput& actor_out, std::pair<int, int> gold,
                            float p_genuine, TrainConfig::LossMode mode, float bce_cap);

// ----------------------------- critic training -----------------------------

struct CriticEpochStats {
    int epoch = 0;
    double bce = 0.0;      // mean train loss
    double accuracy = 0.0; // held-out when provided, else train accuracy
};

// Mini-batch Adam on mean BCE. The held-out set only feeds the per-epoch
// accuracy trace (decision threshold 0.5); pass an empty dataset to score on
// the training pairs instead.
std::vector<CriticEpochStats> train_critic(CriticModel& critic, const CriticDataset& train,
                                           const CriticDataset& heldout, const TrainConfig& cfg);

// Fraction of pairs where (p >= 0.5) matches the label.
double evaluate_critic(const CriticModel& critic, const CriticDataset& pairs);
double evaluate_critic(const CriticScorer& scorer, const CriticDataset& pairs);

// ----------------------------- actor training -----------------------------

struct ActorEpochStats {
    int epoch = 0;
    double ce_span = 0.0;
    double bce = 0.0;
    double combined = 0.0;
};

// Per example: actor forward, unconstrained joint-argmax proposal, critic
// consulted on (prefix before proposed start, proposed span) with no gradient
// flow, combined loss against the gold span, Adam on actor parameters only.
// The critic is verified byte-identical before and after.
std::vector<ActorEpochStats> train_actor(ActorModel& actor, const CriticModel& frozen_critic,
                                         const Dataset& dataset, const TrainConfig& cfg,
                                         int query_window = 64);

} // namespace acqa
