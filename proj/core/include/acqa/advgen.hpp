#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "acqa/rng.hpp"
#include "acqa/textio.hpp"

namespace acqa {

// Controls negative-span generation.
struct GenConfig {
    enum class Scope { all_words, non_stop_words };

    float replacement_prob = 0.75f; // per-position probability of substituting a question token
    Scope scope = Scope::all_words;
    int query_window = 64; // max passage-prefix tokens kept as the critic query
    std::uint64_t seed = 0;

    void validate() const;
};

GenConfig::Scope scope_from_string(const std::string& s);
std::string to_string(GenConfig::Scope s);

// One critic training unit: (passage-prefix query, candidate span, label).
// label 1 = genuine, 0 = adversarial.
struct CriticPair {
    std::string source_qid;
    std::vector<std::string> query; // BOS-prefixed passage prefix
    std::vector<std::string> span;
    int label = 0;

    bool operator==(const CriticPair&) const = default;
};

struct CriticDataset {
    std::vector<CriticPair> pairs;
    int genuine_count = 0;
    int adversarial_count = 0;
};

// Length-preserving positional replacement: position i of the golden span is
// substituted with a uniformly sampled question token with probability
// replacement_prob, independently per position. A position counts as
// replaced even when the sampled token equals the original. With
// scope = non_stop_words, stop-word positions are never touched.
// `replaced_mask`, when given, records which positions were substituted.
std::vector<std::string> generate_negative_span(const std::vector<std::string>& gold_span,
                                                const std::vector<std::string>& question,
                                                const GenConfig& cfg, Rng& rng,
                                                std::vector<std::uint8_t>* replaced_mask = nullptr);

// Builds (genuine, adversarial) pairs for one example. The query is the last
// query_window passage tokens before the golden span, BOS-prefixed; question
// tokens never enter the query.
std::pair<CriticPair, CriticPair> build_critic_pairs(const QAExample& example,
                                                     const GenConfig& cfg, Rng& rng);

// Two pairs per example; deterministic given (dataset order, cfg.seed) via
// per-example RNG substreams keyed on the example id.
CriticDataset build_critic_dataset(const Dataset& dataset, const GenConfig& cfg);

// JSON Lines: {"qid", "query", "span", "label"} per line, UTF-8, LF.
void write_critic_pairs(const std::filesystem::path& path, const CriticDataset& ds);
CriticDataset load_critic_pairs(const std::filesystem::path& path);

// Vocabulary over every query/span token in the corpus (first-occurrence
// order); the BOS literal in queries maps to the BOS special.
Vocabulary build_pair_vocab(const CriticDataset& ds);

} // namespace acqa
