#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "acqa/advgen.hpp"
#include "acqa/inference.hpp"
#include "acqa/metrics.hpp"

namespace acqa {

struct ExampleRecord {
    std::string id;
    int start = 0;
    int end = 0;
    std::string text; // answer sliced from the original passage by offsets
    float critic_prob = 1.0f;
    int rejections_used = 0;
    bool fell_back = false;
    double f1 = 0.0;
    int em = 0;
    double first_f1 = 0.0; // F1 of the pre-rejection proposal
};

struct MetricsReport {
    double f1 = 0.0; // mean x100
    double em = 0.0; // mean x100
    int n_examples = 0;
    double rejection_rate = 0.0;
    double rejected_then_improved_rate = 0.0; // over rejected examples; 0 when none
    std::vector<ExampleRecord> records;
};

// Answer text for a token span, sliced from the original passage text by
// stored character offsets (keeps source casing and punctuation spacing).
std::string span_text(const QAExample& example, int start, int end);

using Predictor = std::function<SpanPrediction(const QAExample&)>;

// Scores a dataset under an arbitrary predictor. The drivers below bind the
// baseline and critic-gated paths.
MetricsReport evaluate_qa(const Dataset& dataset, const Predictor& predict);
MetricsReport evaluate_qa(const ActorModel& actor, const CriticModel* critic,
                          const Dataset& dataset, const InferenceConfig& cfg);

struct HistogramReport {
    std::vector<double> edges; // n_bins + 1 ascending edges over [0, 1]
    std::vector<long> genuine_counts;
    std::vector<long> adversarial_counts;
};

// Equal-width bins over [0,1]; each pair's p(genuine) is counted into its
// class's bin. Plot-ready per-class membership data.
HistogramReport critic_probability_histogram(const CriticScorer& scorer, const CriticDataset& ds,
                                             int n_bins);
HistogramReport critic_probability_histogram(const CriticModel& critic, const CriticDataset& ds,
                                             int n_bins);

// Pretty-printed JSON summary to `path`, per-example records as JSON Lines to
// `path` with extension replaced by ".examples.jsonl".
void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report);
std::filesystem::path records_path_for(const std::filesystem::path& report_path);

void write_histogram_report(const std::filesystem::path& path, const HistogramReport& report);

} // namespace acqa
