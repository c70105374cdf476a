#include "acqa/eval.hpp"

#include <algorithm>

#include <json.hpp>

#include "acqa/errors.hpp"
#include "acqa/fsio.hpp"

namespace acqa {

std::string span_text(const QAExample& example, int start, int end) {
    const int from = example.passage.offsets[start].first;
    const int to = example.passage.offsets[end].second;
    return example.passage_text.substr(from, to - from);
}

MetricsReport evaluate_qa(const Dataset& dataset, const Predictor& predict) {
    MetricsReport report;
    report.n_examples = static_cast<int>(dataset.examples.size());

    double f1_sum = 0.0;
    double em_sum = 0.0;
    int rejected = 0;
    int rejected_improved = 0;

    for (const auto& ex : dataset.examples) {
        const SpanPrediction pred = predict(ex);

        ExampleRecord rec;
        rec.id = ex.id;
        rec.start = pred.start;
        rec.end = pred.end;
        rec.text = span_text(ex, pred.start, pred.end);
        rec.critic_prob = pred.critic_prob;
        rec.rejections_used = pred.rejections_used;
        rec.fell_back = pred.fell_back;

        const F1EM score = f1_em(rec.text, ex.gold_answers);
        rec.f1 = score.f1;
        rec.em = score.em;

        const F1EM first =
            f1_em(span_text(ex, pred.first_start, pred.first_end), ex.gold_answers);
        rec.first_f1 = first.f1;

        if (pred.rejections_used > 0) {
            rejected += 1;
            if (rec.f1 > rec.first_f1) {
                rejected_improved += 1;
            }
        }

        f1_sum += rec.f1;
        em_sum += rec.em;
        report.records.push_back(std::move(rec));
    }

    const double n = std::max(1, report.n_examples);
    report.f1 = 100.0 * f1_sum / n;
    report.em = 100.0 * em_sum / n;
    report.rejection_rate = static_cast<double>(rejected) / n;
    report.rejected_then_improved_rate =
        rejected == 0 ? 0.0 : static_cast<double>(rejected_improved) / rejected;
    return report;
}

MetricsReport evaluate_qa(const ActorModel& actor, const CriticModel* critic,
                          const Dataset& dataset, const InferenceConfig& cfg) {
    if (critic == nullptr) {
        return evaluate_qa(dataset, [&](const QAExample& ex) {
            return predict_baseline(actor, ex, cfg.max_span_len);
        });
    }
    return evaluate_qa(dataset, [&](const QAExample& ex) {
        return predict_with_critic(actor, *critic, ex, cfg);
    });
}

HistogramReport critic_probability_histogram(const CriticScorer& scorer, const CriticDataset& ds,
                                             int n_bins) {
    if (n_bins < 2) {
        throw ConfigError("histogram: n_bins must be >= 2");
    }
    HistogramReport report;
    report.edges.resize(n_bins + 1);
    for (int i = 0; i <= n_bins; ++i) {
        report.edges[i] = static_cast<double>(i) / n_bins;
    }
    report.genuine_counts.assign(n_bins, 0);
    report.adversarial_counts.assign(n_bins, 0);

    for (const auto& pair : ds.pairs) {
        const float p = scorer(pair.query, pair.span);
        int bin = static_cast<int>(p * n_bins);
        bin = std::clamp(bin, 0, n_bins - 1);
        if (pair.label == 1) {
            report.genuine_counts[bin] += 1;
        } else {
            report.adversarial_counts[bin] += 1;
        }
    }
    return report;
}

HistogramReport critic_probability_histogram(const CriticModel& critic, const CriticDataset& ds,
                                             int n_bins) {
    return critic_probability_histogram(make_critic_scorer(critic), ds, n_bins);
}

std::filesystem::path records_path_for(const std::filesystem::path& report_path) {
    std::filesystem::path p = report_path;
    p.replace_extension(".examples.jsonl");
    return p;
}

void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report) {
    nlohmann::json j;
    j["f1"] = report.f1;
    j["em"] = report.em;
    j["n_examples"] = report.n_examples;
    j["rejection_rate"] = report.rejection_rate;
    j["rejected_then_improved_rate"] = report.rejected_then_improved_rate;
    j["examples_file"] = records_path_for(path).filename().string();
    atomic_write_text(path, j.dump(2) + "\n");

    std::string records;
    for (const auto& r : report.records) {
        nlohmann::json line;
        line["id"] = r.id;
        line["start"] = r.start;
        line["end"] = r.end;
        line["text"] = r.text;
        line["critic_prob"] = r.critic_prob;
        line["rejections_used"] = r.rejections_used;
        line["fell_back"] = r.fell_back;
        line["f1"] = r.f1;
        line["em"] = r.em;
        line["first_f1"] = r.first_f1;
        records += line.dump();
        records += "\n";
    }
    atomic_write_text(records_path_for(path), records);
}

void write_histogram_report(const std::filesystem::path& path, const HistogramReport& report) {
    nlohmann::json j;
    j["edges"] = report.edges;
    j["genuine_counts"] = report.genuine_counts;
    j["adversarial_counts"] = report.adversarial_counts;
    atomic_write_text(path, j.dump(2) + "\n");
}

} // namespace acqa
