#include "acqa/advgen.hpp"

#include <fstream>

#include <json.hpp>

#include "acqa/errors.hpp"
#include "acqa/fsio.hpp"

namespace acqa {

void GenConfig::validate() const {
    if (replacement_prob < 0.0f || replacement_prob > 1.0f) {
        throw ConfigError("gen: replacement_prob must lie in [0,1]");
    }
    if (query_window < 1) {
        throw ConfigError("gen: query_window must be >= 1");
    }
}

GenConfig::Scope scope_from_string(const std::string& s) {
    if (s == "all" || s == "all_words") {
        return GenConfig::Scope::all_words;
    }
    if (s == "nonstop" || s == "non_stop_words") {
        return GenConfig::Scope::non_stop_words;
    }
    throw ConfigError("gen: unknown scope '" + s + "' (expected all|nonstop)");
}

std::string to_string(GenConfig::Scope s) {
    return s == GenConfig::Scope::all_words ? "all" : "nonstop";
}

std::vector<std::string> generate_negative_span(const std::vector<std::string>& gold_span,
                                                const std::vector<std::string>& question,
                                                const GenConfig& cfg, Rng& rng,
                                                std::vector<std::uint8_t>* replaced_mask) {
    if (gold_span.empty()) {
        throw DataError("generate_negative_span: empty golden span");
    }
    if (question.empty()) {
        throw DataError("generate_negative_span: empty question, no replacement source");
    }

    std::vector<std::string> out = gold_span;
    if (replaced_mask != nullptr) {
        replaced_mask->assign(gold_span.size(), 0);
    }
    for (std::size_t i = 0; i < gold_span.size(); ++i) {
        if (cfg.scope == GenConfig::Scope::non_stop_words && is_stop_word(gold_span[i])) {
            continue; // protected position, no draws consumed
        }
        if (rng.uniform() < static_cast<double>(cfg.replacement_prob)) {
            out[i] = question[rng.bounded(question.size())];
            if (replaced_mask != nullptr) {
                (*replaced_mask)[i] = 1;
            }
        }
    }
    return out;
}

std::pair<CriticPair, CriticPair> build_critic_pairs(const QAExample& example,
                                                     const GenConfig& cfg, Rng& rng) {
    const int start = example.span_start;
    const int prefix_begin = std::max(0, start - cfg.query_window);

    std::vector<std::string> query;
    query.reserve(static_cast<std::size_t>(start - prefix_begin) + 1);
    query.push_back(Vocabulary::kBosToken);
    for (int i = prefix_begin; i < start; ++i) {
        query.push_back(example.passage.tokens[i]);
    }

    CriticPair genuine;
    genuine.source_qid = example.id;
    genuine.query = query;
    genuine.span = example.gold_span_tokens();
    genuine.label = 1;

    CriticPair adversarial;
    adversarial.source_qid = example.id;
    adversarial.query = std::move(query);
    adversarial.span = generate_negative_span(genuine.span, example.question.tokens, cfg, rng);
    adversarial.label = 0;

    return {std::move(genuine), std::move(adversarial)};
}

CriticDataset build_critic_dataset(const Dataset& dataset, const GenConfig& cfg) {
    cfg.validate();
    if (dataset.examples.empty()) {
        throw DataError("build_critic_dataset: empty dataset");
    }

    CriticDataset out;
    out.pairs.reserve(dataset.examples.size() * 2);
    for (const auto& ex : dataset.examples) {
        Rng rng(substream_seed(cfg.seed, ex.id));
        auto [genuine, adversarial] = build_critic_pairs(ex, cfg, rng);
        out.pairs.push_back(std::move(genuine));
        out.pairs.push_back(std::move(adversarial));
        out.genuine_count += 1;
        out.adversarial_count += 1;
    }
    return out;
}

void write_critic_pairs(const std::filesystem::path& path, const CriticDataset& ds) {
    std::string out;
    for (const auto& p : ds.pairs) {
        nlohmann::json j;
        j["qid"] = p.source_qid;
        j["query"] = p.query;
        j["span"] = p.span;
        j["label"] = p.label;
        out += j.dump();
        out += "\n"; // LF line endings
    }
    atomic_write_text(path, out);
}

CriticDataset load_critic_pairs(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("load_critic_pairs: cannot open " + path.string());
    }
    CriticDataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        lineno += 1;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_critic_pairs: bad JSON at " + path.string() + ":" +
                            std::to_string(lineno) + ": " + e.what());
        }
        CriticPair p;
        try {
            p.source_qid = j.at("qid").get<std::string>();
            p.query = j.at("query").get<std::vector<std::string>>();
            p.span = j.at("span").get<std::vector<std::string>>();
            p.label = j.at("label").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_critic_pairs: bad pair at " + path.string() + ":" +
                            std::to_string(lineno) + ": " + e.what());
        }
        if (p.label != 0 && p.label != 1) {
            throw DataError("load_critic_pairs: label must be 0|1 at " + path.string() + ":" +
                            std::to_string(lineno));
        }
        if (p.query.empty() || p.span.empty()) {
            throw DataError("load_critic_pairs: empty query or span at " + path.string() + ":" +
                            std::to_string(lineno));
        }
        if (p.label == 1) {
            ds.genuine_count += 1;
        } else {
            ds.adversarial_count += 1;
        }
        ds.pairs.push_back(std::move(p));
    }
    if (ds.pairs.empty()) {
        throw DataError("load_critic_pairs: no pairs in " + path.string());
    }
    return ds;
}

Vocabulary build_pair_vocab(const CriticDataset& ds) {
    Vocabulary v; // specials pre-registered; the BOS literal resolves to kBosId
    for (const auto& p : ds.pairs) {
        for (const auto& t : p.query) {
            v.add(t);
        }
        for (const auto& t : p.span) {
            v.add(t);
        }
    }
    return v;
}

} // namespace acqa
