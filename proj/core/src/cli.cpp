#include "acqa/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "acqa/advgen.hpp"
#include "acqa/errors.hpp"
#include "acqa/eval.hpp"
#include "acqa/fsio.hpp"
#include "acqa/log.hpp"
#include "acqa/models.hpp"
#include "acqa/training.hpp"

namespace acqa {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

using Clock = std::chrono::steady_clock;

// Sibling <artifact>.manifest.json recording how the artifact was produced.
// Wall-clock duration makes the manifest itself non-reproducible; the
// artifacts it describes are byte-stable.
void write_run_manifest(const fs::path& artifact, const std::string& command,
                        const json& resolved_config, std::uint64_t seed,
                        const std::vector<fs::path>& inputs, Clock::time_point t0) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = resolved_config;
    manifest["seed"] = seed;
    manifest["tool_version"] = kToolVersion;
    json digests = json::object();
    for (const auto& in : inputs) {
        digests[in.string()] = file_digest(in);
    }
    manifest["inputs"] = digests;
    manifest["duration_seconds"] =
        std::chrono::duration<double>(Clock::now() - t0).count();

    atomic_write_text(artifact.string() + ".manifest.json", manifest.dump(2) + "\n");
}

// Applies config-file values to options the command line left untouched,
// giving the precedence builtin < file < flag.
class ConfigMerger {
public:
    ConfigMerger(CLI::App* sub, const json* section) : sub_(sub), section_(section) {}

    template <class T>
    void merge(const std::string& flag, T& var) const {
        if (section_ == nullptr || sub_->count("--" + flag) > 0 || !section_->contains(flag)) {
            return;
        }
        try {
            var = section_->at(flag).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + flag + "': " + e.what());
        }
    }

private:
    CLI::App* sub_;
    const json* section_;
};

json load_config_file(const std::string& path) {
    if (path.empty()) {
        return json::object();
    }
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("config: cannot open " + path);
    }
    try {
        json j;
        f >> j;
        if (!j.is_object()) {
            throw ConfigError("config: top level must be an object keyed by subcommand");
        }
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("config: malformed JSON in " + path + ": " + e.what());
    }
}

void require_path(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw ConfigError(std::string("missing required option ") + flag);
    }
}

// Held-out split at an even boundary so an example's genuine/adversarial
// couple never straddles the split.
std::pair<CriticDataset, CriticDataset> split_pairs(const CriticDataset& all, double holdout) {
    std::size_t train_n = static_cast<std::size_t>(
        static_cast<double>(all.pairs.size()) * (1.0 - holdout));
    train_n -= train_n % 2;
    train_n = std::max<std::size_t>(2, std::min(train_n, all.pairs.size()));

    CriticDataset train, held;
    for (std::size_t i = 0; i < all.pairs.size(); ++i) {
        auto& dst = i < train_n ? train : held;
        dst.pairs.push_back(all.pairs[i]);
        (all.pairs[i].label == 1 ? dst.genuine_count : dst.adversarial_count) += 1;
    }
    return {std::move(train), std::move(held)};
}

void write_jsonl_log(const std::string& path, const std::vector<json>& lines) {
    if (path.empty()) {
        return;
    }
    std::string out;
    for (const auto& l : lines) {
        out += l.dump();
        out += "\n";
    }
    atomic_write_text(path, out);
}

// ----------------------------- subcommands -----------------------------

struct GenArgs {
    std::string input, out;
    double replacement_prob = 0.75;
    std::string scope = "all";
    std::uint64_t seed = 0;
    int query_window = 64;
};

int run_gen(const GenArgs& a) {
    const auto t0 = Clock::now();
    require_path(a.input, "--input");
    require_path(a.out, "--out");

    GenConfig cfg;
    cfg.replacement_prob = static_cast<float>(a.replacement_prob);
    cfg.scope = scope_from_string(a.scope);
    cfg.seed = a.seed;
    cfg.query_window = a.query_window;
    cfg.validate();

    const Dataset ds = load_squad(a.input);
    const CriticDataset pairs = build_critic_dataset(ds, cfg);
    write_critic_pairs(a.out, pairs);
    log_info("gen-adversarial: " + std::to_string(pairs.pairs.size()) + " pairs from " +
             std::to_string(ds.examples.size()) + " examples");

    const json resolved = {{"input", a.input},
                           {"out", a.out},
                           {"replacement-prob", a.replacement_prob},
                           {"scope", a.scope},
                           {"seed", a.seed},
                           {"query-window", a.query_window}};
    write_run_manifest(a.out, "gen-adversarial", resolved, a.seed, {a.input}, t0);
    return 0;
}

struct TrainCriticArgs {
    std::string pairs, out, log;
    int epochs = 10;
    double lr = 1e-2;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double holdout = 0.1;
    int embed_dim = 64;
    int hidden_dim = 64;
};

int run_train_critic(const TrainCriticArgs& a) {
    const auto t0 = Clock::now();
    require_path(a.pairs, "--pairs");
    require_path(a.out, "--out");
    if (a.holdout < 0.0 || a.holdout >= 1.0) {
        throw ConfigError("train-critic: --holdout must lie in [0,1)");
    }

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.lr = static_cast<float>(a.lr);
    cfg.batch_size = a.batch_size;
    cfg.seed = a.seed;
    cfg.validate();

    const CriticDataset all = load_critic_pairs(a.pairs);
    auto [train, held] = split_pairs(all, a.holdout);

    CriticModel critic;
    critic.embed_dim = a.embed_dim;
    critic.hidden_dim = a.hidden_dim;
    critic.vocab = build_pair_vocab(all);
    Rng init_rng(a.seed);
    critic.init(init_rng);

    const auto trace = train_critic(critic, train, held, cfg);

    std::vector<json> log_lines;
    for (const auto& e : trace) {
        log_lines.push_back({{"epoch", e.epoch}, {"bce", e.bce}, {"critic_acc", e.accuracy}});
        log_info("train-critic: epoch " + std::to_string(e.epoch) + " bce " +
                 std::to_string(e.bce) + " acc " + std::to_string(e.accuracy));
    }
    write_jsonl_log(a.log, log_lines);

    save_critic(a.out, critic);

    const json resolved = {{"pairs", a.pairs},       {"out", a.out},
                           {"log", a.log},           {"epochs", a.epochs},
                           {"lr", a.lr},             {"batch-size", a.batch_size},
                           {"seed", a.seed},         {"holdout", a.holdout},
                           {"embed-dim", a.embed_dim}, {"hidden-dim", a.hidden_dim}};
    write_run_manifest(a.out, "train-critic", resolved, a.seed, {a.pairs}, t0);
    return 0;
}

struct TrainActorArgs {
    std::string squad, critic, out, log;
    std::string loss_mode = "reweight";
    int epochs = 10;
    double lr = 1e-2;
    int batch_size = 16;
    std::uint64_t seed = 0;
    int embed_dim = 64;
    int hidden_dim = 64;
    double bce_cap = 5.0;
    int query_window = 64;
};

int run_train_actor(const TrainActorArgs& a) {
    const auto t0 = Clock::now();
    require_path(a.squad, "--squad");
    require_path(a.critic, "--critic");
    require_path(a.out, "--out");

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.lr = static_cast<float>(a.lr);
    cfg.batch_size = a.batch_size;
    cfg.seed = a.seed;
    cfg.loss_mode = loss_mode_from_string(a.loss_mode);
    cfg.bce_cap = static_cast<float>(a.bce_cap);
    cfg.validate();

    const Dataset ds = load_squad(a.squad);
    const CriticModel critic = load_critic(a.critic);

    ActorModel actor;
    actor.embed_dim = a.embed_dim;
    actor.hidden_dim = a.hidden_dim;
    actor.vocab = ds.vocab;
    Rng init_rng(a.seed);
    actor.init(init_rng);

    const auto trace = train_actor(actor, critic, ds, cfg, a.query_window);

    std::vector<json> log_lines;
    for (const auto& e : trace) {
        log_lines.push_back({{"epoch", e.epoch},
                             {"ce_span", e.ce_span},
                             {"bce", e.bce},
                             {"combined", e.combined}});
        log_info("train-actor: epoch " + std::to_string(e.epoch) + " ce_span " +
                 std::to_string(e.ce_span) + " combined " + std::to_string(e.combined));
    }
    write_jsonl_log(a.log, log_lines);

    save_actor(a.out, actor);

    const json resolved = {{"squad", a.squad},          {"critic", a.critic},
                           {"out", a.out},              {"log", a.log},
                           {"loss-mode", a.loss_mode},  {"epochs", a.epochs},
                           {"lr", a.lr},                {"batch-size", a.batch_size},
                           {"seed", a.seed},            {"embed-dim", a.embed_dim},
                           {"hidden-dim", a.hidden_dim}, {"bce-cap", a.bce_cap},
                           {"query-window", a.query_window}};
    write_run_manifest(a.out, "train-actor", resolved, a.seed, {a.squad, a.critic}, t0);
    return 0;
}

struct EvalArgs {
    std::string squad, actor, critic, report;
    double threshold = 0.3;
    std::string rejection_mode = "endpoints";
    int reject_budget = 1;
    int max_span_len = 30;
    int query_window = 64;
};

int run_eval(const EvalArgs& a) {
    const auto t0 = Clock::now();
    require_path(a.squad, "--squad");
    require_path(a.actor, "--actor");
    require_path(a.report, "--report");

    InferenceConfig cfg;
    cfg.threshold = static_cast<float>(a.threshold);
    cfg.rejection_mode = rejection_mode_from_string(a.rejection_mode);
    cfg.reject_budget = a.reject_budget;
    cfg.max_span_len = a.max_span_len;
    cfg.query_window = a.query_window;
    cfg.validate();

    const Dataset ds = load_squad(a.squad);
    const ActorModel actor = load_actor(a.actor);

    MetricsReport report;
    std::vector<fs::path> inputs = {a.squad, a.actor};
    if (a.critic.empty()) {
        report = evaluate_qa(actor, nullptr, ds, cfg);
    } else {
        const CriticModel critic = load_critic(a.critic);
        report = evaluate_qa(actor, &critic, ds, cfg);
        inputs.push_back(a.critic);
    }

    write_metrics_report(a.report, report);
    std::cout << "eval: f1 " << report.f1 << " em " << report.em << " rejection_rate "
              << report.rejection_rate << " over " << report.n_examples << " examples\n";

    const json resolved = {{"squad", a.squad},
                           {"actor", a.actor},
                           {"critic", a.critic},
                           {"report", a.report},
                           {"threshold", a.threshold},
                           {"rejection-mode", a.rejection_mode},
                           {"reject-budget", a.reject_budget},
                           {"max-span-len", a.max_span_len},
                           {"query-window", a.query_window}};
    write_run_manifest(a.report, "eval", resolved, 0, inputs, t0);
    return 0;
}

struct HistogramArgs {
    std::string critic, pairs, out;
    int bins = 10;
};

int run_histogram(const HistogramArgs& a) {
    const auto t0 = Clock::now();
    require_path(a.critic, "--critic");
    require_path(a.pairs, "--pairs");
    require_path(a.out, "--out");

    const CriticModel critic = load_critic(a.critic);
    const CriticDataset pairs = load_critic_pairs(a.pairs);
    const HistogramReport report = critic_probability_histogram(critic, pairs, a.bins);
    write_histogram_report(a.out, report);

    const json resolved = {
        {"critic", a.critic}, {"pairs", a.pairs}, {"bins", a.bins}, {"out", a.out}};
    write_run_manifest(a.out, "histogram", resolved, 0, {a.critic, a.pairs}, t0);
    return 0;
}

struct GradCheckArgs {
    std::uint64_t seed = 0;
    int trials = 10;
};

// One trial = one full critic forward + BCE, plus a small tanh MLP with a
// cross-entropy head, both against central finite differences.
int run_grad_check(const GradCheckArgs& a) {
    if (a.trials < 1) {
        throw ConfigError("grad-check: --trials must be >= 1");
    }
    constexpr float kEps = 1e-3f;
    constexpr double kTolerance = 1e-3;

    double worst = 0.0;
    std::string worst_param;
    std::size_t total_params = 0;

    for (int trial = 0; trial < a.trials; ++trial) {
        Rng rng(a.seed + static_cast<std::uint64_t>(trial));

        // tiny critic, well under 1e3 parameters
        CriticModel critic;
        critic.embed_dim = 3;
        critic.hidden_dim = 3;
        critic.head_dim1 = 6;
        critic.head_dim2 = 3;
        for (int t = 0; t < 8; ++t) {
            critic.vocab.add("t" + std::to_string(t));
        }
        critic.init(rng);
        // the zeroed final layer would hide head.w3 errors; randomize it here
        for (auto& v : critic.params.value("head.w3").data) {
            v = rng.uniform_float(-0.08f, 0.08f);
        }

        std::vector<int> query = {Vocabulary::kBosId};
        const int qlen = 2 + static_cast<int>(rng.bounded(4));
        for (int i = 0; i < qlen; ++i) {
            query.push_back(3 + static_cast<int>(rng.bounded(8)));
        }
        std::vector<int> span;
        const int slen = 1 + static_cast<int>(rng.bounded(4));
        for (int i = 0; i < slen; ++i) {
            span.push_back(3 + static_cast<int>(rng.bounded(8)));
        }
        const int label = static_cast<int>(rng.bounded(2));

        auto critic_loss = [&](auto& g) {
            return g.binary_cross_entropy(critic_forward_nodes(g, critic, query, span), label);
        };
        GradCheckResult r = grad_check(critic.params, critic_loss, kEps);
        total_params += r.checked;
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_param = "critic." + r.worst_param;
        }

        // small MLP: (1x4) -> tanh(4x8) -> (8x5) -> cross entropy
        ParamStore mlp;
        mlp.create("w1", {4, 8});
        mlp.create("w2", {8, 5});
        for (auto& e : mlp.entries()) {
            for (auto& v : e.value.data) {
                v = rng.uniform_float(-0.5f, 0.5f);
            }
        }
        Tensor x({1, 4});
        for (auto& v : x.data) {
            v = rng.uniform_float(-1.0f, 1.0f);
        }
        const int target = static_cast<int>(rng.bounded(5));
        auto mlp_loss = [&](auto& g) {
            auto h = g.tanh_op(g.matmul(g.constant(x), g.param("w1")));
            auto logits = g.reshape(g.matmul(h, g.param("w2")), {5});
            return g.cross_entropy(logits, target);
        };
        GradCheckResult m = grad_check(mlp, mlp_loss, kEps);
        total_params += m.checked;
        if (m.max_rel_error > worst) {
            worst = m.max_rel_error;
            worst_param = "mlp." + m.worst_param;
        }
    }

    const bool pass = worst < kTolerance;
    std::cout << "grad-check: trials=" << a.trials << " params_checked=" << total_params
              << " max_rel_error=" << worst << " (worst at " << worst_param << ") -> "
              << (pass ? "PASS" : "FAIL") << " (tolerance " << kTolerance << ")\n";
    return pass ? 0 : 2;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"actor-critic pipeline for adversarially robust extractive QA"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file mirroring the flags");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen-adversarial",
                                   "generate critic training pairs from a SQuAD file");
    gen->add_option("--input", gen_args.input, "SQuAD v1.1 JSON input");
    gen->add_option("--out", gen_args.out, "output pair corpus (JSON Lines)");
    gen->add_option("--replacement-prob", gen_args.replacement_prob,
                    "per-position replacement probability");
    gen->add_option("--scope", gen_args.scope, "replacement scope: all|nonstop");
    gen->add_option("--seed", gen_args.seed, "RNG seed");
    gen->add_option("--query-window", gen_args.query_window, "max prefix tokens in the query");

    TrainCriticArgs tc_args;
    auto* tc = app.add_subcommand("train-critic", "train the sequence-pair critic");
    tc->add_option("--pairs", tc_args.pairs, "pair corpus from gen-adversarial");
    tc->add_option("--out", tc_args.out, "output checkpoint directory");
    tc->add_option("--epochs", tc_args.epochs, "training epochs");
    tc->add_option("--lr", tc_args.lr, "Adam learning rate");
    tc->add_option("--batch-size", tc_args.batch_size, "mini-batch size");
    tc->add_option("--seed", tc_args.seed, "RNG seed");
    tc->add_option("--holdout", tc_args.holdout, "held-out fraction for the accuracy trace");
    tc->add_option("--embed-dim", tc_args.embed_dim, "embedding width");
    tc->add_option("--hidden-dim", tc_args.hidden_dim, "LSTM hidden width");
    tc->add_option("--log", tc_args.log, "per-epoch JSONL log path");

    TrainActorArgs ta_args;
    auto* ta = app.add_subcommand("train-actor", "train the span predictor with a frozen critic");
    ta->add_option("--squad", ta_args.squad, "SQuAD v1.1 JSON training set");
    ta->add_option("--critic", ta_args.critic, "frozen critic checkpoint");
    ta->add_option("--out", ta_args.out, "output checkpoint directory");
    ta->add_option("--loss-mode", ta_args.loss_mode, "combined loss: additive|reweight");
    ta->add_option("--epochs", ta_args.epochs, "training epochs");
    ta->add_option("--lr", ta_args.lr, "Adam learning rate");
    ta->add_option("--batch-size", ta_args.batch_size, "mini-batch size");
    ta->add_option("--seed", ta_args.seed, "RNG seed");
    ta->add_option("--embed-dim", ta_args.embed_dim, "embedding width");
    ta->add_option("--hidden-dim", ta_args.hidden_dim, "LSTM hidden width");
    ta->add_option("--bce-cap", ta_args.bce_cap, "clamp on the critic loss term");
    ta->add_option("--query-window", ta_args.query_window, "prefix tokens for critic queries");
    ta->add_option("--log", ta_args.log, "per-epoch JSONL log path");

    EvalArgs ev_args;
    auto* ev = app.add_subcommand("eval", "score a model on a SQuAD-format dev set");
    ev->add_option("--squad", ev_args.squad, "SQuAD v1.1 JSON dev set");
    ev->add_option("--actor", ev_args.actor, "actor checkpoint");
    ev->add_option("--critic", ev_args.critic, "optional critic checkpoint for rejection");
    ev->add_option("--report", ev_args.report, "output report JSON path");
    ev->add_option("--threshold", ev_args.threshold, "rejection threshold on p(genuine)");
    ev->add_option("--rejection-mode", ev_args.rejection_mode, "endpoints|span");
    ev->add_option("--reject-budget", ev_args.reject_budget, "max rejections per example");
    ev->add_option("--max-span-len", ev_args.max_span_len, "max predicted span length");
    ev->add_option("--query-window", ev_args.query_window, "prefix tokens for critic queries");

    HistogramArgs hg_args;
    auto* hg = app.add_subcommand("histogram", "per-class critic probability histogram");
    hg->add_option("--critic", hg_args.critic, "critic checkpoint");
    hg->add_option("--pairs", hg_args.pairs, "pair corpus to score");
    hg->add_option("--bins", hg_args.bins, "number of equal-width bins");
    hg->add_option("--out", hg_args.out, "output histogram JSON path");

    GradCheckArgs gc_args;
    auto* gc = app.add_subcommand("grad-check",
                                  "verify backward() against central finite differences");
    gc->add_option("--seed", gc_args.seed, "base RNG seed");
    gc->add_option("--trials", gc_args.trials, "number of random networks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help / --version
        }
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        const json config = load_config_file(config_path);
        auto section = [&](const char* name) -> const json* {
            return config.contains(name) ? &config.at(name) : nullptr;
        };

        if (gen->parsed()) {
            ConfigMerger m(gen, section("gen-adversarial"));
            m.merge("input", gen_args.input);
            m.merge("out", gen_args.out);
            m.merge("replacement-prob", gen_args.replacement_prob);
            m.merge("scope", gen_args.scope);
            m.merge("seed", gen_args.seed);
            m.merge("query-window", gen_args.query_window);
            return run_gen(gen_args);
        }
        if (tc->parsed()) {
            ConfigMerger m(tc, section("train-critic"));
            m.merge("pairs", tc_args.pairs);
            m.merge("out", tc_args.out);
            m.merge("epochs", tc_args.epochs);
            m.merge("lr", tc_args.lr);
            m.merge("batch-size", tc_args.batch_size);
            m.merge("seed", tc_args.seed);
            m.merge("holdout", tc_args.holdout);
            m.merge("embed-dim", tc_args.embed_dim);
            m.merge("hidden-dim", tc_args.hidden_dim);
            m.merge("log", tc_args.log);
            return run_train_critic(tc_args);
        }
        if (ta->parsed()) {
            ConfigMerger m(ta, section("train-actor"));
            m.merge("squad", ta_args.squad);
            m.merge("critic", ta_args.critic);
            m.merge("out", ta_args.out);
            m.merge("loss-mode", ta_args.loss_mode);
            m.merge("epochs", ta_args.epochs);
            m.merge("lr", ta_args.lr);
            m.merge("batch-size", ta_args.batch_size);
            m.merge("seed", ta_args.seed);
            m.merge("embed-dim", ta_args.embed_dim);
            m.merge("hidden-dim", ta_args.hidden_dim);
            m.merge("bce-cap", ta_args.bce_cap);
            m.merge("query-window", ta_args.query_window);
            m.merge("log", ta_args.log);
            return run_train_actor(ta_args);
        }
        if (ev->parsed()) {
            ConfigMerger m(ev, section("eval"));
            m.merge("squad", ev_args.squad);
            m.merge("actor", ev_args.actor);
            m.merge("critic", ev_args.critic);
            m.merge("report", ev_args.report);
            m.merge("threshold", ev_args.threshold);
            m.merge("rejection-mode", ev_args.rejection_mode);
            m.merge("reject-budget", ev_args.reject_budget);
            m.merge("max-span-len", ev_args.max_span_len);
            m.merge("query-window", ev_args.query_window);
            return run_eval(ev_args);
        }
        if (hg->parsed()) {
            ConfigMerger m(hg, section("histogram"));
            m.merge("critic", hg_args.critic);
            m.merge("pairs", hg_args.pairs);
            m.merge("bins", hg_args.bins);
            m.merge("out", hg_args.out);
            return run_histogram(hg_args);
        }
        if (gc->parsed()) {
            ConfigMerger m(gc, section("grad-check"));
            m.merge("seed", gc_args.seed);
            m.merge("trials", gc_args.trials);
            return run_grad_check(gc_args);
        }
        std::cerr << app.help() << std::flush;
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace acqa
