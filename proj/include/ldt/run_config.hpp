#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldt/dataset.hpp"
#include "ldt/decode.hpp"
#include "ldt/goals.hpp"
#include "ldt/model/config.hpp"

namespace ldt {

// Pipeline failures carry a stable machine-parsable code; the CLI prints
// "error: <code>: <message>" and exits nonzero.
struct PipelineError : std::runtime_error {
    std::string code;
    PipelineError(std::string code_, const std::string& message)
        : std::runtime_error(message), code(std::move(code_)) {}
};

struct EvalConfig {
    std::vector<uint64_t> seeds;
    std::vector<double> alphas{0, 1, 10, 20};
    std::vector<DecodePolicy> policies;  // empty: predicted_tilt per alpha + optimal_manual
};

struct PathsConfig {
    std::string dataset_dir = "out/dataset";
    std::string checkpoint_dir = "out/checkpoints";
    std::string report_dir = "out/reports";
};

// One config file drives a full run: gen-data -> train -> eval -> report.
// Relative paths resolve against the config file's directory, so commands
// behave the same from any working directory.
struct RunConfig {
    std::vector<std::string> games;
    DataConfig data;
    ModelConfig model;  // vocab_size 0: filled from the game vocabulary
    TrainConfig train;  // lambda/shuffle_seed are set per training cell
    std::vector<GoalStrategy> strategies{GoalStrategy::RTG, GoalStrategy::ImR, GoalStrategy::FinS,
                                         GoalStrategy::AvgRTG};
    std::vector<double> lambdas{0.5, 0.0};
    EvalConfig eval;
    PathsConfig paths;
    uint64_t master_seed = 0;

    void validate() const {
        if (games.empty()) throw PipelineError("LDT_E_CONFIG", "config lists no games");
        if (strategies.empty()) throw PipelineError("LDT_E_CONFIG", "config lists no strategies");
        if (lambdas.empty()) throw PipelineError("LDT_E_CONFIG", "config lists no lambdas");
        if (eval.seeds.empty()) throw PipelineError("LDT_E_CONFIG", "eval.seeds must be non-empty");
        for (double l : lambdas)
            if (l < 0) throw PipelineError("LDT_E_CONFIG", "lambda must be non-negative");
        for (double a : eval.alphas)
            if (a < 0) throw PipelineError("LDT_E_CONFIG", "alpha must be non-negative");
    }
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).lexically_normal().string();
}

inline DecodePolicy policy_from_json(const nlohmann::ordered_json& j) {
    DecodePolicy policy;
    policy.mode = decode_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("alpha")) policy.alpha = j.at("alpha").get<double>();
    if (j.contains("goal")) policy.goal = j.at("goal").get<int>();
    if (j.contains("action_decoding"))
        policy.action_decoding = action_decoding_from_string(j.at("action_decoding").get<std::string>());
    policy.validate();
    return policy;
}

}  // namespace detail

// seed_override < 0 keeps the config's master_seed.
inline RunConfig load_run_config(const std::string& path, long long seed_override = -1) {
    std::ifstream in(path);
    if (!in) throw PipelineError("LDT_E_IO", "cannot read config: " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw PipelineError("LDT_E_CONFIG", path + ": " + e.what());
    }

    RunConfig cfg;
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    try {
        cfg.master_seed = j.at("master_seed").get<uint64_t>();
        for (const auto& g : j.at("games"))
            cfg.games.push_back(detail::resolve_path(base, g.get<std::string>()));

        const auto& d = j.at("data");
        cfg.data.fractions = d.at("fractions").get<std::vector<int>>();
        cfg.data.repeats = d.value("repeats", 1);
        cfg.data.seeds = d.at("seeds").get<std::vector<uint64_t>>();
        cfg.data.random_steps = d.value("random_steps", 100);

        if (j.contains("model")) {
            const auto& m = j.at("model");
            cfg.model.model_width = m.value("model_width", cfg.model.model_width);
            cfg.model.encoder_layers = m.value("encoder_layers", cfg.model.encoder_layers);
            cfg.model.decoder_layers = m.value("decoder_layers", cfg.model.decoder_layers);
            cfg.model.attention_heads = m.value("attention_heads", cfg.model.attention_heads);
            cfg.model.feedforward_width = m.value("feedforward_width", cfg.model.feedforward_width);
            cfg.model.max_input_tokens = m.value("max_input_tokens", cfg.model.max_input_tokens);
            cfg.model.max_output_tokens = m.value("max_output_tokens", cfg.model.max_output_tokens);
        }

        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.lr_schedule = t.value("lr_schedule", cfg.train.lr_schedule);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.gradient_accumulation =
                t.value("gradient_accumulation", cfg.train.gradient_accumulation);
            cfg.train.epochs = t.value("epochs", cfg.train.epochs);
            cfg.train.checkpoint_every = t.value("checkpoint_every", cfg.train.checkpoint_every);
            if (t.contains("strategies")) {
                cfg.strategies.clear();
                for (const auto& s : t.at("strategies"))
                    cfg.strategies.push_back(goal_strategy_from_string(s.get<std::string>()));
            }
            if (t.contains("lambdas")) cfg.lambdas = t.at("lambdas").get<std::vector<double>>();
        }

        const auto& e = j.at("eval");
        cfg.eval.seeds = e.at("seeds").get<std::vector<uint64_t>>();
        if (e.contains("alphas")) cfg.eval.alphas = e.at("alphas").get<std::vector<double>>();
        if (e.contains("policies"))
            for (const auto& p : e.at("policies"))
                cfg.eval.policies.push_back(detail::policy_from_json(p));

        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            cfg.paths.dataset_dir =
                detail::resolve_path(base, p.value("dataset_dir", cfg.paths.dataset_dir));
            cfg.paths.checkpoint_dir =
                detail::resolve_path(base, p.value("checkpoint_dir", cfg.paths.checkpoint_dir));
            cfg.paths.report_dir =
                detail::resolve_path(base, p.value("report_dir", cfg.paths.report_dir));
        } else {
            cfg.paths.dataset_dir = detail::resolve_path(base, cfg.paths.dataset_dir);
            cfg.paths.checkpoint_dir = detail::resolve_path(base, cfg.paths.checkpoint_dir);
            cfg.paths.report_dir = detail::resolve_path(base, cfg.paths.report_dir);
        }
    } catch (const nlohmann::json::exception& e) {
        throw PipelineError("LDT_E_CONFIG", path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw PipelineError("LDT_E_CONFIG", path + ": " + e.what());
    }

    if (seed_override >= 0) cfg.master_seed = uint64_t(seed_override);
    cfg.validate();
    return cfg;
}

// Training-cell naming: one directory per (strategy, lambda). Permille keeps
// the tag integral and collision-free for any config lambda.
inline std::string cell_tag(GoalStrategy strategy, double lambda) {
    std::string name = to_string(strategy);
    for (char& c : name) c = char(std::tolower(static_cast<unsigned char>(c)));
    char buf[32];
    std::snprintf(buf, sizeof buf, "_lambda%03d", int(std::lround(lambda * 1000)));
    return name + buf;
}

inline constexpr const char* kImitationTag = "il";

// Every derived seed is a pure function of (master_seed, cell tag), so a run
// is reproducible per cell and cells are decorrelated.
inline uint64_t cell_init_seed(uint64_t master, const std::string& tag) {
    return derive_seed(master, "model-init", {fnv1a(tag)});
}

inline uint64_t cell_shuffle_seed(uint64_t master, const std::string& tag) {
    return derive_seed(master, "train-shuffle", {fnv1a(tag)});
}

}  // namespace ldt
