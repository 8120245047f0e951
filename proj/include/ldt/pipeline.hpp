#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "ldt/ablation.hpp"
#include "ldt/model/trainer.hpp"
#include "ldt/run_config.hpp"

namespace ldt {

inline std::vector<GameSpec> load_config_games(const RunConfig& cfg) {
    std::vector<GameSpec> specs;
    for (const auto& path : cfg.games) {
        if (!std::filesystem::exists(path))
            throw PipelineError("LDT_E_IO", "game file not found: " + path);
        specs.push_back(load_game_file(path));
    }
    return specs;
}

inline std::map<std::string, int> max_score_table(const std::vector<GameSpec>& specs) {
    std::map<std::string, int> out;
    for (const auto& spec : specs) out[spec.name] = spec.max_score;
    return out;
}

inline std::vector<Trajectory> read_dataset(const RunConfig& cfg,
                                            const std::vector<GameSpec>& specs) {
    std::vector<Trajectory> all;
    for (const auto& spec : specs) {
        const std::string path = cfg.paths.dataset_dir + "/" + spec.name + ".jsonl";
        if (!std::filesystem::exists(path))
            throw PipelineError("LDT_E_STATE", "dataset file missing: " + path + "; run gen-data first");
        auto per_game = read_trajectories(path);
        all.insert(all.end(), per_game.begin(), per_game.end());
    }
    return all;
}

inline void cmd_gen_data(const RunConfig& cfg) {
    auto specs = load_config_games(cfg);
    DatasetManifest manifest = generate_dataset(specs, cfg.data, cfg.master_seed, cfg.paths.dataset_dir);

    auto trajectories = read_dataset(cfg, specs);
    auto stats = dataset_stats(trajectories, max_score_table(specs));
    auto out = detail::open_report(cfg.paths.report_dir + "/dataset_stats.json");
    out << stats_to_json(stats).dump(2) << '\n';

    std::printf("dataset: %zu trajectories across %zu games (master seed %llu)\n",
                manifest.trajectory_count, manifest.games.size(),
                (unsigned long long)cfg.master_seed);
    for (const auto& game : manifest.games)
        std::printf("  %s: %zu trajectories\n", game.c_str(), manifest.per_game.at(game));
    std::printf("wrote %s/manifest.json\n", cfg.paths.dataset_dir.c_str());
}

// The imitation cell sees only walkthroughs; scaling its epochs by the
// dataset-size ratio gives it the same optimizer-step budget as a full cell.
inline int imitation_epochs(const TrainConfig& tc, size_t total_trajectories,
                            size_t walkthrough_count) {
    if (walkthrough_count == 0 || total_trajectories <= walkthrough_count) return tc.epochs;
    return int(std::llround(double(tc.epochs) * double(total_trajectories) /
                            double(walkthrough_count)));
}

// One model per (strategy, lambda) cell plus the walkthrough-only imitation
// cell; every cell derives its init and shuffle seeds from the master seed.
inline void cmd_train(const RunConfig& cfg, int jobs) {
    (void)jobs;  // training is sequential; parallelism lives in evaluation
    auto specs = load_config_games(cfg);
    Vocabulary vocab = Vocabulary::build(vocabulary_corpus(specs));
    auto trajectories = read_dataset(cfg, specs);
    auto max_scores = max_score_table(specs);

    ModelConfig mc = cfg.model;
    if (mc.vocab_size == 0) mc.vocab_size = vocab.size();

    auto train_cell = [&](const std::string& tag, GoalStrategy strategy, double lambda,
                          const std::vector<Trajectory>& data, int epochs_override = 0) {
        ModelConfig cell_mc = mc;
        cell_mc.init_seed = cell_init_seed(cfg.master_seed, tag);
        TrainConfig tc = cfg.train;
        tc.lambda = lambda;
        tc.shuffle_seed = cell_shuffle_seed(cfg.master_seed, tag);
        if (epochs_override > 0) tc.epochs = epochs_override;
        const std::string dir = cfg.paths.checkpoint_dir + "/" + tag;
        Model model(cell_mc);
        TrainResult result = train_model(model, data, max_scores, strategy, vocab, tc, dir,
                                         dir + "/metrics.jsonl", vocab.version());
        std::printf("trained %s: %ld steps, final loss %.4f, %zu checkpoints\n", tag.c_str(),
                    result.steps, result.history.empty() ? 0.0 : result.history.back().loss,
                    result.checkpoints.size());
        std::fflush(stdout);
    };

    for (GoalStrategy strategy : cfg.strategies)
        for (double lambda : cfg.lambdas)
            train_cell(cell_tag(strategy, lambda), strategy, lambda, trajectories);

    std::vector<Trajectory> walkthroughs;
    for (const auto& traj : trajectories)
        if (traj.walkthrough_fraction == 100) walkthroughs.push_back(traj);
    if (walkthroughs.empty())
        throw PipelineError("LDT_E_STATE", "dataset has no walkthrough trajectories for the imitation cell");
    train_cell(kImitationTag, GoalStrategy::RTG, 0.5, walkthroughs,
               imitation_epochs(cfg.train, trajectories.size(), walkthroughs.size()));
}

// Evaluates the primary cell (first strategy x first lambda) under the
// configured policies; each run emits a table and a trace file.
inline void cmd_eval(const RunConfig& cfg, int jobs) {
    auto specs = load_config_games(cfg);
    Vocabulary vocab = Vocabulary::build(vocabulary_corpus(specs));

    const std::string primary = cell_tag(cfg.strategies.front(), cfg.lambdas.front());
    Model model =
        load_model_checkpoint(final_checkpoint(cfg.paths.checkpoint_dir + "/" + primary).path, vocab);

    std::vector<std::pair<std::string, DecodePolicy>> runs;
    if (cfg.eval.policies.empty()) {
        for (double alpha : cfg.eval.alphas) {
            DecodePolicy p;
            p.mode = DecodeMode::PredictedTilt;
            p.alpha = alpha;
            runs.emplace_back("predicted_tilt_alpha_" + detail::fmt_alpha(alpha), p);
        }
        DecodePolicy p;
        p.mode = DecodeMode::OptimalManual;
        p.goal = 100;
        runs.emplace_back("optimal_manual", p);
    } else {
        for (const auto& p : cfg.eval.policies) {
            std::string tag = to_string(p.mode);
            if (p.mode == DecodeMode::PredictedTilt) tag += "_alpha_" + detail::fmt_alpha(p.alpha);
            if (p.mode == DecodeMode::Fixed) tag += "_goal_" + std::to_string(p.goal);
            runs.emplace_back(std::move(tag), p);
        }
    }

    std::printf("evaluating %s over %zu games x %zu seeds\n", primary.c_str(), specs.size(),
                cfg.eval.seeds.size());
    for (const auto& [tag, policy] : runs) {
        EvalReport report = evaluate_model(model, vocab, specs, cfg.eval.seeds, policy, jobs);
        write_eval_tsv(cfg.paths.report_dir + "/eval_" + tag + ".tsv", report);
        write_traces(cfg.paths.report_dir + "/traces/eval_" + tag + ".jsonl", report);
        std::printf("  %s: normalized average %.4f\n", tag.c_str(), report.normalized_average);
        std::fflush(stdout);
    }
}

// Full ablation bundle: tilt sweep over the primary cell's checkpoint series,
// strategy table and lambda table on final checkpoints, plus baselines.
inline void cmd_report(const RunConfig& cfg, int jobs) {
    auto specs = load_config_games(cfg);
    Vocabulary vocab = Vocabulary::build(vocabulary_corpus(specs));
    const std::string root = cfg.paths.checkpoint_dir;
    const double table_alpha = 10.0;

    const std::string primary = cell_tag(cfg.strategies.front(), cfg.lambdas.front());
    TiltSweepResult sweep = run_tilt_sweep(vocab, specs, cfg.eval.seeds, cfg.eval.alphas,
                                           root + "/" + primary, cfg.paths.report_dir, jobs);
    std::printf("tilt sweep (%zu checkpoints, final step %ld):\n", sweep.steps.size(),
                sweep.steps.back());
    for (const auto& column : sweep.columns)
        std::printf("  %s: final normalized %.4f\n", column.c_str(), sweep.grid[column].back());
    std::fflush(stdout);

    auto strategy_reports = run_strategy_table(vocab, specs, cfg.eval.seeds, cfg.strategies,
                                               cfg.lambdas.front(), table_alpha, root,
                                               cfg.paths.report_dir, jobs);
    std::printf("strategy table (alpha %g):\n", table_alpha);
    for (const auto& [strategy, report] : strategy_reports)
        std::printf("  %s: normalized %.4f\n", to_string(strategy), report.normalized_average);
    std::fflush(stdout);

    if (cfg.lambdas.size() > 1) {
        LambdaTableResult lambdas = run_lambda_table(vocab, specs, cfg.eval.seeds, cfg.strategies,
                                                     cfg.lambdas, table_alpha, root,
                                                     cfg.paths.report_dir, jobs);
        std::printf("lambda table (alpha %g):\n", table_alpha);
        for (const auto& [permille, report] : lambdas.pooled)
            std::printf("  lambda %.3f: normalized %.4f\n", permille / 1000.0,
                        report.normalized_average);
        std::fflush(stdout);
    }

    BaselineResult baselines = run_baselines(vocab, specs, cfg.eval.seeds, root + "/" + kImitationTag,
                                             cfg.paths.report_dir, jobs);
    std::printf("baselines: random %.4f, imitation %.4f\n", baselines.random.normalized_average,
                baselines.imitation.normalized_average);
    std::printf("reports written to %s\n", cfg.paths.report_dir.c_str());
}

inline void cmd_reproduce(const RunConfig& cfg, int jobs) {
    cmd_gen_data(cfg);
    cmd_train(cfg, jobs);
    cmd_eval(cfg, jobs);
    cmd_report(cfg, jobs);
}

}  // namespace ldt
