#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "ldt/eval.hpp"
#include "ldt/model/checkpoint.hpp"
#include "ldt/run_config.hpp"

namespace ldt {

struct CheckpointEntry {
    long step = 0;
    std::string path;
};

inline std::vector<CheckpointEntry> list_checkpoints(const std::string& dir) {
    std::vector<CheckpointEntry> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        long step = 0;
        const std::string name = entry.path().filename().string();
        if (std::sscanf(name.c_str(), "step_%ld.ckpt", &step) == 1)
            out.push_back({step, entry.path().string()});
    }
    std::sort(out.begin(), out.end(),
              [](const CheckpointEntry& a, const CheckpointEntry& b) { return a.step < b.step; });
    return out;
}

inline CheckpointEntry final_checkpoint(const std::string& dir) {
    auto entries = list_checkpoints(dir);
    if (entries.empty())
        throw PipelineError("LDT_E_STATE", "no checkpoints in " + dir + "; run train first");
    return entries.back();
}

inline Model load_model_checkpoint(const std::string& path, const Vocabulary& vocab) {
    LoadedCheckpoint loaded = load_checkpoint(path);
    if (loaded.vocab_version != vocab.version())
        throw PipelineError("LDT_E_STATE",
                            "checkpoint " + path + " was trained with a different vocabulary");
    return std::move(loaded.model);
}

// Rollout cells are independent; results land in preallocated slots, so the
// report is identical for any worker count.
template <typename RolloutFn>
EvalReport evaluate_parallel(const std::vector<GameSpec>& specs, const std::vector<uint64_t>& seeds,
                             int jobs, RolloutFn&& fn) {
    if (seeds.empty()) throw std::invalid_argument("evaluate: seeds must be non-empty");
    struct Cell {
        const GameSpec* spec;
        uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& spec : specs)
        for (uint64_t seed : seeds) cells.push_back({&spec, seed});
    std::vector<EvalEpisode> episodes(cells.size());
    auto fill = [&](size_t i) {
        episodes[i] = {cells[i].spec->name, cells[i].seed, fn(*cells[i].spec, cells[i].seed)};
    };
    const int workers = std::max(1, std::min(jobs, int(cells.size())));
    if (workers == 1) {
        for (size_t i = 0; i < cells.size(); ++i) fill(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) fill(i);
            });
        for (auto& t : pool) t.join();
    }
    return aggregate_report(std::move(episodes), specs);
}

inline EvalReport evaluate_model(const Model& model, const Vocabulary& vocab,
                                 const std::vector<GameSpec>& specs,
                                 const std::vector<uint64_t>& seeds, const DecodePolicy& policy,
                                 int jobs) {
    return evaluate_parallel(specs, seeds, jobs, [&](const GameSpec& spec, uint64_t seed) {
        return rollout_model(model, vocab, spec, seed, policy);
    });
}

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string fmt_alpha(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", alpha);
    return buf;
}

inline std::ofstream open_report(const std::string& path) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PipelineError("LDT_E_IO", "cannot write report: " + path);
    return out;
}

inline void write_episode_rows(std::ostream& out, const std::string& prefix,
                               const EvalReport& report) {
    for (const auto& e : report.episodes)
        out << prefix << e.game << '\t' << e.seed << '\t' << e.result.score << '\t'
            << report.per_game.at(e.game).max_score << '\t' << e.result.steps << '\t'
            << to_string(e.result.reason) << '\n';
}

}  // namespace detail

// Per-game rows plus one __all__ row carrying the normalized average; "-"
// fills cells the row does not define.
inline void write_eval_tsv(const std::string& path, const EvalReport& report) {
    auto out = detail::open_report(path);
    out << "game\tavg\tstdev\tbest\tmax_score\tnormalized\n";
    for (const auto& [game, agg] : report.per_game)
        out << game << '\t' << detail::fmt(agg.avg) << '\t' << detail::fmt(agg.stdev) << '\t'
            << agg.best << '\t' << agg.max_score << '\t'
            << detail::fmt(agg.avg / double(agg.max_score)) << '\n';
    out << "__all__\t-\t-\t-\t-\t" << detail::fmt(report.normalized_average) << '\n';
}

// One trace line per episode; the "trajectory" field uses the dataset record
// schema, so traces can be re-read as training trajectories.
inline void write_traces(const std::string& path, const EvalReport& report) {
    auto out = detail::open_report(path);
    for (const auto& e : report.episodes) {
        ordered_json j{{"game", e.game},
                       {"seed", e.seed},
                       {"score", e.result.score},
                       {"steps", e.result.steps},
                       {"reason", to_string(e.result.reason)},
                       {"goals", e.result.goals},
                       {"trajectory", to_json(e.result.trajectory)}};
        out << j.dump() << '\n';
    }
}

struct TiltSweepResult {
    std::vector<long> steps;
    std::vector<std::string> columns;                 // alpha_<a>... then optimal_gc
    std::map<std::string, std::vector<double>> grid;  // column -> normalized average per step
    std::map<std::string, EvalReport> final_reports;  // column -> report on the last checkpoint
};

// Tilt sweep over a checkpoint series: normalized average vs training step
// for each alpha, plus the max-score-aware optimal-GC line as the reference.
inline TiltSweepResult run_tilt_sweep(const Vocabulary& vocab, const std::vector<GameSpec>& specs,
                                      const std::vector<uint64_t>& seeds,
                                      const std::vector<double>& alphas,
                                      const std::string& series_dir, const std::string& report_dir,
                                      int jobs) {
    auto entries = list_checkpoints(series_dir);
    if (entries.empty())
        throw PipelineError("LDT_E_STATE", "no checkpoints in " + series_dir + "; run train first");

    TiltSweepResult result;
    for (double alpha : alphas) result.columns.push_back("alpha_" + detail::fmt_alpha(alpha));
    result.columns.push_back("optimal_gc");

    auto episodes_out = detail::open_report(report_dir + "/tilt_sweep_episodes.tsv");
    episodes_out << "step\tpolicy\tgame\tseed\tscore\tmax_score\tsteps\treason\n";

    for (const auto& entry : entries) {
        Model model = load_model_checkpoint(entry.path, vocab);
        result.steps.push_back(entry.step);
        for (size_t i = 0; i < result.columns.size(); ++i) {
            DecodePolicy policy;
            if (i < alphas.size()) {
                policy.mode = DecodeMode::PredictedTilt;
                policy.alpha = alphas[i];
            } else {
                policy.mode = DecodeMode::OptimalManual;
                policy.goal = 100;
            }
            EvalReport report = evaluate_model(model, vocab, specs, seeds, policy, jobs);
            result.grid[result.columns[i]].push_back(report.normalized_average);
            detail::write_episode_rows(
                episodes_out, std::to_string(entry.step) + '\t' + result.columns[i] + '\t', report);
            if (&entry == &entries.back()) result.final_reports[result.columns[i]] = std::move(report);
        }
    }

    auto out = detail::open_report(report_dir + "/tilt_sweep.tsv");
    out << "step";
    for (const auto& c : result.columns) out << '\t' << c;
    out << '\n';
    for (size_t row = 0; row < result.steps.size(); ++row) {
        out << result.steps[row];
        for (const auto& c : result.columns) out << '\t' << detail::fmt(result.grid[c][row]);
        out << '\n';
    }
    return result;
}

// Per-game avg/stdev/best for each strategy's final checkpoint at one alpha;
// rows are games, column groups are strategies, and the trailing
// normalized_average row fills only the avg column of each group.
inline std::map<GoalStrategy, EvalReport> run_strategy_table(
    const Vocabulary& vocab, const std::vector<GameSpec>& specs,
    const std::vector<uint64_t>& seeds, const std::vector<GoalStrategy>& strategies, double lambda,
    double alpha, const std::string& checkpoint_root, const std::string& report_dir, int jobs) {
    std::map<GoalStrategy, EvalReport> reports;
    auto episodes_out = detail::open_report(report_dir + "/strategy_episodes.tsv");
    episodes_out << "strategy\tgame\tseed\tscore\tmax_score\tsteps\treason\n";

    DecodePolicy policy;
    policy.mode = DecodeMode::PredictedTilt;
    policy.alpha = alpha;
    for (GoalStrategy strategy : strategies) {
        const std::string dir = checkpoint_root + "/" + cell_tag(strategy, lambda);
        Model model = load_model_checkpoint(final_checkpoint(dir).path, vocab);
        EvalReport report = evaluate_model(model, vocab, specs, seeds, policy, jobs);
        detail::write_episode_rows(episodes_out, std::string(to_string(strategy)) + '\t', report);
        reports[strategy] = std::move(report);
    }

    auto out = detail::open_report(report_dir + "/strategy_table.tsv");
    out << "game";
    for (GoalStrategy s : strategies)
        out << '\t' << to_string(s) << "_avg\t" << to_string(s) << "_stdev\t" << to_string(s)
            << "_best";
    out << '\n';
    for (const auto& spec : specs) {
        out << spec.name;
        for (GoalStrategy s : strategies) {
            const auto& agg = reports.at(s).per_game.at(spec.name);
            out << '\t' << detail::fmt(agg.avg) << '\t' << detail::fmt(agg.stdev) << '\t'
                << agg.best;
        }
        out << '\n';
    }
    out << "normalized_average";
    for (GoalStrategy s : strategies)
        out << '\t' << detail::fmt(reports.at(s).normalized_average) << "\t-\t-";
    out << '\n';
    return reports;
}

struct LambdaTableResult {
    std::map<int, EvalReport> pooled;  // lambda permille -> episodes pooled over strategies
    std::map<int, std::map<GoalStrategy, double>> per_strategy;  // normalized average per cell
};

// Objective-weight comparison at one alpha: per lambda, every strategy's
// final checkpoint contributes seeds-many episodes per game to one pool.
inline LambdaTableResult run_lambda_table(const Vocabulary& vocab,
                                          const std::vector<GameSpec>& specs,
                                          const std::vector<uint64_t>& seeds,
                                          const std::vector<GoalStrategy>& strategies,
                                          const std::vector<double>& lambdas, double alpha,
                                          const std::string& checkpoint_root,
                                          const std::string& report_dir, int jobs) {
    LambdaTableResult result;
    auto episodes_out = detail::open_report(report_dir + "/lambda_episodes.tsv");
    episodes_out << "lambda\tstrategy\tgame\tseed\tscore\tmax_score\tsteps\treason\n";

    DecodePolicy policy;
    policy.mode = DecodeMode::PredictedTilt;
    policy.alpha = alpha;
    for (double lambda : lambdas) {
        const int permille = int(std::lround(lambda * 1000));
        std::vector<EvalEpisode> pool;
        for (GoalStrategy strategy : strategies) {
            const std::string dir = checkpoint_root + "/" + cell_tag(strategy, lambda);
            Model model = load_model_checkpoint(final_checkpoint(dir).path, vocab);
            EvalReport report = evaluate_model(model, vocab, specs, seeds, policy, jobs);
            detail::write_episode_rows(
                episodes_out,
                detail::fmt_alpha(lambda) + '\t' + std::string(to_string(strategy)) + '\t', report);
            result.per_strategy[permille][strategy] = report.normalized_average;
            pool.insert(pool.end(), report.episodes.begin(), report.episodes.end());
        }
        result.pooled.emplace(permille, aggregate_report(std::move(pool), specs));
    }

    auto out = detail::open_report(report_dir + "/lambda_table.tsv");
    out << "lambda\tgame\tavg\tstdev\tbest\tmax_score\tnormalized\n";
    for (double lambda : lambdas) {
        const auto& report = result.pooled.at(int(std::lround(lambda * 1000)));
        for (const auto& [game, agg] : report.per_game)
            out << detail::fmt_alpha(lambda) << '\t' << game << '\t' << detail::fmt(agg.avg) << '\t'
                << detail::fmt(agg.stdev) << '\t' << agg.best << '\t' << agg.max_score << '\t'
                << detail::fmt(agg.avg / double(agg.max_score)) << '\n';
        out << detail::fmt_alpha(lambda) << "\t__all__\t-\t-\t-\t-\t"
            << detail::fmt(report.normalized_average) << '\n';
    }
    return result;
}

struct BaselineResult {
    EvalReport random;
    EvalReport imitation;
};

// Random acts uniformly over candidates; the imitation checkpoint is scored
// with optimal-GC conditioning, whose goal sequence matches its training
// tokens on the walkthrough path.
inline BaselineResult run_baselines(const Vocabulary& vocab, const std::vector<GameSpec>& specs,
                                    const std::vector<uint64_t>& seeds,
                                    const std::string& imitation_dir, const std::string& report_dir,
                                    int jobs) {
    BaselineResult result;
    result.random = evaluate_parallel(
        specs, seeds, jobs, [](const GameSpec& spec, uint64_t seed) { return rollout_random(spec, seed); });

    Model il = load_model_checkpoint(final_checkpoint(imitation_dir).path, vocab);
    DecodePolicy policy;
    policy.mode = DecodeMode::OptimalManual;
    policy.goal = 100;
    result.imitation = evaluate_model(il, vocab, specs, seeds, policy, jobs);

    auto episodes_out = detail::open_report(report_dir + "/baseline_episodes.tsv");
    episodes_out << "policy\tgame\tseed\tscore\tmax_score\tsteps\treason\n";
    detail::write_episode_rows(episodes_out, "random\t", result.random);
    detail::write_episode_rows(episodes_out, "imitation\t", result.imitation);

    auto out = detail::open_report(report_dir + "/baselines.tsv");
    out << "policy\tgame\tavg\tstdev\tbest\tmax_score\tnormalized\n";
    for (const auto& [name, report] :
         std::vector<std::pair<std::string, const EvalReport*>>{{"random", &result.random},
                                                                {"imitation", &result.imitation}}) {
        for (const auto& [game, agg] : report->per_game)
            out << name << '\t' << game << '\t' << detail::fmt(agg.avg) << '\t'
                << detail::fmt(agg.stdev) << '\t' << agg.best << '\t' << agg.max_score << '\t'
                << detail::fmt(agg.avg / double(agg.max_score)) << '\n';
        out << name << "\t__all__\t-\t-\t-\t-\t" << detail::fmt(report->normalized_average)
            << '\n';
    }
    return result;
}

}  // namespace ldt
