#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldt/common.hpp"
#include "ldt/engine.hpp"
#include "ldt/trajectory.hpp"

namespace ldt {

struct DataConfig {
    std::vector<int> fractions;  // walkthrough percentages, each in [0, 100)
    int repeats = 1;
    std::vector<uint64_t> seeds;
    int random_steps = 100;      // cap on the random phase, matching the protocol
};

struct DatasetManifest {
    std::vector<std::string> games;
    DataConfig config;
    uint64_t master_seed = 0;
    size_t trajectory_count = 0;
    std::map<std::string, size_t> per_game;

    size_t expected_per_game() const {
        return config.seeds.size() * (config.fractions.size() * size_t(config.repeats) + 1);
    }
};

// Walkthrough prefix for the first ⌊fraction/100·L⌋ steps, then uniform
// random candidates until termination, an empty candidate list, or
// random_steps random actions. The engine seed is the rng's first draw, so
// every (seed, fraction, repeat) cell sees its own stochastic dynamics.
inline Trajectory generate_perturbed(const GameSpec& spec, uint64_t dataset_seed, int fraction,
                                     int random_steps, Rng& rng) {
    if (fraction < 0 || fraction >= 100)
        throw std::invalid_argument("generate_perturbed: fraction must be in [0, 100)");
    if (random_steps < 0) throw std::invalid_argument("generate_perturbed: random_steps must be >= 0");

    Engine engine(spec, rng.next_u64());
    Trajectory traj;
    traj.game = spec.name;
    traj.seed = dataset_seed;
    traj.walkthrough_fraction = fraction;

    const int prefix = fraction * int(spec.walkthrough.size()) / 100;
    for (int i = 0; i < prefix && !engine.done(); ++i) {
        Observation obs = engine.observation();
        const std::string& action = spec.walkthrough[size_t(i)];
        auto out = engine.step(action);
        traj.steps.push_back({std::move(obs), action, out.reward});
    }
    for (int j = 0; j < random_steps && !engine.done(); ++j) {
        Observation obs = engine.observation();
        const auto& candidates = obs.candidate_actions;
        if (candidates.empty()) break;
        std::string action = candidates[rng.next_below(candidates.size())];
        auto out = engine.step(action);
        traj.steps.push_back({std::move(obs), action, out.reward});
    }
    traj.final_score = engine.score();
    traj.terminal = engine.done();
    return traj;
}

// The one expert trajectory per (game, seed): the full walkthrough from the
// game's default engine seed, recorded as fraction 100.
inline Trajectory generate_walkthrough(const GameSpec& spec, uint64_t dataset_seed) {
    Engine engine(spec, spec.default_seed);
    Trajectory traj;
    traj.game = spec.name;
    traj.seed = dataset_seed;
    traj.walkthrough_fraction = 100;
    for (const auto& action : spec.walkthrough) {
        Observation obs = engine.observation();
        auto out = engine.step(action);
        traj.steps.push_back({std::move(obs), action, out.reward});
    }
    traj.final_score = engine.score();
    traj.terminal = engine.done();
    return traj;
}

// Deterministic nested order (game, seed, fraction, repeat; walkthrough last
// within its seed) — the persisted files are a pure function of
// (specs, config, master_seed).
inline std::vector<Trajectory> generate_game_trajectories(const GameSpec& spec, const DataConfig& config,
                                                          uint64_t master_seed) {
    std::vector<Trajectory> out;
    for (uint64_t seed : config.seeds) {
        for (int fraction : config.fractions)
            for (int repeat = 0; repeat < config.repeats; ++repeat) {
                Rng rng(derive_seed(master_seed, "trajectory",
                                    {fnv1a(spec.name), seed, uint64_t(fraction), uint64_t(repeat)}));
                out.push_back(generate_perturbed(spec, seed, fraction, config.random_steps, rng));
            }
        out.push_back(generate_walkthrough(spec, seed));
    }
    return out;
}

inline DatasetManifest generate_dataset(const std::vector<GameSpec>& specs, const DataConfig& config,
                                        uint64_t master_seed, const std::string& out_dir) {
    if (config.fractions.empty()) throw std::invalid_argument("generate_dataset: fractions must be non-empty");
    if (config.repeats < 1) throw std::invalid_argument("generate_dataset: repeats must be >= 1");
    if (config.seeds.empty()) throw std::invalid_argument("generate_dataset: seeds must be non-empty");

    std::filesystem::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.config = config;
    manifest.master_seed = master_seed;
    for (const auto& spec : specs) {
        auto trajectories = generate_game_trajectories(spec, config, master_seed);
        write_trajectories(out_dir + "/" + spec.name + ".jsonl", trajectories);
        manifest.games.push_back(spec.name);
        manifest.per_game[spec.name] = trajectories.size();
        manifest.trajectory_count += trajectories.size();
    }

    ordered_json j{{"games", manifest.games},
                   {"fractions", config.fractions},
                   {"repeats", config.repeats},
                   {"seeds", config.seeds},
                   {"random_steps", config.random_steps},
                   {"master_seed", master_seed},
                   {"trajectory_count", manifest.trajectory_count},
                   {"per_game", manifest.per_game}};
    std::ofstream out(out_dir + "/manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + out_dir + "/manifest.json");
    out << j.dump(2) << "\n";
    return manifest;
}

struct GameStats {
    // normalized score mass over bins 0..10: bin i<10 covers [i/10,(i+1)/10),
    // bin 10 is exactly 1.0
    std::vector<double> score_proportions = std::vector<double>(11, 0.0);
    std::map<size_t, double> length_proportions;
};

inline std::map<std::string, GameStats> dataset_stats(const std::vector<Trajectory>& trajectories,
                                                      const std::map<std::string, int>& max_scores) {
    if (trajectories.empty()) throw std::invalid_argument("dataset_stats: empty store");
    std::map<std::string, GameStats> stats;
    std::map<std::string, size_t> counts;
    for (const auto& traj : trajectories) {
        double normalized = double(traj.final_score) / double(max_scores.at(traj.game));
        size_t bin = normalized >= 1.0 ? 10 : size_t(normalized * 10.0);
        auto& s = stats[traj.game];
        s.score_proportions[bin] += 1.0;
        s.length_proportions[traj.steps.size()] += 1.0;
        counts[traj.game] += 1;
    }
    for (auto& [game, s] : stats) {
        double n = double(counts[game]);
        for (auto& p : s.score_proportions) p /= n;
        for (auto& [len, p] : s.length_proportions) p /= n;
    }
    return stats;
}

inline ordered_json stats_to_json(const std::map<std::string, GameStats>& stats) {
    ordered_json j = ordered_json::object();
    for (const auto& [game, s] : stats) {
        ordered_json lengths = ordered_json::object();
        for (const auto& [len, p] : s.length_proportions) lengths[std::to_string(len)] = p;
        j[game] = ordered_json{{"score_proportions", s.score_proportions},
                               {"length_proportions", std::move(lengths)}};
    }
    return j;
}

}  // namespace ldt
