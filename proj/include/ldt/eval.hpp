#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldt/rollout.hpp"

namespace ldt {

struct EvalEpisode {
    std::string game;
    uint64_t seed = 0;
    RolloutResult result;
};

struct GameAggregate {
    double avg = 0;
    double stdev = 0;  // population standard deviation over seeds
    int best = 0;
    int max_score = 0;
};

struct EvalReport {
    std::vector<EvalEpisode> episodes;
    std::map<std::string, GameAggregate> per_game;
    double normalized_average = 0;  // mean over games of avg / max_score
};

inline GameAggregate aggregate_scores(const std::vector<int>& scores, int max_score) {
    if (scores.empty()) throw std::invalid_argument("aggregate_scores: no scores");
    if (max_score <= 0) throw std::invalid_argument("aggregate_scores: max_score must be positive");
    GameAggregate out;
    out.max_score = max_score;
    double sum = 0;
    for (int s : scores) {
        sum += s;
        out.best = std::max(out.best, s);
    }
    out.avg = sum / double(scores.size());
    double var = 0;
    for (int s : scores) var += (s - out.avg) * (s - out.avg);
    out.stdev = std::sqrt(var / double(scores.size()));
    return out;
}

// Deterministic reduce over per-episode records; recomputable from persisted
// traces so reports can be audited.
inline EvalReport aggregate_report(std::vector<EvalEpisode> episodes,
                                   const std::vector<GameSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("aggregate_report: no games");
    EvalReport report;
    report.episodes = std::move(episodes);
    double normalized_sum = 0;
    for (const auto& spec : specs) {
        std::vector<int> scores;
        for (const auto& episode : report.episodes)
            if (episode.game == spec.name) scores.push_back(episode.result.score);
        if (scores.empty())
            throw std::invalid_argument("aggregate_report: no episodes for game " + spec.name);
        GameAggregate agg = aggregate_scores(scores, spec.max_score);
        normalized_sum += agg.avg / double(agg.max_score);
        report.per_game[spec.name] = agg;
    }
    report.normalized_average = normalized_sum / double(specs.size());
    return report;
}

// One rollout per (game, seed); fn(spec, seed) supplies the episode so the
// same aggregation serves model policies and baselines.
template <typename RolloutFn>
EvalReport evaluate_with(const std::vector<GameSpec>& specs, const std::vector<uint64_t>& seeds,
                         RolloutFn&& fn) {
    if (seeds.empty()) throw std::invalid_argument("evaluate: seeds must be non-empty");
    std::vector<EvalEpisode> episodes;
    episodes.reserve(specs.size() * seeds.size());
    for (const auto& spec : specs)
        for (uint64_t seed : seeds) episodes.push_back({spec.name, seed, fn(spec, seed)});
    return aggregate_report(std::move(episodes), specs);
}

inline EvalReport evaluate(const Model& model, const Vocabulary& vocab,
                           const std::vector<GameSpec>& specs, const std::vector<uint64_t>& seeds,
                           const DecodePolicy& policy) {
    return evaluate_with(specs, seeds, [&](const GameSpec& spec, uint64_t seed) {
        return rollout_model(model, vocab, spec, seed, policy);
    });
}

inline EvalReport evaluate_random(const std::vector<GameSpec>& specs,
                                  const std::vector<uint64_t>& seeds) {
    return evaluate_with(specs, seeds,
                         [](const GameSpec& spec, uint64_t seed) { return rollout_random(spec, seed); });
}

}  // namespace ldt
