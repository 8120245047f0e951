#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ldt/codec.hpp"
#include "ldt/decode.hpp"
#include "ldt/engine.hpp"
#include "ldt/goals.hpp"
#include "ldt/trajectory.hpp"

namespace ldt {

enum class EpisodeEnd { GameEnd, InvalidSequence, StepCap };

inline const char* to_string(EpisodeEnd reason) {
    switch (reason) {
        case EpisodeEnd::GameEnd: return "game_end";
        case EpisodeEnd::InvalidSequence: return "invalid_sequence";
        case EpisodeEnd::StepCap: return "step_cap";
    }
    throw std::invalid_argument("unknown episode end");
}

inline EpisodeEnd episode_end_from_string(const std::string& text) {
    if (text == "game_end") return EpisodeEnd::GameEnd;
    if (text == "invalid_sequence") return EpisodeEnd::InvalidSequence;
    if (text == "step_cap") return EpisodeEnd::StepCap;
    throw std::invalid_argument("unknown episode end: " + text);
}

struct StepChoice {
    int goal = 0;
    std::string action;
};

struct RolloutResult {
    Trajectory trajectory;                    // completed steps only
    std::vector<int> goals;                   // goal fed at each completed step
    std::vector<std::vector<int>> contexts;   // model rollouts: context per decode call
    int score = 0;
    int steps = 0;
    EpisodeEnd reason = EpisodeEnd::InvalidSequence;
};

// Engine loop shared by every policy. choose(so_far, t) sees the partial
// trajectory whose step t holds the current observation and no action yet;
// nullopt terminates the episode as an invalid sequence.
template <typename ChooseFn>
RolloutResult run_episode(const GameSpec& spec, uint64_t seed, ChooseFn&& choose) {
    Engine engine(spec, seed);
    RolloutResult out;
    Trajectory& traj = out.trajectory;
    traj.game = spec.name;
    traj.seed = seed;
    traj.steps.push_back(Step{engine.observation(), "", 0});

    while (true) {
        const int t = int(traj.steps.size()) - 1;
        std::optional<StepChoice> choice = choose(std::as_const(traj), t);
        if (!choice) {
            out.reason = EpisodeEnd::InvalidSequence;
            traj.steps.pop_back();
            break;
        }
        StepOutcome outcome = engine.step(choice->action);
        traj.steps[size_t(t)].action = choice->action;
        traj.steps[size_t(t)].reward = outcome.reward;
        out.goals.push_back(choice->goal);
        if (engine.done()) {
            out.reason = engine.termination() == Termination::GameEnd ? EpisodeEnd::GameEnd
                                                                      : EpisodeEnd::StepCap;
            break;
        }
        traj.steps.push_back(Step{outcome.observation, "", 0});
    }

    out.score = engine.score();
    out.steps = int(out.goals.size());
    traj.final_score = out.score;
    traj.terminal = engine.termination() == Termination::GameEnd;
    return out;
}

// Closed-loop model episode: the serialized context grows exactly as in
// training (full o_0 and o_t, placeholders between past goal/action groups).
// A decode failure or a generated action outside the current candidates
// terminates the episode as an invalid sequence; under optimal_manual the
// running goal fraction decrements by each observed reward over max score.
inline RolloutResult rollout_model(const Model& model, const Vocabulary& vocab,
                                   const GameSpec& spec, uint64_t seed,
                                   const DecodePolicy& policy) {
    policy.validate();
    std::vector<int> chosen;
    std::vector<std::vector<int>> contexts;
    double running = double(policy.goal) / 100.0;
    int applied = 0;

    auto choose = [&](const Trajectory& so_far, int t) -> std::optional<StepChoice> {
        auto context = encode_input_segments(vocab, build_input_segments(so_far, t, chosen),
                                             model.config().max_input_tokens);
        contexts.push_back(context);

        DecodePolicy step_policy = policy;
        if (policy.mode == DecodeMode::OptimalManual) {
            while (applied < t) {
                running = optimal_gc_update(running, so_far.steps[size_t(applied)].reward,
                                            spec.max_score);
                ++applied;
            }
            step_policy.goal = goal_percent_from_fraction(running, spec.max_score);
        }

        const auto& candidates = so_far.steps[size_t(t)].observation.candidate_actions;
        auto decoded = decode_step(model, vocab, context, step_policy, candidates);
        if (!decoded.ok) return std::nullopt;
        if (std::find(candidates.begin(), candidates.end(), decoded.action) == candidates.end())
            return std::nullopt;
        chosen.push_back(decoded.goal);
        return StepChoice{decoded.goal, decoded.action};
    };

    RolloutResult out = run_episode(spec, seed, choose);
    out.contexts = std::move(contexts);
    return out;
}

// Uniform-random-over-candidates baseline; always emits a valid action, so
// episodes end only at game end or the step cap.
inline RolloutResult rollout_random(const GameSpec& spec, uint64_t seed) {
    Rng rng(derive_seed(seed, "random-policy", {fnv1a(spec.name)}));
    return run_episode(spec, seed, [&](const Trajectory& so_far, int t) {
        const auto& candidates = so_far.steps[size_t(t)].observation.candidate_actions;
        return StepChoice{0, candidates[rng.next_below(candidates.size())]};
    });
}

}  // namespace ldt
