#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldt {

// The four ways a trajectory's reward sequence is turned into per-step
// goal-condition values.
enum class GoalStrategy { RTG, ImR, FinS, AvgRTG };

inline const char* to_string(GoalStrategy s) {
    switch (s) {
        case GoalStrategy::RTG: return "RTG";
        case GoalStrategy::ImR: return "ImR";
        case GoalStrategy::FinS: return "FinS";
        case GoalStrategy::AvgRTG: return "AvgRTG";
    }
    return "?";
}

inline GoalStrategy goal_strategy_from_string(const std::string& s) {
    if (s == "RTG") return GoalStrategy::RTG;
    if (s == "ImR") return GoalStrategy::ImR;
    if (s == "FinS") return GoalStrategy::FinS;
    if (s == "AvgRTG") return GoalStrategy::AvgRTG;
    throw std::invalid_argument("unknown goal strategy '" + s +
                                "' (expected one of RTG, ImR, FinS, AvgRTG)");
}

// Exact rational goal value. RTG/ImR/FinS are integer point totals
// (den == 1); AvgRTG is points per remaining step. Keeping the value exact
// makes the percentage truncation below exact as well.
struct GoalValue {
    int64_t num = 0;
    int64_t den = 1;

    GoalValue() = default;
    GoalValue(int64_t n, int64_t d = 1) : num(n), den(d) {
        if (den <= 0) throw std::invalid_argument("GoalValue denominator must be positive");
    }

    double as_double() const { return double(num) / double(den); }
};

// Per-step goal values for steps 0..T. `rewards` holds r_0..r_T.
inline std::vector<GoalValue> compute_goals(const std::vector<int>& rewards, GoalStrategy strategy) {
    if (rewards.empty()) throw std::invalid_argument("compute_goals: empty reward list");
    const size_t n = rewards.size();
    std::vector<GoalValue> goals(n);
    switch (strategy) {
        case GoalStrategy::RTG: {
            int64_t suffix = 0;
            for (size_t i = n; i-- > 0;) {
                suffix += rewards[i];
                goals[i] = GoalValue(suffix);
            }
            break;
        }
        case GoalStrategy::ImR: {
            for (size_t i = 0; i < n; ++i) goals[i] = GoalValue(rewards[i]);
            break;
        }
        case GoalStrategy::FinS: {
            int64_t total = 0;
            for (int r : rewards) total += r;
            for (size_t i = 0; i < n; ++i) goals[i] = GoalValue(total);
            break;
        }
        case GoalStrategy::AvgRTG: {
            // return-to-go divided by the remaining step count, counting the
            // current step (so the final step divides by 1)
            int64_t suffix = 0;
            for (size_t i = n; i-- > 0;) {
                suffix += rewards[i];
                goals[i] = GoalValue(suffix, int64_t(n - i));
            }
            break;
        }
    }
    return goals;
}

// Truncation toward zero of 100 * raw / max_score.
// raw outside [0, max_score] signals a miscomputed goal and is rejected.
inline int normalize_goal(const GoalValue& raw, int max_score) {
    if (max_score <= 0) throw std::invalid_argument("normalize_goal: max_score must be positive");
    if (raw.num < 0)
        throw std::domain_error("normalize_goal: negative goal value " + std::to_string(raw.num) +
                                "/" + std::to_string(raw.den));
    if (raw.num > int64_t(max_score) * raw.den)
        throw std::domain_error("normalize_goal: goal value " + std::to_string(raw.num) + "/" +
                                std::to_string(raw.den) + " exceeds max_score " +
                                std::to_string(max_score));
    // exact: num and den bounded well below 2^63 / 100
    int64_t q = (100 * raw.num) / (raw.den * int64_t(max_score));
    return int(std::clamp<int64_t>(q, 0, 100));
}

// Running goal fraction for manually-conditioned decoding: subtract the
// observed reward share, floored at zero.
inline double optimal_gc_update(double g, int reward, int max_score) {
    if (max_score <= 0) throw std::invalid_argument("optimal_gc_update: max_score must be positive");
    return std::max(0.0, g - double(reward) / double(max_score));
}

// Render a goal fraction in [0,1] as the integer percentage actually written
// into serialized text. The 1e-9 nudge absorbs accumulated floating-point
// error from repeated optimal_gc_update subtractions; reachable true values
// are at least 1/max_score away from the next integer, so the nudge never
// crosses a real boundary.
inline int goal_percent_from_fraction(double g, int max_score) {
    if (max_score <= 0)
        throw std::invalid_argument("goal_percent_from_fraction: max_score must be positive");
    if (g < 0.0) g = 0.0;
    if (g > 1.0) g = 1.0;
    return int(std::clamp(100.0 * g + 1e-9, 0.0, 100.0));
}

}  // namespace ldt
