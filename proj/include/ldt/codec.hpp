#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldt/goals.hpp"
#include "ldt/trajectory.hpp"
#include "ldt/vocab.hpp"

namespace ldt {

struct SerializedPair {
    std::string input_text;
    std::string output_text;
    int split_index = 0;
    std::string game;
};

inline std::string serialize_observation(const Observation& obs) {
    return "Actions: " + join(obs.candidate_actions, ", ") + " </s></s> State: " + obs.message +
           " </s></s> Description: " + obs.description + " </s></s> Inventory: " + obs.inventory +
           " </s></s>";
}

inline std::string render_goal_text(int g) {
    if (g < 0 || g > 100) throw std::invalid_argument("goal percentage out of [0,100]");
    return "GC: " + std::to_string(g) + " </s></s>";
}

inline std::string render_action_text(const std::string& action) {
    return "Action: " + action + " </s></s>";
}

inline std::vector<int> normalized_goals(const Trajectory& traj, GoalStrategy strategy, int max_score) {
    auto raw = compute_goals(traj.rewards(), strategy);
    std::vector<int> out;
    out.reserve(raw.size());
    for (const auto& g : raw) out.push_back(normalize_goal(g, max_score));
    return out;
}

// The input sequence [o_0, g_0, a_0, <STATE>, ..., g_{t-1}, a_{t-1}, o_t] as
// structural segments: placeholder tokens sit between consecutive groups, so
// they are re-derived automatically when old groups are dropped for budget.
struct InputSegments {
    std::string head;                 // serialize_observation(o_0)
    std::vector<std::string> groups;  // "GC: g </s></s> Action: a </s></s>" per past step
    std::string tail;                 // serialize_observation(o_t); empty when t = 0
};

inline std::string input_segments_text(const InputSegments& seg) {
    std::string text = seg.head;
    for (size_t i = 0; i < seg.groups.size(); ++i) {
        text += " " + seg.groups[i];
        if (i + 1 < seg.groups.size()) text += " <STATE>";
    }
    if (!seg.tail.empty()) text += " " + seg.tail;
    return text;
}

// Token encoding under the model's input cap: the oldest (g, a) groups after
// o_0 are dropped first; o_0 and o_t always survive.
inline std::vector<int> encode_input_segments(const Vocabulary& vocab, const InputSegments& seg,
                                              int max_input_tokens) {
    std::vector<std::vector<int>> group_tokens;
    for (const auto& g : seg.groups) group_tokens.push_back(vocab.encode(g));
    std::vector<int> head = vocab.encode(seg.head);
    std::vector<int> tail = seg.tail.empty() ? std::vector<int>{} : vocab.encode(seg.tail);

    size_t first_group = 0;
    auto total = [&] {
        size_t n = head.size() + tail.size();
        size_t kept = group_tokens.size() - first_group;
        for (size_t i = first_group; i < group_tokens.size(); ++i) n += group_tokens[i].size();
        if (kept > 1) n += kept - 1;  // placeholders between surviving groups
        return n;
    };
    while (total() > size_t(max_input_tokens) && first_group < group_tokens.size()) ++first_group;
    if (total() > size_t(max_input_tokens))
        throw std::length_error("serialized input exceeds the model cap even with all history dropped");

    std::vector<int> out = head;
    for (size_t i = first_group; i < group_tokens.size(); ++i) {
        if (i > first_group) out.push_back(Vocabulary::kState);
        out.insert(out.end(), group_tokens[i].begin(), group_tokens[i].end());
    }
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

inline InputSegments build_input_segments(const Trajectory& traj, int t, const std::vector<int>& goals) {
    InputSegments seg;
    seg.head = serialize_observation(traj.steps[0].observation);
    for (int i = 0; i < t; ++i)
        seg.groups.push_back(render_goal_text(goals[size_t(i)]) + " " + render_action_text(traj.steps[size_t(i)].action));
    if (t > 0) seg.tail = serialize_observation(traj.steps[size_t(t)].observation);
    return seg;
}

// Split a trajectory at step t: input covers history through o_t, output is
// [g_t, a_t, o_{t+1}], with the next observation omitted on the final step.
inline SerializedPair serialize_pair(const Trajectory& traj, int t, GoalStrategy strategy, int max_score) {
    const int n = int(traj.steps.size());
    if (n == 0) throw std::invalid_argument("serialize_pair: empty trajectory");
    if (t < 0 || t >= n)
        throw std::out_of_range("serialize_pair: split index " + std::to_string(t) +
                                " outside [0, " + std::to_string(n - 1) + "]");
    const auto goals = normalized_goals(traj, strategy, max_score);

    SerializedPair pair;
    pair.split_index = t;
    pair.game = traj.game;
    pair.input_text = input_segments_text(build_input_segments(traj, t, goals));
    pair.output_text = render_goal_text(goals[size_t(t)]) + " " + render_action_text(traj.steps[size_t(t)].action);
    if (t + 1 < n) pair.output_text += " " + serialize_observation(traj.steps[size_t(t) + 1].observation);
    return pair;
}

struct TokenPair {
    std::vector<int> input;
    std::vector<int> output;
    int split_index = 0;
};

inline TokenPair encode_pair(const Vocabulary& vocab, const Trajectory& traj, int t, GoalStrategy strategy,
                             int max_score, int max_input_tokens) {
    const auto goals = normalized_goals(traj, strategy, max_score);
    SerializedPair pair = serialize_pair(traj, t, strategy, max_score);
    TokenPair tokens;
    tokens.split_index = t;
    tokens.input = encode_input_segments(vocab, build_input_segments(traj, t, goals), max_input_tokens);
    tokens.output = vocab.encode(pair.output_text);
    return tokens;
}

struct ParsedOutput {
    std::optional<int> goal;
    std::optional<std::string> action;
    std::optional<std::string> predicted_observation;
};

namespace detail {

inline std::optional<int> parse_goal_word(const std::string& word) {
    if (word.empty() || word.size() > 3) return std::nullopt;
    for (char c : word)
        if (c < '0' || c > '9') return std::nullopt;
    if (word.size() > 1 && word[0] == '0') return std::nullopt;  // no vocab surface has leading zeros
    int value = std::stoi(word);
    if (value > 100) return std::nullopt;
    return value;
}

}  // namespace detail

// Lenient template parse: each field is extracted only if its marker block is
// well-formed at the cursor; anything else leaves the field absent. Absence
// (not an exception) is the invalid-sequence signal.
inline ParsedOutput parse_output(const std::string& text) {
    const auto words = split_words(text);
    ParsedOutput out;
    size_t cur = 0;
    if (words.size() >= 3 && words[0] == "GC:") {
        auto value = detail::parse_goal_word(words[1]);
        if (value && words[2] == "</s></s>") {
            out.goal = value;
            cur = 3;
        }
    }
    if (cur < words.size() && words[cur] == "Action:") {
        size_t delim = cur + 1;
        while (delim < words.size() && words[delim] != "</s></s>") ++delim;
        if (delim < words.size() && delim > cur + 1) {
            out.action = join({words.begin() + long(cur) + 1, words.begin() + long(delim)}, " ");
            cur = delim + 1;
        }
    }
    if (out.action && cur < words.size())
        out.predicted_observation = join({words.begin() + long(cur), words.end()}, " ");
    return out;
}

// Span boundary for the two-term loss: tokens through the second delimiter
// form the [g a] span, the rest is the o span (possibly empty).
inline size_t goal_action_span_length(const std::vector<int>& output_tokens) {
    int delims = 0;
    for (size_t i = 0; i < output_tokens.size(); ++i) {
        if (output_tokens[i] == Vocabulary::kDelim && ++delims == 2) return i + 1;
    }
    throw std::invalid_argument("output tokens lack the goal/action delimiters");
}

}  // namespace ldt
