#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldt/common.hpp"
#include "ldt/game_spec.hpp"

namespace ldt {

struct Observation {
    std::vector<std::string> candidate_actions;
    std::string message;
    std::string description;
    std::string inventory;

    bool operator==(const Observation&) const = default;
};

enum class Termination { Live, GameEnd, StepCap };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::Live: return "live";
        case Termination::GameEnd: return "game_end";
        case Termination::StepCap: return "step_cap";
    }
    return "?";
}

struct StepOutcome {
    Observation observation;
    int reward = 0;
    bool done = false;
};

// Deterministic-by-seed interpreter for one GameSpec episode. Movement rules
// are synthesized from room exits and sit after the explicit rules, so
// first-match dispatch and candidate order agree and explicit rules can
// shadow a move (hazards).
class Engine {
  public:
    static constexpr const char* kNothingHappens = "nothing happens";

    Engine(const GameSpec& spec, uint64_t seed) : spec_(&spec) {
        for (const auto& room : spec.rooms)
            for (const auto& exit : room.exits) {
                ActionRule rule;
                rule.pattern = "go " + exit.direction;
                rule.preconditions.push_back({PredKind::At, room.id});
                rule.effects.push_back({EffectKind::Goto, exit.target});
                rule.message = "You go " + exit.direction + ".";
                rule.one_shot_reward = false;
                move_rules_.push_back(std::move(rule));
            }
        reset(seed);
    }

    void reset(uint64_t seed) {
        rng_ = Rng(derive_seed(seed, "engine", {fnv1a(spec_->name)}));
        location_ = spec_->start_room;
        item_location_.clear();
        for (const auto& item : spec_->items) item_location_[item.id] = item.initial_location;
        flags_.clear();
        fired_.assign(spec_->rules.size(), false);
        score_ = 0;
        step_count_ = 0;
        done_ = false;
        termination_ = Termination::Live;
        observation_ = make_observation(spec_->intro);
    }

    const GameSpec& spec() const { return *spec_; }
    const Observation& observation() const { return observation_; }

    // Logical-state fingerprint (step counter excluded): two engines with the
    // same key produce identical futures under identical actions and rng.
    std::string state_key() const {
        std::string key = location_ + "/";
        for (const auto& [item, where] : item_location_) key += item + "=" + where + ",";
        key += "/";
        for (const auto& flag : flags_) key += flag + ",";
        key += "/";
        for (bool fired : fired_) key += fired ? '1' : '0';
        return key + (done_ ? "/done" : "/live");
    }
    int score() const { return score_; }
    int step_count() const { return step_count_; }
    bool done() const { return done_; }
    Termination termination() const { return termination_; }

    StepOutcome step(const std::string& raw_action) {
        if (done_) throw std::logic_error("engine: step on a finished episode");
        const std::string action = normalize_spaces(raw_action);
        ++step_count_;

        int reward = 0;
        std::string message = kNothingHappens;
        if (const MatchedRule match = find_rule(action); match.rule != nullptr) {
            const StochasticRule* chance = spec_->stochastic_for(match.rule->pattern);
            const bool failed = chance != nullptr && rng_.next_double() < chance->failure_probability;
            if (failed) {
                message = chance->failure_message;
            } else {
                message = match.rule->message;
                if (match.rule->reward != 0 && (!match.rule->one_shot_reward || !fired_[match.explicit_index])) {
                    reward = match.rule->reward;
                    if (match.explicit_index >= 0) fired_[match.explicit_index] = true;
                }
                for (const auto& effect : match.rule->effects) apply(effect);
            }
        }

        score_ += reward;
        if (!done_ && step_count_ >= spec_->step_cap) {
            done_ = true;
            termination_ = Termination::StepCap;
        }
        observation_ = make_observation(message);
        return {observation_, reward, done_};
    }

  private:
    struct MatchedRule {
        const ActionRule* rule = nullptr;
        int explicit_index = -1;  // -1 for synthesized move rules
    };

    bool holds(const Predicate& p) const {
        switch (p.kind) {
            case PredKind::At: return location_ == p.arg;
            case PredKind::Has: return item_location_.at(p.arg) == "inventory";
            case PredKind::HasNot: return item_location_.at(p.arg) != "inventory";
            case PredKind::Flag: return flags_.count(p.arg) != 0;
            case PredKind::FlagNot: return flags_.count(p.arg) == 0;
        }
        return false;
    }

    bool available(const ActionRule& rule) const {
        return std::all_of(rule.preconditions.begin(), rule.preconditions.end(),
                           [&](const Predicate& p) { return holds(p); });
    }

    MatchedRule find_rule(const std::string& action) const {
        for (size_t i = 0; i < spec_->rules.size(); ++i)
            if (spec_->rules[i].pattern == action && available(spec_->rules[i]))
                return {&spec_->rules[i], static_cast<int>(i)};
        for (const auto& rule : move_rules_)
            if (rule.pattern == action && available(rule)) return {&rule, -1};
        return {};
    }

    void apply(const Effect& effect) {
        switch (effect.kind) {
            case EffectKind::Goto: location_ = effect.arg; break;
            case EffectKind::Take: item_location_[effect.arg] = "inventory"; break;
            case EffectKind::Drop: item_location_[effect.arg] = location_; break;
            case EffectKind::SetFlag: flags_.insert(effect.arg); break;
            case EffectKind::ClearFlag: flags_.erase(effect.arg); break;
            case EffectKind::End:
                done_ = true;
                termination_ = Termination::GameEnd;
                break;
        }
    }

    Observation make_observation(const std::string& message) const {
        Observation obs;
        obs.message = message;
        obs.description = spec_->find_room(location_)->description;
        std::vector<std::string> held;
        for (const auto& item : spec_->items)
            if (item_location_.at(item.id) == "inventory") held.push_back(item.name);
        // "nothing" keeps every emitted observation text single-spaced, which the
        // word-level codec round-trips exactly.
        obs.inventory = held.empty() ? "nothing" : join(held, ", ");
        for (const auto& rule : spec_->rules)
            if (available(rule)) push_candidate(obs.candidate_actions, rule.pattern);
        for (const auto& rule : move_rules_)
            if (available(rule)) push_candidate(obs.candidate_actions, rule.pattern);
        return obs;
    }

    static void push_candidate(std::vector<std::string>& list, const std::string& pattern) {
        if (std::find(list.begin(), list.end(), pattern) == list.end()) list.push_back(pattern);
    }

    const GameSpec* spec_;
    std::vector<ActionRule> move_rules_;
    Rng rng_{0};
    std::string location_;
    std::map<std::string, std::string> item_location_;
    std::set<std::string> flags_;
    std::vector<bool> fired_;
    int score_ = 0;
    int step_count_ = 0;
    bool done_ = false;
    Termination termination_ = Termination::Live;
    Observation observation_;
};

namespace detail {

inline void forbid_markers(const std::string& text, const std::string& what,
                           std::vector<std::string>& problems) {
    for (const char* marker : {"</s></s>", "<STATE>", "|"})
        if (text.find(marker) != std::string::npos)
            problems.push_back(what + " contains reserved text '" + std::string(marker) + "'");
}

}  // namespace detail

// Full structural validation. Problems are reported together so a bad game
// file yields one actionable error.
inline void validate_game_spec(const GameSpec& spec) {
    std::vector<std::string> problems;
    auto room_exists = [&](const std::string& id) { return spec.find_room(id) != nullptr; };
    auto item_exists = [&](const std::string& id) { return spec.find_item(id) != nullptr; };

    if (spec.name.empty()) problems.push_back("missing 'game' name");
    if (spec.max_score <= 0) problems.push_back("max_score must be positive");
    if (spec.step_cap <= 0) problems.push_back("step_cap must be positive");
    if (spec.start_room.empty()) problems.push_back("missing 'start' room");
    else if (!room_exists(spec.start_room)) problems.push_back("start room '" + spec.start_room + "' does not exist");
    if (spec.walkthrough.empty()) problems.push_back("walkthrough is empty");

    std::set<std::string> room_ids;
    for (const auto& room : spec.rooms) {
        if (!room_ids.insert(room.id).second) problems.push_back("duplicate room id '" + room.id + "'");
        if (room.exits.empty()) problems.push_back("room '" + room.id + "' has no exits");
        std::set<std::string> dirs;
        for (const auto& exit : room.exits) {
            if (!dirs.insert(exit.direction).second)
                problems.push_back("room '" + room.id + "' repeats exit '" + exit.direction + "'");
            if (!room_exists(exit.target))
                problems.push_back("room '" + room.id + "' exit '" + exit.direction +
                                   "' targets nonexistent room '" + exit.target + "'");
        }
        detail::forbid_markers(room.description, "room '" + room.id + "' description", problems);
    }
    std::set<std::string> item_ids;
    for (const auto& item : spec.items) {
        if (!item_ids.insert(item.id).second) problems.push_back("duplicate item id '" + item.id + "'");
        if (item.initial_location != "inventory" && !room_exists(item.initial_location))
            problems.push_back("item '" + item.id + "' starts in nonexistent room '" + item.initial_location + "'");
        detail::forbid_markers(item.name, "item '" + item.id + "' name", problems);
    }

    int reward_mass = 0;
    for (const auto& rule : spec.rules) {
        const std::string where = "rule '" + rule.pattern + "'";
        if (rule.pattern.empty()) problems.push_back("rule with empty pattern");
        if (rule.reward != 0 && !rule.one_shot_reward)
            problems.push_back(where + " has a repeatable reward; reward triggers must fire at most once");
        if (rule.reward > 0) reward_mass += rule.reward;
        for (const auto& p : rule.preconditions) {
            const bool wants_room = p.kind == PredKind::At;
            const bool wants_item = p.kind == PredKind::Has || p.kind == PredKind::HasNot;
            if (wants_room && !room_exists(p.arg))
                problems.push_back(where + " precondition references nonexistent room '" + p.arg + "'");
            if (wants_item && !item_exists(p.arg))
                problems.push_back(where + " precondition references nonexistent item '" + p.arg + "'");
        }
        for (const auto& e : rule.effects) {
            if (e.kind == EffectKind::Goto && !room_exists(e.arg))
                problems.push_back(where + " goto targets nonexistent room '" + e.arg + "'");
            if ((e.kind == EffectKind::Take || e.kind == EffectKind::Drop) && !item_exists(e.arg))
                problems.push_back(where + " moves nonexistent item '" + e.arg + "'");
        }
        detail::forbid_markers(rule.message, where + " message", problems);
    }
    if (reward_mass != spec.max_score && !spec.rules.empty())
        problems.push_back("total positive reward " + std::to_string(reward_mass) + " ≠ max_score " +
                           std::to_string(spec.max_score));

    for (const auto& chance : spec.stochastic_rules) {
        bool known = std::any_of(spec.rules.begin(), spec.rules.end(),
                                 [&](const ActionRule& r) { return r.pattern == chance.rule_id; });
        if (!known) problems.push_back("stochastic entry for unknown rule '" + chance.rule_id + "'");
        if (!(chance.failure_probability >= 0.0 && chance.failure_probability <= 1.0))
            problems.push_back("stochastic rule '" + chance.rule_id + "' probability out of [0,1]");
        detail::forbid_markers(chance.failure_message, "stochastic rule '" + chance.rule_id + "' message", problems);
    }
    detail::forbid_markers(spec.intro, "intro", problems);

    if (!problems.empty()) {
        std::string joined = problems[0];
        for (size_t i = 1; i < problems.size(); ++i) joined += "; " + problems[i];
        throw GameValidationError("game '" + spec.name + "': " + joined);
    }

    // Walkthrough dry run from the default seed must land exactly on max_score.
    Engine engine(spec, spec.default_seed);
    for (const auto& action : spec.walkthrough) {
        if (engine.done())
            throw GameValidationError("game '" + spec.name + "': walkthrough continues past episode end at '" +
                                      action + "'");
        engine.step(action);
    }
    if (engine.score() != spec.max_score)
        throw GameValidationError("game '" + spec.name + "': walkthrough score " + std::to_string(engine.score()) +
                                  " ≠ max_score " + std::to_string(spec.max_score));
}

inline GameSpec load_game(const std::string& spec_text) {
    GameSpec spec = parse_game_spec(spec_text);
    validate_game_spec(spec);
    return spec;
}

inline GameSpec load_game_file(const std::string& path) {
    GameSpec spec = parse_game_spec_file(path);
    validate_game_spec(spec);
    return spec;
}

// Every text the engine can ever place in an observation, plus the action
// patterns. The token table is built from these.
inline std::vector<std::string> collect_game_texts(const GameSpec& spec) {
    std::vector<std::string> texts;
    texts.push_back(spec.intro);
    texts.push_back(Engine::kNothingHappens);
    for (const auto& room : spec.rooms) {
        texts.push_back(room.description);
        for (const auto& exit : room.exits) {
            texts.push_back("go " + exit.direction);
            texts.push_back("You go " + exit.direction + ".");
        }
    }
    for (const auto& item : spec.items) texts.push_back(item.name);
    for (const auto& rule : spec.rules) {
        texts.push_back(rule.pattern);
        texts.push_back(rule.message);
    }
    for (const auto& chance : spec.stochastic_rules) texts.push_back(chance.failure_message);
    return texts;
}

}  // namespace ldt
