#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldt/engine.hpp"

namespace ldt {

using ordered_json = nlohmann::ordered_json;

struct Step {
    Observation observation;
    std::string action;
    int reward = 0;

    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::string game;
    uint64_t seed = 0;               // dataset seed (provenance, not the engine seed)
    int walkthrough_fraction = 0;    // X percent; 100 marks the pure walkthrough
    std::vector<Step> steps;
    int final_score = 0;
    bool terminal = false;

    bool operator==(const Trajectory&) const = default;

    std::vector<int> rewards() const {
        std::vector<int> out;
        out.reserve(steps.size());
        for (const auto& s : steps) out.push_back(s.reward);
        return out;
    }
};

inline ordered_json to_json(const Observation& obs) {
    return ordered_json{{"candidates", obs.candidate_actions},
                        {"message", obs.message},
                        {"description", obs.description},
                        {"inventory", obs.inventory}};
}

inline Observation observation_from_json(const ordered_json& j) {
    Observation obs;
    obs.candidate_actions = j.at("candidates").get<std::vector<std::string>>();
    obs.message = j.at("message").get<std::string>();
    obs.description = j.at("description").get<std::string>();
    obs.inventory = j.at("inventory").get<std::string>();
    return obs;
}

inline ordered_json to_json(const Trajectory& traj) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : traj.steps) {
        ordered_json step = to_json(s.observation);
        step["action"] = s.action;
        step["reward"] = s.reward;
        steps.push_back(std::move(step));
    }
    return ordered_json{{"game", traj.game},         {"seed", traj.seed},
                        {"fraction", traj.walkthrough_fraction}, {"terminal", traj.terminal},
                        {"final_score", traj.final_score},       {"steps", std::move(steps)}};
}

inline Trajectory trajectory_from_json(const ordered_json& j) {
    Trajectory traj;
    traj.game = j.at("game").get<std::string>();
    traj.seed = j.at("seed").get<uint64_t>();
    traj.walkthrough_fraction = j.at("fraction").get<int>();
    traj.terminal = j.at("terminal").get<bool>();
    traj.final_score = j.at("final_score").get<int>();
    for (const auto& js : j.at("steps")) {
        Step step;
        step.observation = observation_from_json(js);
        step.action = js.at("action").get<std::string>();
        step.reward = js.at("reward").get<int>();
        traj.steps.push_back(std::move(step));
    }
    int total = 0;
    for (const auto& s : traj.steps) total += s.reward;
    if (total != traj.final_score)
        throw std::runtime_error("trajectory record for '" + traj.game + "': final_score " +
                                 std::to_string(traj.final_score) + " ≠ reward sum " + std::to_string(total));
    return traj;
}

// One line-delimited record per trajectory; compact separators keep files
// byte-stable across writers.
inline void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
    for (const auto& traj : trajectories) out << to_json(traj).dump() << "\n";
}

inline std::vector<Trajectory> read_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trajectory file: " + path);
    std::vector<Trajectory> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(trajectory_from_json(ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ldt
