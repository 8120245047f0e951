#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldt/codec.hpp"
#include "ldt/model/transformer.hpp"
#include "ldt/vocab.hpp"

namespace ldt {

// Mass threshold below which the model is considered to have failed to
// produce a goal at the GC position.
constexpr double kMinGoalMass = 1e-6;

// Next-token distribution restricted to the 101 goal tokens. probabilities is
// renormalized over that support; support_mass keeps the pre-renormalization
// mass for diagnostics and the failure check.
struct GoalDistribution {
    Eigen::VectorXd probabilities;  // index g in [0, 100]
    double support_mass = 0;

    bool ok() const { return support_mass >= kMinGoalMass; }
};

inline GoalDistribution restrict_to_goals(const Eigen::VectorXd& full) {
    if (full.size() < Vocabulary::kFirstGoal + Vocabulary::kGoalCount)
        throw std::invalid_argument("distribution smaller than the goal token block");
    GoalDistribution out;
    out.probabilities = full.segment(Vocabulary::kFirstGoal, Vocabulary::kGoalCount);
    out.support_mass = out.probabilities.sum();
    if (out.ok()) out.probabilities /= out.support_mass;
    return out;
}

// Distribution over g at the position following the forced "GC:" marker.
inline GoalDistribution goal_distribution(const Model& model, const Vocabulary& vocab,
                                          const std::vector<int>& input_tokens) {
    DecodeSession session(model, input_tokens);
    session.feed(vocab.id("GC:"));
    return restrict_to_goals(session.current_distribution());
}

// argmax over g of log P(g) + alpha * (g/100), zero-mass goals excluded,
// ties broken toward the larger g.
inline int tilt_select(const GoalDistribution& dist, double alpha) {
    if (alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
    if (dist.probabilities.size() != Vocabulary::kGoalCount)
        throw std::invalid_argument("goal distribution has wrong support size");
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < Vocabulary::kGoalCount; ++g) {
        const double p = dist.probabilities(g);
        if (p <= 0) continue;
        const double score = std::log(p) + alpha * (double(g) / 100.0);
        if (score >= best_score) {
            best_score = score;
            best = g;
        }
    }
    if (best < 0) throw std::invalid_argument("tilt_select: distribution has empty support");
    return best;
}

enum class DecodeMode { PredictedTilt, OptimalManual, Fixed };
enum class ActionDecoding { Greedy, ConstrainedToCandidates };

struct DecodePolicy {
    DecodeMode mode = DecodeMode::PredictedTilt;
    double alpha = 0.0;  // PredictedTilt only
    int goal = 100;      // rendered for OptimalManual (running value) and Fixed
    ActionDecoding action_decoding = ActionDecoding::Greedy;

    void validate() const {
        if (alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
        if (mode != DecodeMode::PredictedTilt && (goal < 0 || goal > 100))
            throw std::invalid_argument("goal must lie in [0, 100]");
    }
};

inline const char* to_string(DecodeMode mode) {
    switch (mode) {
        case DecodeMode::PredictedTilt: return "predicted_tilt";
        case DecodeMode::OptimalManual: return "optimal_manual";
        case DecodeMode::Fixed: return "fixed";
    }
    throw std::invalid_argument("unknown decode mode");
}

inline DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "predicted_tilt") return DecodeMode::PredictedTilt;
    if (s == "optimal_manual") return DecodeMode::OptimalManual;
    if (s == "fixed") return DecodeMode::Fixed;
    throw std::invalid_argument("unknown decode mode: " + s +
                                " (expected predicted_tilt, optimal_manual, or fixed)");
}

inline const char* to_string(ActionDecoding d) {
    return d == ActionDecoding::Greedy ? "greedy" : "constrained";
}

inline ActionDecoding action_decoding_from_string(const std::string& s) {
    if (s == "greedy") return ActionDecoding::Greedy;
    if (s == "constrained") return ActionDecoding::ConstrainedToCandidates;
    throw std::invalid_argument("unknown action decoding: " + s +
                                " (expected greedy or constrained)");
}

// One inference step: choose g, force-feed its token, decode the action.
// Failures are in-band (ok=false + error) so the rollout can terminate the
// episode as an invalid sequence.
struct StepDecode {
    bool ok = false;
    std::string error;  // "no goal mass" | "no delimiter" | "parse failure"
    int goal = -1;
    std::string action;
    GoalDistribution distribution;
    std::vector<int> output_tokens;  // forced prefix plus decoded continuation
};

namespace detail {

inline int argmax_index(const Eigen::VectorXd& v) {
    Eigen::Index arg = 0;
    v.maxCoeff(&arg);
    return int(arg);
}

}  // namespace detail

inline StepDecode decode_step(const Model& model, const Vocabulary& vocab,
                              const std::vector<int>& context, const DecodePolicy& policy,
                              const std::vector<std::string>& candidates = {}) {
    policy.validate();
    if (policy.action_decoding == ActionDecoding::ConstrainedToCandidates && candidates.empty())
        throw std::invalid_argument("constrained decoding requires a candidate list");

    StepDecode out;
    DecodeSession session(model, context);
    const int gc_marker = vocab.id("GC:");
    session.feed(gc_marker);
    out.distribution = restrict_to_goals(session.current_distribution());
    if (!out.distribution.ok()) {
        out.error = "no goal mass";
        return out;
    }
    out.goal = policy.mode == DecodeMode::PredictedTilt
                   ? tilt_select(out.distribution, policy.alpha)
                   : policy.goal;
    out.output_tokens = {gc_marker, Vocabulary::goal_token(out.goal)};
    session.feed(out.output_tokens.back());

    if (policy.action_decoding == ActionDecoding::Greedy) {
        // The template closes the action span with the second delimiter after
        // the goal token: "</s></s> Action: {a} </s></s>".
        int delims = 0;
        while (delims < 2 && session.position() < model.config().max_output_tokens) {
            const int token = detail::argmax_index(session.current_distribution());
            out.output_tokens.push_back(token);
            if (token == Vocabulary::kDelim) ++delims;
            if (delims < 2) session.feed(token);
        }
        if (delims < 2) {
            out.error = "no delimiter";
            return out;
        }
    } else {
        // Score each candidate's rendered suffix under teacher forcing and
        // keep the most likely one.
        double best_score = -std::numeric_limits<double>::infinity();
        std::vector<int> best_suffix;
        for (const auto& candidate : candidates) {
            std::vector<int> suffix =
                vocab.encode("</s></s> Action: " + candidate + " </s></s>");
            std::vector<int> output = out.output_tokens;
            output.insert(output.end(), suffix.begin(), suffix.end());
            auto dists = model.position_distributions(context, output);
            double score = 0;
            for (size_t k = 0; k < suffix.size(); ++k) {
                const size_t pos = out.output_tokens.size() + k;
                score += std::log(std::max(dists[pos](suffix[k]), 1e-300));
            }
            if (score > best_score) {
                best_score = score;
                best_suffix = std::move(suffix);
            }
        }
        out.output_tokens.insert(out.output_tokens.end(), best_suffix.begin(), best_suffix.end());
    }

    ParsedOutput parsed = parse_output(vocab.decode(out.output_tokens));
    if (!parsed.goal || !parsed.action || *parsed.goal != out.goal) {
        out.error = "parse failure";
        return out;
    }
    out.action = *parsed.action;
    out.ok = true;
    return out;
}

}  // namespace ldt
