#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldt/codec.hpp"
#include "ldt/common.hpp"
#include "ldt/model/checkpoint.hpp"
#include "ldt/model/tensor.hpp"
#include "ldt/model/transformer.hpp"
#include "ldt/trajectory.hpp"
#include "ldt/vocab.hpp"

namespace ldt {

struct TrainStepMetric {
    long step = 0;
    double loss = 0, loss_ga = 0, loss_o = 0;
};

struct TrainResult {
    std::vector<TrainStepMetric> history;
    std::vector<std::pair<long, std::string>> checkpoints;  // (step, path)
    long steps = 0;
};

inline void to_json(nlohmann::ordered_json& j, const TrainStepMetric& m) {
    j = {{"step", m.step}, {"loss", m.loss}, {"loss_ga", m.loss_ga}, {"loss_o", m.loss_o}};
}

// Teacher-forced training over the trajectory store. Each epoch draws one split
// index per trajectory uniformly from [0, T-1], shuffles the resulting pairs,
// and steps the optimizer every batch_size * gradient_accumulation pairs.
inline TrainResult train_model(Model& model, const std::vector<Trajectory>& trajectories,
                               const std::map<std::string, int>& max_scores,
                               GoalStrategy strategy, const Vocabulary& vocab,
                               const TrainConfig& config, const std::string& checkpoint_dir = "",
                               const std::string& metrics_path = "", uint64_t vocab_version = 0) {
    config.validate();
    if (trajectories.empty()) throw std::invalid_argument("training set is empty");
    for (const auto& traj : trajectories) {
        if (!max_scores.count(traj.game))
            throw std::invalid_argument("no max_score for game " + traj.game);
        if (traj.steps.empty()) throw std::invalid_argument("empty trajectory in training set");
    }

    std::ofstream metrics;
    if (!metrics_path.empty()) {
        std::filesystem::create_directories(
            std::filesystem::path(metrics_path).parent_path().empty()
                ? "."
                : std::filesystem::path(metrics_path).parent_path().string());
        metrics.open(metrics_path, std::ios::trunc);
        if (!metrics) throw std::runtime_error("cannot write metrics: " + metrics_path);
    }

    AdamOptimizer optimizer(config.learning_rate);
    TrainResult result;
    const int pairs_per_step = config.batch_size * config.gradient_accumulation;
    // Pairs stream across epoch boundaries, so the step count is fixed upfront
    // and a schedule can target the true final step.
    const long total_steps =
        long((uint64_t(config.epochs) * trajectories.size() + uint64_t(pairs_per_step) - 1) /
             uint64_t(pairs_per_step));

    auto save = [&](long step) {
        if (checkpoint_dir.empty()) return;
        char name[32];
        std::snprintf(name, sizeof(name), "step_%06ld.ckpt", step);
        std::string path = checkpoint_dir + "/" + name;
        save_checkpoint(model, vocab_version, step, path);
        result.checkpoints.emplace_back(step, path);
    };

    std::vector<size_t> order(trajectories.size());
    std::iota(order.begin(), order.end(), size_t(0));

    long step = 0;
    int in_step = 0;  // pairs accumulated toward the current optimizer step
    double acc_loss = 0, acc_ga = 0, acc_o = 0;
    model.store().zero_grads();

    auto flush_step = [&]() {
        if (config.lr_schedule == "cosine")
            optimizer.set_learning_rate(config.learning_rate * 0.5 *
                                        (1.0 + std::cos(std::numbers::pi * double(step) / double(total_steps))));
        optimizer.step(model.store());
        model.store().zero_grads();
        ++step;
        TrainStepMetric m{step, acc_loss / in_step, acc_ga / in_step, acc_o / in_step};
        result.history.push_back(m);
        if (metrics.is_open()) {
            nlohmann::ordered_json j = m;
            metrics << j.dump() << '\n';
        }
        acc_loss = acc_ga = acc_o = 0;
        in_step = 0;
        if (step % config.checkpoint_every == 0) save(step);
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(config.shuffle_seed, "epoch", {uint64_t(epoch)}));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);
        for (size_t idx : order) {
            const Trajectory& traj = trajectories[idx];
            const int t = int(rng.next_below(traj.steps.size()));
            TokenPair pair = encode_pair(vocab, traj, t, strategy, max_scores.at(traj.game),
                                         model.config().max_input_tokens);
            const auto ga_len = Eigen::Index(goal_action_span_length(pair.output));
            auto loss = model.pair_loss_and_grad(pair.input, pair.output, ga_len, config.lambda,
                                                 1.0 / pairs_per_step);
            if (!std::isfinite(loss.loss))
                throw std::runtime_error("non-finite loss at optimizer step " +
                                         std::to_string(step + 1) + " (game " + traj.game +
                                         ", split " + std::to_string(t) + ")");
            acc_loss += loss.loss;
            acc_ga += loss.ga;
            acc_o += loss.o;
            if (++in_step == pairs_per_step) flush_step();
        }
    }
    // Leftover pairs smaller than a full step still update the model once.
    if (in_step > 0) {
        for (auto& p : model.store().all())
            p.grad *= double(pairs_per_step) / double(in_step);
        flush_step();
    }

    result.steps = step;
    if (!checkpoint_dir.empty() &&
        (result.checkpoints.empty() || result.checkpoints.back().first != step))
        save(step);
    return result;
}

// Central finite differences against the analytic gradient on randomly sampled
// coordinates; returns the max relative error.
inline double gradient_check(Model& model, const std::vector<int>& input_ids,
                             const std::vector<int>& output_ids, Eigen::Index ga_len,
                             double lambda, int samples = 120, double h = 1e-4,
                             uint64_t seed = 0) {
    model.store().zero_grads();
    model.pair_loss_and_grad(input_ids, output_ids, ga_len, lambda, 1.0);

    Rng rng(derive_seed(seed, "gradcheck"));
    double max_rel = 0;
    for (int s = 0; s < samples; ++s) {
        auto& param = model.store().at(rng.next_below(model.store().size()));
        const Eigen::Index flat = Eigen::Index(rng.next_below(size_t(param.value.size())));
        const double analytic = param.grad(flat);
        double* coord = param.value.data() + flat;
        const double saved = *coord;
        *coord = saved + h;
        const double up = model.pair_loss_and_grad(input_ids, output_ids, ga_len, lambda, 0.0).loss;
        *coord = saved - h;
        const double down =
            model.pair_loss_and_grad(input_ids, output_ids, ga_len, lambda, 0.0).loss;
        *coord = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

}  // namespace ldt
