#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "neurostrike/maze.hpp"
#include "neurostrike/qnet.hpp"

namespace neurostrike::qnet {

struct TrainConfig {
    double discount = 0.95;
    std::size_t replay_capacity = 512;
    std::size_t batch_size = 32;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_epochs = 400;  ///< linear decay length, in episodes
    double learning_rate = 1e-3;
    int max_epochs = 20000;
    int eval_every = 10;  ///< greedy evaluation period, in episodes
    int step_cap = kDefaultStepCap;
    std::uint64_t seed = 1;
    maze::Rewards rewards{};

    /// Throws RangeError on an out-of-range hyperparameter.
    void validate() const;
};

/// One regression target for the squared-error loss.
struct Sample {
    Tensor state;
    int action = 0;
    double target = 0.0;
};

/// Sum over the batch of 0.5 * (Q(s, a) - target)^2, plus its gradient with
/// respect to every weight. The gradient reuses QNetwork as its container.
struct LossGradient {
    double loss = 0.0;
    QNetwork grad;
};

LossGradient loss_and_gradient(const QNetwork& net, std::span<const Sample> batch);

/// Result of playing greedily from every free cell.
struct PolicyReport {
    int cells = 0;
    int wins = 0;
    int steps_from_start = 0;
    bool start_success = false;

    bool perfect(int optimal_moves) const {
        return wins == cells && start_success && steps_from_start == optimal_moves;
    }
};

PolicyReport evaluate_policy(const QNetwork& net, const maze::MazeGrid& grid, int cap);

struct TrainProgress {
    int epoch = 0;
    double epsilon = 0.0;
    PolicyReport report;
};

/// Deep Q-learning with experience replay and plain SGD. Stops as soon as the
/// greedy policy wins from every free cell and walks the shortest path from
/// the start. Throws TrainingFailed when max_epochs runs out first.
QNetwork train(const maze::MazeGrid& grid, const TrainConfig& cfg,
               const std::function<void(const TrainProgress&)>& on_eval = {});

}  // namespace neurostrike::qnet
