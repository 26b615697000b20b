#include "neurostrike/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "neurostrike/error.hpp"
#include "neurostrike/random.hpp"

namespace neurostrike::qnet {

namespace {

struct Transition {
    Tensor state;
    int action;
    double reward;
    Tensor next_state;
    bool terminal;
};

void axpy(std::vector<double>& y, double alpha, const std::vector<double>& x) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

void sgd_step(QNetwork& net, const QNetwork& grad, double lr) {
    axpy(net.conv1.weights, -lr, grad.conv1.weights);
    axpy(net.conv1_bias, -lr, grad.conv1_bias);
    axpy(net.conv2.weights, -lr, grad.conv2.weights);
    axpy(net.conv2_bias, -lr, grad.conv2_bias);
    axpy(net.dense, -lr, grad.dense);
    axpy(net.dense_bias, -lr, grad.dense_bias);
}

QNetwork zero_like() {
    QNetwork g;  // default member initialisers are all zeros
    return g;
}

double max_q(const QValues& q) { return *std::max_element(q.begin(), q.end()); }

}  // namespace

void TrainConfig::validate() const {
    if (!(discount >= 0.0 && discount <= 1.0)) {
        throw RangeError("qnet", "discount", "must lie in [0, 1]");
    }
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
        throw RangeError("qnet", "epsilon", "must lie in [0, 1]");
    }
    if (replay_capacity == 0 || batch_size == 0) {
        throw RangeError("qnet", "replay", "memory and batch size must be positive");
    }
    if (batch_size > replay_capacity) {
        throw RangeError("qnet", "batch_size", "batch cannot exceed the replay memory");
    }
    if (!(learning_rate > 0.0)) {
        throw RangeError("qnet", "learning_rate", "must be positive");
    }
    if (max_epochs <= 0 || eval_every <= 0 || epsilon_decay_epochs < 0 || step_cap <= 0) {
        throw RangeError("qnet", "epochs", "epoch counts and step cap must be positive");
    }
}

LossGradient loss_and_gradient(const QNetwork& net, std::span<const Sample> batch) {
    LossGradient out{0.0, zero_like()};
    if (batch.empty()) {
        return out;
    }
    QNetwork& g = out.grad;

    Tensor d_conv2(Shape3{kConv2Side, kConv2Side, kConv2Filters});
    Tensor d_conv1(Shape3{kConv1Side, kConv1Side, kConv1Filters});

    for (const Sample& s : batch) {
        const ForwardTrace tr = forward_trace(net, s.state);
        const double err = tr.q[static_cast<std::size_t>(s.action)] - s.target;
        out.loss += 0.5 * err * err;
        const double dq = err;

        // Dense layer (linear output).
        const auto hidden = tr.conv2.data();
        g.dense_bias[static_cast<std::size_t>(s.action)] += dq;
        auto dh = d_conv2.data();
        for (int j = 0; j < kConv2Nodes; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            g.dense_at(s.action, j) += dq * hidden[ju];
            // ReLU gate: zero activation means the unit was clipped.
            dh[ju] = hidden[ju] > 0.0 ? dq * net.dense_at(s.action, j) : 0.0;
        }

        // conv2: 3x3 output over the 5x5x8 conv1 map.
        std::fill(d_conv1.data().begin(), d_conv1.data().end(), 0.0);
        for (int x = 0; x < kConv2Side; ++x) {
            for (int y = 0; y < kConv2Side; ++y) {
                for (int f2 = 0; f2 < kConv2Filters; ++f2) {
                    const double dz = d_conv2.at(x, y, f2);
                    if (dz == 0.0) {
                        continue;
                    }
                    g.conv2_bias[static_cast<std::size_t>(f2)] += dz;
                    for (int dx = 0; dx < kKernelSide; ++dx) {
                        for (int dy = 0; dy < kKernelSide; ++dy) {
                            for (int f1 = 0; f1 < kConv1Filters; ++f1) {
                                g.conv2.at(f2, dx, dy, f1) += dz * tr.conv1.at(x + dx, y + dy, f1);
                                d_conv1.at(x + dx, y + dy, f1) += dz * net.conv2.at(f2, dx, dy, f1);
                            }
                        }
                    }
                }
            }
        }

        // conv1: 5x5 output over the 7x7x1 input.
        for (int x = 0; x < kConv1Side; ++x) {
            for (int y = 0; y < kConv1Side; ++y) {
                for (int f1 = 0; f1 < kConv1Filters; ++f1) {
                    if (tr.conv1.at(x, y, f1) <= 0.0) {
                        continue;
                    }
                    const double dz = d_conv1.at(x, y, f1);
                    g.conv1_bias[static_cast<std::size_t>(f1)] += dz;
                    for (int dx = 0; dx < kKernelSide; ++dx) {
                        for (int dy = 0; dy < kKernelSide; ++dy) {
                            g.conv1.at(f1, dx, dy, 0) += dz * s.state.at(x + dx, y + dy, 0);
                        }
                    }
                }
            }
        }
    }
    return out;
}

PolicyReport evaluate_policy(const QNetwork& net, const maze::MazeGrid& grid, int cap) {
    PolicyReport report;
    const NodeOverrideSet none;
    const PlayOptions opts{cap, 0.0, 0};
    for (const maze::Position p : grid.free_cells()) {
        if (p == grid.exit()) {
            continue;
        }
        const EpisodeResult r = play_episode(net, grid, p, none, ActivationRule::always(), opts);
        ++report.cells;
        report.wins += r.success ? 1 : 0;
        if (p == grid.start()) {
            report.start_success = r.success;
            report.steps_from_start = r.steps;
        }
    }
    return report;
}

QNetwork train(const maze::MazeGrid& grid, const TrainConfig& cfg,
               const std::function<void(const TrainProgress&)>& on_eval) {
    cfg.validate();
    const int optimal_moves = maze::shortest_path(grid).moves();

    Rng rng(hash_seed({cfg.seed, 0x7472'6169'6eULL}));
    QNetwork net = QNetwork::random(rng);

    std::vector<maze::Position> starts;
    for (const maze::Position p : grid.free_cells()) {
        if (p != grid.exit()) {
            starts.push_back(p);
        }
    }

    std::deque<Transition> memory;
    std::vector<Sample> batch;
    batch.reserve(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double progress =
            cfg.epsilon_decay_epochs == 0 ? 1.0
                                          : std::min(1.0, static_cast<double>(epoch - 1) / cfg.epsilon_decay_epochs);
        const double epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * progress;

        maze::Position pos = starts[rng.below(starts.size())];
        VisitedSet visited(grid);
        visited.insert(pos);
        double total = 0.0;

        for (int step = 0; step < cfg.step_cap; ++step) {
            Tensor state = encode_state(grid, pos, visited);
            int action;
            if (rng.uniform() < epsilon) {
                action = static_cast<int>(rng.below(maze::kActionCount));
            } else {
                action = static_cast<int>(greedy_action(forward(net, state)));
            }

            const maze::MoveResult move = maze::apply_move(grid, pos, static_cast<maze::Action>(action));
            double reward;
            switch (move.outcome) {
                case maze::MoveOutcome::Win: reward = cfg.rewards.win; break;
                case maze::MoveOutcome::Blocked: reward = cfg.rewards.blocked; break;
                default: reward = visited.contains(move.pos) ? cfg.rewards.revisit : cfg.rewards.step; break;
            }
            total += reward;
            pos = move.pos;
            visited.insert(pos);
            const bool won = move.outcome == maze::MoveOutcome::Win;

            memory.push_back({std::move(state), action, reward, encode_state(grid, pos, visited), won});
            if (memory.size() > cfg.replay_capacity) {
                memory.pop_front();
            }

            batch.clear();
            const std::size_t n = std::min(cfg.batch_size, memory.size());
            for (std::size_t i = 0; i < n; ++i) {
                const Transition& t = memory[rng.below(memory.size())];
                double target = t.reward;
                if (!t.terminal) {
                    target += cfg.discount * max_q(forward(net, t.next_state));
                }
                batch.push_back({t.state, t.action, target});
            }
            sgd_step(net, loss_and_gradient(net, batch).grad, cfg.learning_rate);

            if (won || total < cfg.rewards.min_total) {
                break;
            }
        }

        if (epoch % cfg.eval_every == 0) {
            const PolicyReport report = evaluate_policy(net, grid, cfg.step_cap);
            if (on_eval) {
                on_eval({epoch, epsilon, report});
            }
            if (report.perfect(optimal_moves)) {
                return net;
            }
        }
    }
    throw TrainingFailed("qnet", "max_epochs",
                         "greedy policy not optimal after " + std::to_string(cfg.max_epochs) + " episodes");
}

}  // namespace neurostrike::qnet
