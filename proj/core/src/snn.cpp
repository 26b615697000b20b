#include "neurostrike/snn.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "neurostrike/error.hpp"

namespace neurostrike::snn {

namespace {

using metrics::SpikeEvent;

// Converts a time to a step index, tolerating representation error in t/dt.
std::int64_t to_step(double t_ms, double dt) {
    return static_cast<std::int64_t>(std::floor(t_ms / dt + 1e-9));
}

void check_path_index(std::string_view what, int value, int path_length) {
    if (value < 1 || value > path_length) {
        throw RangeError("snn", std::string(what),
                         std::to_string(value) + " outside 1.." + std::to_string(path_length));
    }
}

// Time-indexed view of a set of attack plans, advanced step by step.
class AttackTimeline {
public:
    AttackTimeline(std::span<const AttackPlan> plans, const RunClock& clock, int neuron_count)
        : clamp_depth_(static_cast<std::size_t>(neuron_count), 0),
          clamped_(static_cast<std::size_t>(neuron_count), 0) {
        for (const AttackPlan& p : plans) {
            const std::int64_t begin = clock.step_of(p.t_attk);
            if (p.kind == AttackKind::Jam) {
                const std::int64_t end = to_step(p.t_attk + p.t_pulse, clock.dt);
                for (int id : p.targets) {
                    toggles_[begin].push_back({id, +1});
                    toggles_[end].push_back({id, -1});
                }
            } else {
                for (int id : p.targets) {
                    kicks_[begin].push_back({id, p.vi});
                }
            }
        }
    }

    // Applies every window boundary up to and including `step`.
    void advance_to(std::int64_t step) {
        while (!toggles_.empty() && toggles_.begin()->first <= step) {
            for (auto [id, delta] : toggles_.begin()->second) {
                auto& depth = clamp_depth_[static_cast<std::size_t>(id)];
                depth += delta;
                clamped_[static_cast<std::size_t>(id)] = depth > 0 ? 1 : 0;
            }
            toggles_.erase(toggles_.begin());
        }
        current_kicks_ = nullptr;
        if (auto it = kicks_.find(step); it != kicks_.end()) {
            current_kicks_ = &it->second;
        }
    }

    std::span<const std::uint8_t> clamped() const { return clamped_; }
    std::span<const std::pair<int, double>> kicks() const {
        return current_kicks_ ? std::span<const std::pair<int, double>>(*current_kicks_)
                              : std::span<const std::pair<int, double>>();
    }

private:
    std::map<std::int64_t, std::vector<std::pair<int, int>>> toggles_;
    std::map<std::int64_t, std::vector<std::pair<int, double>>> kicks_;
    std::vector<int> clamp_depth_;
    std::vector<std::uint8_t> clamped_;
    const std::vector<std::pair<int, double>>* current_kicks_ = nullptr;
};

// One integration step; shared by step() and simulate().
void advance(const SpikingNetwork& net, SimState& s, std::span<const double> currents,
             std::span<const std::uint8_t> clamped, std::span<const std::pair<int, double>> kicks, double dt,
             std::vector<int>& spiked, ProbeTrace* probes, std::size_t n_probes) {
    const IzhikevichParams& p = net.params();
    const std::size_t n = s.v.size();

    for (auto [id, vi] : kicks) {
        s.v[static_cast<std::size_t>(id)] += vi;
    }
    for (std::size_t k = 0; k < n_probes; ++k) {
        probes[k].v_input.push_back(s.v[static_cast<std::size_t>(probes[k].neuron)]);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double v = s.v[i];
        const double u = s.u[i];
        const double dv = 0.04 * v * v + 5.0 * v + 140.0 + p.recovery_sign * u + currents[i];
        const double du = p.a * (p.b * v - u);
        // Pending synaptic jumps enter as current pending/dt, i.e. a plain jump.
        s.v[i] = v + dt * dv + s.pending[i];
        s.u[i] = u + dt * du;
        s.pending[i] = 0.0;
    }

    spiked.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (clamped[i]) {
            s.v[i] = p.v_min;
        } else if (s.v[i] >= p.v_peak) {
            s.v[i] = p.c;
            s.u[i] += p.d;
            spiked.push_back(static_cast<int>(i));
        }
        if (!std::isfinite(s.v[i]) || !std::isfinite(s.u[i])) {
            throw DivergenceError(static_cast<int>(i), static_cast<double>(s.step) * dt,
                                  "non-finite membrane state");
        }
    }
    for (int id : spiked) {
        for (const Synapse& syn : net.outgoing(id)) {
            s.pending[static_cast<std::size_t>(syn.post)] += syn.weight;
        }
    }
    for (std::size_t k = 0; k < n_probes; ++k) {
        const auto id = static_cast<std::size_t>(probes[k].neuron);
        probes[k].v.push_back(s.v[id]);
        probes[k].u.push_back(s.u[id]);
    }
    ++s.step;
}

}  // namespace

void IzhikevichParams::validate() const {
    for (double x : {a, b, c, d, v_min, v_peak, recovery_sign}) {
        if (!std::isfinite(x)) {
            throw RangeError("snn", "izhikevich", "parameters must be finite");
        }
    }
    if (!(v_min < v_peak)) {
        throw RangeError("snn", "v_min", "v_min must be below v_peak");
    }
    if (!(c < v_peak)) {
        throw RangeError("snn", "c", "reset value must be below v_peak");
    }
}

Derivatives derivatives(const IzhikevichParams& p, NeuronState s, double current) {
    return {0.04 * s.v * s.v + 5.0 * s.v + 140.0 + p.recovery_sign * s.u + current, p.a * (p.b * s.v - s.u)};
}

int layer_of(int neuron) {
    if (neuron < qnet::kConv2First) return 0;
    if (neuron < qnet::kOutputFirst) return 1;
    return 2;
}

SpikingNetwork::SpikingNetwork(IzhikevichParams params, std::vector<Synapse> synapses, double gain, int neuron_count)
    : params_(params), synapses_(std::move(synapses)), gain_(gain), neuron_count_(neuron_count) {
    params_.validate();
    if (neuron_count_ <= 0) {
        throw RangeError("snn", "neuron_count", "network needs at least one neuron");
    }
    for (const Synapse& s : synapses_) {
        if (s.pre < 0 || s.pre >= neuron_count_ || s.post < 0 || s.post >= neuron_count_) {
            throw RangeError("snn", "synapse", "endpoint outside the population");
        }
        if (!std::isfinite(s.weight)) {
            throw RangeError("snn", "synapse", "weight must be finite");
        }
    }
    std::stable_sort(synapses_.begin(), synapses_.end(),
                     [](const Synapse& x, const Synapse& y) { return std::tie(x.pre, x.post) < std::tie(y.pre, y.post); });
    offsets_.assign(static_cast<std::size_t>(neuron_count_) + 1, 0);
    for (const Synapse& s : synapses_) {
        ++offsets_[static_cast<std::size_t>(s.pre) + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) {
        offsets_[i] += offsets_[i - 1];
    }
}

std::vector<NeuronState> SpikingNetwork::initial_state() const {
    return std::vector<NeuronState>(static_cast<std::size_t>(neuron_count_), {params_.c, params_.b * params_.c});
}

std::string SpikingNetwork::topology_csv() const {
    std::string out = "pre,post,weight_mV\n";
    for (const Synapse& s : synapses_) {
        out += std::to_string(s.pre) + ',' + std::to_string(s.post) + ',' + metrics::format_real(s.weight) + '\n';
    }
    return out;
}

double default_gain(const qnet::QNetwork& net) {
    double peak = 0.0;
    for (double w : net.conv2.weights) peak = std::max(peak, std::abs(w));
    for (double w : net.dense) peak = std::max(peak, std::abs(w));
    return peak > 0.0 ? 1.0 / peak : 1.0;
}

SpikingNetwork translate(const qnet::QNetwork& net, double gain, const IzhikevichParams& params) {
    net.validate();
    if (!std::isfinite(gain)) {
        throw RangeError("snn", "gain", "gain must be finite");
    }
    using namespace qnet;
    std::vector<Synapse> synapses;
    synapses.reserve(kSynapseCount);
    const Shape3 l1{kConv1Side, kConv1Side, kConv1Filters};
    const Shape3 l2{kConv2Side, kConv2Side, kConv2Filters};
    for (int x = 0; x < kConv2Side; ++x) {
        for (int y = 0; y < kConv2Side; ++y) {
            for (int f2 = 0; f2 < kConv2Filters; ++f2) {
                const int post = kConv2First + static_cast<int>(Tensor::offset(l2, x, y, f2));
                for (int dx = 0; dx < kKernelSide; ++dx) {
                    for (int dy = 0; dy < kKernelSide; ++dy) {
                        for (int f1 = 0; f1 < kConv1Filters; ++f1) {
                            const int pre = kConv1First + static_cast<int>(Tensor::offset(l1, x + dx, y + dy, f1));
                            synapses.push_back({pre, post, gain * net.conv2.at(f2, dx, dy, f1)});
                        }
                    }
                }
            }
        }
    }
    for (int a = 0; a < kOutputNodes; ++a) {
        for (int j = 0; j < kConv2Nodes; ++j) {
            synapses.push_back({kConv2First + j, kOutputFirst + a, gain * net.dense_at(a, j)});
        }
    }
    return SpikingNetwork(params, std::move(synapses), gain);
}

std::vector<int> intervening_neurons(const maze::MazeGrid& grid, maze::Position pos) {
    using namespace qnet;
    std::vector<maze::Position> neighbours;
    for (maze::Action a : maze::valid_moves(grid, pos)) {
        neighbours.push_back(maze::apply_move(grid, pos, a).pos);
    }
    const Shape3 l1{kConv1Side, kConv1Side, kConv1Filters};
    std::vector<int> out;
    for (int x = 0; x < kConv1Side; ++x) {
        for (int y = 0; y < kConv1Side; ++y) {
            const bool covered = std::any_of(neighbours.begin(), neighbours.end(), [&](maze::Position q) {
                return q.row >= x && q.row < x + kKernelSide && q.col >= y && q.col < y + kKernelSide;
            });
            if (!covered) {
                continue;
            }
            for (int f = 0; f < kConv1Filters; ++f) {
                out.push_back(kConv1First + static_cast<int>(Tensor::offset(l1, x, y, f)));
            }
        }
    }
    return out;
}

double StimulusSchedule::duration_ms() const {
    double total = 0.0;
    for (const StimulusSegment& s : segments) {
        total += s.duration_ms;
    }
    return total;
}

StimulusSchedule build_stimulus(const maze::MazeGrid& grid, const maze::OptimalPath& path) {
    StimulusSchedule schedule;
    for (const maze::Position p : path.positions) {
        StimulusSegment seg{kSegmentMs, std::vector<double>(kNeuronCount, kBaseCurrent)};
        for (int id : intervening_neurons(grid, p)) {
            seg.currents[static_cast<std::size_t>(id)] = kInterveningCurrent;
        }
        schedule.segments.push_back(std::move(seg));
    }
    return schedule;
}

StimulusSchedule constant_stimulus(double current, double duration_ms, int neuron_count) {
    return {{StimulusSegment{duration_ms, std::vector<double>(static_cast<std::size_t>(neuron_count), current)}}};
}

void RunClock::validate() const {
    if (!(dt > 0.0 && dt <= 1.0)) {
        throw RangeError("snn", "dt", "dt must lie in (0, 1] ms");
    }
    if (!(t_win > 0.0)) {
        throw RangeError("snn", "t_win", "window must be positive");
    }
    const double ratio = t_win / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6) {
        throw RangeError("snn", "t_win", "window must be a multiple of dt");
    }
}

std::int64_t RunClock::steps() const { return static_cast<std::int64_t>(std::llround(t_win / dt)); }

std::int64_t RunClock::step_of(double t_ms) const { return to_step(t_ms, dt); }

std::string_view to_string(AttackKind k) { return k == AttackKind::Jam ? "jam" : "flo"; }

void AttackPlan::validate(int neuron_count, const RunClock& clock) const {
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0 || targets[i] >= neuron_count) {
            throw RangeError("snn", "targets", "neuron " + std::to_string(targets[i]) + " outside the population");
        }
        if (i > 0 && targets[i] <= targets[i - 1]) {
            throw RangeError("snn", "targets", "targets must be sorted and unique");
        }
    }
    if (!(t_attk >= 0.0) || !(t_attk < clock.t_win)) {
        throw RangeError("snn", "t_attk", "attack must start inside [0, t_win)");
    }
    if (kind == AttackKind::Jam) {
        if (!(t_pulse > 0.0)) {
            throw RangeError("snn", "t_pulse", "JAM duration must be positive");
        }
        if (t_attk + t_pulse > clock.t_win + 1e-9) {
            throw RangeError("snn", "t_pulse", "JAM window must end inside t_win");
        }
    } else if (!std::isfinite(vi)) {
        throw RangeError("snn", "vi", "FLO increment must be finite");
    }
}

AttackPlan make_jam_plan(std::vector<int> targets, int first_pos, int n_positions, const RunClock& clock,
                         int path_length) {
    check_path_index("first_pos", first_pos, path_length);
    if (n_positions < 1 || first_pos + n_positions - 1 > path_length) {
        throw RangeError("snn", "n_positions",
                         std::to_string(n_positions) + " positions from " + std::to_string(first_pos) +
                             " run past path cell " + std::to_string(path_length));
    }
    std::sort(targets.begin(), targets.end());
    AttackPlan plan{AttackKind::Jam, std::move(targets), (first_pos - 1) * kSegmentMs + kAttackOffsetMs,
                    n_positions * kSegmentMs - kAttackOffsetMs, 0.0};
    plan.validate(kNeuronCount, clock);
    return plan;
}

AttackPlan make_flo_plan(std::vector<int> targets, int pos, double vi, const RunClock& clock, int path_length) {
    check_path_index("pos", pos, path_length);
    std::sort(targets.begin(), targets.end());
    AttackPlan plan{AttackKind::Flo, std::move(targets), (pos - 1) * kSegmentMs + kAttackOffsetMs, 0.0, vi};
    plan.validate(kNeuronCount, clock);
    return plan;
}

ActiveAttacks active_attacks(std::span<const AttackPlan> plans, std::int64_t step, const RunClock& clock,
                             int neuron_count) {
    ActiveAttacks out{std::vector<std::uint8_t>(static_cast<std::size_t>(neuron_count), 0), {}};
    for (const AttackPlan& p : plans) {
        const std::int64_t begin = clock.step_of(p.t_attk);
        if (p.kind == AttackKind::Jam) {
            const std::int64_t end = to_step(p.t_attk + p.t_pulse, clock.dt);
            if (step >= begin && step < end) {
                for (int id : p.targets) out.clamped[static_cast<std::size_t>(id)] = 1;
            }
        } else if (step == begin) {
            for (int id : p.targets) out.kicks.emplace_back(id, p.vi);
        }
    }
    return out;
}

SimState SimState::initial(const SpikingNetwork& net) {
    SimState s;
    for (const NeuronState& n : net.initial_state()) {
        s.v.push_back(n.v);
        s.u.push_back(n.u);
    }
    s.pending.assign(s.v.size(), 0.0);
    return s;
}

std::vector<int> step(const SpikingNetwork& net, SimState& state, std::span<const double> currents,
                      const ActiveAttacks& attacks, double dt) {
    const auto n = static_cast<std::size_t>(net.neuron_count());
    if (currents.size() != n || state.v.size() != n || attacks.clamped.size() != n) {
        throw ShapeError("snn", "currents", "expected one entry per neuron");
    }
    std::vector<int> spiked;
    advance(net, state, currents, attacks.clamped, attacks.kicks, dt, spiked, nullptr, 0);
    return spiked;
}

RunOutput simulate(const SpikingNetwork& net, const StimulusSchedule& schedule, std::span<const AttackPlan> attacks,
                   const RunClock& clock, const RunOptions& options, const Checkpoint* resume) {
    clock.validate();
    const int n = net.neuron_count();
    for (const AttackPlan& p : attacks) {
        p.validate(n, clock);
    }
    if (schedule.duration_ms() + 1e-9 < clock.t_win) {
        throw RangeError("snn", "schedule", "stimulus is shorter than t_win");
    }
    for (const StimulusSegment& seg : schedule.segments) {
        if (seg.currents.size() != static_cast<std::size_t>(n)) {
            throw ShapeError("snn", "schedule", "segment currents must cover every neuron");
        }
    }

    RunOutput out;
    out.record.duration_ms = clock.t_win;
    out.record.n_neurons = n;
    SimState state = SimState::initial(net);
    if (resume) {
        state = resume->state;
        out.record.events = resume->prefix;
        for (const AttackPlan& p : attacks) {
            if (clock.step_of(p.t_attk) < state.step) {
                throw RangeError("snn", "resume", "an attack starts before the checkpoint");
            }
        }
    }
    for (int id : options.probes) {
        if (id < 0 || id >= n) {
            throw RangeError("snn", "probes", "probe neuron outside the population");
        }
        out.probes.push_back({id, {}, {}, {}});
    }

    // Segment boundaries in steps.
    std::vector<std::int64_t> seg_end;
    double acc = 0.0;
    for (const StimulusSegment& seg : schedule.segments) {
        acc += seg.duration_ms;
        seg_end.push_back(to_step(acc, clock.dt));
    }

    AttackTimeline timeline(attacks, clock, n);
    auto next_checkpoint = std::lower_bound(options.checkpoint_steps.begin(), options.checkpoint_steps.end(), state.step);
    std::vector<int> spiked;
    spiked.reserve(static_cast<std::size_t>(n));
    std::size_t seg = 0;
    const std::int64_t total = clock.steps();

    while (state.step < total) {
        while (seg + 1 < seg_end.size() && state.step >= seg_end[seg]) {
            ++seg;
        }
        if (next_checkpoint != options.checkpoint_steps.end() && *next_checkpoint == state.step) {
            out.checkpoints.push_back({state, out.record.events});
            ++next_checkpoint;
        }
        timeline.advance_to(state.step);
        const double t = clock.time_of(state.step);
        advance(net, state, schedule.segments[seg].currents, timeline.clamped(), timeline.kicks(), clock.dt, spiked,
                out.probes.data(), out.probes.size());
        for (int id : spiked) {
            out.record.events.push_back({id, t});
        }
    }
    return out;
}

metrics::SpikeRecord run(const SpikingNetwork& net, const StimulusSchedule& schedule,
                         std::span<const AttackPlan> attacks, const RunClock& clock, std::uint64_t /*seed*/) {
    return simulate(net, schedule, attacks, clock).record;
}

}  // namespace neurostrike::snn
