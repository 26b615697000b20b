#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neurostrike/maze.hpp"
#include "neurostrike/metrics.hpp"
#include "neurostrike/qnet.hpp"

namespace neurostrike::snn {

inline constexpr int kNeuronCount = qnet::kNodeCount;
inline constexpr int kSynapseCount = qnet::kConv2Nodes * (qnet::kKernelSide * qnet::kKernelSide * qnet::kConv1Filters) +
                                     qnet::kOutputNodes * qnet::kConv2Nodes;  // 5472

inline constexpr double kBaseCurrent = 10.0;         // mV/ms
inline constexpr double kInterveningCurrent = 15.0;  // mV/ms
inline constexpr double kSegmentMs = 1000.0;
inline constexpr double kAttackOffsetMs = 50.0;  // attacks land 50 ms into a position

/// Regular-spiking Izhikevich parameters (units: ms, mV).
struct IzhikevichParams {
    double a = 0.02;
    double b = 0.2;
    double c = -65.0;
    double d = 8.0;
    double v_min = -65.0;
    double v_peak = 30.0;
    /// Sign of u in the membrane equation. -1 is the standard model; +1
    /// reproduces the printed "+u" variant, which never fires for I <= 29.
    double recovery_sign = -1.0;

    void validate() const;
};

struct NeuronState {
    double v = 0.0;
    double u = 0.0;
};

/// Right-hand side of the membrane equations at one state.
struct Derivatives {
    double dv = 0.0;
    double du = 0.0;
};

Derivatives derivatives(const IzhikevichParams& p, NeuronState s, double current);

struct Synapse {
    int pre = 0;
    int post = 0;
    double weight = 0.0;  ///< mV jump on the postsynaptic membrane

    friend bool operator==(const Synapse&, const Synapse&) = default;
};

/// 0 for conv1 neurons, 1 for conv2, 2 for the output layer.
int layer_of(int neuron);

/// Feed-forward population sharing ids with the Q-network nodes.
class SpikingNetwork {
public:
    SpikingNetwork(IzhikevichParams params, std::vector<Synapse> synapses, double gain,
                   int neuron_count = kNeuronCount);

    const IzhikevichParams& params() const noexcept { return params_; }
    const std::vector<Synapse>& synapses() const noexcept { return synapses_; }
    double gain() const noexcept { return gain_; }
    int neuron_count() const noexcept { return neuron_count_; }

    /// Synapses leaving `pre`, sorted by target.
    std::span<const Synapse> outgoing(int pre) const {
        return std::span(synapses_).subspan(offsets_[static_cast<std::size_t>(pre)],
                                            offsets_[static_cast<std::size_t>(pre) + 1] -
                                                offsets_[static_cast<std::size_t>(pre)]);
    }

    /// v = c, u = b * c for every neuron.
    std::vector<NeuronState> initial_state() const;

    /// CSV `pre,post,weight_mV`.
    std::string topology_csv() const;

private:
    IzhikevichParams params_;
    std::vector<Synapse> synapses_;
    std::vector<std::size_t> offsets_;
    double gain_;
    int neuron_count_;
};

/// Gain mapping the largest translated weight magnitude to a 1 mV jump.
double default_gain(const qnet::QNetwork& net);

/// conv2 kernels and dense weights become synapses (scaled by gain); conv1
/// kernels have no counterpart since layer 1 is driven by external current.
SpikingNetwork translate(const qnet::QNetwork& net, double gain, const IzhikevichParams& params = {});

/// Layer-1 neurons whose 3x3 receptive field covers a valid-move neighbour of pos.
std::vector<int> intervening_neurons(const maze::MazeGrid& grid, maze::Position pos);

struct StimulusSegment {
    double duration_ms = kSegmentMs;
    std::vector<double> currents;  ///< mV/ms per neuron
};

struct StimulusSchedule {
    std::vector<StimulusSegment> segments;

    double duration_ms() const;
};

/// One 1 s segment per path cell; intervening neurons get 15 mV/ms, the rest 10.
StimulusSchedule build_stimulus(const maze::MazeGrid& grid, const maze::OptimalPath& path);

/// Constant current for every neuron over one segment of the given length.
StimulusSchedule constant_stimulus(double current, double duration_ms, int neuron_count = kNeuronCount);

struct RunClock {
    double t_win = 27000.0;  ///< ms
    double dt = 0.1;         ///< ms

    void validate() const;
    std::int64_t steps() const;
    /// Index of the step whose interval [k dt, (k+1) dt) contains t.
    std::int64_t step_of(double t_ms) const;
    double time_of(std::int64_t step) const { return static_cast<double>(step) * dt; }
};

enum class AttackKind { Jam, Flo };

std::string_view to_string(AttackKind k);

struct AttackPlan {
    AttackKind kind = AttackKind::Jam;
    std::vector<int> targets;  ///< sorted, unique
    double t_attk = 0.0;       ///< ms
    double t_pulse = 0.0;      ///< ms, JAM only
    double vi = 0.0;           ///< mV, FLO only

    void validate(int neuron_count, const RunClock& clock) const;
};

/// JAM window over `n_positions` path cells starting at 1-based `first_pos`:
/// it opens 50 ms into the first cell and closes at the end of the last one.
AttackPlan make_jam_plan(std::vector<int> targets, int first_pos, int n_positions, const RunClock& clock,
                         int path_length = 27);

/// FLO impulse of vi mV, 50 ms after the agent reaches 1-based position `pos`.
AttackPlan make_flo_plan(std::vector<int> targets, int pos, double vi, const RunClock& clock, int path_length = 27);

/// What the attacks do during one step.
struct ActiveAttacks {
    std::vector<std::uint8_t> clamped;          ///< per neuron, inside a JAM window
    std::vector<std::pair<int, double>> kicks;  ///< FLO increments landing this step
};

ActiveAttacks active_attacks(std::span<const AttackPlan> plans, std::int64_t step, const RunClock& clock,
                             int neuron_count);

/// Mutable integration state. `pending` holds synaptic jumps scheduled by the
/// previous step's spikes.
struct SimState {
    std::vector<double> v;
    std::vector<double> u;
    std::vector<double> pending;
    std::int64_t step = 0;

    static SimState initial(const SpikingNetwork& net);
    friend bool operator==(const SimState&, const SimState&) = default;
};

/// Advances one dt: FLO kicks, forward Euler (pending jumps added to v), JAM
/// clamp to v_min with spiking suppressed, then threshold and reset. Returns
/// the ids that spiked, ascending. Throws DivergenceError on a non-finite state.
std::vector<int> step(const SpikingNetwork& net, SimState& state, std::span<const double> currents,
                      const ActiveAttacks& attacks, double dt);

/// Per-step samples of selected neurons.
struct ProbeTrace {
    int neuron = 0;
    std::vector<double> v_input;  ///< after FLO kicks, before integration
    std::vector<double> v;        ///< end of step
    std::vector<double> u;        ///< end of step
};

/// Full state at the start of a step plus the spikes emitted before it.
struct Checkpoint {
    SimState state;
    std::vector<metrics::SpikeEvent> prefix;
};

struct RunOptions {
    std::vector<int> probes;
    std::vector<std::int64_t> checkpoint_steps;  ///< sorted
};

struct RunOutput {
    metrics::SpikeRecord record;
    std::vector<ProbeTrace> probes;
    std::vector<Checkpoint> checkpoints;
};

/// Integrates [0, t_win). Starting from a checkpoint resumes at its step with
/// its spikes already recorded; attacks must not act before that step.
RunOutput simulate(const SpikingNetwork& net, const StimulusSchedule& schedule, std::span<const AttackPlan> attacks,
                   const RunClock& clock, const RunOptions& options = {}, const Checkpoint* resume = nullptr);

/// Spike record of one run. The engine is noise-free, so `seed` only labels
/// the run; identical inputs always give identical records.
metrics::SpikeRecord run(const SpikingNetwork& net, const StimulusSchedule& schedule,
                         std::span<const AttackPlan> attacks, const RunClock& clock, std::uint64_t seed = 0);

}  // namespace neurostrike::snn
