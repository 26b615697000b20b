#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurostrike/maze.hpp"
#include "neurostrike/qnet.hpp"
#include "neurostrike/snn.hpp"

namespace neurostrike::experiments {

/// Parameters of one sweep. For JAM `positions` lists how many consecutive
/// path cells are attacked from the first one; for FLO it lists the single
/// attacked position. `amplitudes` holds the FLO voltage increments (mV); JAM
/// always clamps to v_min on the bio side and writes -1 on the CNN side.
struct SweepConfig {
    snn::AttackKind kind = snn::AttackKind::Jam;
    std::vector<int> neuron_counts;
    std::vector<int> positions;
    std::vector<double> amplitudes;
    int executions = 10;
    std::uint64_t master_seed = 1;
    double dt = 0.1;
    int cap = qnet::kDefaultStepCap;
    double gain = 0.0;  ///< 0 selects snn::default_gain

    /// Table 3 protocol: 5 neuron counts x 27 consecutive lengths x 10 runs.
    static SweepConfig jam_defaults();
    /// The 1..20 neuron range with the whole path jammed, used for the JAM correlations.
    static SweepConfig jam_restricted();
    /// Table 5 protocol: 27 positions x 5 neuron counts x 4 increments x 10 runs.
    static SweepConfig flo_defaults();
    /// Desk-scale variant: 3 executions and positions {1, 14, 27}.
    SweepConfig quick() const;

    void validate() const;

    /// JSON object with the field names above; `kind` is "jam" or "flo".
    std::string to_json() const;
    static SweepConfig from_json(std::string_view text);
    static SweepConfig load(const std::filesystem::path& path);
};

/// CNN output-importance percentage paired with a bio increment (10->15, 20->30, 40->60, 60->90).
double cnn_importance_for(double vi_mv);

enum class Scenario { Bio, Cnn };

std::string_view to_string(Scenario s);

/// One executed run. Bio rows fill n_spikes/dispersion_pct, CNN rows fill steps/success.
struct RunResult {
    Scenario scenario = Scenario::Bio;
    snn::AttackKind attack = snn::AttackKind::Jam;
    int n_neurons = 0;
    int position = 0;        ///< FLO attack position, or JAM consecutive positions
    double amplitude = 0.0;  ///< bio mV (clamp level or increment), CNN output importance
    int execution = 0;
    std::uint64_t target_seed = 0;
    std::optional<std::int64_t> n_spikes;
    std::optional<double> dispersion_pct;
    std::optional<int> steps;
    std::optional<bool> success;

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

/// Seed of the target set for (master seed, execution, n).
std::uint64_t target_seed(std::uint64_t master_seed, int execution, int n);

/// Uniform draw of n distinct neuron ids out of 276, sorted.
std::vector<int> sample_targets(int n, int execution, std::uint64_t master_seed);

/// CNN episode from the maze start with every target node forced to -1.
qnet::EpisodeResult cnn_jam_episode(const qnet::QNetwork& net, const maze::MazeGrid& grid, std::span<const int> targets,
                                    int cap);

/// CNN episode with targets scaled by (1 + importance/100) once the agent
/// reaches 1-based path `position`. The exit ends an episode on arrival, so
/// the last position is attacked from the cell before it.
qnet::EpisodeResult cnn_flo_episode(const qnet::QNetwork& net, const maze::MazeGrid& grid,
                                    const maze::OptimalPath& path, std::span<const int> targets, int position,
                                    double importance_pct, int cap);

/// Everything a sweep needs besides its config: maze, trained weights and the
/// derived spiking network, stimulus and baseline.
class Workbench {
public:
    Workbench(maze::MazeGrid grid, qnet::QNetwork net, double gain, double dt);

    const maze::MazeGrid& grid() const noexcept { return grid_; }
    const maze::OptimalPath& path() const noexcept { return path_; }
    const qnet::QNetwork& qnetwork() const noexcept { return net_; }
    const snn::SpikingNetwork& network() const noexcept { return snn_; }
    const snn::StimulusSchedule& schedule() const noexcept { return schedule_; }
    const snn::RunClock& clock() const noexcept { return clock_; }

    /// Attack-free spike record over the whole window.
    const metrics::SpikeRecord& baseline() const noexcept { return baseline_.record; }

    /// Baseline state at the start of the step where `t_ms` falls, if it was captured.
    const snn::Checkpoint* checkpoint_at(double t_ms) const;

    /// Bio run; resumes from a baseline checkpoint when the attack allows.
    metrics::SpikeRecord run_bio(std::span<const snn::AttackPlan> attacks) const;

    /// CNN episode for a sweep cell.
    qnet::EpisodeResult run_cnn_jam(std::span<const int> targets, int cap) const;
    qnet::EpisodeResult run_cnn_flo(std::span<const int> targets, int position, double importance_pct,
                                    int cap) const;

private:
    maze::MazeGrid grid_;
    maze::OptimalPath path_;
    qnet::QNetwork net_;
    snn::SpikingNetwork snn_;
    snn::StimulusSchedule schedule_;
    snn::RunClock clock_;
    snn::RunOutput baseline_;
};

/// Progress callback: (finished tasks, total tasks).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// Runs every (n, consecutive, execution) cell; bio and CNN rows alternate.
/// Output order follows the config, whatever `jobs` is.
std::vector<RunResult> run_jam_sweep(const Workbench& bench, const SweepConfig& cfg, int jobs = 1,
                                     const ProgressFn& progress = {});

/// Runs every (position, n, vi, execution) cell; bio and CNN rows alternate.
std::vector<RunResult> run_flo_sweep(const Workbench& bench, const SweepConfig& cfg, int jobs = 1,
                                     const ProgressFn& progress = {});

enum class Feature { Position, Spikes, Dispersion, Steps, Neurons, Success };

std::string_view to_string(Feature f);
Feature feature_from_string(std::string_view name);

/// Feature columns for a sweep's correlation report: position and neuron
/// count are left out when the sweep fixes them.
std::vector<Feature> default_features(const SweepConfig& cfg);
std::vector<Feature> default_features(std::span<const RunResult> results);

struct CorrelationReport {
    std::vector<Feature> features;
    std::vector<std::vector<double>> r;
    std::size_t rows = 0;  ///< joined samples behind the matrix

    double at(Feature a, Feature b) const;
    /// Matrix with a header row and a label column.
    std::string to_csv() const;
};

/// Pairs bio and CNN rows on (attack, n_neurons, position, amplitude pair,
/// execution), averaging when a key has several rows, then correlates every
/// pair of features. Throws DegenerateError when a column is constant.
CorrelationReport correlate(std::span<const RunResult> results, std::span<const Feature> features);

/// Correlation between two features over the rows of one scenario only
/// (e.g. steps vs success over CNN rows).
double within_scenario(std::span<const RunResult> results, Scenario scenario, Feature a, Feature b);

std::string results_csv(std::span<const RunResult> results);
std::vector<RunResult> parse_results_csv(std::string_view text);

/// Writes results_csv to path; throws IoError naming the path.
void persist(std::span<const RunResult> results, const std::filesystem::path& path);
std::vector<RunResult> load_results(const std::filesystem::path& path);

}  // namespace neurostrike::experiments
