#include "neurostrike/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "neurostrike/error.hpp"
#include "neurostrike/metrics.hpp"
#include "neurostrike/random.hpp"

namespace neurostrike::experiments {

namespace {

constexpr std::uint64_t kTargetStream = 0x7461726765747331ULL;
constexpr double kCnnJamValue = -1.0;

// Bio increment (mV) and the CNN output importance (%) it is compared with.
constexpr std::pair<double, double> kFloPairs[] = {{10.0, 15.0}, {20.0, 30.0}, {40.0, 60.0}, {60.0, 90.0}};

std::vector<int> range_inclusive(int lo, int hi) {
    std::vector<int> v(static_cast<std::size_t>(hi - lo + 1));
    std::iota(v.begin(), v.end(), lo);
    return v;
}

snn::AttackKind kind_from_string(std::string_view s) {
    if (s == "jam") return snn::AttackKind::Jam;
    if (s == "flo") return snn::AttackKind::Flo;
    throw RangeError("experiments", "kind", "attack kind must be \"jam\" or \"flo\", got \"" + std::string(s) + "\"");
}

Scenario scenario_from_string(std::string_view s) {
    if (s == "bio") return Scenario::Bio;
    if (s == "cnn") return Scenario::Cnn;
    throw RangeError("experiments", "scenario", "unknown scenario \"" + std::string(s) + "\"");
}

// Runs tasks[0..n) on up to `jobs` threads; each task writes its own slot.
void run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& task, const ProgressFn& progress) {
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex report_mutex;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(failure_mutex);
                if (failure) return;
            }
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
            const std::size_t d = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(report_mutex);
                progress(d, n);
            }
        }
    };
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

RunResult bio_row(const SweepConfig& cfg, int n, int position, double amplitude, int exec,
                  const metrics::SpikeRecord& rec) {
    RunResult r;
    r.scenario = Scenario::Bio;
    r.attack = cfg.kind;
    r.n_neurons = n;
    r.position = position;
    r.amplitude = amplitude;
    r.execution = exec;
    r.target_seed = target_seed(cfg.master_seed, exec, n);
    r.n_spikes = static_cast<std::int64_t>(metrics::count_spikes(rec));
    r.dispersion_pct = metrics::temporal_dispersion(rec);
    return r;
}

RunResult cnn_row(const SweepConfig& cfg, int n, int position, double amplitude, int exec,
                  const qnet::EpisodeResult& ep) {
    RunResult r;
    r.scenario = Scenario::Cnn;
    r.attack = cfg.kind;
    r.n_neurons = n;
    r.position = position;
    r.amplitude = amplitude;
    r.execution = exec;
    r.target_seed = target_seed(cfg.master_seed, exec, n);
    r.steps = ep.steps;
    r.success = ep.success;
    return r;
}

template <class T>
T parse_number(std::string_view field, const char* column) {
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw RangeError("experiments", column, "cannot parse \"" + std::string(field) + "\"");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t p = line.find(sep, start);
        if (p == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, p - start));
        start = p + 1;
    }
}

constexpr std::string_view kResultsHeader =
    "scenario,attack,n_neurons,position,amplitude,execution,target_seed,n_spikes,dispersion_pct,steps,success";

}  // namespace

// ---------------------------------------------------------------- config

SweepConfig SweepConfig::jam_defaults() {
    SweepConfig c;
    c.kind = snn::AttackKind::Jam;
    c.neuron_counts = {5, 35, 55, 75, 105};
    c.positions = range_inclusive(1, 27);
    return c;
}

SweepConfig SweepConfig::jam_restricted() {
    SweepConfig c = jam_defaults();
    c.neuron_counts = range_inclusive(1, 20);
    c.positions = {27};
    return c;
}

SweepConfig SweepConfig::flo_defaults() {
    SweepConfig c;
    c.kind = snn::AttackKind::Flo;
    c.neuron_counts = {5, 35, 55, 75, 105};
    c.positions = range_inclusive(1, 27);
    c.amplitudes = {10.0, 20.0, 40.0, 60.0};
    return c;
}

SweepConfig SweepConfig::quick() const {
    SweepConfig c = *this;
    c.executions = 3;
    c.positions = {1, 14, 27};
    return c;
}

void SweepConfig::validate() const {
    if (executions < 1) throw RangeError("experiments", "executions", "at least one execution is required");
    if (neuron_counts.empty()) throw RangeError("experiments", "neuron_counts", "no neuron counts given");
    for (int n : neuron_counts) {
        if (n < 0 || n > snn::kNeuronCount) {
            throw RangeError("experiments", "neuron_counts", "count " + std::to_string(n) + " outside 0..276");
        }
    }
    if (positions.empty()) throw RangeError("experiments", "positions", "no positions given");
    for (int p : positions) {
        if (p < 1 || p > 27) {
            throw RangeError("experiments", "positions", "position " + std::to_string(p) + " outside 1..27");
        }
    }
    if (kind == snn::AttackKind::Flo) {
        if (amplitudes.empty()) throw RangeError("experiments", "amplitudes", "FLO needs at least one increment");
        for (double a : amplitudes) (void)cnn_importance_for(a);
    } else if (!amplitudes.empty()) {
        throw RangeError("experiments", "amplitudes", "JAM amplitudes are fixed (clamp to v_min, CNN -1)");
    }
    if (!(dt > 0.0)) throw RangeError("experiments", "dt", "time step must be positive");
    if (cap < 1) throw RangeError("experiments", "cap", "step cap must be positive");
    if (!(gain >= 0.0) || !std::isfinite(gain)) throw RangeError("experiments", "gain", "gain must be >= 0");
}

std::string SweepConfig::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = snn::to_string(kind);
    j["neuron_counts"] = neuron_counts;
    j["positions"] = positions;
    j["amplitudes"] = amplitudes;
    j["executions"] = executions;
    j["master_seed"] = master_seed;
    j["dt"] = dt;
    j["cap"] = cap;
    j["gain"] = gain;
    return j.dump(2) + "\n";
}

SweepConfig SweepConfig::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw RangeError("experiments", "config", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw RangeError("experiments", "config", "config must be a JSON object");
    const auto kind = kind_from_string(j.value("kind", std::string("jam")));
    SweepConfig c = kind == snn::AttackKind::Jam ? jam_defaults() : flo_defaults();
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "kind") continue;
            if (key == "neuron_counts") value.get_to(c.neuron_counts);
            else if (key == "positions") value.get_to(c.positions);
            else if (key == "amplitudes") value.get_to(c.amplitudes);
            else if (key == "executions") value.get_to(c.executions);
            else if (key == "master_seed") value.get_to(c.master_seed);
            else if (key == "dt") value.get_to(c.dt);
            else if (key == "cap") value.get_to(c.cap);
            else if (key == "gain") value.get_to(c.gain);
            else throw RangeError("experiments", key, "unknown config key");
        }
    } catch (const nlohmann::json::exception& e) {
        throw RangeError("experiments", "config", std::string("wrong value type: ") + e.what());
    }
    c.validate();
    return c;
}

SweepConfig SweepConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open sweep config");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

double cnn_importance_for(double vi_mv) {
    for (const auto& [vi, pct] : kFloPairs) {
        if (vi == vi_mv) return pct;
    }
    throw RangeError("experiments", "amplitudes",
                     "increment " + metrics::format_real(vi_mv) + " mV has no CNN counterpart (10, 20, 40, 60)");
}

std::string_view to_string(Scenario s) { return s == Scenario::Bio ? "bio" : "cnn"; }

// ---------------------------------------------------------------- targets

std::uint64_t target_seed(std::uint64_t master_seed, int execution, int n) {
    return hash_seed({kTargetStream, master_seed, static_cast<std::uint64_t>(execution), static_cast<std::uint64_t>(n)});
}

std::vector<int> sample_targets(int n, int execution, std::uint64_t master_seed) {
    if (n < 0 || n > snn::kNeuronCount) {
        throw RangeError("experiments", "n", "cannot sample " + std::to_string(n) + " of 276 neurons");
    }
    if (execution < 0) throw RangeError("experiments", "execution", "execution index must be >= 0");
    Rng rng(target_seed(master_seed, execution, n));
    return sample_without_replacement(rng, snn::kNeuronCount, n);
}

// ---------------------------------------------------------------- workbench

namespace {

snn::RunOutput baseline_with_checkpoints(const snn::SpikingNetwork& net, const snn::StimulusSchedule& schedule,
                                         const snn::RunClock& clock, const maze::OptimalPath& path) {
    snn::RunOptions opts;
    for (std::size_t pos = 1; pos <= path.size(); ++pos) {
        const double t = (static_cast<double>(pos) - 1.0) * snn::kSegmentMs + snn::kAttackOffsetMs;
        if (t < clock.t_win) opts.checkpoint_steps.push_back(clock.step_of(t));
    }
    return snn::simulate(net, schedule, {}, clock, opts);
}

}  // namespace

Workbench::Workbench(maze::MazeGrid grid, qnet::QNetwork net, double gain, double dt)
    : grid_(std::move(grid)),
      path_(maze::shortest_path(grid_)),
      net_(std::move(net)),
      snn_(snn::translate(net_, gain > 0.0 ? gain : snn::default_gain(net_))),
      schedule_(snn::build_stimulus(grid_, path_)),
      clock_{schedule_.duration_ms(), dt} {
    clock_.validate();
    baseline_ = baseline_with_checkpoints(snn_, schedule_, clock_, path_);
}

const snn::Checkpoint* Workbench::checkpoint_at(double t_ms) const {
    const std::int64_t s = clock_.step_of(t_ms);
    const snn::Checkpoint* best = nullptr;
    for (const snn::Checkpoint& c : baseline_.checkpoints) {
        if (c.state.step <= s && (!best || c.state.step > best->state.step)) best = &c;
    }
    return best;
}

metrics::SpikeRecord Workbench::run_bio(std::span<const snn::AttackPlan> attacks) const {
    std::vector<snn::AttackPlan> active;
    for (const snn::AttackPlan& p : attacks) {
        if (!p.targets.empty()) active.push_back(p);
    }
    if (active.empty()) return baseline_.record;
    double earliest = active.front().t_attk;
    for (const snn::AttackPlan& p : active) earliest = std::min(earliest, p.t_attk);
    const snn::Checkpoint* resume = checkpoint_at(earliest);
    return snn::simulate(snn_, schedule_, active, clock_, {}, resume).record;
}

qnet::EpisodeResult Workbench::run_cnn_jam(std::span<const int> targets, int cap) const {
    return cnn_jam_episode(net_, grid_, targets, cap);
}

qnet::EpisodeResult Workbench::run_cnn_flo(std::span<const int> targets, int position, double importance_pct,
                                           int cap) const {
    return cnn_flo_episode(net_, grid_, path_, targets, position, importance_pct, cap);
}

qnet::EpisodeResult cnn_jam_episode(const qnet::QNetwork& net, const maze::MazeGrid& grid, std::span<const int> targets,
                                    int cap) {
    const auto ov = qnet::NodeOverrideSet::uniform(targets, qnet::NodeOverride::set_to(kCnnJamValue));
    return qnet::play_episode(net, grid, grid.start(), ov, qnet::ActivationRule::always(), {.cap = cap});
}

qnet::EpisodeResult cnn_flo_episode(const qnet::QNetwork& net, const maze::MazeGrid& grid,
                                    const maze::OptimalPath& path, std::span<const int> targets, int position,
                                    double importance_pct, int cap) {
    const auto ov = qnet::NodeOverrideSet::uniform(targets, qnet::NodeOverride::scale(1.0 + importance_pct / 100.0));
    const int last = static_cast<int>(path.size());
    if (position < 1 || position > last) {
        throw RangeError("experiments", "position", "position " + std::to_string(position) + " is off the path");
    }
    if (position == last) {
        return qnet::play_episode(net, grid, path[static_cast<std::size_t>(last - 2)], ov,
                                  qnet::ActivationRule::always(), {.cap = cap});
    }
    return qnet::play_episode(net, grid, grid.start(), ov, qnet::ActivationRule::from_path_index(path, position),
                              {.cap = cap});
}

// ---------------------------------------------------------------- sweeps

std::vector<RunResult> run_jam_sweep(const Workbench& bench, const SweepConfig& cfg, int jobs,
                                     const ProgressFn& progress) {
    cfg.validate();
    if (cfg.kind != snn::AttackKind::Jam) throw RangeError("experiments", "kind", "run_jam_sweep needs a JAM config");
    struct Cell {
        int n, consecutive, exec;
    };
    std::vector<Cell> cells;
    for (int n : cfg.neuron_counts)
        for (int c : cfg.positions)
            for (int e = 0; e < cfg.executions; ++e) cells.push_back({n, c, e});

    const double clamp = bench.network().params().v_min;
    std::vector<RunResult> out(cells.size() * 2);
    run_parallel(
        cells.size(), jobs,
        [&](std::size_t i) {
            const Cell& cell = cells[i];
            const auto targets = sample_targets(cell.n, cell.exec, cfg.master_seed);
            const auto plan = snn::make_jam_plan(targets, 1, cell.consecutive, bench.clock(),
                                                 static_cast<int>(bench.path().size()));
            const auto rec = bench.run_bio(std::span(&plan, 1));
            out[2 * i] = bio_row(cfg, cell.n, cell.consecutive, clamp, cell.exec, rec);
            out[2 * i + 1] =
                cnn_row(cfg, cell.n, cell.consecutive, kCnnJamValue, cell.exec, bench.run_cnn_jam(targets, cfg.cap));
        },
        progress);
    return out;
}

std::vector<RunResult> run_flo_sweep(const Workbench& bench, const SweepConfig& cfg, int jobs,
                                     const ProgressFn& progress) {
    cfg.validate();
    if (cfg.kind != snn::AttackKind::Flo) throw RangeError("experiments", "kind", "run_flo_sweep needs a FLO config");
    struct Cell {
        int position, n;
        double vi;
        int exec;
    };
    std::vector<Cell> cells;
    for (int p : cfg.positions)
        for (int n : cfg.neuron_counts)
            for (double vi : cfg.amplitudes)
                for (int e = 0; e < cfg.executions; ++e) cells.push_back({p, n, vi, e});

    std::vector<RunResult> out(cells.size() * 2);
    run_parallel(
        cells.size(), jobs,
        [&](std::size_t i) {
            const Cell& cell = cells[i];
            const auto targets = sample_targets(cell.n, cell.exec, cfg.master_seed);
            const auto plan = snn::make_flo_plan(targets, cell.position, cell.vi, bench.clock(),
                                                 static_cast<int>(bench.path().size()));
            const auto rec = bench.run_bio(std::span(&plan, 1));
            const double pct = cnn_importance_for(cell.vi);
            out[2 * i] = bio_row(cfg, cell.n, cell.position, cell.vi, cell.exec, rec);
            out[2 * i + 1] = cnn_row(cfg, cell.n, cell.position, pct, cell.exec,
                                     bench.run_cnn_flo(targets, cell.position, pct, cfg.cap));
        },
        progress);
    return out;
}

// ---------------------------------------------------------------- correlation

std::string_view to_string(Feature f) {
    switch (f) {
        case Feature::Position: return "position";
        case Feature::Spikes: return "n_spikes";
        case Feature::Dispersion: return "dispersion_pct";
        case Feature::Steps: return "steps";
        case Feature::Neurons: return "n_neurons";
        case Feature::Success: return "success";
    }
    return "?";
}

Feature feature_from_string(std::string_view name) {
    for (Feature f : {Feature::Position, Feature::Spikes, Feature::Dispersion, Feature::Steps, Feature::Neurons,
                      Feature::Success}) {
        if (to_string(f) == name) return f;
    }
    throw RangeError("experiments", "features", "unknown feature \"" + std::string(name) + "\"");
}

std::vector<Feature> default_features(const SweepConfig& cfg) {
    std::vector<Feature> f;
    if (cfg.positions.size() > 1) f.push_back(Feature::Position);
    f.insert(f.end(), {Feature::Spikes, Feature::Dispersion, Feature::Steps});
    if (cfg.neuron_counts.size() > 1) f.push_back(Feature::Neurons);
    return f;
}

std::vector<Feature> default_features(std::span<const RunResult> results) {
    std::set<int> positions, neurons;
    for (const RunResult& r : results) {
        positions.insert(r.position);
        neurons.insert(r.n_neurons);
    }
    std::vector<Feature> f;
    if (positions.size() > 1) f.push_back(Feature::Position);
    f.insert(f.end(), {Feature::Spikes, Feature::Dispersion, Feature::Steps});
    if (neurons.size() > 1) f.push_back(Feature::Neurons);
    return f;
}

double CorrelationReport::at(Feature a, Feature b) const {
    const auto ia = std::find(features.begin(), features.end(), a);
    const auto ib = std::find(features.begin(), features.end(), b);
    if (ia == features.end() || ib == features.end()) {
        throw RangeError("experiments", "features", "feature not in report");
    }
    return r[static_cast<std::size_t>(ia - features.begin())][static_cast<std::size_t>(ib - features.begin())];
}

std::string CorrelationReport::to_csv() const {
    std::string s = "feature";
    for (Feature f : features) (s += ',') += to_string(f);
    s += '\n';
    for (std::size_t i = 0; i < features.size(); ++i) {
        s += to_string(features[i]);
        for (double v : r[i]) (s += ',') += metrics::format_real(v);
        s += '\n';
    }
    return s;
}

namespace {

using JoinKey = std::tuple<int, int, int, double, int>;  // attack, n, position, paired amplitude, execution

double paired_amplitude(const RunResult& row) {
    if (row.scenario == Scenario::Cnn) return row.amplitude;
    return row.attack == snn::AttackKind::Flo ? cnn_importance_for(row.amplitude) : kCnnJamValue;
}

struct Side {
    double sum_a = 0.0;
    double sum_b = 0.0;
    int count = 0;
};

struct Joined {
    Side bio;  // spikes, dispersion
    Side cnn;  // steps, success
};

double feature_value(Feature f, const JoinKey& key, const Joined& j) {
    switch (f) {
        case Feature::Position: return std::get<2>(key);
        case Feature::Neurons: return std::get<1>(key);
        case Feature::Spikes: return j.bio.sum_a / j.bio.count;
        case Feature::Dispersion: return j.bio.sum_b / j.bio.count;
        case Feature::Steps: return j.cnn.sum_a / j.cnn.count;
        case Feature::Success: return j.cnn.sum_b / j.cnn.count;
    }
    return 0.0;
}

}  // namespace

CorrelationReport correlate(std::span<const RunResult> results, std::span<const Feature> features) {
    if (features.empty()) throw RangeError("experiments", "features", "no features requested");
    std::map<JoinKey, Joined> groups;
    for (const RunResult& row : results) {
        const JoinKey key{static_cast<int>(row.attack), row.n_neurons, row.position, paired_amplitude(row),
                          row.execution};
        Joined& g = groups[key];
        if (row.scenario == Scenario::Bio) {
            if (!row.n_spikes || !row.dispersion_pct) {
                throw RangeError("experiments", "results", "bio row without spike metrics");
            }
            g.bio.sum_a += static_cast<double>(*row.n_spikes);
            g.bio.sum_b += *row.dispersion_pct;
            ++g.bio.count;
        } else {
            if (!row.steps || !row.success) throw RangeError("experiments", "results", "cnn row without step metrics");
            g.cnn.sum_a += *row.steps;
            g.cnn.sum_b += *row.success ? 1.0 : 0.0;
            ++g.cnn.count;
        }
    }

    std::vector<std::vector<double>> columns(features.size());
    std::size_t rows = 0;
    for (const auto& [key, g] : groups) {
        if (g.bio.count == 0 || g.cnn.count == 0) continue;
        ++rows;
        for (std::size_t i = 0; i < features.size(); ++i) columns[i].push_back(feature_value(features[i], key, g));
    }

    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& col = columns[i];
        if (col.size() < 2 || std::all_of(col.begin(), col.end(), [&](double x) { return x == col[0]; })) {
            throw DegenerateError("experiments", std::string(to_string(features[i])),
                                  "feature column is constant over " + std::to_string(rows) + " joined rows");
        }
    }

    CorrelationReport rep;
    rep.features.assign(features.begin(), features.end());
    rep.rows = rows;
    rep.r.assign(features.size(), std::vector<double>(features.size(), 1.0));
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (std::size_t k = i + 1; k < features.size(); ++k) {
            const double v = metrics::pearson(columns[i], columns[k]);
            rep.r[i][k] = v;
            rep.r[k][i] = v;
        }
    }
    return rep;
}

double within_scenario(std::span<const RunResult> results, Scenario scenario, Feature a, Feature b) {
    auto value = [&](const RunResult& r, Feature f) -> double {
        switch (f) {
            case Feature::Position: return r.position;
            case Feature::Neurons: return r.n_neurons;
            case Feature::Spikes: return static_cast<double>(r.n_spikes.value());
            case Feature::Dispersion: return r.dispersion_pct.value();
            case Feature::Steps: return r.steps.value();
            case Feature::Success: return r.success.value() ? 1.0 : 0.0;
        }
        return 0.0;
    };
    std::vector<double> xs, ys;
    try {
        for (const RunResult& r : results) {
            if (r.scenario != scenario) continue;
            xs.push_back(value(r, a));
            ys.push_back(value(r, b));
        }
    } catch (const std::bad_optional_access&) {
        throw RangeError("experiments", "features", "feature not recorded for this scenario");
    }
    return metrics::pearson(xs, ys);
}

// ---------------------------------------------------------------- CSV

std::string results_csv(std::span<const RunResult> results) {
    std::string s(kResultsHeader);
    s += '\n';
    for (const RunResult& r : results) {
        s += to_string(r.scenario);
        s += ',';
        s += snn::to_string(r.attack);
        s += ',' + std::to_string(r.n_neurons);
        s += ',' + std::to_string(r.position);
        s += ',' + metrics::format_real(r.amplitude);
        s += ',' + std::to_string(r.execution);
        s += ',' + std::to_string(r.target_seed);
        s += ',';
        if (r.n_spikes) s += std::to_string(*r.n_spikes);
        s += ',';
        if (r.dispersion_pct) s += metrics::format_real(*r.dispersion_pct);
        s += ',';
        if (r.steps) s += std::to_string(*r.steps);
        s += ',';
        if (r.success) s += *r.success ? "1" : "0";
        s += '\n';
    }
    return s;
}

std::vector<RunResult> parse_results_csv(std::string_view text) {
    std::vector<RunResult> out;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (header) {
            if (line != kResultsHeader) throw RangeError("experiments", "header", "unexpected results header");
            header = false;
            continue;
        }
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 11) throw ShapeError("experiments", "columns", "results row needs 11 fields");
        RunResult r;
        r.scenario = scenario_from_string(f[0]);
        r.attack = kind_from_string(f[1]);
        r.n_neurons = parse_number<int>(f[2], "n_neurons");
        r.position = parse_number<int>(f[3], "position");
        r.amplitude = parse_number<double>(f[4], "amplitude");
        r.execution = parse_number<int>(f[5], "execution");
        r.target_seed = parse_number<std::uint64_t>(f[6], "target_seed");
        if (!f[7].empty()) r.n_spikes = parse_number<std::int64_t>(f[7], "n_spikes");
        if (!f[8].empty()) r.dispersion_pct = parse_number<double>(f[8], "dispersion_pct");
        if (!f[9].empty()) r.steps = parse_number<int>(f[9], "steps");
        if (!f[10].empty()) {
            if (f[10] != "0" && f[10] != "1") throw RangeError("experiments", "success", "success must be 0 or 1");
            r.success = f[10] == "1";
        }
        const bool bio_block = r.n_spikes || r.dispersion_pct;
        const bool cnn_block = r.steps || r.success;
        const bool ok = r.scenario == Scenario::Bio ? (r.n_spikes && r.dispersion_pct && !cnn_block)
                                                    : (r.steps && r.success && !bio_block);
        if (!ok) throw ShapeError("experiments", "columns", "row must fill exactly its scenario's metrics");
        out.push_back(r);
    }
    if (header) throw RangeError("experiments", "header", "results file is empty");
    return out;
}

void persist(std::span<const RunResult> results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open results file for writing");
    out << results_csv(results);
    if (!out) throw IoError(path.string(), "write failed");
}

std::vector<RunResult> load_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open results file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_results_csv(ss.str());
}

}  // namespace neurostrike::experiments
