#include "neurostrike_cli/cli.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "neurostrike/error.hpp"
#include "neurostrike/experiments.hpp"
#include "neurostrike/maze.hpp"
#include "neurostrike/metrics.hpp"
#include "neurostrike/qnet.hpp"
#include "neurostrike/snn.hpp"
#include "neurostrike/trainer.hpp"

#ifndef NEUROSTRIKE_VERSION
#define NEUROSTRIKE_VERSION "0.0.0"
#endif

namespace neurostrike::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string config;
    int jobs = 1;
    bool quick = false;
};

struct Inputs {
    std::string maze;
    std::string weights;
};

struct AttackFlags {
    std::string attack = "none";
    int n_neurons = 35;
    int execution = 0;
    std::optional<std::uint64_t> targets_seed;
    int first_pos = 1;
    int n_pos = 1;
    double vi = 40.0;
    double importance = 60.0;
};

struct BioFlags {
    double dt = 0.1;
    double gain = 0.0;
    std::optional<double> t_win;
};

// Collects what a run read and wrote, then renders manifest.txt.
class Manifest {
public:
    Manifest(std::string command, const std::vector<std::string>& args) : command_(std::move(command)) {
        for (const auto& a : args) (argv_ += argv_.empty() ? "" : " ") += a;
    }
    void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
    void input(const std::string& role, const std::string& path) {
        set(role, path + " fnv1a64=" + file_digest(path));
    }
    void output(const fs::path& path) { outputs_.push_back(path); }
    void set_config(std::string json) { config_ = std::move(json); }

    void write(const fs::path& dir) const {
        std::ostringstream m;
        m << "tool: neurostrike " << NEUROSTRIKE_VERSION << "\n";
        m << "command: " << command_ << "\n";
        m << "argv: " << argv_ << "\n";
        for (const auto& [k, v] : entries_) m << k << ": " << v << "\n";
        if (!config_.empty()) m << "config:\n" << config_;
        m << "outputs:\n";
        for (const auto& p : outputs_) m << "  " << p.filename().string() << " fnv1a64=" << file_digest(p.string()) << "\n";
        write_text(dir / "manifest.txt", m.str());
    }

    static void write_text(const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError(path.string(), "cannot open for writing");
        out << text;
        if (!out) throw IoError(path.string(), "write failed");
    }

private:
    std::string command_;
    std::string argv_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::string config_;
    std::vector<fs::path> outputs_;
};

fs::path resolve_out_dir(const Globals& g) {
    std::string dir = g.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("NEUROSTRIKE_OUT"); env && *env) dir = env;
    }
    if (dir.empty()) dir = "neurostrike-out";
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create output directory: " + ec.message());
    return dir;
}

maze::MazeGrid load_maze(const Inputs& in, Manifest& m) {
    if (in.maze.empty()) {
        m.set("maze", "built-in default");
        return maze::default_maze();
    }
    m.input("maze", in.maze);
    return maze::MazeGrid::load(in.maze);
}

qnet::QNetwork load_weights(const Inputs& in, const maze::MazeGrid& grid, std::uint64_t seed, Manifest& m,
                            std::ostream& err) {
    if (!in.weights.empty()) {
        m.input("weights", in.weights);
        return qnet::QNetwork::load(in.weights);
    }
    m.set("weights", "trained in-process, seed " + std::to_string(seed));
    err << "no --weights given; training with seed " << seed << "\n";
    qnet::TrainConfig cfg;
    cfg.seed = seed;
    return qnet::train(grid, cfg);
}

void write_output(Manifest& m, const fs::path& path, const std::string& text, std::ostream& out) {
    Manifest::write_text(path, text);
    m.output(path);
    out << "wrote " << path.string() << "\n";
}

std::vector<int> attack_targets(const AttackFlags& a, std::uint64_t seed, Manifest& m) {
    const std::uint64_t ts = a.targets_seed.value_or(seed);
    m.set("targets", "n=" + std::to_string(a.n_neurons) + " execution=" + std::to_string(a.execution) +
                         " seed=" + std::to_string(ts) + " target_seed=" +
                         std::to_string(experiments::target_seed(ts, a.execution, a.n_neurons)));
    return experiments::sample_targets(a.n_neurons, a.execution, ts);
}

void check_attack_name(const std::string& name) {
    if (name != "none" && name != "jam" && name != "flo") {
        throw CLI::ValidationError("--attack", "must be none, jam or flo");
    }
}

// Spike record of one bio run as configured by the flags.
struct BioRun {
    metrics::SpikeRecord attacked;
    metrics::SpikeRecord baseline;
};

BioRun run_bio(const Globals& g, const Inputs& in, const AttackFlags& a, const BioFlags& b, Manifest& m,
               std::ostream& err) {
    const std::uint64_t seed = g.seed.value_or(1);
    const auto grid = load_maze(in, m);
    const auto net = load_weights(in, grid, seed, m, err);
    const auto path = maze::shortest_path(grid);
    const double gain = b.gain > 0.0 ? b.gain : snn::default_gain(net);
    m.set("gain", metrics::format_real(gain));
    const auto network = snn::translate(net, gain);
    const auto schedule = snn::build_stimulus(grid, path);
    snn::RunClock clock{b.t_win.value_or(schedule.duration_ms()), b.dt};
    clock.validate();
    m.set("clock", "t_win=" + metrics::format_real(clock.t_win) + " dt=" + metrics::format_real(clock.dt));
    std::vector<snn::AttackPlan> plans;
    const int len = static_cast<int>(path.size());
    if (a.attack == "jam") {
        plans.push_back(snn::make_jam_plan(attack_targets(a, seed, m), a.first_pos, a.n_pos, clock, len));
    } else if (a.attack == "flo") {
        plans.push_back(snn::make_flo_plan(attack_targets(a, seed, m), a.first_pos, a.vi, clock, len));
    }
    m.set("attack", a.attack + " first_pos=" + std::to_string(a.first_pos) + " n_pos=" + std::to_string(a.n_pos) +
                        " vi=" + metrics::format_real(a.vi));
    BioRun r;
    r.baseline = snn::run(network, schedule, {}, clock);
    r.attacked = plans.empty() ? r.baseline : snn::run(network, schedule, plans, clock);
    return r;
}

std::string bio_summary(const BioRun& r) {
    std::string s = "run,n_spikes,dispersion_pct\n";
    for (const auto& [name, rec] : {std::pair{"baseline", &r.baseline}, std::pair{"attacked", &r.attacked}}) {
        s += std::string(name) + "," + std::to_string(metrics::count_spikes(*rec)) + "," +
             metrics::format_real(metrics::temporal_dispersion(*rec)) + "\n";
    }
    return s;
}

}  // namespace

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Neuronal jamming and flooding attacks on a maze-solving network and its spiking twin", "neurostrike"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_version_flag("--version", NEUROSTRIKE_VERSION);

    Globals g;
    app.add_option("--seed", g.seed, "Master seed (training, target sampling, sweeps)");
    app.add_option("--out-dir", g.out_dir, "Output directory (falls back to $NEUROSTRIKE_OUT)");
    app.add_option("--config", g.config, "Sweep config file (JSON)")->check(CLI::ExistingFile);
    app.add_option("--jobs", g.jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--quick", g.quick, "3 executions and positions {1, 14, 27}");

    Inputs in;
    AttackFlags atk;
    BioFlags bio;
    std::function<void(Manifest&, const fs::path&)> action;
    std::string command;

    auto add_inputs = [&](CLI::App* sub, bool weights) {
        sub->add_option("--maze", in.maze, "Maze text file (default: built-in layout)")->check(CLI::ExistingFile);
        if (weights) {
            sub->add_option("--weights", in.weights, "Trained weights (default: train with --seed)")
                ->check(CLI::ExistingFile);
        }
    };
    auto add_attack = [&](CLI::App* sub, bool bio_side) {
        sub->add_option("--attack", atk.attack, "none, jam or flo")->capture_default_str();
        sub->add_option("--n-neurons", atk.n_neurons, "Attacked neurons")->capture_default_str();
        sub->add_option("--execution", atk.execution, "Execution index for target sampling")->capture_default_str();
        sub->add_option("--targets-seed", atk.targets_seed, "Target sampling seed (default: --seed)");
        sub->add_option("--first-pos", atk.first_pos, "First attacked position (1-based)")->capture_default_str();
        if (bio_side) {
            sub->add_option("--n-pos", atk.n_pos, "JAM: consecutive positions")->capture_default_str();
            sub->add_option("--vi", atk.vi, "FLO: voltage increment (mV)")->capture_default_str();
            sub->add_option("--dt", bio.dt, "Integration step (ms)")->capture_default_str();
            sub->add_option("--gain", bio.gain, "Weight-to-mV gain (0: default)")->capture_default_str();
            sub->add_option("--t-win", bio.t_win, "Simulated window (ms, default: whole path)");
        } else {
            sub->add_option("--importance", atk.importance, "FLO: output importance (%)")->capture_default_str();
        }
    };

    // train
    auto* train = app.add_subcommand("train", "Train the maze-solving Q-network");
    add_inputs(train, false);
    int max_epochs = qnet::TrainConfig{}.max_epochs;
    std::string weights_name = "weights.qnet";
    train->add_option("--max-epochs", max_epochs, "Episode budget")->capture_default_str();
    train->add_option("--output", weights_name, "Weights file name inside --out-dir")->capture_default_str();
    train->callback([&] {
        command = "train";
        action = [&](Manifest& m, const fs::path& dir) {
            const auto grid = load_maze(in, m);
            qnet::TrainConfig cfg;
            cfg.seed = g.seed.value_or(1);
            cfg.max_epochs = max_epochs;
            m.set("seed", std::to_string(cfg.seed));
            m.set("max_epochs", std::to_string(cfg.max_epochs));
            const auto net = qnet::train(grid, cfg, [&](const qnet::TrainProgress& p) {
                if (p.epoch % 200 == 0) {
                    err << "epoch " << p.epoch << ": wins " << p.report.wins << "/" << p.report.cells << "\n";
                }
            });
            const auto report = qnet::evaluate_policy(net, grid, cfg.step_cap);
            out << "wins " << report.wins << "/" << report.cells << ", steps from start "
                << report.steps_from_start << "\n";
            write_output(m, dir / weights_name, net.to_text(), out);
        };
    });

    // translate
    auto* translate = app.add_subcommand("translate", "Translate trained weights into the spiking topology");
    add_inputs(translate, true);
    translate->add_option("--gain", bio.gain, "Weight-to-mV gain (0: default)")->capture_default_str();
    translate->callback([&] {
        command = "translate";
        action = [&](Manifest& m, const fs::path& dir) {
            const auto grid = load_maze(in, m);
            const auto net = load_weights(in, grid, g.seed.value_or(1), m, err);
            const double gain = bio.gain > 0.0 ? bio.gain : snn::default_gain(net);
            m.set("gain", metrics::format_real(gain));
            const auto network = snn::translate(net, gain);
            out << network.neuron_count() << " neurons, " << network.synapses().size() << " synapses\n";
            write_output(m, dir / "topology.csv", network.topology_csv(), out);
        };
    });

    // run-bio
    auto* run_bio_cmd = app.add_subcommand("run-bio", "Simulate the spiking network, optionally under attack");
    add_inputs(run_bio_cmd, true);
    add_attack(run_bio_cmd, true);
    run_bio_cmd->callback([&] {
        check_attack_name(atk.attack);
        command = "run-bio";
        action = [&](Manifest& m, const fs::path& dir) {
            const BioRun r = run_bio(g, in, atk, bio, m, err);
            out << "spikes " << metrics::count_spikes(r.attacked) << " (baseline "
                << metrics::count_spikes(r.baseline) << ")\n";
            write_output(m, dir / "spikes.csv", metrics::spikes_csv(r.attacked), out);
            write_output(m, dir / "summary.csv", bio_summary(r), out);
        };
    });

    // export-raster
    auto* raster = app.add_subcommand("export-raster", "Tagged raster of an attacked run against the baseline");
    add_inputs(raster, true);
    add_attack(raster, true);
    std::optional<double> view_begin, view_end;
    raster->add_option("--view-begin", view_begin, "Only rows from this time (ms)");
    raster->add_option("--view-end", view_end, "Only rows before this time (ms)");
    raster->callback([&] {
        check_attack_name(atk.attack);
        command = "export-raster";
        action = [&](Manifest& m, const fs::path& dir) {
            const BioRun r = run_bio(g, in, atk, bio, m, err);
            std::optional<metrics::TimeWindow> view;
            if (view_begin || view_end) {
                view = metrics::TimeWindow{view_begin.value_or(0.0), view_end.value_or(r.attacked.duration_ms)};
                m.set("view", metrics::format_real(view->begin_ms) + ".." + metrics::format_real(view->end_ms));
            }
            write_output(m, dir / "raster.csv", metrics::export_raster(r.attacked, r.baseline, view), out);
        };
    });

    // run-cnn
    auto* run_cnn = app.add_subcommand("run-cnn", "Play the maze with the Q-network, optionally under attack");
    add_inputs(run_cnn, true);
    add_attack(run_cnn, false);
    int cap = qnet::kDefaultStepCap;
    run_cnn->add_option("--cap", cap, "Step cap")->capture_default_str();
    run_cnn->callback([&] {
        check_attack_name(atk.attack);
        command = "run-cnn";
        action = [&](Manifest& m, const fs::path& dir) {
            const std::uint64_t seed = g.seed.value_or(1);
            const auto grid = load_maze(in, m);
            const auto net = load_weights(in, grid, seed, m, err);
            m.set("attack", atk.attack + " first_pos=" + std::to_string(atk.first_pos) +
                                " importance=" + metrics::format_real(atk.importance));
            qnet::EpisodeResult ep;
            if (atk.attack == "none") {
                ep = qnet::play_episode(net, grid, grid.start(), {}, qnet::ActivationRule::always(), {.cap = cap});
            } else {
                const auto targets = attack_targets(atk, seed, m);
                ep = atk.attack == "jam" ? experiments::cnn_jam_episode(net, grid, targets, cap)
                                         : experiments::cnn_flo_episode(net, grid, maze::shortest_path(grid), targets,
                                                                        atk.first_pos, atk.importance, cap);
            }
            out << (ep.success ? "exit reached" : "step cap hit") << " after " << ep.steps << " steps\n";
            std::string traj = "step,row,col\n";
            for (std::size_t i = 0; i < ep.trajectory.size(); ++i) {
                traj += std::to_string(i) + "," + std::to_string(ep.trajectory[i].row) + "," +
                        std::to_string(ep.trajectory[i].col) + "\n";
            }
            write_output(m, dir / "trajectory.csv", traj, out);
            write_output(m, dir / "summary.csv",
                         "steps,success\n" + std::to_string(ep.steps) + "," + (ep.success ? "1" : "0") + "\n", out);
        };
    });

    // sweeps
    bool restricted = false;
    auto sweep = [&](snn::AttackKind kind) {
        return [&, kind](Manifest& m, const fs::path& dir) {
            experiments::SweepConfig cfg;
            if (!g.config.empty()) {
                cfg = experiments::SweepConfig::load(g.config);
                m.input("config_file", g.config);
                if (cfg.kind != kind) {
                    throw RangeError("experiments", "kind", "config is for a different attack");
                }
            } else if (kind == snn::AttackKind::Flo) {
                cfg = experiments::SweepConfig::flo_defaults();
            } else {
                cfg = restricted ? experiments::SweepConfig::jam_restricted() : experiments::SweepConfig::jam_defaults();
            }
            if (g.seed) cfg.master_seed = *g.seed;
            if (g.quick) cfg = cfg.quick();
            cfg.validate();
            m.set_config(cfg.to_json());
            m.set("jobs", std::to_string(g.jobs));
            const auto grid = load_maze(in, m);
            const auto net = load_weights(in, grid, cfg.master_seed, m, err);
            const experiments::Workbench bench(grid, net, cfg.gain, cfg.dt);
            std::size_t last_decile = 0;
            auto progress = [&](std::size_t done, std::size_t total) {
                const std::size_t decile = done * 10 / total;
                if (decile != last_decile) {
                    last_decile = decile;
                    err << "sweep " << done << "/" << total << "\n";
                }
            };
            const auto rows = kind == snn::AttackKind::Jam ? experiments::run_jam_sweep(bench, cfg, g.jobs, progress)
                                                           : experiments::run_flo_sweep(bench, cfg, g.jobs, progress);
            write_output(m, dir / "results.csv", experiments::results_csv(rows), out);
            try {
                const auto report = experiments::correlate(rows, experiments::default_features(cfg));
                write_output(m, dir / "correlation.csv", report.to_csv(), out);
            } catch (const DegenerateError& e) {
                err << "warning: no correlation report: " << e.what() << "\n";
                m.set("correlation", std::string("not computed: ") + e.what());
            }
        };
    };
    auto* sweep_jam = app.add_subcommand("sweep-jam", "JAM sweep over neuron counts and consecutive positions");
    add_inputs(sweep_jam, true);
    sweep_jam->add_flag("--restricted", restricted, "1..20 neurons with the whole path jammed (without --config)");
    sweep_jam->callback([&] {
        command = "sweep-jam";
        action = sweep(snn::AttackKind::Jam);
    });
    auto* sweep_flo = app.add_subcommand("sweep-flo", "FLO sweep over positions, neuron counts and increments");
    add_inputs(sweep_flo, true);
    sweep_flo->callback([&] {
        command = "sweep-flo";
        action = sweep(snn::AttackKind::Flo);
    });

    // report
    auto* report = app.add_subcommand("report", "Correlation report from a results CSV");
    std::string results_path;
    std::vector<std::string> feature_names;
    report->add_option("--results", results_path, "results.csv from a sweep")->required()->check(CLI::ExistingFile);
    report->add_option("--features", feature_names, "Feature columns (default: by sweep shape)")->delimiter(',');
    report->callback([&] {
        command = "report";
        action = [&](Manifest& m, const fs::path& dir) {
            m.input("results", results_path);
            const auto rows = experiments::load_results(results_path);
            std::vector<experiments::Feature> features;
            if (feature_names.empty()) {
                features = experiments::default_features(rows);
            } else {
                for (const auto& n : feature_names) features.push_back(experiments::feature_from_string(n));
            }
            const auto rep = experiments::correlate(rows, features);
            out << rep.rows << " joined rows\n";
            write_output(m, dir / "correlation.csv", rep.to_csv(), out);
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (!g.config.empty() && command != "sweep-jam" && command != "sweep-flo") {
            throw CLI::ValidationError("--config", "only sweep-jam and sweep-flo read a config file");
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        if (dynamic_cast<const CLI::RequiredError*>(&e) && app.get_subcommands().empty()) {
            err << app.help();
        }
        return kExitUsage;
    }

    try {
        const fs::path dir = resolve_out_dir(g);
        Manifest manifest(command, args);
        action(manifest, dir);
        manifest.write(dir);
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
}

}  // namespace neurostrike::cli
