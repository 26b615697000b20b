#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "neurostrike/error.hpp"
#include "neurostrike/experiments.hpp"
#include "neurostrike/metrics.hpp"
#include "support.hpp"

using namespace neurostrike;
using namespace neurostrike::experiments;

namespace {

const Workbench& bench() {
    static const Workbench wb(maze::default_maze(), testsupport::shipped_weights(), 0.0, 0.1);
    return wb;
}

RunResult bio_row(int n, int pos, double amp, int exec, std::int64_t spikes, double disp) {
    RunResult r;
    r.scenario = Scenario::Bio;
    r.attack = snn::AttackKind::Flo;
    r.n_neurons = n;
    r.position = pos;
    r.amplitude = amp;
    r.execution = exec;
    r.n_spikes = spikes;
    r.dispersion_pct = disp;
    return r;
}

RunResult cnn_row(int n, int pos, double amp, int exec, int steps, bool success) {
    RunResult r;
    r.scenario = Scenario::Cnn;
    r.attack = snn::AttackKind::Flo;
    r.n_neurons = n;
    r.position = pos;
    r.amplitude = amp;
    r.execution = exec;
    r.steps = steps;
    r.success = success;
    return r;
}

}  // namespace

TEST(Targets, SampleSizesAndRange) {
    EXPECT_TRUE(sample_targets(0, 0, 1).empty());
    for (int n : {1, 5, 35, 105, 276}) {
        const auto t = sample_targets(n, 3, 1);
        ASSERT_EQ(t.size(), static_cast<std::size_t>(n));
        EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
        EXPECT_EQ(std::set<int>(t.begin(), t.end()).size(), t.size());
        EXPECT_GE(t.front(), 0);
        EXPECT_LT(t.back(), 276);
    }
    const auto all = sample_targets(276, 0, 1);
    for (int i = 0; i < 276; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
    EXPECT_THROW(sample_targets(277, 0, 1), RangeError);
    EXPECT_THROW(sample_targets(-1, 0, 1), RangeError);
}

TEST(Targets, DeterministicAndSeedDependent) {
    EXPECT_EQ(sample_targets(35, 2, 1), sample_targets(35, 2, 1));
    EXPECT_NE(sample_targets(35, 2, 1), sample_targets(35, 3, 1));
    EXPECT_NE(sample_targets(35, 2, 1), sample_targets(35, 2, 2));
    EXPECT_EQ(target_seed(1, 2, 35), target_seed(1, 2, 35));
    EXPECT_NE(target_seed(1, 2, 35), target_seed(1, 2, 55));
}

TEST(Config, Presets) {
    const auto jam = SweepConfig::jam_defaults();
    EXPECT_EQ(jam.neuron_counts, (std::vector<int>{5, 35, 55, 75, 105}));
    EXPECT_EQ(jam.positions.size(), 27u);
    EXPECT_EQ(jam.executions, 10);
    const auto flo = SweepConfig::flo_defaults();
    EXPECT_EQ(flo.amplitudes, (std::vector<double>{10, 20, 40, 60}));
    const auto restricted = SweepConfig::jam_restricted();
    EXPECT_EQ(restricted.neuron_counts.size(), 20u);
    EXPECT_EQ(restricted.positions, std::vector<int>{27});
    EXPECT_EQ(flo.quick().executions, 3);
}

TEST(Config, JsonRoundTrip) {
    for (const auto& cfg : {SweepConfig::jam_defaults(), SweepConfig::flo_defaults(), SweepConfig::jam_restricted()}) {
        const auto back = SweepConfig::from_json(cfg.to_json());
        EXPECT_EQ(back.to_json(), cfg.to_json());
    }
}

TEST(Config, ShippedFilesMatchPresets) {
    EXPECT_EQ(SweepConfig::load(testsupport::config_path("jam.json")).to_json(), SweepConfig::jam_defaults().to_json());
    EXPECT_EQ(SweepConfig::load(testsupport::config_path("flo.json")).to_json(), SweepConfig::flo_defaults().to_json());
    EXPECT_EQ(SweepConfig::load(testsupport::config_path("jam_restricted.json")).to_json(),
              SweepConfig::jam_restricted().to_json());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_ANY_THROW(SweepConfig::from_json(R"({"kind":"jam","bogus":1})"));
    EXPECT_THROW(SweepConfig::from_json(R"({"kind":"jam","positions":[28]})"), RangeError);
    EXPECT_THROW(SweepConfig::from_json(R"({"kind":"flo","amplitudes":[30]})"), RangeError);
    EXPECT_THROW(SweepConfig::from_json(R"({"kind":"jam","executions":0})"), RangeError);
    EXPECT_THROW(SweepConfig::from_json(R"({"kind":"jam","amplitudes":[10]})"), RangeError);
}

TEST(Pairing, IncrementToImportance) {
    EXPECT_EQ(cnn_importance_for(10), 15.0);
    EXPECT_EQ(cnn_importance_for(20), 30.0);
    EXPECT_EQ(cnn_importance_for(40), 60.0);
    EXPECT_EQ(cnn_importance_for(60), 90.0);
    EXPECT_THROW(cnn_importance_for(30), RangeError);
}

TEST(Csv, RoundTripAndHeaderOnly) {
    const std::vector<RunResult> rows{bio_row(5, 3, 40, 0, 180000, 87.25), cnn_row(5, 3, 60, 0, 200, false),
                                      cnn_row(7, 1, 15, 2, 26, true)};
    EXPECT_EQ(parse_results_csv(results_csv(rows)), rows);
    const std::string empty = results_csv({});
    EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 1);
    EXPECT_TRUE(parse_results_csv(empty).empty());
    EXPECT_ANY_THROW(parse_results_csv("wrong,header\n"));
}

TEST(Csv, PersistAndLoad) {
    const auto dir = testsupport::scratch_dir("experiments-csv");
    const std::vector<RunResult> rows{bio_row(5, 3, 40, 0, 180000, 87.25)};
    persist(rows, dir / "results.csv");
    EXPECT_EQ(load_results(dir / "results.csv"), rows);
}

TEST(Features, NamesRoundTrip) {
    for (Feature f : {Feature::Position, Feature::Spikes, Feature::Dispersion, Feature::Steps, Feature::Neurons,
                      Feature::Success}) {
        EXPECT_EQ(feature_from_string(to_string(f)), f);
    }
    EXPECT_ANY_THROW(feature_from_string("nope"));
}

TEST(Correlate, JoinsScenariosAndIsSymmetric) {
    std::vector<RunResult> rows;
    for (int n : {5, 10, 20})
        for (int e = 0; e < 3; ++e) {
            rows.push_back(bio_row(n, 1, 40, e, 1000 - n * 10 - e, 50.0 - n - e * 0.5));
            rows.push_back(cnn_row(n, 1, 60, e, 20 + n + e, n < 15));
        }
    const std::vector<Feature> f{Feature::Spikes, Feature::Dispersion, Feature::Steps, Feature::Neurons};
    const auto rep = correlate(rows, f);
    EXPECT_EQ(rep.rows, 9u);
    for (Feature a : f) {
        EXPECT_NEAR(rep.at(a, a), 1.0, 1e-12);
        for (Feature b : f) {
            EXPECT_EQ(rep.at(a, b), rep.at(b, a));
            EXPECT_LE(std::abs(rep.at(a, b)), 1.0 + 1e-12);
        }
    }
    EXPECT_LT(rep.at(Feature::Spikes, Feature::Steps), 0.0);
    EXPECT_EQ(rep.to_csv().rfind("feature,n_spikes,dispersion_pct,steps,n_neurons\n", 0), 0u);
}

TEST(Correlate, ConstantColumnNamesFeature) {
    std::vector<RunResult> rows;
    for (int n : {5, 10, 20}) {
        rows.push_back(bio_row(n, 1, 40, 0, 1000 - n, 50.0 - n));
        rows.push_back(cnn_row(n, 1, 60, 0, 200, false));
    }
    const std::vector<Feature> f{Feature::Spikes, Feature::Steps};
    try {
        correlate(rows, f);
        FAIL() << "expected DegenerateError";
    } catch (const DegenerateError& e) {
        EXPECT_NE(std::string(e.what()).find("steps"), std::string::npos);
    }
}

TEST(Correlate, DefaultFeaturesDropConstants) {
    auto flo = SweepConfig::flo_defaults();
    flo.positions = {5};
    const auto f = default_features(flo);
    EXPECT_EQ(std::count(f.begin(), f.end(), Feature::Position), 0);
    const auto full = default_features(SweepConfig::flo_defaults());
    EXPECT_EQ(std::count(full.begin(), full.end(), Feature::Position), 1);
}

TEST(Workbench, ZeroTargetsReproduceSpontaneousRun) {
    const auto& wb = bench();
    const auto plan = snn::make_jam_plan({}, 1, 27, wb.clock());
    EXPECT_EQ(wb.run_bio(std::span(&plan, 1)), wb.baseline());
    EXPECT_EQ(wb.baseline(), snn::run(wb.network(), wb.schedule(), {}, wb.clock()));
}

TEST(Workbench, FloAtFirstPositionKeepsEarlySpikes) {
    const auto& wb = bench();
    const auto plan = snn::make_flo_plan(sample_targets(35, 0, 1), 1, 40, wb.clock());
    const auto hit = wb.run_bio(std::span(&plan, 1));
    std::vector<metrics::SpikeEvent> a, b;
    for (const auto& e : hit.events)
        if (e.time_ms < 50.0) a.push_back(e);
    for (const auto& e : wb.baseline().events)
        if (e.time_ms < 50.0) b.push_back(e);
    EXPECT_EQ(a, b);
    EXPECT_NE(hit, wb.baseline());
}

TEST(Workbench, WideLongJamSuppressesActivity) {
    const auto& wb = bench();
    const auto plan = snn::make_jam_plan(sample_targets(105, 0, 1), 1, 27, wb.clock());
    const auto hit = wb.run_bio(std::span(&plan, 1));
    EXPECT_LT(static_cast<double>(hit.events.size()), 0.75 * static_cast<double>(wb.baseline().events.size()));
}

TEST(Workbench, CleanCnnSolvesMaze) {
    const auto& wb = bench();
    const auto r = wb.run_cnn_jam({}, 200);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.steps, 26);
    const auto f = wb.run_cnn_flo({}, 5, 60, 200);
    EXPECT_TRUE(f.success);
    EXPECT_EQ(f.steps, 26);
}

TEST(Sweep, RowCountsOrderAndJobsInvariance) {
    SweepConfig jam = SweepConfig::jam_defaults();
    jam.neuron_counts = {0, 35};
    jam.positions = {1, 27};
    jam.executions = 2;
    const auto one = run_jam_sweep(bench(), jam, 1);
    ASSERT_EQ(one.size(), 2u * 2u * 2u * 2u);
    for (std::size_t i = 0; i < one.size(); i += 2) {
        EXPECT_EQ(one[i].scenario, Scenario::Bio);
        EXPECT_EQ(one[i + 1].scenario, Scenario::Cnn);
        EXPECT_EQ(one[i].target_seed, one[i + 1].target_seed);
        EXPECT_TRUE(one[i].n_spikes && one[i].dispersion_pct && !one[i].steps);
        EXPECT_TRUE(one[i + 1].steps && one[i + 1].success && !one[i + 1].n_spikes);
    }
    EXPECT_EQ(*one[0].n_spikes, static_cast<std::int64_t>(bench().baseline().events.size()));
    EXPECT_EQ(results_csv(run_jam_sweep(bench(), jam, 3)), results_csv(one));

    SweepConfig flo = SweepConfig::flo_defaults();
    flo.neuron_counts = {5};
    flo.positions = {2, 26};
    flo.amplitudes = {10, 60};
    flo.executions = 1;
    const auto f1 = run_flo_sweep(bench(), flo, 1);
    ASSERT_EQ(f1.size(), 2u * 1u * 2u * 1u * 2u);
    EXPECT_EQ(f1[0].amplitude, 10.0);
    EXPECT_EQ(f1[1].amplitude, 15.0);
    EXPECT_EQ(results_csv(run_flo_sweep(bench(), flo, 2)), results_csv(f1));
}

TEST(Sweep, ProgressReachesTotal) {
    SweepConfig jam = SweepConfig::jam_defaults();
    jam.neuron_counts = {5};
    jam.positions = {3};
    jam.executions = 2;
    std::size_t last = 0, total = 0;
    run_jam_sweep(bench(), jam, 1, [&](std::size_t done, std::size_t all) {
        last = done;
        total = all;
    });
    EXPECT_EQ(last, total);
    EXPECT_GT(total, 0u);
}
