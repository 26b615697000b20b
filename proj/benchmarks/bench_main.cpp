#include <benchmark/benchmark.h>

#include "neurostrike/maze.hpp"
#include "neurostrike/qnet.hpp"
#include "neurostrike/random.hpp"
#include "neurostrike/snn.hpp"

using namespace neurostrike;

namespace {

struct Fixture {
    maze::MazeGrid grid = maze::default_maze();
    qnet::QNetwork net;
    snn::SpikingNetwork network;
    snn::StimulusSchedule schedule;

    Fixture() : net(make_net()), network(snn::translate(net, snn::default_gain(net))) {
        schedule = snn::build_stimulus(grid, maze::shortest_path(grid));
    }

    static qnet::QNetwork make_net() {
        Rng rng(1);
        return qnet::QNetwork::random(rng);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_QForward(benchmark::State& state) {
    const auto& f = fixture();
    const auto input = qnet::encode_state(f.grid, f.grid.start(), qnet::VisitedSet(f.grid));
    for (auto _ : state) benchmark::DoNotOptimize(qnet::forward(f.net, input));
}
BENCHMARK(BM_QForward);

void BM_NetworkStep(benchmark::State& state) {
    const auto& f = fixture();
    snn::SimState s = snn::SimState::initial(f.network);
    const snn::ActiveAttacks none{std::vector<std::uint8_t>(snn::kNeuronCount, 0), {}};
    const auto& currents = f.schedule.segments[0].currents;
    for (auto _ : state) benchmark::DoNotOptimize(snn::step(f.network, s, currents, none, 0.1));
}
BENCHMARK(BM_NetworkStep);

void BM_NetworkRun(benchmark::State& state) {
    const auto& f = fixture();
    const snn::RunClock clock{static_cast<double>(state.range(0)), 0.1};
    for (auto _ : state) benchmark::DoNotOptimize(snn::run(f.network, f.schedule, {}, clock));
    state.SetItemsProcessed(state.iterations() * clock.steps());
}
BENCHMARK(BM_NetworkRun)->Arg(1000)->Arg(27000)->Unit(benchmark::kMillisecond);

void BM_GreedyEpisode(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(qnet::play_episode(f.net, f.grid, f.grid.start(), {}, qnet::ActivationRule::always(), {}));
    }
}
BENCHMARK(BM_GreedyEpisode);

}  // namespace

BENCHMARK_MAIN();
