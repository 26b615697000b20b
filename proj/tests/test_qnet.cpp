#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "neurostrike/error.hpp"
#include "neurostrike/qnet.hpp"
#include "neurostrike/random.hpp"
#include "support.hpp"

using namespace neurostrike;
using namespace neurostrike::qnet;

namespace {

// Straight-loop forward pass written against the layer definitions, used as
// the oracle for forward_trace.
struct NaiveTrace {
    std::vector<double> conv1, conv2;
    std::array<double, 4> q{};
};

NaiveTrace naive_forward(const QNetwork& n, const Tensor& s, const NodeOverrideSet& ov) {
    NaiveTrace t;
    t.conv1.assign(200, 0.0);
    for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y)
            for (int f = 0; f < 8; ++f) {
                double acc = n.conv1_bias[f];
                for (int dx = 0; dx < 3; ++dx)
                    for (int dy = 0; dy < 3; ++dy) acc += s.at(x + dx, y + dy, 0) * n.conv1.at(f, dx, dy, 0);
                t.conv1[(x * 5 + y) * 8 + f] = std::max(0.0, acc);
            }
    for (const auto& [id, o] : ov.entries())
        if (id < 200) t.conv1[id] = o.apply(t.conv1[id]);
    t.conv2.assign(72, 0.0);
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y)
            for (int f = 0; f < 8; ++f) {
                double acc = n.conv2_bias[f];
                for (int dx = 0; dx < 3; ++dx)
                    for (int dy = 0; dy < 3; ++dy)
                        for (int c = 0; c < 8; ++c)
                            acc += t.conv1[((x + dx) * 5 + (y + dy)) * 8 + c] * n.conv2.at(f, dx, dy, c);
                t.conv2[(x * 3 + y) * 8 + f] = std::max(0.0, acc);
            }
    for (const auto& [id, o] : ov.entries())
        if (id >= 200 && id < 272) t.conv2[id - 200] = o.apply(t.conv2[id - 200]);
    for (int a = 0; a < 4; ++a) {
        double acc = n.dense_bias[a];
        for (int j = 0; j < 72; ++j) acc += t.conv2[j] * n.dense_at(a, j);
        t.q[a] = acc;
    }
    for (const auto& [id, o] : ov.entries())
        if (id >= 272) t.q[id - 272] = o.apply(t.q[id - 272]);
    return t;
}

Tensor random_state(Rng& rng) {
    Tensor s({7, 7, 1});
    for (double& v : s.data()) v = rng.uniform();
    return s;
}

std::vector<int> ids(int first, int count) {
    std::vector<int> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v[i] = first + i;
    return v;
}

}  // namespace

TEST(LayerSpecs, MatchTheThreeLayerGeometry) {
    const auto& l = layer_specs();
    EXPECT_EQ(l[0].input, (Shape3{7, 7, 1}));
    EXPECT_EQ(l[0].output, (Shape3{5, 5, 8}));
    EXPECT_EQ(l[0].nodes(), 200);
    EXPECT_EQ(l[1].input, (Shape3{5, 5, 8}));
    EXPECT_EQ(l[1].output, (Shape3{3, 3, 8}));
    EXPECT_EQ(l[1].nodes(), 72);
    EXPECT_EQ(l[2].output.size(), 4);
    EXPECT_EQ(l[0].nodes() + l[1].nodes() + l[2].nodes(), 276);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(l[i].kernel_h, 3);
        EXPECT_EQ(l[i].kernel_w, 3);
        EXPECT_EQ(l[i].stride, 1);
        EXPECT_EQ(l[i].activation, Activation::ReLU);
    }
    EXPECT_EQ(l[0].first_node, 0);
    EXPECT_EQ(l[1].first_node, 200);
    EXPECT_EQ(l[2].first_node, 272);
}

TEST(ConvForward, ValidPaddingShape) {
    ConvKernels k(8, 3, 3, 1);
    const Tensor out = conv_forward(Tensor({7, 7, 1}, 1.0), k, std::vector<double>(8, 0.0), 1);
    EXPECT_EQ(out.shape(), (Shape3{5, 5, 8}));
}

TEST(ConvForward, ZeroKernelsGiveZeros) {
    ConvKernels k(8, 3, 3, 1);
    const Tensor out = conv_forward(Tensor({7, 7, 1}, 0.7), k, std::vector<double>(8, 0.0), 1);
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(ConvForward, OnesSumToNine) {
    ConvKernels k(1, 3, 3, 1);
    std::fill(k.weights.begin(), k.weights.end(), 1.0);
    const Tensor out = conv_forward(Tensor({3, 3, 1}, 1.0), k, std::vector<double>{0.0}, 1);
    ASSERT_EQ(out.shape(), (Shape3{1, 1, 1}));
    EXPECT_EQ(out.at(0, 0, 0), 9.0);
}

TEST(ConvForward, NegativeSumsAreRectified) {
    ConvKernels k(1, 3, 3, 1);
    std::fill(k.weights.begin(), k.weights.end(), -1.0);
    const Tensor out = conv_forward(Tensor({3, 3, 1}, 1.0), k, std::vector<double>{0.0}, 1);
    EXPECT_EQ(out.at(0, 0, 0), 0.0);
}

TEST(ConvForward, ShapeMismatchThrows) {
    ConvKernels k(8, 3, 3, 2);
    EXPECT_THROW(conv_forward(Tensor({7, 7, 1}), k, std::vector<double>(8, 0.0), 1), ShapeError);
    ConvKernels k1(8, 3, 3, 1);
    EXPECT_THROW(conv_forward(Tensor({7, 7, 1}), k1, std::vector<double>(3, 0.0), 1), ShapeError);
    EXPECT_THROW(conv_forward(Tensor({2, 2, 1}), k1, std::vector<double>(8, 0.0), 1), ShapeError);
}

TEST(Forward, MatchesNaiveOracleOnRandomNetworks) {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const QNetwork net = QNetwork::random(rng);
        const Tensor s = random_state(rng);
        NodeOverrideSet ov;
        for (int i = 0; i < 10; ++i) {
            const int id = static_cast<int>(rng.below(276));
            if (ov.entries().count(id)) continue;
            ov.add(id, rng.uniform() < 0.5 ? NodeOverride::set_to(-1.0) : NodeOverride::scale(1.6));
        }
        const ForwardTrace t = forward_trace(net, s, ov);
        const NaiveTrace o = naive_forward(net, s, ov);
        for (int i = 0; i < 200; ++i) ASSERT_NEAR(t.conv1.data()[i], o.conv1[i], 1e-12);
        for (int i = 0; i < 72; ++i) ASSERT_NEAR(t.conv2.data()[i], o.conv2[i], 1e-12);
        for (int a = 0; a < 4; ++a) ASSERT_NEAR(t.q[a], o.q[a], 1e-12);
    }
}

TEST(Forward, ShapesHoldForAnyWeights) {
    Rng rng(3);
    const QNetwork net = QNetwork::random(rng);
    const ForwardTrace t = forward_trace(net, random_state(rng));
    EXPECT_EQ(t.conv1.shape(), (Shape3{5, 5, 8}));
    EXPECT_EQ(t.conv2.shape(), (Shape3{3, 3, 8}));
    EXPECT_EQ(t.q.size(), 4u);
}

TEST(Forward, EmptyOverridesArePlainPass) {
    Rng rng(4);
    const QNetwork net = QNetwork::random(rng);
    const Tensor s = random_state(rng);
    EXPECT_EQ(forward(net, s, {}), forward(net, s));
}

TEST(Forward, AllNodesSetToMinusOneGiveMinusOneQ) {
    Rng rng(5);
    const QNetwork net = QNetwork::random(rng);
    const auto all = ids(0, 276);
    const QValues q = forward(net, random_state(rng), NodeOverrideSet::uniform(all, NodeOverride::set_to(-1.0)));
    for (double v : q) EXPECT_EQ(v, -1.0);
}

TEST(Forward, SetToBypassesRectification) {
    QNetwork net;  // all zero
    net.dense_at(0, 0) = 1.0;
    NodeOverrideSet ov;
    ov.add(200, NodeOverride::set_to(-1.0));
    const QValues q = forward(net, Tensor({7, 7, 1}, 1.0), ov);
    EXPECT_EQ(q[0], -1.0);
}

TEST(Forward, ScaleMultipliesOneConv2Node) {
    Rng rng(6);
    const QNetwork net = QNetwork::random(rng);
    const Tensor s = random_state(rng);
    NodeOverrideSet ov;
    ov.add(205, NodeOverride::scale(1.3));
    const ForwardTrace plain = forward_trace(net, s);
    const ForwardTrace hit = forward_trace(net, s, ov);
    EXPECT_DOUBLE_EQ(hit.conv2.data()[5], plain.conv2.data()[5] * 1.3);
    for (int i = 0; i < 72; ++i)
        if (i != 5) {
            EXPECT_EQ(hit.conv2.data()[i], plain.conv2.data()[i]);
        }
}

TEST(Forward, RejectsWrongStateShape) {
    EXPECT_THROW(forward(QNetwork{}, Tensor({5, 5, 1})), ShapeError);
}

TEST(Overrides, MergingASetWithItselfChangesNothing) {
    Rng rng(8);
    const QNetwork net = QNetwork::random(rng);
    const Tensor s = random_state(rng);
    NodeOverrideSet ov = NodeOverrideSet::uniform(std::vector<int>{3, 210, 273}, NodeOverride::scale(1.9));
    NodeOverrideSet twice = ov;
    twice.merge(ov);
    EXPECT_EQ(twice, ov);
    EXPECT_EQ(forward(net, s, twice), forward(net, s, ov));
}

TEST(Overrides, InvalidOrConflictingEntriesThrow) {
    NodeOverrideSet ov;
    EXPECT_THROW(ov.add(276, NodeOverride::set_to(-1)), RangeError);
    EXPECT_THROW(ov.add(-1, NodeOverride::set_to(-1)), RangeError);
    ov.add(4, NodeOverride::set_to(-1));
    EXPECT_NO_THROW(ov.add(4, NodeOverride::set_to(-1)));
    EXPECT_THROW(ov.add(4, NodeOverride::scale(2)), RangeError);
}

TEST(EncodeState, OnlyAgentCellIsHalf) {
    const auto g = maze::default_maze();
    const Tensor s = encode_state(g, g.start(), VisitedSet(g));
    EXPECT_EQ(std::count(s.data().begin(), s.data().end(), 0.5), 1);
    EXPECT_EQ(s.at(0, 0, 0), 0.5);
}

TEST(EncodeState, AllFreeGridUsesFreeVisitedAgentValues) {
    const auto g = maze::MazeGrid::parse("S......\n.......\n.......\n.......\n.......\n.......\n......E\n");
    VisitedSet v(g);
    v.insert({0, 1});
    v.insert({3, 3});
    const Tensor s = encode_state(g, {2, 2}, v);
    for (double x : s.data()) EXPECT_TRUE(x == 1.0 || x == 0.8 || x == 0.5);
    EXPECT_EQ(s.at(3, 3, 0), 0.8);
}

TEST(EncodeState, ZeroCellsEqualWallCount) {
    const auto g = maze::default_maze();
    const Tensor s = encode_state(g, g.start(), VisitedSet(g));
    EXPECT_EQ(std::count(s.data().begin(), s.data().end(), 0.0), g.wall_count());
    EXPECT_EQ(g.wall_count(), 18);
}

TEST(GreedyAction, TiesGoToEarliestAction) {
    EXPECT_EQ(greedy_action({0.5, 0.5, 0.1, 0.5}), maze::Action::Up);
    EXPECT_EQ(greedy_action({0.1, 0.7, 0.7, 0.0}), maze::Action::Down);
}

TEST(WeightFile, RoundTripsExactly) {
    Rng rng(12);
    const QNetwork net = QNetwork::random(rng);
    EXPECT_EQ(QNetwork::parse(net.to_text()), net);
    EXPECT_EQ(net.to_text().rfind("qnet-v1\n", 0), 0u);
}

TEST(WeightFile, RejectsCorruptText) {
    Rng rng(13);
    std::string text = QNetwork::random(rng).to_text();
    EXPECT_THROW(QNetwork::parse("qnet-v2\n" + text.substr(8)), Error);
    EXPECT_THROW(QNetwork::parse(text.substr(0, text.size() / 2)), Error);
    EXPECT_THROW(QNetwork::load("/nonexistent/w.qnet"), IoError);
}

TEST(PlayEpisode, CleanRunFollowsOptimalPath) {
    const auto g = maze::default_maze();
    const auto path = maze::shortest_path(g);
    const EpisodeResult r = play_episode(testsupport::shipped_weights(), g, g.start(), {}, ActivationRule::always(), {});
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.steps, 26);
    EXPECT_EQ(r.trajectory, path.positions);
}

TEST(PlayEpisode, CellNextToExitTakesOneStep) {
    const auto g = maze::default_maze();
    const auto path = maze::shortest_path(g);
    const EpisodeResult r =
        play_episode(testsupport::shipped_weights(), g, path[path.size() - 2], {}, ActivationRule::always(), {});
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.steps, 1);
}

TEST(PlayEpisode, CapOfOneStopsEarly) {
    const auto g = maze::default_maze();
    const EpisodeResult r =
        play_episode(testsupport::shipped_weights(), g, g.start(), {}, ActivationRule::always(), {.cap = 1});
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.steps, 1);
}

TEST(PlayEpisode, SuccessEndsAtExitAndStepsRespectCap) {
    const auto g = maze::default_maze();
    Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const auto targets = sample_without_replacement(rng, 276, 1 + static_cast<int>(rng.below(30)));
        const auto ov = NodeOverrideSet::uniform(targets, NodeOverride::scale(1.0 + rng.uniform()));
        const EpisodeResult r = play_episode(testsupport::shipped_weights(), g, g.start(), ov, ActivationRule::always(), {});
        EXPECT_LE(r.steps, kDefaultStepCap);
        if (r.success) {
            EXPECT_EQ(r.trajectory.back(), g.exit());
        }
        EXPECT_EQ(r.trajectory.size(), static_cast<std::size_t>(r.steps) + 1);
    }
}

TEST(PlayEpisode, Deterministic) {
    const auto g = maze::default_maze();
    const auto ov = NodeOverrideSet::uniform(std::vector<int>{10, 220, 250}, NodeOverride::scale(1.9));
    const auto a = play_episode(testsupport::shipped_weights(), g, g.start(), ov, ActivationRule::always(), {});
    const auto b = play_episode(testsupport::shipped_weights(), g, g.start(), ov, ActivationRule::always(), {});
    EXPECT_EQ(a, b);
}

TEST(PlayEpisode, FromPathIndexLeavesEarlierMovesClean) {
    const auto g = maze::default_maze();
    const auto path = maze::shortest_path(g);
    const auto all = ids(0, 276);
    const auto ov = NodeOverrideSet::uniform(all, NodeOverride::set_to(-1.0));
    const int k = 10;
    const auto r = play_episode(testsupport::shipped_weights(), g, g.start(), ov, ActivationRule::from_path_index(path, k), {});
    ASSERT_GE(r.trajectory.size(), static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) EXPECT_EQ(r.trajectory[i], path[i]);
    EXPECT_FALSE(r.success);
    EXPECT_THROW(ActivationRule::from_path_index(path, 0), RangeError);
    EXPECT_THROW(ActivationRule::from_path_index(path, 28), RangeError);
}

TEST(PlayEpisode, RejectsWallStart) {
    const auto g = maze::default_maze();
    EXPECT_THROW(play_episode(testsupport::shipped_weights(), g, {0, 1}, {}, ActivationRule::always(), {}), RangeError);
}

TEST(JamOnNodes, MoreThanFifteenNodesAlwaysHitCap) {
    const auto g = maze::default_maze();
    for (int k : {16, 20, 35, 105}) {
        for (int e = 0; e < 10; ++e) {
            Rng rng(hash_seed({99, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(k)}));
            const auto ov = NodeOverrideSet::uniform(sample_without_replacement(rng, 276, k), NodeOverride::set_to(-1));
            const auto r = play_episode(testsupport::shipped_weights(), g, g.start(), ov, ActivationRule::always(), {});
            EXPECT_EQ(r.steps, kDefaultStepCap);
            EXPECT_FALSE(r.success);
        }
    }
}

TEST(JamOnNodes, MeanStepsNonDecreasingInNodeCount) {
    const auto g = maze::default_maze();
    std::vector<double> means;
    for (int k = 1; k <= 20; ++k) {
        double sum = 0;
        for (int e = 0; e < 10; ++e) {
            Rng rng(hash_seed({7, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(k)}));
            const auto ov = NodeOverrideSet::uniform(sample_without_replacement(rng, 276, k), NodeOverride::set_to(-1));
            sum += play_episode(testsupport::shipped_weights(), g, g.start(), ov, ActivationRule::always(), {}).steps;
        }
        means.push_back(sum / 10);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < means.size(); ++i) inversions += means[i] < means[i - 1];
    EXPECT_LE(inversions, 1);
}
