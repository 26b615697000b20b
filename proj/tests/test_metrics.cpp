#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurostrike/error.hpp"
#include "neurostrike/metrics.hpp"
#include "neurostrike/random.hpp"

using namespace neurostrike;
using namespace neurostrike::metrics;

namespace {

// Textbook two-pass product-moment correlation.
double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

SpikeRecord random_record(Rng& rng, int events, double duration, int neurons) {
    SpikeRecord r{{}, duration, neurons};
    for (int i = 0; i < events; ++i) {
        const double t = std::floor(rng.uniform(0.0, duration) * 10.0) / 10.0;
        r.events.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(neurons))), t});
    }
    std::sort(r.events.begin(), r.events.end(), [](const SpikeEvent& a, const SpikeEvent& b) {
        return a.time_ms != b.time_ms ? a.time_ms < b.time_ms : a.neuron < b.neuron;
    });
    return r;
}

}  // namespace

TEST(CountSpikes, EmptyAndK) {
    EXPECT_EQ(count_spikes(SpikeRecord{{}, 100, 5}), 0u);
    SpikeRecord r{{{0, 1.0}, {1, 2.0}, {0, 3.5}}, 10, 2};
    EXPECT_EQ(count_spikes(r), 3u);
}

TEST(CountSpikes, EqualsSumOfPerNeuronCounts) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const SpikeRecord r = random_record(rng, static_cast<int>(rng.below(500)), 100.0, 20);
        const auto per = spikes_per_neuron(r);
        EXPECT_EQ(per.size(), 20u);
        EXPECT_EQ(std::accumulate(per.begin(), per.end(), std::size_t{0}), count_spikes(r));
    }
}

TEST(TemporalDispersion, ArithmeticExamples) {
    EXPECT_EQ(temporal_dispersion(SpikeRecord{{}, 1000, 3}), 0.0);
    SpikeRecord full{{}, 10, 1};
    for (int t = 0; t < 10; ++t) full.events.push_back({0, t + 0.3});
    EXPECT_EQ(temporal_dispersion(full), 100.0);
    SpikeRecord fifty{{}, 1000, 2};
    for (int t = 0; t < 50; ++t) {
        fifty.events.push_back({0, 20.0 * t});
        fifty.events.push_back({1, 20.0 * t + 0.5});  // same bin
    }
    EXPECT_DOUBLE_EQ(temporal_dispersion(fifty), 5.0);
}

TEST(TemporalDispersion, BinWidthMatters) {
    SpikeRecord r{{{0, 0.0}, {0, 2.5}}, 10, 1};
    EXPECT_DOUBLE_EQ(temporal_dispersion(r, 1.0), 20.0);
    EXPECT_DOUBLE_EQ(temporal_dispersion(r, 5.0), 50.0);
}

TEST(TemporalDispersion, Errors) {
    EXPECT_THROW(temporal_dispersion(SpikeRecord{{}, 0, 1}), RangeError);
    EXPECT_THROW(temporal_dispersion(SpikeRecord{{}, 10, 1}, 3.0), RangeError);
}

TEST(TemporalDispersion, MonotoneUnderAddedEvents) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        SpikeRecord r = random_record(rng, 200, 500.0, 10);
        double prev = temporal_dispersion(r);
        for (int add = 0; add < 20; ++add) {
            r.events.push_back({static_cast<int>(rng.below(10)), std::floor(rng.uniform(0, 500) * 10) / 10});
            std::sort(r.events.begin(), r.events.end(),
                      [](const SpikeEvent& a, const SpikeEvent& b) { return a.time_ms < b.time_ms; });
            const double now = temporal_dispersion(r);
            EXPECT_GE(now, prev);
            prev = now;
        }
    }
}

TEST(TemporalDispersion, BoundedAndBelowSpikeCount) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const SpikeRecord r = random_record(rng, static_cast<int>(rng.below(3000)), 1000.0, 30);
        const double d = temporal_dispersion(r);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 100.0);
        EXPECT_GE(static_cast<double>(count_spikes(r)), d / 100.0 * 1000.0 - 1e-9);
    }
}

TEST(SpikeRecord, ValidateRejectsBadEvents) {
    EXPECT_THROW((SpikeRecord{{{3, 1.0}}, 10, 3}.validate()), RangeError);
    EXPECT_THROW((SpikeRecord{{{0, 10.0}}, 10, 3}.validate()), RangeError);
    EXPECT_THROW((SpikeRecord{{{0, 5.0}, {0, 1.0}}, 10, 3}.validate()), RangeError);
}

TEST(Pearson, IdentityCases) {
    const std::vector<double> x{1, 4, 2, 8, 5};
    std::vector<double> neg(x.size());
    std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
    EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
    EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);
    EXPECT_DOUBLE_EQ(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0);
}

TEST(Pearson, Errors) {
    EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateError);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{2}), DegenerateError);
    EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), RangeError);
}

TEST(Pearson, MatchesTwoPassReference) {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(200);
        std::vector<double> x(n), y(n);
        const double mix = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(-100, 100);
            y[i] = mix * x[i] + rng.uniform(-50, 50);
        }
        ASSERT_NEAR(pearson(x, y), two_pass_pearson(x, y), 1e-12);
    }
}

TEST(Pearson, SymmetricAndAffineInvariant) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(50), y(50), z(50);
        for (int i = 0; i < 50; ++i) {
            x[i] = rng.uniform(-1, 1);
            y[i] = x[i] + rng.uniform(-1, 1);
        }
        const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
        if (std::abs(a) < 1e-3) continue;
        for (int i = 0; i < 50; ++i) z[i] = a * x[i] + b;
        const double r = pearson(x, y);
        EXPECT_NEAR(pearson(y, x), r, 1e-12);
        EXPECT_NEAR(pearson(z, y), (a > 0 ? 1 : -1) * r, 1e-12);
    }
}

TEST(Comoment, StreamingMatchesBatch) {
    Comoment c;
    const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6}, y{2, 7, 1, 8, 2, 8, 1, 8};
    for (std::size_t i = 0; i < x.size(); ++i) c.add(x[i], y[i]);
    EXPECT_EQ(c.count(), 8u);
    EXPECT_DOUBLE_EQ(c.mean_x(), 31.0 / 8);
    EXPECT_NEAR(c.correlation(), two_pass_pearson(x, y), 1e-14);
}

TEST(Raster, IdenticalRecordsArePreserved) {
    Rng rng(6);
    const SpikeRecord r = random_record(rng, 100, 100.0, 10);
    for (const RasterRow& row : raster_rows(r, r)) EXPECT_EQ(row.tag, RasterTag::SpontaneousPreserved);
    EXPECT_EQ(raster_rows(r, r).size(), r.events.size());
}

TEST(Raster, TagsNewAndSuppressed) {
    const SpikeRecord base{{{0, 1.0}, {1, 2.0}, {2, 3.0}}, 10, 3};
    const SpikeRecord hit{{{0, 1.0}, {2, 3.0}, {1, 4.0}}, 10, 3};
    const auto rows = raster_rows(hit, base);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].tag, RasterTag::SpontaneousPreserved);
    EXPECT_EQ(rows[1].tag, RasterTag::Suppressed);
    EXPECT_EQ(rows[1].neuron, 1);
    EXPECT_EQ(rows[2].tag, RasterTag::SpontaneousPreserved);
    EXPECT_EQ(rows[3].tag, RasterTag::AttackNew);
}

TEST(Raster, ViewFiltersRows) {
    const SpikeRecord base{{{0, 1.0}, {1, 5.0}, {2, 8.0}}, 10, 3};
    const auto rows = raster_rows(base, base, TimeWindow{2.0, 8.0});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].neuron, 1);
}

TEST(Raster, CsvHeaderAndTags) {
    const SpikeRecord base{{{0, 1.5}}, 10, 1};
    const SpikeRecord hit{{{0, 2.0}}, 10, 1};
    EXPECT_EQ(export_raster(hit, base), "neuron_id,time_ms,tag\n0,1.5,suppressed\n0,2,attack-new\n");
    EXPECT_EQ(spikes_csv(hit), "neuron_id,time_ms\n0,2\n");
}

TEST(FormatReal, ShortestRoundTrip) {
    EXPECT_EQ(format_real(0.1), "0.1");
    EXPECT_EQ(format_real(-65.0), "-65");
    const double x = 1.0 / 3.0;
    EXPECT_EQ(std::stod(format_real(x)), x);
}
