#include "neurostrike/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

#include "neurostrike/error.hpp"

namespace neurostrike::metrics {

namespace {

bool event_less(const SpikeEvent& a, const SpikeEvent& b) {
    return std::tie(a.time_ms, a.neuron) < std::tie(b.time_ms, b.neuron);
}

}  // namespace

void SpikeRecord::validate() const {
    for (std::size_t i = 0; i < events.size(); ++i) {
        const SpikeEvent& e = events[i];
        if (e.neuron < 0 || e.neuron >= n_neurons) {
            throw RangeError("metrics", "neuron_id", std::to_string(e.neuron) + " >= " + std::to_string(n_neurons));
        }
        if (!(e.time_ms >= 0.0 && e.time_ms < duration_ms)) {
            throw RangeError("metrics", "time_ms", format_real(e.time_ms) + " outside [0, duration)");
        }
        if (i > 0 && e.time_ms < events[i - 1].time_ms) {
            throw RangeError("metrics", "events", "events are not time-sorted");
        }
    }
}

std::size_t count_spikes(const SpikeRecord& rec) { return rec.events.size(); }

std::vector<std::size_t> spikes_per_neuron(const SpikeRecord& rec) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(rec.n_neurons, 0)), 0);
    for (const SpikeEvent& e : rec.events) {
        ++counts.at(static_cast<std::size_t>(e.neuron));
    }
    return counts;
}

double temporal_dispersion(const SpikeRecord& rec, double bin_ms) {
    if (!(rec.duration_ms > 0.0)) {
        throw RangeError("metrics", "duration_ms", "record has zero duration");
    }
    if (!(bin_ms > 0.0)) {
        throw RangeError("metrics", "bin_ms", "bin width must be positive");
    }
    const double ratio = rec.duration_ms / bin_ms;
    const double bins_real = std::round(ratio);
    if (std::abs(ratio - bins_real) > 1e-9 * std::max(1.0, ratio)) {
        throw RangeError("metrics", "bin_ms", "bin width must divide the record duration");
    }
    const auto bins = static_cast<std::size_t>(bins_real);
    std::vector<bool> occupied(bins, false);
    std::size_t hits = 0;
    for (const SpikeEvent& e : rec.events) {
        // Spike times sit on the dt grid; the epsilon stops 0.1*10 from landing in bin 0.
        auto b = static_cast<std::size_t>(std::floor(e.time_ms / bin_ms + 1e-9));
        b = std::min(b, bins - 1);
        if (!occupied[b]) {
            occupied[b] = true;
            ++hits;
        }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(bins);
}

void Comoment::add(double x, double y) noexcept {
    ++n_;
    const double n = static_cast<double>(n_);
    const double dx = x - mean_x_;
    const double dy = y - mean_y_;
    mean_x_ += dx / n;
    mean_y_ += dy / n;
    m2_x_ += dx * (x - mean_x_);
    m2_y_ += dy * (y - mean_y_);
    c_xy_ += dx * (y - mean_y_);
}

double Comoment::correlation() const {
    if (n_ < 2) {
        throw DegenerateError("metrics", "pearson", "need at least two points");
    }
    if (!(m2_x_ > 0.0) || !(m2_y_ > 0.0)) {
        throw DegenerateError("metrics", "pearson", "zero variance input");
    }
    const double r = c_xy_ / std::sqrt(m2_x_ * m2_y_);
    return std::clamp(r, -1.0, 1.0);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw RangeError("metrics", "pearson", "inputs differ in length");
    }
    Comoment acc;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc.add(x[i], y[i]);
    }
    return acc.correlation();
}

std::string_view to_string(RasterTag tag) {
    switch (tag) {
        case RasterTag::SpontaneousPreserved: return "spontaneous-preserved";
        case RasterTag::AttackNew: return "attack-new";
        case RasterTag::Suppressed: return "suppressed";
    }
    return "?";
}

std::vector<RasterRow> raster_rows(const SpikeRecord& attacked, const SpikeRecord& baseline,
                                   std::optional<TimeWindow> view) {
    std::vector<SpikeEvent> a = attacked.events;
    std::vector<SpikeEvent> b = baseline.events;
    std::sort(a.begin(), a.end(), event_less);
    std::sort(b.begin(), b.end(), event_less);

    std::vector<RasterRow> rows;
    auto emit = [&](const SpikeEvent& e, RasterTag tag) {
        if (!view || view->contains(e.time_ms)) {
            rows.push_back({e.neuron, e.time_ms, tag});
        }
    };
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && event_less(a[i], b[j]))) {
            emit(a[i++], RasterTag::AttackNew);
        } else if (i == a.size() || event_less(b[j], a[i])) {
            emit(b[j++], RasterTag::Suppressed);
        } else {
            emit(a[i], RasterTag::SpontaneousPreserved);
            ++i;
            ++j;
        }
    }
    return rows;
}

std::string export_raster(const SpikeRecord& attacked, const SpikeRecord& baseline, std::optional<TimeWindow> view) {
    std::string out = "neuron_id,time_ms,tag\n";
    for (const RasterRow& r : raster_rows(attacked, baseline, view)) {
        out += std::to_string(r.neuron);
        out += ',';
        out += format_real(r.time_ms);
        out += ',';
        out += to_string(r.tag);
        out += '\n';
    }
    return out;
}

std::string spikes_csv(const SpikeRecord& rec) {
    std::string out = "neuron_id,time_ms\n";
    for (const SpikeEvent& e : rec.events) {
        out += std::to_string(e.neuron);
        out += ',';
        out += format_real(e.time_ms);
        out += '\n';
    }
    return out;
}

std::string format_real(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

}  // namespace neurostrike::metrics
