#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace neurostrike::metrics {

struct SpikeEvent {
    int neuron = 0;
    double time_ms = 0.0;

    friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

/// Time-sorted spikes of a population over [0, duration_ms).
struct SpikeRecord {
    std::vector<SpikeEvent> events;
    double duration_ms = 0.0;
    int n_neurons = 0;

    /// Throws RangeError if an event is out of range or out of order.
    void validate() const;

    friend bool operator==(const SpikeRecord&, const SpikeRecord&) = default;
};

std::size_t count_spikes(const SpikeRecord& rec);

/// Spike count per neuron id.
std::vector<std::size_t> spikes_per_neuron(const SpikeRecord& rec);

/// Percentage of bin_ms-wide bins that hold at least one spike from any
/// neuron. Also reported as "percentage of instants with spikes".
double temporal_dispersion(const SpikeRecord& rec, double bin_ms = 1.0);

/// Product-moment correlation, accumulated in one streaming pass. Throws
/// DegenerateError when either input has zero variance or fewer than 2 points.
double pearson(std::span<const double> x, std::span<const double> y);

/// Running co-moment accumulator behind pearson().
class Comoment {
public:
    void add(double x, double y) noexcept;

    std::size_t count() const noexcept { return n_; }
    double mean_x() const noexcept { return mean_x_; }
    double mean_y() const noexcept { return mean_y_; }
    /// Throws DegenerateError as pearson().
    double correlation() const;

private:
    std::size_t n_ = 0;
    double mean_x_ = 0.0;
    double mean_y_ = 0.0;
    double m2_x_ = 0.0;
    double m2_y_ = 0.0;
    double c_xy_ = 0.0;
};

struct TimeWindow {
    double begin_ms = 0.0;
    double end_ms = 0.0;

    bool contains(double t) const noexcept { return t >= begin_ms && t < end_ms; }
};

enum class RasterTag { SpontaneousPreserved, AttackNew, Suppressed };

std::string_view to_string(RasterTag tag);

struct RasterRow {
    int neuron = 0;
    double time_ms = 0.0;
    RasterTag tag = RasterTag::SpontaneousPreserved;
};

/// Classifies spikes by diffing an attacked run against its baseline:
/// spikes in both are preserved, attacked-only spikes are new, and
/// baseline-only spikes are suppressed. Matching is exact on (neuron, time).
/// With `view` set, only rows inside that window are returned.
std::vector<RasterRow> raster_rows(const SpikeRecord& attacked, const SpikeRecord& baseline,
                                   std::optional<TimeWindow> view = std::nullopt);

/// CSV text with header `neuron_id,time_ms,tag`.
std::string export_raster(const SpikeRecord& attacked, const SpikeRecord& baseline,
                          std::optional<TimeWindow> view = std::nullopt);

/// Plain `neuron_id,time_ms` dump of a record.
std::string spikes_csv(const SpikeRecord& rec);

/// Shortest round-trip decimal form of a double.
std::string format_real(double x);

}  // namespace neurostrike::metrics
