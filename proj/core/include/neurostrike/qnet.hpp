#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurostrike/maze.hpp"

namespace neurostrike {
class Rng;
}

namespace neurostrike::qnet {

// Layer geometry of the maze Q-network. Node ids are global and layer-major:
// conv1 nodes 0..199, conv2 nodes 200..271, output nodes 272..275. Inside a
// conv layer the id of (row x, col y, filter f) is first + (x * width + y) * filters + f.
inline constexpr int kInputSide = 7;
inline constexpr int kKernelSide = 3;
inline constexpr int kConv1Filters = 8;
inline constexpr int kConv2Filters = 8;
inline constexpr int kConv1Side = kInputSide - kKernelSide + 1;  // 5
inline constexpr int kConv2Side = kConv1Side - kKernelSide + 1;  // 3
inline constexpr int kConv1Nodes = kConv1Side * kConv1Side * kConv1Filters;  // 200
inline constexpr int kConv2Nodes = kConv2Side * kConv2Side * kConv2Filters;  // 72
inline constexpr int kOutputNodes = maze::kActionCount;                      // 4
inline constexpr int kNodeCount = kConv1Nodes + kConv2Nodes + kOutputNodes;  // 276
inline constexpr int kConv1First = 0;
inline constexpr int kConv2First = kConv1Nodes;
inline constexpr int kOutputFirst = kConv1Nodes + kConv2Nodes;

struct Shape3 {
    int h = 0;
    int w = 0;
    int c = 0;

    constexpr int size() const noexcept { return h * w * c; }
    friend constexpr bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(Shape3 s);

enum class LayerKind { Conv, Dense };
enum class Activation { ReLU, Identity };

struct LayerSpec {
    LayerKind kind;
    int filters;  ///< conv filters, or output units for dense
    int kernel_h;
    int kernel_w;
    int stride;
    Activation activation;
    Shape3 input;
    Shape3 output;
    int first_node;

    int nodes() const noexcept { return output.size(); }
};

/// The three layers in order: conv1, conv2, dense.
const std::array<LayerSpec, 3>& layer_specs();

/// Dense H x W x C tensor, channel-fastest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape3 shape, double fill = 0.0)
        : shape_(shape), data_(static_cast<std::size_t>(shape.size()), fill) {}

    Shape3 shape() const noexcept { return shape_; }
    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    static constexpr std::size_t offset(Shape3 s, int x, int y, int c) noexcept {
        return static_cast<std::size_t>((x * s.w + y) * s.c + c);
    }
    double& at(int x, int y, int c) { return data_[offset(shape_, x, y, c)]; }
    double at(int x, int y, int c) const { return data_[offset(shape_, x, y, c)]; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape3 shape_{};
    std::vector<double> data_;
};

/// Bank of conv filters, laid out [filter][dx][dy][channel].
struct ConvKernels {
    int filters = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int channels = 0;
    std::vector<double> weights;

    ConvKernels() = default;
    ConvKernels(int f, int kh, int kw, int ch)
        : filters(f), kernel_h(kh), kernel_w(kw), channels(ch),
          weights(static_cast<std::size_t>(f * kh * kw * ch), 0.0) {}

    std::size_t offset(int f, int dx, int dy, int c) const noexcept {
        return static_cast<std::size_t>(((f * kernel_h + dx) * kernel_w + dy) * channels + c);
    }
    double& at(int f, int dx, int dy, int c) { return weights[offset(f, dx, dy, c)]; }
    double at(int f, int dx, int dy, int c) const { return weights[offset(f, dx, dy, c)]; }

    friend bool operator==(const ConvKernels&, const ConvKernels&) = default;
};

/// Valid-padding convolution followed by ReLU:
/// out[x,y,f] = max(0, bias[f] + sum input[x*s+dx, y*s+dy, c] * k[f,dx,dy,c]).
Tensor conv_forward(const Tensor& input, const ConvKernels& kernels, std::span<const double> bias, int stride);

/// Weights of the three-layer maze Q-network.
struct QNetwork {
    ConvKernels conv1{kConv1Filters, kKernelSide, kKernelSide, 1};
    std::vector<double> conv1_bias = std::vector<double>(kConv1Filters, 0.0);
    ConvKernels conv2{kConv2Filters, kKernelSide, kKernelSide, kConv1Filters};
    std::vector<double> conv2_bias = std::vector<double>(kConv2Filters, 0.0);
    std::vector<double> dense = std::vector<double>(kOutputNodes * kConv2Nodes, 0.0);  ///< [action][conv2 node]
    std::vector<double> dense_bias = std::vector<double>(kOutputNodes, 0.0);

    double& dense_at(int action, int j) { return dense[static_cast<std::size_t>(action * kConv2Nodes + j)]; }
    double dense_at(int action, int j) const { return dense[static_cast<std::size_t>(action * kConv2Nodes + j)]; }

    /// Throws ShapeError unless every block matches the layer table.
    void validate() const;

    /// He-uniform initialisation for the ReLU layers.
    static QNetwork random(Rng& rng);

    /// Textual weight file, header `qnet-v1`.
    std::string to_text() const;
    static QNetwork parse(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static QNetwork load(const std::filesystem::path& path);

    friend bool operator==(const QNetwork&, const QNetwork&) = default;
};

/// Replacement applied to one node's post-activation output.
struct NodeOverride {
    enum class Mode { SetTo, Scale };
    Mode mode = Mode::SetTo;
    double value = 0.0;

    static NodeOverride set_to(double v) { return {Mode::SetTo, v}; }
    static NodeOverride scale(double factor) { return {Mode::Scale, factor}; }

    double apply(double activation) const noexcept { return mode == Mode::SetTo ? value : activation * value; }

    friend bool operator==(const NodeOverride&, const NodeOverride&) = default;
};

class NodeOverrideSet {
public:
    NodeOverrideSet() = default;

    /// Same override on every listed node.
    static NodeOverrideSet uniform(std::span<const int> node_ids, NodeOverride ov);

    /// Throws RangeError for an invalid id or a second, different entry on a node.
    void add(int node_id, NodeOverride ov);

    /// Union; identical duplicate entries are accepted.
    void merge(const NodeOverrideSet& other);

    /// Applies the entries that fall in [first, first + activations.size()).
    void apply(int first, std::span<double> activations) const;

    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<int, NodeOverride>& entries() const noexcept { return entries_; }

    friend bool operator==(const NodeOverrideSet&, const NodeOverrideSet&) = default;

private:
    std::map<int, NodeOverride> entries_;
};

using QValues = std::array<double, kOutputNodes>;

/// Cells visited during an episode.
class VisitedSet {
public:
    explicit VisitedSet(const maze::MazeGrid& grid)
        : cols_(grid.cols()), mask_(static_cast<std::size_t>(grid.rows() * grid.cols()), false) {}

    void insert(maze::Position p) { mask_[index(p)] = true; }
    bool contains(maze::Position p) const { return mask_[index(p)]; }

private:
    std::size_t index(maze::Position p) const { return static_cast<std::size_t>(p.row * cols_ + p.col); }
    int cols_;
    std::vector<bool> mask_;
};

/// Wall 0.0, free 1.0, visited 0.8, agent 0.5; shape rows x cols x 1.
Tensor encode_state(const maze::MazeGrid& grid, maze::Position pos, const VisitedSet& visited);

/// Activations of every layer for one input.
struct ForwardTrace {
    Tensor conv1;
    Tensor conv2;
    QValues q{};
};

ForwardTrace forward_trace(const QNetwork& net, const Tensor& state, const NodeOverrideSet& overrides = {});

/// Q-values for the four actions. Overrides act after each layer's activation,
/// so SetTo(-1) survives the ReLU.
QValues forward(const QNetwork& net, const Tensor& state, const NodeOverrideSet& overrides = {});

/// Argmax with ties going to the earliest action.
maze::Action greedy_action(const QValues& q);

/// When the overrides of an episode switch on.
struct ActivationRule {
    enum class Kind { Always, FromPathIndex };
    Kind kind = Kind::Always;
    int path_index = 0;        ///< 1-based position on the optimal path
    maze::Position trigger{};  ///< cell that activates the overrides

    static ActivationRule always() { return {}; }
    static ActivationRule from_path_index(const maze::OptimalPath& path, int k);
};

struct EpisodeResult {
    int steps = 0;
    bool success = false;
    std::vector<maze::Position> trajectory;  ///< includes the start cell

    friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

inline constexpr int kDefaultStepCap = 200;

struct PlayOptions {
    int cap = kDefaultStepCap;
    /// Probability of a uniformly random action; 0 gives pure greedy playout.
    double explore = 0.0;
    std::uint64_t seed = 0;
};

/// Greedy playout until the exit is reached or `cap` actions were taken.
EpisodeResult play_episode(const QNetwork& net, const maze::MazeGrid& grid, maze::Position start,
                           const NodeOverrideSet& overrides, const ActivationRule& rule, const PlayOptions& options);

}  // namespace neurostrike::qnet
