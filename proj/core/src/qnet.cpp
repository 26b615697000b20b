#include "neurostrike/qnet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "neurostrike/error.hpp"
#include "neurostrike/random.hpp"

namespace neurostrike::qnet {

namespace {

constexpr std::string_view kWeightHeader = "qnet-v1";

void relu_inplace(std::span<double> xs) {
    for (double& x : xs) {
        x = x > 0.0 ? x : 0.0;
    }
}

std::string format_real(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

void write_block(std::ostringstream& out, std::string_view name, std::initializer_list<int> dims,
                 std::span<const double> values) {
    out << name;
    for (int d : dims) {
        out << ' ' << d;
    }
    out << '\n';
    // One line per leading index keeps the file readable.
    const std::size_t per_line = values.size() / static_cast<std::size_t>(*dims.begin());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << format_real(values[i]) << ((i + 1) % per_line == 0 ? '\n' : ' ');
    }
}

class BlockReader {
public:
    explicit BlockReader(std::string_view text) : in_(std::string(text)) {}

    std::string next_token() {
        std::string tok;
        if (!(in_ >> tok)) {
            throw IoError("weights", "unexpected end of weight file");
        }
        return tok;
    }

    int next_int() {
        const std::string tok = next_token();
        int v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
            throw IoError("weights", "expected integer, got '" + tok + "'");
        }
        return v;
    }

    double next_real() {
        const std::string tok = next_token();
        double v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
            throw IoError("weights", "expected finite real, got '" + tok + "'");
        }
        return v;
    }

    void read_block(std::string_view name, std::initializer_list<int> dims, std::span<double> out) {
        const std::string tok = next_token();
        if (tok != name) {
            throw IoError("weights", "expected block '" + std::string(name) + "', got '" + tok + "'");
        }
        for (int expected : dims) {
            const int got = next_int();
            if (got != expected) {
                throw ShapeError("qnet", std::string(name),
                                 "dimension " + std::to_string(got) + " != " + std::to_string(expected));
            }
        }
        for (double& v : out) {
            v = next_real();
        }
    }

    bool at_end() {
        std::string tok;
        return !(in_ >> tok);
    }

private:
    std::istringstream in_;
};

void check_size(std::string_view what, std::size_t got, std::size_t expected) {
    if (got != expected) {
        throw ShapeError("qnet", std::string(what),
                         "size " + std::to_string(got) + " != " + std::to_string(expected));
    }
}

}  // namespace

std::string to_string(Shape3 s) {
    return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.c);
}

const std::array<LayerSpec, 3>& layer_specs() {
    // The output layer is linear: Q-values under this reward scheme are mostly
    // negative and a ReLU would pin them at zero.
    static const std::array<LayerSpec, 3> specs = {{
        {LayerKind::Conv, kConv1Filters, kKernelSide, kKernelSide, 1, Activation::ReLU,
         {kInputSide, kInputSide, 1}, {kConv1Side, kConv1Side, kConv1Filters}, kConv1First},
        {LayerKind::Conv, kConv2Filters, kKernelSide, kKernelSide, 1, Activation::ReLU,
         {kConv1Side, kConv1Side, kConv1Filters}, {kConv2Side, kConv2Side, kConv2Filters}, kConv2First},
        {LayerKind::Dense, kOutputNodes, 0, 0, 0, Activation::Identity,
         {kConv2Side, kConv2Side, kConv2Filters}, {1, 1, kOutputNodes}, kOutputFirst},
    }};
    return specs;
}

Tensor conv_forward(const Tensor& input, const ConvKernels& k, std::span<const double> bias, int stride) {
    const Shape3 in = input.shape();
    if (stride <= 0) {
        throw ShapeError("qnet", "stride", "stride must be positive");
    }
    if (in.c != k.channels) {
        throw ShapeError("qnet", "kernels", "input has " + std::to_string(in.c) + " channels, kernels expect " +
                                                std::to_string(k.channels));
    }
    if (in.h < k.kernel_h || in.w < k.kernel_w) {
        throw ShapeError("qnet", "input", "input " + to_string(in) + " smaller than kernel");
    }
    if (bias.size() != static_cast<std::size_t>(k.filters)) {
        throw ShapeError("qnet", "bias", "expected " + std::to_string(k.filters) + " biases");
    }
    if (k.weights.size() != static_cast<std::size_t>(k.filters * k.kernel_h * k.kernel_w * k.channels)) {
        throw ShapeError("qnet", "kernels", "weight count does not match kernel shape");
    }
    const Shape3 out_shape{(in.h - k.kernel_h) / stride + 1, (in.w - k.kernel_w) / stride + 1, k.filters};
    Tensor out(out_shape);
    for (int x = 0; x < out_shape.h; ++x) {
        for (int y = 0; y < out_shape.w; ++y) {
            for (int f = 0; f < k.filters; ++f) {
                double acc = bias[static_cast<std::size_t>(f)];
                for (int dx = 0; dx < k.kernel_h; ++dx) {
                    for (int dy = 0; dy < k.kernel_w; ++dy) {
                        for (int c = 0; c < in.c; ++c) {
                            acc += input.at(x * stride + dx, y * stride + dy, c) * k.at(f, dx, dy, c);
                        }
                    }
                }
                out.at(x, y, f) = acc > 0.0 ? acc : 0.0;
            }
        }
    }
    return out;
}

void QNetwork::validate() const {
    const auto& specs = layer_specs();
    if (conv1.filters != specs[0].filters || conv1.kernel_h != kKernelSide || conv1.kernel_w != kKernelSide ||
        conv1.channels != 1) {
        throw ShapeError("qnet", "conv1", "kernel bank must be 8 x 3x3x1");
    }
    if (conv2.filters != specs[1].filters || conv2.kernel_h != kKernelSide || conv2.kernel_w != kKernelSide ||
        conv2.channels != kConv1Filters) {
        throw ShapeError("qnet", "conv2", "kernel bank must be 8 x 3x3x8");
    }
    check_size("conv1", conv1.weights.size(), 8 * 9);
    check_size("conv2", conv2.weights.size(), 8 * 9 * 8);
    check_size("conv1_bias", conv1_bias.size(), kConv1Filters);
    check_size("conv2_bias", conv2_bias.size(), kConv2Filters);
    check_size("dense", dense.size(), kOutputNodes * kConv2Nodes);
    check_size("dense_bias", dense_bias.size(), kOutputNodes);
}

QNetwork QNetwork::random(Rng& rng) {
    QNetwork net;
    auto he = [&](std::vector<double>& w, int fan_in) {
        const double limit = std::sqrt(6.0 / fan_in);
        for (double& x : w) {
            x = rng.uniform(-limit, limit);
        }
    };
    he(net.conv1.weights, 9);
    he(net.conv2.weights, 9 * kConv1Filters);
    he(net.dense, kConv2Nodes);
    // Small positive bias keeps ReLUs alive at the start of training.
    std::fill(net.conv1_bias.begin(), net.conv1_bias.end(), 0.01);
    std::fill(net.conv2_bias.begin(), net.conv2_bias.end(), 0.01);
    return net;
}

std::string QNetwork::to_text() const {
    validate();
    std::ostringstream out;
    out << kWeightHeader << '\n';
    write_block(out, "conv1", {8, 3, 3, 1}, conv1.weights);
    write_block(out, "conv1_bias", {8}, conv1_bias);
    write_block(out, "conv2", {8, 3, 3, 8}, conv2.weights);
    write_block(out, "conv2_bias", {8}, conv2_bias);
    write_block(out, "dense", {4, 72}, dense);
    write_block(out, "dense_bias", {4}, dense_bias);
    return out.str();
}

QNetwork QNetwork::parse(std::string_view text) {
    BlockReader reader(text);
    if (reader.next_token() != kWeightHeader) {
        throw IoError("weights", "missing 'qnet-v1' header");
    }
    QNetwork net;
    reader.read_block("conv1", {8, 3, 3, 1}, net.conv1.weights);
    reader.read_block("conv1_bias", {8}, net.conv1_bias);
    reader.read_block("conv2", {8, 3, 3, 8}, net.conv2.weights);
    reader.read_block("conv2_bias", {8}, net.conv2_bias);
    reader.read_block("dense", {4, 72}, net.dense);
    reader.read_block("dense_bias", {4}, net.dense_bias);
    if (!reader.at_end()) {
        throw IoError("weights", "trailing data after dense_bias block");
    }
    return net;
}

void QNetwork::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path.string(), "cannot open weight file for writing");
    }
    out << to_text();
    if (!out) {
        throw IoError(path.string(), "write failed");
    }
}

QNetwork QNetwork::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open weight file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

NodeOverrideSet NodeOverrideSet::uniform(std::span<const int> node_ids, NodeOverride ov) {
    NodeOverrideSet set;
    for (int id : node_ids) {
        set.add(id, ov);
    }
    return set;
}

void NodeOverrideSet::add(int node_id, NodeOverride ov) {
    if (node_id < 0 || node_id >= kNodeCount) {
        throw RangeError("qnet", "node_id", std::to_string(node_id) + " outside 0.." + std::to_string(kNodeCount - 1));
    }
    if (!std::isfinite(ov.value)) {
        throw RangeError("qnet", "override", "override value must be finite");
    }
    auto [it, inserted] = entries_.emplace(node_id, ov);
    if (!inserted && !(it->second == ov)) {
        throw RangeError("qnet", "node_id", "conflicting overrides for node " + std::to_string(node_id));
    }
}

void NodeOverrideSet::merge(const NodeOverrideSet& other) {
    for (const auto& [id, ov] : other.entries_) {
        add(id, ov);
    }
}

void NodeOverrideSet::apply(int first, std::span<double> activations) const {
    const int last = first + static_cast<int>(activations.size());
    for (auto it = entries_.lower_bound(first); it != entries_.end() && it->first < last; ++it) {
        double& a = activations[static_cast<std::size_t>(it->first - first)];
        a = it->second.apply(a);
    }
}

Tensor encode_state(const maze::MazeGrid& grid, maze::Position pos, const VisitedSet& visited) {
    if (!grid.is_free(pos)) {
        throw RangeError("qnet", "pos", "agent must stand on a free cell");
    }
    Tensor t({grid.rows(), grid.cols(), 1});
    for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
            const maze::Position p{r, c};
            double v = 0.0;
            if (grid.at(p) == maze::Cell::Free) {
                v = visited.contains(p) ? 0.8 : 1.0;
            }
            t.at(r, c, 0) = v;
        }
    }
    t.at(pos.row, pos.col, 0) = 0.5;
    return t;
}

ForwardTrace forward_trace(const QNetwork& net, const Tensor& state, const NodeOverrideSet& overrides) {
    if (!(state.shape() == Shape3{kInputSide, kInputSide, 1})) {
        throw ShapeError("qnet", "state", "expected 7x7x1 input, got " + to_string(state.shape()));
    }
    ForwardTrace trace;
    trace.conv1 = conv_forward(state, net.conv1, net.conv1_bias, 1);
    overrides.apply(kConv1First, trace.conv1.data());
    trace.conv2 = conv_forward(trace.conv1, net.conv2, net.conv2_bias, 1);
    overrides.apply(kConv2First, trace.conv2.data());

    const auto hidden = trace.conv2.data();
    for (int a = 0; a < kOutputNodes; ++a) {
        double acc = net.dense_bias[static_cast<std::size_t>(a)];
        for (int j = 0; j < kConv2Nodes; ++j) {
            acc += net.dense_at(a, j) * hidden[static_cast<std::size_t>(j)];
        }
        trace.q[static_cast<std::size_t>(a)] = acc;
    }
    if (layer_specs()[2].activation == Activation::ReLU) {
        relu_inplace(trace.q);
    }
    overrides.apply(kOutputFirst, trace.q);
    return trace;
}

QValues forward(const QNetwork& net, const Tensor& state, const NodeOverrideSet& overrides) {
    return forward_trace(net, state, overrides).q;
}

maze::Action greedy_action(const QValues& q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i) {
        if (q[i] > q[best]) {
            best = i;
        }
    }
    return static_cast<maze::Action>(best);
}

ActivationRule ActivationRule::from_path_index(const maze::OptimalPath& path, int k) {
    if (k < 1 || k > static_cast<int>(path.size())) {
        throw RangeError("qnet", "path_index",
                         std::to_string(k) + " outside 1.." + std::to_string(path.size()));
    }
    return {Kind::FromPathIndex, k, path[static_cast<std::size_t>(k - 1)]};
}

EpisodeResult play_episode(const QNetwork& net, const maze::MazeGrid& grid, maze::Position start,
                           const NodeOverrideSet& overrides, const ActivationRule& rule, const PlayOptions& options) {
    if (!grid.is_free(start)) {
        throw RangeError("qnet", "start_pos", "episode must start on a free cell");
    }
    if (options.cap <= 0) {
        throw RangeError("qnet", "cap", "step cap must be positive");
    }
    Rng rng(options.seed);
    const NodeOverrideSet none;
    VisitedSet visited(grid);
    visited.insert(start);

    EpisodeResult result;
    result.trajectory.push_back(start);
    maze::Position pos = start;
    bool active = rule.kind == ActivationRule::Kind::Always;

    while (result.steps < options.cap) {
        if (!active && pos == rule.trigger) {
            active = true;
        }
        maze::Action action;
        if (options.explore > 0.0 && rng.uniform() < options.explore) {
            action = static_cast<maze::Action>(rng.below(maze::kActionCount));
        } else {
            action = greedy_action(forward(net, encode_state(grid, pos, visited), active ? overrides : none));
        }
        const maze::MoveResult move = maze::apply_move(grid, pos, action);
        ++result.steps;
        pos = move.pos;
        visited.insert(pos);
        result.trajectory.push_back(pos);
        if (move.outcome == maze::MoveOutcome::Win) {
            result.success = true;
            break;
        }
    }
    return result;
}

}  // namespace neurostrike::qnet
