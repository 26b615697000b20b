#include "neurostrike/maze.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "neurostrike/error.hpp"

namespace neurostrike::maze {

namespace {

constexpr std::string_view kDefaultLayout =
    "S#...#.\n"
    ".#.#.#.\n"
    ".#.#.#.\n"
    ".#.#.#.\n"
    ".#.#.#E\n"
    ".#.#.#.\n"
    "...#...\n";

std::string describe(Position p) {
    return "(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")";
}

Position step_to(Position p, Action a) {
    const Position d = offset(a);
    return {p.row + d.row, p.col + d.col};
}

// BFS distances from `from`; -1 marks unreachable cells.
std::vector<int> distances(const MazeGrid& grid, Position from) {
    std::vector<int> dist(static_cast<std::size_t>(grid.rows() * grid.cols()), -1);
    std::deque<Position> queue{from};
    dist[grid.index(from)] = 0;
    while (!queue.empty()) {
        const Position p = queue.front();
        queue.pop_front();
        for (Action a : kActions) {
            const Position q = step_to(p, a);
            if (grid.is_free(q) && dist[grid.index(q)] < 0) {
                dist[grid.index(q)] = dist[grid.index(p)] + 1;
                queue.push_back(q);
            }
        }
    }
    return dist;
}

}  // namespace

std::string_view to_string(Action a) {
    switch (a) {
        case Action::Up: return "up";
        case Action::Down: return "down";
        case Action::Left: return "left";
        case Action::Right: return "right";
    }
    return "?";
}

MazeGrid::MazeGrid(int rows, int cols, std::vector<Cell> cells, Position start, Position exit)
    : rows_(rows), cols_(cols), cells_(std::move(cells)), start_(start), exit_(exit) {
    if (rows <= 0 || cols <= 0) {
        throw RangeError("maze", "shape", "grid must have at least one row and column");
    }
    if (cells_.size() != static_cast<std::size_t>(rows * cols)) {
        throw ShapeError("maze", "cells", "expected " + std::to_string(rows * cols) + " cells, got " +
                                              std::to_string(cells_.size()));
    }
    if (!is_free(start_)) {
        throw RangeError("maze", "start", "start " + describe(start_) + " must be a free in-bounds cell");
    }
    if (!is_free(exit_)) {
        throw RangeError("maze", "exit", "exit " + describe(exit_) + " must be a free in-bounds cell");
    }
    if (start_ == exit_) {
        throw RangeError("maze", "exit", "start and exit must differ");
    }
}

MazeGrid MazeGrid::parse(std::string_view text) {
    std::vector<Cell> cells;
    std::optional<Position> start;
    std::optional<Position> exit;
    int rows = 0;
    int cols = -1;

    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (cols >= 0 && static_cast<int>(line.size()) != cols) {
            throw ShapeError("maze", "row " + std::to_string(rows),
                             "expected " + std::to_string(cols) + " columns, got " + std::to_string(line.size()));
        }
        cols = static_cast<int>(line.size());
        for (int c = 0; c < cols; ++c) {
            switch (line[static_cast<std::size_t>(c)]) {
                case '#': cells.push_back(Cell::Wall); break;
                case '.': cells.push_back(Cell::Free); break;
                case 'S':
                    if (start) throw RangeError("maze", "start", "more than one 'S' cell");
                    start = Position{rows, c};
                    cells.push_back(Cell::Free);
                    break;
                case 'E':
                    if (exit) throw RangeError("maze", "exit", "more than one 'E' cell");
                    exit = Position{rows, c};
                    cells.push_back(Cell::Free);
                    break;
                default:
                    throw RangeError("maze", "cell " + describe({rows, c}),
                                     std::string("unknown cell character '") + line[static_cast<std::size_t>(c)] + "'");
            }
        }
        ++rows;
    }
    if (!start) throw RangeError("maze", "start", "no 'S' cell");
    if (!exit) throw RangeError("maze", "exit", "no 'E' cell");
    return MazeGrid(rows, cols, std::move(cells), *start, *exit);
}

MazeGrid MazeGrid::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(path.string(), "cannot open maze file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string MazeGrid::to_text() const {
    std::string out;
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            const Position p{r, c};
            if (p == start_) {
                out += 'S';
            } else if (p == exit_) {
                out += 'E';
            } else {
                out += at(p) == Cell::Wall ? '#' : '.';
            }
        }
        out += '\n';
    }
    return out;
}

std::vector<Position> MazeGrid::free_cells() const {
    std::vector<Position> out;
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            if (cells_[index({r, c})] == Cell::Free) {
                out.push_back({r, c});
            }
        }
    }
    return out;
}

int MazeGrid::wall_count() const {
    int n = 0;
    for (Cell c : cells_) {
        n += c == Cell::Wall ? 1 : 0;
    }
    return n;
}

MazeGrid default_maze() { return MazeGrid::parse(kDefaultLayout); }

std::vector<Action> valid_moves(const MazeGrid& grid, Position pos) {
    if (!grid.is_free(pos)) {
        throw RangeError("maze", "pos", describe(pos) + " is a wall or out of bounds");
    }
    std::vector<Action> out;
    for (Action a : kActions) {
        if (grid.is_free(step_to(pos, a))) {
            out.push_back(a);
        }
    }
    return out;
}

MoveResult apply_move(const MazeGrid& grid, Position pos, Action a) {
    const Position next = step_to(pos, a);
    if (!grid.is_free(next)) {
        return {pos, MoveOutcome::Blocked};
    }
    return {next, next == grid.exit() ? MoveOutcome::Win : MoveOutcome::Valid};
}

OptimalPath shortest_path(const MazeGrid& grid) {
    const auto n = static_cast<std::size_t>(grid.rows() * grid.cols());
    std::vector<int> parent(n, -1);
    std::vector<bool> seen(n, false);
    std::deque<Position> queue{grid.start()};
    seen[grid.index(grid.start())] = true;

    while (!queue.empty()) {
        const Position p = queue.front();
        queue.pop_front();
        if (p == grid.exit()) {
            break;
        }
        for (Action a : kActions) {
            const Position q = step_to(p, a);
            if (grid.is_free(q) && !seen[grid.index(q)]) {
                seen[grid.index(q)] = true;
                parent[grid.index(q)] = static_cast<int>(grid.index(p));
                queue.push_back(q);
            }
        }
    }
    if (!seen[grid.index(grid.exit())]) {
        throw UnreachableError("maze", "exit", "exit " + describe(grid.exit()) + " unreachable from start");
    }

    OptimalPath path;
    for (int idx = static_cast<int>(grid.index(grid.exit())); idx >= 0; idx = parent[static_cast<std::size_t>(idx)]) {
        path.positions.push_back({idx / grid.cols(), idx % grid.cols()});
    }
    std::reverse(path.positions.begin(), path.positions.end());
    return path;
}

std::uint64_t count_shortest_paths(const MazeGrid& grid) {
    const std::vector<int> from_start = distances(grid, grid.start());
    const int target = from_start[grid.index(grid.exit())];
    if (target < 0) {
        return 0;
    }
    // Count along BFS layers.
    constexpr std::uint64_t kCap = std::uint64_t{1} << 62;
    std::vector<std::uint64_t> ways(from_start.size(), 0);
    ways[grid.index(grid.start())] = 1;
    for (int layer = 0; layer < target; ++layer) {
        for (const Position p : grid.free_cells()) {
            if (from_start[grid.index(p)] != layer) {
                continue;
            }
            for (Action a : kActions) {
                const Position q = step_to(p, a);
                if (grid.is_free(q) && from_start[grid.index(q)] == layer + 1) {
                    ways[grid.index(q)] = std::min(kCap, ways[grid.index(q)] + ways[grid.index(p)]);
                }
            }
        }
    }
    return ways[grid.index(grid.exit())];
}

}  // namespace neurostrike::maze
