#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neurostrike::maze {

struct Position {
    int row = 0;
    int col = 0;

    friend constexpr auto operator<=>(const Position&, const Position&) = default;
};

enum class Cell : std::uint8_t { Free, Wall };

/// The four moves, in the tie-breaking order used everywhere (BFS and argmax).
enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::array<Action, 4> kActions = {Action::Up, Action::Down, Action::Left, Action::Right};
inline constexpr int kActionCount = 4;

constexpr Position offset(Action a) {
    switch (a) {
        case Action::Up: return {-1, 0};
        case Action::Down: return {1, 0};
        case Action::Left: return {0, -1};
        case Action::Right: return {0, 1};
    }
    return {0, 0};
}

std::string_view to_string(Action a);

enum class MoveOutcome : std::uint8_t { Valid, Blocked, Win };

struct MoveResult {
    Position pos;
    MoveOutcome outcome;
};

/// Rectangular grid of free and wall cells with one start and one exit.
/// Start and exit are validated on construction; reachability is not (see
/// shortest_path).
class MazeGrid {
public:
    MazeGrid(int rows, int cols, std::vector<Cell> cells, Position start, Position exit);

    /// Parses the text form: one line per row, '#' wall, '.' free, 'S' start, 'E' exit.
    static MazeGrid parse(std::string_view text);
    static MazeGrid load(const std::filesystem::path& path);

    std::string to_text() const;

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    Position start() const noexcept { return start_; }
    Position exit() const noexcept { return exit_; }

    bool in_bounds(Position p) const noexcept {
        return p.row >= 0 && p.row < rows_ && p.col >= 0 && p.col < cols_;
    }
    Cell at(Position p) const { return cells_[index(p)]; }
    bool is_free(Position p) const noexcept { return in_bounds(p) && cells_[index(p)] == Cell::Free; }

    std::size_t index(Position p) const noexcept { return static_cast<std::size_t>(p.row * cols_ + p.col); }
    std::vector<Position> free_cells() const;
    int wall_count() const;

    friend bool operator==(const MazeGrid&, const MazeGrid&) = default;

private:
    int rows_;
    int cols_;
    std::vector<Cell> cells_;
    Position start_;
    Position exit_;
};

/// Start-to-exit route; consecutive cells are 4-adjacent.
struct OptimalPath {
    std::vector<Position> positions;

    std::size_t size() const noexcept { return positions.size(); }
    const Position& operator[](std::size_t i) const { return positions[i]; }
    int moves() const noexcept { return static_cast<int>(positions.size()) - 1; }
};

/// Training reward scheme.
struct Rewards {
    double win = 1.0;
    double blocked = -0.75;
    double revisit = -0.25;
    double step = -0.04;
    double min_total = -21.0;  ///< episode counts as lost below this cumulative reward
};

/// The shipped 7x7 serpentine layout. Its unique shortest path has 27 cells.
MazeGrid default_maze();

/// Actions whose target is in bounds and free. Throws RangeError if pos is a
/// wall or out of bounds.
std::vector<Action> valid_moves(const MazeGrid& grid, Position pos);

/// Blocked moves leave the agent in place.
MoveResult apply_move(const MazeGrid& grid, Position pos, Action a);

/// Breadth-first shortest path; neighbours explored Up, Down, Left, Right so
/// ties resolve deterministically. Throws UnreachableError.
OptimalPath shortest_path(const MazeGrid& grid);

/// Number of distinct shortest start-to-exit paths (saturates at 2^62).
std::uint64_t count_shortest_paths(const MazeGrid& grid);

}  // namespace neurostrike::maze
