#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <vector>

namespace relaysim {

struct GridPos {
    int x = 0;
    int y = 0;

    auto operator<=>(const GridPos&) const = default;
};

inline GridPos operator+(const GridPos& a, const GridPos& b) { return {a.x + b.x, a.y + b.y}; }
inline GridPos operator-(const GridPos& a, const GridPos& b) { return {a.x - b.x, a.y - b.y}; }

inline int manhattan(const GridPos& a, const GridPos& b) {
    return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

inline double euclidean(const GridPos& a, const GridPos& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

// Cells at Manhattan distance <= r from center, ordered by (dx, dy) ascending.
// Out-of-bounds cells are included; callers filter as needed.
inline std::vector<GridPos> manhattan_diamond(const GridPos& center, int r) {
    std::vector<GridPos> cells;
    cells.reserve(static_cast<size_t>(2 * r * r + 2 * r + 1));
    for (int dx = -r; dx <= r; ++dx) {
        const int span = r - std::abs(dx);
        for (int dy = -span; dy <= span; ++dy) {
            cells.push_back({center.x + dx, center.y + dy});
        }
    }
    return cells;
}

}  // namespace relaysim
