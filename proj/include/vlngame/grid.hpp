#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace vlngame {

// Integer grid coordinate. x is the column, y the row; row-major order is (y, x).
struct Cell {
    int x = 0;
    int y = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
    friend std::strong_ordering operator<=>(const Cell& a, const Cell& b) {
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
};

struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y)) << 32) |
                                          static_cast<std::uint32_t>(c.x));
    }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline constexpr int kDx8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
inline constexpr int kDy8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
inline constexpr int kDx4[4] = {1, -1, 0, 0};
inline constexpr int kDy4[4] = {0, 0, 1, -1};

// Dense row-major 2D array.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }

    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool in_bounds(Cell c) const { return in_bounds(c.x, c.y); }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
    Cell cell_at(std::size_t i) const {
        return {static_cast<int>(i % width_), static_cast<int>(i / width_)};
    }

    decltype(auto) operator()(int x, int y) { return data_[index(x, y)]; }
    decltype(auto) operator()(int x, int y) const { return data_[index(x, y)]; }
    decltype(auto) operator[](Cell c) { return data_[index(c.x, c.y)]; }
    decltype(auto) operator[](Cell c) const { return data_[index(c.x, c.y)]; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

// Center of a cell in metric coordinates.
inline Vec2 cell_center(Cell c, double cell_size) {
    return {(c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size};
}

inline Cell cell_of(Vec2 p, double cell_size) {
    return {static_cast<int>(std::floor(p.x / cell_size)), static_cast<int>(std::floor(p.y / cell_size))};
}

}  // namespace vlngame
