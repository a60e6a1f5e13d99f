#pragma once

// Reference shortest paths on an 8-connected grid (diagonal step sqrt(2)).

#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

namespace oracle {

struct Dijkstra {
    int width = 0;
    int height = 0;
    std::vector<double> dist;

    double at(int x, int y) const { return dist[static_cast<std::size_t>(y) * width + x]; }
};

// blocked is row-major, nonzero = obstacle. Distances are in cells times cell_size.
inline Dijkstra dijkstra(const std::vector<std::uint8_t>& blocked, int width, int height,
                         const std::vector<std::pair<int, int>>& goals, double cell_size) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Dijkstra out{width, height, std::vector<double>(blocked.size(), inf)};
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (auto [x, y] : goals) {
        const int i = y * width + x;
        if (blocked[i]) continue;
        out.dist[i] = 0.0;
        heap.push({0.0, i});
    }
    while (!heap.empty()) {
        auto [d, i] = heap.top();
        heap.pop();
        if (d > out.dist[i]) continue;
        const int x = i % width, y = i / width;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                const int j = ny * width + nx;
                if (blocked[j]) continue;
                const double step = (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
                const double nd = d + step * cell_size;
                if (nd < out.dist[j]) {
                    out.dist[j] = nd;
                    heap.push({nd, j});
                }
            }
        }
    }
    return out;
}

}  // namespace oracle
