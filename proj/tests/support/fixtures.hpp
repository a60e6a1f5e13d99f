#pragma once

// Small scene builders shared by the unit tests.

#include "vlngame/world.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace fixtures {

inline std::filesystem::path data_dir() { return VLNGAME_DATA_DIR; }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("vlngame_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& doc) {
    std::ofstream out(p, std::ios::binary);
    out << doc.dump(1);
}

struct ObjectSpec {
    std::string category;
    std::vector<std::string> attributes;
    std::vector<vlngame::Cell> footprint;
};

inline vlngame::GridScene make_scene(int w, int h, const std::vector<vlngame::Cell>& obstacles,
                                     const std::vector<ObjectSpec>& objects, double cell_size = 0.25) {
    using namespace vlngame;
    GridScene s;
    s.width = w;
    s.height = h;
    s.cell_size = cell_size;
    s.occupancy = Grid<Occupancy>(w, h, Occupancy::free);
    for (Cell c : obstacles) s.occupancy[c] = Occupancy::obstacle;
    int id = 0;
    for (const auto& o : objects) {
        s.objects.push_back(make_scene_object(id, o.category, o.attributes, o.footprint, 100 + id, cell_size,
                                              s.embedding_dim));
        ++id;
    }
    return s;
}

// Border walls around a w x h room.
inline std::vector<vlngame::Cell> border(int w, int h) {
    std::vector<vlngame::Cell> out;
    for (int x = 0; x < w; ++x) {
        out.push_back({x, 0});
        out.push_back({x, h - 1});
    }
    for (int y = 1; y < h - 1; ++y) {
        out.push_back({0, y});
        out.push_back({w - 1, y});
    }
    return out;
}

inline vlngame::Episode make_episode(std::shared_ptr<const vlngame::GridScene> scene, vlngame::Query q,
                                     vlngame::AgentPose start, std::string id = "ep") {
    vlngame::Episode e;
    e.id = std::move(id);
    e.scene = std::move(scene);
    e.query = std::move(q);
    e.start = start;
    return e;
}

}  // namespace fixtures
