#pragma once

#include <filesystem>
#include <string>

#include "neurostrike/maze.hpp"
#include "neurostrike/qnet.hpp"

namespace neurostrike::testsupport {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(NEUROSTRIKE_DATA_DIR) / name; }

inline std::filesystem::path config_path(const std::string& name) {
    return std::filesystem::path(NEUROSTRIKE_CONFIG_DIR) / name;
}

/// Weights shipped with the repository (seed 1 training on the default maze).
inline const qnet::QNetwork& shipped_weights() {
    static const qnet::QNetwork net = qnet::QNetwork::load(data_path("default.qnet"));
    return net;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("neurostrike-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace neurostrike::testsupport
