// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "gridcal/grid.hpp"
#include "gridcal/power_system.hpp"

namespace gridcal::test {

inline std::filesystem::path data_dir() { return GRIDCAL_TEST_DATA_DIR; }
inline std::filesystem::path grid_file(const std::string& name) { return data_dir() / "grids" / (name + ".json"); }
inline std::filesystem::path config_file(const std::string& name) { return data_dir() / "configs" / (name + ".json"); }

inline const PowerSystemModel& wscc9() {
    static const PowerSystemModel model(load_grid(grid_file("wscc9")));
    return model;
}

inline const PowerSystemModel& two_bus() {
    static const PowerSystemModel model(load_grid(grid_file("two_bus")));
    return model;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("gridcal-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace gridcal::test
