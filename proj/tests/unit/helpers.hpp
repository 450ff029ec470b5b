#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vidkd/dataset/fixture.hpp"

namespace vidkd::test {

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::path(VIDKD_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// The 4 x 2 x 25-frame, 32 px fixture, generated once per directory name.
inline const ClipManifest& fixture(const std::string& name = "fixture") {
    static std::map<std::string, ClipManifest> cache;
    auto it = cache.find(name);
    if (it == cache.end()) {
        it = cache.emplace(name, make_synthetic_fixture(scratch(name), {})).first;
    }
    return it->second;
}

}  // namespace vidkd::test
