#pragma once

#include <filesystem>
#include <string>

#include "storycap/pipeline.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return (std::filesystem::path(STORYCAP_FIXTURES) / name).string();
}

inline std::string read_fixture(const std::string& name) {
    return storycap::pipeline::read_file(fixture_path(name));
}

inline std::string cli_path() { return STORYCAP_CLI; }

}  // namespace testutil
