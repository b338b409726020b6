#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "memcycle/errors.hpp"

namespace memcycle {

// Degradation paths (unparsable guidance, dropped actions, ...) log a
// warning and keep going; nothing here affects pipeline output.
inline void log_warning(const std::string& message) {
    std::fprintf(stderr, "[memcycle] warning: %s\n", message.c_str());
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::ordered_json& payload) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open for write: " + path.string());
    out << payload.dump(2) << '\n';
    if (!out) throw IoFailure("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open for read: " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    return content;
}

}  // namespace memcycle
