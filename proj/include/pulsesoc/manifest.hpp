#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsesoc/version.hpp"

namespace pulsesoc {

// Reproducibility record written next to every command's outputs: the
// command, its fully resolved configuration (defaults materialized), the
// seed, and the artifact paths.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    double wall_clock_s = 0.0;

    nlohmann::json to_json() const {
        return {{"schema", "pulsesoc.manifest"},
                {"version", 1},
                {"tool_version", kVersion},
                {"command", command},
                {"argv", argv},
                {"config", config},
                {"seed", seed},
                {"outputs", outputs},
                {"wall_clock_s", wall_clock_s}};
    }
};

// Write-temp-then-rename so a manifest is never observed half-written.
inline void write_manifest(const RunManifest& m, const std::string& path) {
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
        out << m.to_json().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, target);
}

} // namespace pulsesoc
