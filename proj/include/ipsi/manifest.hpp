#pragma once

// Run manifest: tool version, resolved configuration, input digests, seeds
// and stage wall-times. Everything outside the "timing" block is a pure
// function of the inputs, so equal manifests (minus timing) imply
// byte-identical result files.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipsi/config.hpp"
#include "ipsi/version.hpp"

namespace ipsi {

inline std::string fnv1a_file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot digest missing file " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

struct RunManifest {
    std::string command;
    nlohmann::json resolved_config;
    std::vector<std::pair<std::string, std::string>> input_digests;
    nlohmann::json seeds = nlohmann::json::object();
    nlohmann::json timing = nlohmann::json::object();

    std::chrono::steady_clock::time_point run_start = std::chrono::steady_clock::now();

    void add_input(const std::string& path) {
        input_digests.emplace_back(path, fnv1a_file_digest(path));
    }

    void record_stage(const std::string& name, double seconds) {
        timing["stages"][name] = seconds;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["tool_version"] = kVersion;
        j["command"] = command;
        j["resolved_config"] = resolved_config;
        nlohmann::json inputs = nlohmann::json::array();
        for (const auto& [path, digest] : input_digests)
            inputs.push_back({{"path", path}, {"fnv1a64", digest}});
        j["inputs"] = inputs;
        j["seeds"] = seeds;
        nlohmann::json timing_out = timing;
        timing_out["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start)
                .count();
        timing_out["written_at_unix"] =
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
        j["timing"] = timing_out;
        return j;
    }
};

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace ipsi
