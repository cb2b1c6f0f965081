#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coipss/errors.hpp"

namespace coipss {

/// Provenance sidecar written next to every output set. The configuration
/// hash is stable: identical command, flags, and input bytes give the same
/// hash.
struct RunManifest {
    std::string command;
    std::vector<std::string> args;    // full invocation, overrides included
    std::vector<std::string> inputs;  // resolved input paths
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string tool_version;
    std::string config_hash;
};

inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Hash over the command line and the content of every input file.
inline std::string config_hash(const std::string& command,
                               const std::vector<std::string>& args,
                               const std::vector<std::string>& input_paths) {
    std::uint64_t h = fnv1a64(command);
    for (const auto& a : args) h = fnv1a64("\x1f" + a, h);
    for (const auto& p : input_paths) h = fnv1a64("\x1e" + read_file_bytes(p), h);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline void write_manifest(const std::string& dir, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["args"] = m.args;
    j["inputs"] = m.inputs;
    j["seed"] = m.seed;
    j["output_dir"] = m.output_dir;
    j["tool_version"] = m.tool_version;
    j["config_hash"] = m.config_hash;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw InputError("cannot write manifest in '" + dir + "'");
    out << j.dump(2) << "\n";
}

}  // namespace coipss
