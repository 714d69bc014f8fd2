#include "retroinc/manifest.hpp"

#include "retroinc/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace retroinc {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw EnvironmentError("cannot open file for digest: " + path);
    }
    std::uint64_t hash = 1469598103934665603ULL;
    char buffer[8192];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buffer[i]);
            hash *= 1099511628211ULL;
        }
        if (!in) {
            break;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, file_digest(path));
}

void RunManifest::add_output(const std::string& path) {
    outputs.emplace_back(path, file_digest(path));
}

void RunManifest::save(const std::string& path) const {
    nlohmann::json doc;
    doc["command"] = command;
    doc["config"] = config_path;
    doc["seed"] = seed;
    doc["workers"] = workers;
    doc["out_dir"] = out_dir;
    doc["tool_version"] = tool_version;
    doc["wall_clock_seconds"] = wall_clock_seconds;
    auto files = [](const std::vector<std::pair<std::string, std::string>>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [p, digest] : list) {
            arr.push_back({{"path", p}, {"digest", digest}});
        }
        return arr;
    };
    doc["inputs"] = files(inputs);
    doc["outputs"] = files(outputs);
    std::ofstream out(path);
    if (!out) {
        throw EnvironmentError("cannot write manifest: " + path);
    }
    out << doc.dump(2) << "\n";
}

} // namespace retroinc
