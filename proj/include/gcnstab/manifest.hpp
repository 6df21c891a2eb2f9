#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "gcnstab/rng.hpp"

namespace gcnstab {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Missing manifest is its own condition, distinct from a failed verification.
class ManifestAbsentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view s) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s)));
    return std::string(buf);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

// Everything needed to regenerate a run byte for byte: the full config, the
// seed scheme, and content hashes of the emitted files plus a cheap one
// graph, one trial slice that verification can re-execute.
struct RunManifest {
    std::string config_text;
    std::uint64_t base_seed = 0;
    std::string library_version = kLibraryVersion;
    std::string rng_algorithm = kRngAlgorithmId;
    std::string seed_derivation =
        "derive_seed(base, stream, a, b, c): chained splitmix64 over "
        "(base ^ 0x6a09e667f3bcc909, stream, a, b, c)";
    std::map<std::string, std::uint64_t> seed_streams;
    std::string created;
    std::map<std::string, std::string> file_hashes;
    std::string slice_config_text;
    std::string slice_hash;
};

inline std::map<std::string, std::uint64_t> seed_stream_table() {
    return {{"graph", streams::kGraph},
            {"features", streams::kFeatures},
            {"perturbation", streams::kPerturbation},
            {"eval-perturbation", streams::kEvalPerturbation},
            {"dataset", streams::kDataset},
            {"tail", streams::kTail},
            {"train-features", streams::kTrainFeatures}};
}

inline std::string utc_timestamp() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    return nlohmann::json{{"config", m.config_text},
                          {"base_seed", m.base_seed},
                          {"library_version", m.library_version},
                          {"rng_algorithm", m.rng_algorithm},
                          {"seed_derivation", m.seed_derivation},
                          {"seed_streams", m.seed_streams},
                          {"created", m.created},
                          {"file_hashes", m.file_hashes},
                          {"slice_config", m.slice_config_text},
                          {"slice_hash", m.slice_hash}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.config_text = j.at("config").get<std::string>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.library_version = j.at("library_version").get<std::string>();
    m.rng_algorithm = j.at("rng_algorithm").get<std::string>();
    m.seed_derivation = j.at("seed_derivation").get<std::string>();
    m.seed_streams =
        j.at("seed_streams").get<std::map<std::string, std::uint64_t>>();
    m.created = j.at("created").get<std::string>();
    m.file_hashes =
        j.at("file_hashes").get<std::map<std::string, std::string>>();
    m.slice_config_text = j.at("slice_config").get<std::string>();
    m.slice_hash = j.at("slice_hash").get<std::string>();
    return m;
}

inline void write_manifest_file(const std::string& dir, const RunManifest& m) {
    write_text_file((std::filesystem::path(dir) / "manifest.json").string(),
                    manifest_to_json(m).dump(2) + "\n");
}

inline RunManifest read_manifest_file(const std::string& dir) {
    const auto path = std::filesystem::path(dir) / "manifest.json";
    if (!std::filesystem::exists(path))
        throw ManifestAbsentError("no manifest.json in " + dir);
    return manifest_from_json(nlohmann::json::parse(read_text_file(path.string())));
}

}  // namespace gcnstab
