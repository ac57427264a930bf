#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace xauc {

struct InputDigest {
    std::string path;
    std::string digest;  // "fnv1a64:" + 16 hex digits over the raw file bytes
};

// Provenance block embedded in every report: what ran, with which resolved
// configuration, over which inputs. Identical manifests imply identical
// reports; the timestamp is informational and excluded from that contract.
struct RunManifest {
    std::string command;
    std::string tool;
    std::string version;
    std::optional<std::uint64_t> seed;
    std::string config_json = "{}";  // resolved config, all defaults materialized
    std::vector<InputDigest> inputs;
    std::string timestamp;  // UTC, ISO 8601
};

// Reads a whole file; throws MalformedFixture when unreadable.
std::string read_text_file(const std::string& path);

std::string file_digest(const std::string& path);

std::string utc_timestamp();

// Manifest with tool name, version, and timestamp filled in.
RunManifest make_manifest(const std::string& command);

// Serialized object for embedding under a report's "manifest" key.
std::string manifest_to_json(const RunManifest& manifest);

}  // namespace xauc
