#include "xauc/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xauc/error.hpp"
#include "xauc/rng.hpp"
#include "xauc/version.hpp"

namespace xauc {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MalformedFixture, "cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string file_digest(const std::string& path) {
    const std::string bytes = read_text_file(path);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return hex;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest make_manifest(const std::string& command) {
    RunManifest m;
    m.command = command;
    m.tool = kToolName;
    m.version = kToolVersion;
    m.timestamp = utc_timestamp();
    return m;
}

std::string manifest_to_json(const RunManifest& manifest) {
    json doc;
    doc["command"] = manifest.command;
    doc["tool"] = manifest.tool;
    doc["version"] = manifest.version;
    if (manifest.seed) doc["seed"] = *manifest.seed;
    doc["config"] = json::parse(manifest.config_json);
    json inputs = json::array();
    for (const InputDigest& in : manifest.inputs) {
        inputs.push_back(json{{"path", in.path}, {"digest", in.digest}});
    }
    doc["inputs"] = std::move(inputs);
    doc["timestamp"] = manifest.timestamp;
    return doc.dump(2);
}

}  // namespace xauc
