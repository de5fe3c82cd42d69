#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatsomatic/io_util.hpp"

namespace flatsomatic {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string utc_timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance record written next to every command's outputs. Timestamps make
/// manifests the one output exempt from byte-identical reproducibility.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path& path) {
    inputs.emplace_back(path.string(), digest_file(path));
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["config"] = config;
    auto in = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : inputs)
      in.push_back({{"path", path}, {"fnv1a64", digest}});
    j["inputs"] = std::move(in);
    j["outputs"] = outputs;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j;
  }

  /// Stamps finished_at and writes <primary_output>.manifest.json atomically.
  void finalize(const std::filesystem::path& primary_output) {
    finished_at = utc_timestamp_now();
    const auto path = primary_output.string() + ".manifest.json";
    atomic_write(path, [&](std::ostream& os) { os << to_json().dump(2) << '\n'; });
  }
};

}  // namespace flatsomatic
