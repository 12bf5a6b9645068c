#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lobsurv {

inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

struct FileDigest {
  std::string path;
  std::string fnv1a64;
};

FileDigest digest_file(const std::string& path);

// Everything needed to repeat a command. Contains no timestamps, so identical
// runs produce identical manifests.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // full argument list after the program name
  nlohmann::json config;          // effective configuration after precedence
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

}  // namespace lobsurv
