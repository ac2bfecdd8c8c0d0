#pragma once

// Normalization for byte-level log comparison: timing fields are zeroed and
// cache provenance dropped, everything else must match exactly.

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace testsup {

inline std::string normalized_log_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log " + path.string());
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j.contains("latency_ms")) j["latency_ms"] = 0;
    if (j.contains("wall_ms")) j["wall_ms"] = 0;
    j.erase("from_cache");
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::string file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace testsup
