#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rein/core/error.hpp"

namespace rein::expkit {

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const void* data, size_t len) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(data, len)));
  return std::string(buf);
}

inline std::string read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check<IoError>(in.good(), "cannot open ", path);
  std::ostringstream os;
  os << in.rdbuf();
  check<IoError>(!in.bad(), "read failed on ", path);
  return os.str();
}

inline std::string file_checksum(const std::string& path) {
  const std::string bytes = read_binary_file(path);
  return fnv1a64_hex(bytes.data(), bytes.size());
}

// Write-to-temp then rename, so readers never observe a half-written file.
inline void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check<IoError>(out.good(), "cannot open ", tmp.string(), " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    check<IoError>(out.good(), "write failed on ", tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  check<IoError>(!ec, "rename ", tmp.string(), " -> ", path, " failed: ", ec.message());
}

}  // namespace rein::expkit
