#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cts {

/// Incremental SHA-256, hex-encoded. Used for config hashes, stage stamps
/// and embedding-cache keys.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace cts
