#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace egoact {

/// SHA-256 hex digest of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 hex digest of a file's contents. Throws if the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Incremental SHA-256 for hashing large payloads without copies.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size);
  void update(std::string_view bytes) { update(bytes.data(), bytes.size()); }
  std::string hex_digest();

 private:
  void* ctx_ = nullptr;
};

}  // namespace egoact
