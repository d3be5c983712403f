#pragma once

// Content-addressed artifact store. Each entry is a directory named by a
// sha256 key; writers fill a staging directory which is atomically renamed
// into place, so concurrent producers of the same key are safe and a crash
// never leaves a partial entry visible.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace egoact {

class KeyedStore {
 public:
  explicit KeyedStore(std::filesystem::path root);

  // Builds a cache key from an ordered list of parts (stage name, parameter
  // JSON, input content hashes). Order matters.
  static std::string make_key(const std::vector<std::string>& parts);

  // Returns the entry directory if the key is already present.
  std::optional<std::filesystem::path> lookup(const std::string& key);

  // Returns the existing entry, or runs `fill` on a private staging directory
  // and publishes it under the key. Either way the returned directory is
  // complete and read-only from the caller's point of view.
  std::filesystem::path get_or_fill(
      const std::string& key,
      const std::function<void(const std::filesystem::path&)>& fill);

  const std::filesystem::path& root() const { return root_; }
  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path root_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace egoact
