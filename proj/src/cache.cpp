#include "egoact/cache.hpp"

#include <stdexcept>
#include <system_error>

#include "egoact/hash.hpp"
#include "egoact/rng.hpp"

namespace egoact {

namespace fs = std::filesystem;

KeyedStore::KeyedStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "staging");
}

std::string KeyedStore::make_key(const std::vector<std::string>& parts) {
  Sha256 hasher;
  for (const auto& part : parts) {
    // Length-prefix each part so ("ab","c") and ("a","bc") hash differently.
    const std::string prefix = std::to_string(part.size()) + ":";
    hasher.update(prefix.data(), prefix.size());
    hasher.update(part.data(), part.size());
  }
  return hasher.hex_digest();
}

fs::path KeyedStore::entry_path(const std::string& key) const {
  if (key.size() < 3) throw std::invalid_argument("cache key too short: " + key);
  // Two-level fanout keeps directory listings manageable.
  return root_ / key.substr(0, 2) / key.substr(2);
}

std::optional<fs::path> KeyedStore::lookup(const std::string& key) {
  const fs::path entry = entry_path(key);
  if (fs::exists(entry)) {
    hits_.fetch_add(1);
    return entry;
  }
  misses_.fetch_add(1);
  return std::nullopt;
}

fs::path KeyedStore::get_or_fill(
    const std::string& key, const std::function<void(const fs::path&)>& fill) {
  const fs::path entry = entry_path(key);
  if (fs::exists(entry)) {
    hits_.fetch_add(1);
    return entry;
  }
  misses_.fetch_add(1);

  // Unique staging dir per attempt; the pid+counter suffix avoids collisions
  // between threads racing on the same key.
  static std::atomic<std::uint64_t> counter{0};
  const std::string staging_name =
      key.substr(0, 16) + "." + std::to_string(counter.fetch_add(1));
  const fs::path staging = root_ / "staging" / staging_name;
  fs::create_directories(staging);

  try {
    fill(staging);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }

  fs::create_directories(entry.parent_path());
  std::error_code ec;
  fs::rename(staging, entry, ec);
  if (ec) {
    // A concurrent producer won the rename; accept their result.
    if (fs::exists(entry)) {
      std::error_code cleanup;
      fs::remove_all(staging, cleanup);
    } else {
      throw std::runtime_error("cache publish failed for " + entry.string() + ": " +
                               ec.message());
    }
  }
  return entry;
}

}  // namespace egoact
