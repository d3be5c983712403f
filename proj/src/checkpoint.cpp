#include "egoact/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "egoact/hash.hpp"

namespace egoact {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts unsupported");

using nlohmann::json;

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);

  const auto bin_path = dir / "params.bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());

  json index;
  index["format"] = "egoact-checkpoint-v1";
  index["meta"] = ckpt.meta;
  json params = json::object();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : ckpt.entries) {
    if (params.contains(name)) throw std::runtime_error("duplicate checkpoint entry: " + name);
    params[name] = {{"shape", tensor.shape},
                    {"offset", offset},
                    {"count", tensor.numel()}};
    bin.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
    offset += tensor.numel() * sizeof(float);
  }
  index["params"] = std::move(params);
  bin.close();
  if (!bin) throw std::runtime_error("write failed: " + bin_path.string());

  index["sha256"] = sha256_file(bin_path);

  std::ofstream out(dir / "index.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + (dir / "index.json").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw std::runtime_error("cannot open checkpoint index: " + dir.string());
  json index;
  try {
    in >> index;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed checkpoint index in " + dir.string() + ": " + e.what());
  }
  if (index.value("format", "") != "egoact-checkpoint-v1") {
    throw std::runtime_error(dir.string() + ": not an egoact checkpoint");
  }

  const auto bin_path = dir / "params.bin";
  const std::string actual = sha256_file(bin_path);
  const std::string expected = index.at("sha256").get<std::string>();
  if (actual != expected) {
    throw std::runtime_error("checkpoint " + dir.string() + " is corrupt: content hash " +
                             actual + " != recorded " + expected);
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + bin_path.string());

  // Offsets define the canonical order.
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& [name, entry] : index.at("params").items()) {
    order.emplace_back(entry.at("offset").get<std::size_t>(), name);
  }
  std::sort(order.begin(), order.end());

  Checkpoint ckpt;
  ckpt.meta = index.value("meta", json::object());
  for (const auto& [offset, name] : order) {
    const json& entry = index.at("params").at(name);
    Tensor<float> t(entry.at("shape").get<std::vector<int>>());
    if (t.numel() != entry.at("count").get<std::size_t>()) {
      throw std::runtime_error("checkpoint entry " + name + " has inconsistent shape/count");
    }
    bin.seekg(static_cast<std::streamoff>(offset));
    bin.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!bin) throw std::runtime_error("checkpoint " + dir.string() + " truncated at " + name);
    ckpt.entries.emplace_back(name, std::move(t));
  }
  return ckpt;
}

std::string checkpoint_hash(const std::filesystem::path& dir) {
  return sha256_file(dir / "params.bin");
}

}  // namespace egoact
