#include "egoact/flow_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace egoact {

namespace {

constexpr float kFloMagic = 202021.25f;

static_assert(std::endian::native == std::endian::little,
              "flo i/o assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& path) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("read_flo: truncated payload in " + path.string());
  }
  return value;
}

}  // namespace

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::string out;
  out.reserve(12 + flow.pixel_count() * 8);
  put(out, kFloMagic);
  put(out, static_cast<std::int32_t>(flow.width));
  put(out, static_cast<std::int32_t>(flow.height));
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    put(out, flow.u[i]);
    put(out, flow.v[i]);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("write_flo: cannot open " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write_flo: short write to " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_flo: cannot open " + path.string());
  const float magic = take<float>(in, path);
  if (magic != kFloMagic) {
    throw std::runtime_error("read_flo: bad magic in " + path.string());
  }
  const auto width = take<std::int32_t>(in, path);
  const auto height = take<std::int32_t>(in, path);
  if (width < 0 || height < 0) {
    throw std::runtime_error("read_flo: negative dimensions in " + path.string());
  }
  FlowField flow(width, height);
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    flow.u[i] = take<float>(in, path);
    flow.v[i] = take<float>(in, path);
  }
  return flow;
}

}  // namespace egoact
