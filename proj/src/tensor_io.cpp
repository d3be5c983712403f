#include "egoact/tensor_io.hpp"

#include <bit>
#include <fstream>

namespace egoact {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts unsupported");

using nlohmann::json;

void write_tensor(const std::filesystem::path& path, const Tensor<float>& tensor,
                  const json& extra) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tensor file: " + path.string());

  json header = {{"format", "egoact-tensor-v1"}, {"dtype", "f32"}, {"shape", tensor.shape}};
  if (!extra.empty()) header["extra"] = extra;
  out << header.dump() << "\n";
  out.write(reinterpret_cast<const char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

StoredTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tensor file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty tensor file: " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": bad tensor header: " + e.what());
  }
  if (header.value("format", "") != "egoact-tensor-v1" || header.value("dtype", "") != "f32") {
    throw std::runtime_error(path.string() + ": not an egoact f32 tensor file");
  }

  StoredTensor out;
  out.tensor = Tensor<float>(header.at("shape").get<std::vector<int>>());
  out.extra = header.value("extra", json::object());
  in.read(reinterpret_cast<char*>(out.tensor.data.data()),
          static_cast<std::streamsize>(out.tensor.numel() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != out.tensor.numel() * sizeof(float)) {
    throw std::runtime_error("tensor file truncated: " + path.string());
  }
  return out;
}

}  // namespace egoact
