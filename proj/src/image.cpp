#include "egoact/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace egoact {

namespace {

std::uint8_t quantize(float v) {
  const float scaled = std::clamp(v, 0.0f, 1.0f) * 255.0f;
  return static_cast<std::uint8_t>(std::lround(scaled));
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  for (;;) {
    int c = in.get();
    if (c == EOF) throw std::runtime_error("pnm: unexpected end of header");
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) continue;
    tok.push_back(static_cast<char>(c));
    while (in.peek() != EOF && !std::isspace(in.peek())) {
      tok.push_back(static_cast<char>(in.get()));
    }
    return tok;
  }
}

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_header(std::istream& in, const char* magic, const std::filesystem::path& path) {
  if (next_token(in) != magic) {
    throw std::runtime_error("pnm: bad magic in " + path.string());
  }
  PnmHeader h;
  h.width = std::stoi(next_token(in));
  h.height = std::stoi(next_token(in));
  h.maxval = std::stoi(next_token(in));
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255) {
    throw std::runtime_error("pnm: unsupported dimensions or maxval in " + path.string());
  }
  in.get();  // single whitespace after maxval
  return h;
}

}  // namespace

float sample_bilinear_plane(const float* plane, int width, int height, float x, float y) {
  x = std::clamp(x, 0.0f, static_cast<float>(width - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = plane[y0 * width + x0] * (1.0f - fx) + plane[y0 * width + x1] * fx;
  const float bot = plane[y1 * width + x0] * (1.0f - fx) + plane[y1 * width + x1] * fx;
  return top * (1.0f - fy) + bot * fy;
}

float sample_bilinear(const GrayImage& img, float x, float y) {
  return sample_bilinear_plane(img.data.data(), img.width, img.height, x, y);
}

GrayImage to_gray(const Image& img) {
  if (img.channels != 3) throw std::invalid_argument("to_gray: expected 3 channels");
  GrayImage out(img.width, img.height);
  const float* r = img.plane(0);
  const float* g = img.plane(1);
  const float* b = img.plane(2);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    out.data[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  }
  return out;
}

std::string encode_ppm(const Image& img) {
  if (img.channels != 3) throw std::invalid_argument("encode_ppm: expected 3 channels");
  std::ostringstream out(std::ios::binary);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  const float* r = img.plane(0);
  const float* g = img.plane(1);
  const float* b = img.plane(2);
  std::string pixels;
  pixels.reserve(img.pixel_count() * 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    pixels.push_back(static_cast<char>(quantize(r[i])));
    pixels.push_back(static_cast<char>(quantize(g[i])));
    pixels.push_back(static_cast<char>(quantize(b[i])));
  }
  out << pixels;
  return out.str();
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot open " + path.string());
  const std::string bytes = encode_ppm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write_ppm: short write to " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_ppm: cannot open " + path.string());
  const PnmHeader h = read_header(in, "P6", path);
  std::vector<char> raw(static_cast<std::size_t>(h.width) * h.height * 3);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error("read_ppm: truncated payload in " + path.string());
  }
  Image img(h.width, h.height, 3);
  float* r = img.plane(0);
  float* g = img.plane(1);
  float* b = img.plane(2);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    r[i] = static_cast<float>(static_cast<unsigned char>(raw[3 * i])) / 255.0f;
    g[i] = static_cast<float>(static_cast<unsigned char>(raw[3 * i + 1])) / 255.0f;
    b[i] = static_cast<float>(static_cast<unsigned char>(raw[3 * i + 2])) / 255.0f;
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::string pixels;
  pixels.reserve(img.pixel_count());
  for (const float v : img.data) pixels.push_back(static_cast<char>(quantize(v)));
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw std::runtime_error("write_pgm: short write to " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
  const PnmHeader h = read_header(in, "P5", path);
  std::vector<char> raw(static_cast<std::size_t>(h.width) * h.height);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error("read_pgm: truncated payload in " + path.string());
  }
  GrayImage img(h.width, h.height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.data[i] = static_cast<float>(static_cast<unsigned char>(raw[i])) / 255.0f;
  }
  return img;
}

}  // namespace egoact
