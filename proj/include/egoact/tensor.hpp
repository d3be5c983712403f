#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace egoact {

/// Dense row-major tensor. T is float for training, double for gradient
/// checks.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) {
      throw std::invalid_argument("tensor data does not match shape");
    }
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int e : s) {
      if (e < 0) throw std::invalid_argument("negative tensor extent");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // Accessors for the ranks the ops use; no bounds checks in hot paths.
  T& at2(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  const T& at2(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  T& at3(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at3(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  T& at4(int o, int c, int y, int x) {
    return data[((static_cast<std::size_t>(o) * shape[1] + c) * static_cast<std::size_t>(shape[2]) + y) *
                    shape[3] +
                x];
  }
  const T& at4(int o, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(o) * shape[1] + c) * static_cast<std::size_t>(shape[2]) + y) *
                    shape[3] +
                x];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.reserve(data.size());
    for (const T& v : data) out.data.push_back(static_cast<U>(v));
    return out;
  }
};

inline std::string shape_to_string(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

/// Shape guard with an expected-vs-actual message.
template <typename T>
void check_shape(const Tensor<T>& t, const std::vector<int>& expected, const char* context) {
  if (t.shape != expected) {
    throw std::invalid_argument(std::string(context) + ": expected shape " +
                                shape_to_string(expected) + ", got " + shape_to_string(t.shape));
  }
}

}  // namespace egoact
