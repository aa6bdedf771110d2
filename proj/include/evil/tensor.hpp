#pragma once

// Dense NCHW tensor used throughout the library. Rank-4 only: vectors and
// per-pixel maps are stored as [n,k,1,1] or [n,1,h,w].

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evil {

template <typename T>
struct Tensor {
  std::array<int64_t, 4> shape{0, 0, 0, 0};  // n, c, h, w
  std::vector<T> v;

  Tensor() = default;
  Tensor(int64_t n, int64_t c, int64_t h, int64_t w)
      : shape{n, c, h, w}, v() {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor: negative dimension");
    v.assign(static_cast<size_t>(n) * c * h * w, T(0));
  }

  int64_t n() const { return shape[0]; }
  int64_t c() const { return shape[1]; }
  int64_t h() const { return shape[2]; }
  int64_t w() const { return shape[3]; }
  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int64_t pixels() const { return shape[2] * shape[3]; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(int64_t in, int64_t ic, int64_t iy, int64_t ix) {
    return v[((in * shape[1] + ic) * shape[2] + iy) * shape[3] + ix];
  }
  T at(int64_t in, int64_t ic, int64_t iy, int64_t ix) const {
    return v[((in * shape[1] + ic) * shape[2] + iy) * shape[3] + ix];
  }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }
};

template <typename T>
inline std::string shape_str(const Tensor<T>& t) {
  return "[" + std::to_string(t.shape[0]) + "," + std::to_string(t.shape[1]) +
         "," + std::to_string(t.shape[2]) + "," + std::to_string(t.shape[3]) +
         "]";
}

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                               const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
}

using IntGrid = Tensor<int32_t>;   // class labels, [n,1,h,w]
using ByteGrid = Tensor<uint8_t>;  // binary masks, [n,1,h,w]

}  // namespace evil
