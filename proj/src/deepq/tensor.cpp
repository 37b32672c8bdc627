#include "raydoom/deepq/tensor.hpp"

#include <algorithm>
#include <cstring>

namespace raydoom::deepq {

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

// Explicit specializations: GCC drops vector_size on dependent alias templates.
template <typename T>
struct Vector;
template <>
struct Vector<float> {
  typedef float type __attribute__((vector_size(32)));
};
template <>
struct Vector<double> {
  typedef double type __attribute__((vector_size(32)));
};
template <typename T>
using Vec = typename Vector<T>::type;
static_assert(sizeof(Vec<float>) == 32 && sizeof(Vec<double>) == 32);

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, Vec<T> v) {
  std::memcpy(p, &v, sizeof(v));
}

}  // namespace

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  // Register tile: 2 rows of C by 4 vectors of columns, accumulated over all of k.
  constexpr int L = static_cast<int>(32 / sizeof(T));
  constexpr int J = 4 * L;
  int i = 0;
  for (; i + 2 <= m; i += 2) {
    const T* a0 = a + static_cast<std::size_t>(i) * k;
    const T* a1 = a0 + k;
    T* c0 = c + static_cast<std::size_t>(i) * n;
    T* c1 = c0 + n;
    int j = 0;
    for (; j + J <= n; j += J) {
      Vec<T> r[2][4] = {};
      if (accumulate)
        for (int v = 0; v < 4; ++v) {
          r[0][v] = load(c0 + j + v * L);
          r[1][v] = load(c1 + j + v * L);
        }
      for (int kk = 0; kk < k; ++kk) {
        const T* brow = b + static_cast<std::size_t>(kk) * n + j;
        const T x0 = a0[kk], x1 = a1[kk];
        for (int v = 0; v < 4; ++v) {
          const Vec<T> bv = load(brow + v * L);
          r[0][v] += x0 * bv;
          r[1][v] += x1 * bv;
        }
      }
      for (int v = 0; v < 4; ++v) {
        store(c0 + j + v * L, r[0][v]);
        store(c1 + j + v * L, r[1][v]);
      }
    }
    for (; j < n; ++j) {
      T s0 = accumulate ? c0[j] : T(0), s1 = accumulate ? c1[j] : T(0);
      for (int kk = 0; kk < k; ++kk) {
        const T bv = b[static_cast<std::size_t>(kk) * n + j];
        s0 += a0[kk] * bv;
        s1 += a1[kk] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  for (; i < m; ++i) {
    const T* a0 = a + static_cast<std::size_t>(i) * k;
    T* c0 = c + static_cast<std::size_t>(i) * n;
    int j = 0;
    for (; j + J <= n; j += J) {
      Vec<T> r[4] = {};
      if (accumulate)
        for (int v = 0; v < 4; ++v) r[v] = load(c0 + j + v * L);
      for (int kk = 0; kk < k; ++kk) {
        const T* brow = b + static_cast<std::size_t>(kk) * n + j;
        const T x0 = a0[kk];
        for (int v = 0; v < 4; ++v) r[v] += x0 * load(brow + v * L);
      }
      for (int v = 0; v < 4; ++v) store(c0 + j + v * L, r[v]);
    }
    for (; j < n; ++j) {
      T s0 = accumulate ? c0[j] : T(0);
      for (int kk = 0; kk < k; ++kk) s0 += a0[kk] * b[static_cast<std::size_t>(kk) * n + j];
      c0[j] = s0;
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
  for (int kk = 0; kk < k; ++kk) {
    const T* arow = a + static_cast<std::size_t>(kk) * m;
    const T* __restrict brow = b + static_cast<std::size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* __restrict crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

namespace {

// Fixed-order partial sums in 32-byte lanes; the result does not depend on
// the target's vector width.
template <typename T>
T dot(const T* a, const T* b, int n) {
  using V = Vec<T>;
  constexpr int kLanes = static_cast<int>(32 / sizeof(T));
  V acc0 = {}, acc1 = {};
  int i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    V x0, y0, x1, y1;
    std::memcpy(&x0, a + i, sizeof(V));
    std::memcpy(&y0, b + i, sizeof(V));
    std::memcpy(&x1, a + i + kLanes, sizeof(V));
    std::memcpy(&y1, b + i + kLanes, sizeof(V));
    acc0 += x0 * y0;
    acc1 += x1 * y1;
  }
  acc0 += acc1;
  T sum = 0;
  for (int l = 0; l < kLanes; ++l) sum += acc0[l];
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T v = dot(arow, b + static_cast<std::size_t>(j) * k, k);
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

template <typename T>
void transpose(int rows, int cols, const T* in, T* out) {
  constexpr int kTile = 16;
  for (int r0 = 0; r0 < rows; r0 += kTile)
    for (int c0 = 0; c0 < cols; c0 += kTile)
      for (int r = r0; r < std::min(rows, r0 + kTile); ++r)
        for (int c = c0; c < std::min(cols, c0 + kTile); ++c)
          out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
}

template void gemm_nn<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_nn<double>(int, int, int, const double*, const double*, double*, bool);
template void gemm_tn<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_tn<double>(int, int, int, const double*, const double*, double*, bool);
template void gemm_nt<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_nt<double>(int, int, int, const double*, const double*, double*, bool);
template void transpose<float>(int, int, const float*, float*);
template void transpose<double>(int, int, const double*, double*);

}  // namespace raydoom::deepq
