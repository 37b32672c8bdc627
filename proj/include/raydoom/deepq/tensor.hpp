#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace raydoom::deepq {

// Dense row-major array. Image batches are [N, C, H, W], flat batches [N, F].
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims) { reshape(std::move(dims)); }
  Tensor(std::initializer_list<int> dims) { reshape(std::vector<int>(dims)); }

  void reshape(std::vector<int> dims) {
    shape = std::move(dims);
    data.assign(count(shape), T(0));
  }
  // Keeps the storage when the element count allows it; contents undefined.
  void resize(const std::vector<int>& dims) {
    shape = dims;
    data.resize(count(shape));
  }

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  int batch() const { return shape.empty() ? 0 : shape[0]; }
  // Elements per batch entry.
  std::size_t stride() const { return shape.empty() || shape[0] == 0 ? 0 : data.size() / shape[0]; }
  T* row(int n) { return data.data() + static_cast<std::size_t>(n) * stride(); }
  const T* row(int n) const { return data.data() + static_cast<std::size_t>(n) * stride(); }

  static std::size_t count(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return dims.empty() ? 0 : n;
  }
};

std::string shape_string(const std::vector<int>& shape);

// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

// C[M,N] (+)= A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

// out[cols, rows] = in[rows, cols]^T
template <typename T>
void transpose(int rows, int cols, const T* in, T* out);

}  // namespace raydoom::deepq
