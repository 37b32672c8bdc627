#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "raydoom/deepq/tensor.hpp"
#include "raydoom/rng.hpp"

namespace raydoom::deepq {

// Numeric tags double as the checkpoint layer tags.
enum class LayerTag : std::uint32_t {
  Input = 0,
  Conv = 1,
  MaxPool = 2,
  Relu = 3,
  LeakyRelu = 4,
  Dense = 5,
  ConcatAux = 6,
  LinearOut = 7,
};

std::string_view layer_name(LayerTag tag);

inline constexpr float kDefaultLeakySlope = 0.01f;

// Architecture description independent of the scalar type.
struct LayerSpec {
  LayerTag tag = LayerTag::Relu;
  int units = 0;   // Conv: out channels; Dense/LinearOut: units
  int kernel = 0;  // Conv: kernel size; MaxPool: pool size
  double slope = kDefaultLeakySlope;

  static LayerSpec conv(int out_channels, int kernel) { return {LayerTag::Conv, out_channels, kernel}; }
  static LayerSpec maxpool(int size = 2) { return {LayerTag::MaxPool, 0, size}; }
  static LayerSpec relu() { return {LayerTag::Relu}; }
  static LayerSpec leaky(double slope = kDefaultLeakySlope) { return {LayerTag::LeakyRelu, 0, 0, slope}; }
  static LayerSpec dense(int units) { return {LayerTag::Dense, units}; }
  static LayerSpec concat_aux() { return {LayerTag::ConcatAux}; }
  static LayerSpec linear_out(int units) { return {LayerTag::LinearOut, units}; }
};

struct InputSpec {
  int channels = 1;
  int height = 1;
  int width = 1;
  int aux = 0;  // non-visual scalars, consumed by a ConcatAux layer

  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

// Two conv+pool+relu stages, 800 leaky units, one linear unit per action.
std::vector<LayerSpec> exp1_architecture(int n_actions);
// Three conv+pool+relu stages, aux scalars, 1024 leaky units.
std::vector<LayerSpec> exp2_architecture(int n_actions);
// Small variant for single-core runs.
std::vector<LayerSpec> desk_architecture(int n_actions);

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerTag tag() const = 0;
  // Per-sample output shape for a per-sample input shape (no batch axis).
  // Throws Error(ShapeMismatch).
  virtual std::vector<int> output_shape(const std::vector<int>& in, int aux) const = 0;
  virtual void forward(const Tensor<T>& in, const Tensor<T>* aux, Tensor<T>& out) = 0;
  // din / daux may be null when not needed. Overwrites grads().
  virtual void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                        Tensor<T>* daux) = 0;

  virtual std::span<T> params() { return {}; }
  virtual std::span<T> grads() { return {}; }
  // Checkpoint dims.
  virtual std::vector<std::uint32_t> dims() const { return {}; }
  virtual void init(SplitMix64&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
};

template <typename T>
class Network {
 public:
  Network() = default;
  // Throws Error(ShapeMismatch) when the layers do not chain.
  Network(InputSpec input, const std::vector<LayerSpec>& layers);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const InputSpec& input() const { return input_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  int output_size() const { return output_size_; }
  std::size_t parameter_count() const;

  // Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights, zero biases.
  void init(std::uint64_t seed);
  void fill_parameters(T value);

  // x: [N, C, H, W]; aux: [N, A] iff the input spec has aux scalars.
  // Returns [N, n_outputs]. Throws Error(ShapeMismatch).
  const Tensor<T>& forward(const Tensor<T>& x, const Tensor<T>* aux = nullptr);
  // Gradient of the loss with respect to the last forward's output. Throws
  // Error(NoForwardCache) without a matching forward.
  void backward(const Tensor<T>& dq, bool want_input_grads = false);

  const Tensor<T>& input_grad() const { return dx_; }
  const Tensor<T>& aux_grad() const { return daux_; }

  template <typename U>
  Network<U> cast() const;

 private:
  void build();

  InputSpec input_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<std::vector<int>> shapes_;  // per-sample output shape of each layer
  int output_size_ = 0;

  const Tensor<T>* x_ = nullptr;
  Tensor<T> aux_;
  bool has_cache_ = false;
  std::vector<Tensor<T>> acts_;
  std::vector<Tensor<T>> grads_;
  Tensor<T> dx_;
  Tensor<T> daux_;
  Tensor<T> x_copy_;
};

// "RDQN" | u32 version | u32 layer count (input pseudo-layer included)
// then per layer: u32 tag | u32 ndims | ndims x u32 | params as LE f32.
// The input pseudo-layer carries dims (C, H, W, aux) and no parameters.
std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net);
// Throws Error(CorruptCheckpoint).
Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Network<float>& net);
Network<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace raydoom::deepq
