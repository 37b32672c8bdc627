#include "raydoom/deepq/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "raydoom/bytes.hpp"
#include "raydoom/error.hpp"

namespace raydoom::deepq {

std::string_view layer_name(LayerTag tag) {
  switch (tag) {
    case LayerTag::Input: return "INPUT";
    case LayerTag::Conv: return "CONV";
    case LayerTag::MaxPool: return "MAXPOOL";
    case LayerTag::Relu: return "RELU";
    case LayerTag::LeakyRelu: return "LEAKY_RELU";
    case LayerTag::Dense: return "DENSE";
    case LayerTag::ConcatAux: return "CONCAT_AUX";
    case LayerTag::LinearOut: return "LINEAR_OUT";
  }
  return "UNKNOWN";
}

std::vector<LayerSpec> exp1_architecture(int n_actions) {
  return {LayerSpec::conv(32, 7), LayerSpec::maxpool(), LayerSpec::relu(),
          LayerSpec::conv(32, 4), LayerSpec::maxpool(), LayerSpec::relu(),
          LayerSpec::dense(800),  LayerSpec::leaky(),   LayerSpec::linear_out(n_actions)};
}

std::vector<LayerSpec> exp2_architecture(int n_actions) {
  return {LayerSpec::conv(32, 7), LayerSpec::maxpool(),     LayerSpec::relu(),  LayerSpec::conv(32, 5),
          LayerSpec::maxpool(),   LayerSpec::relu(),        LayerSpec::conv(32, 3), LayerSpec::maxpool(),
          LayerSpec::relu(),      LayerSpec::concat_aux(),  LayerSpec::dense(1024), LayerSpec::leaky(),
          LayerSpec::linear_out(n_actions)};
}

std::vector<LayerSpec> desk_architecture(int n_actions) {
  return {LayerSpec::conv(8, 5), LayerSpec::maxpool(), LayerSpec::relu(),
          LayerSpec::conv(8, 3), LayerSpec::maxpool(), LayerSpec::relu(),
          LayerSpec::dense(128), LayerSpec::leaky(),   LayerSpec::linear_out(n_actions)};
}

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorKind::ShapeMismatch, what); }

std::size_t flat(const std::vector<int>& shape) { return Tensor<float>::count(shape); }

template <typename T>
void xavier(std::span<T> weights, int fan_in, int fan_out, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (T& w : weights) w = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  ConvLayer(int in_channels, int out_channels, int kernel) : in_c_(in_channels), out_c_(out_channels), k_(kernel) {
    p_.assign(weight_count() + out_c_, T(0));
    g_.assign(p_.size(), T(0));
  }

  LayerTag tag() const override { return LayerTag::Conv; }

  std::vector<int> output_shape(const std::vector<int>& in, int) const override {
    if (in.size() != 3 || in[0] != in_c_) shape_error("conv expects " + std::to_string(in_c_) + " channels, got " + shape_string(in));
    if (in[1] < k_ || in[2] < k_) shape_error("conv kernel larger than input " + shape_string(in));
    return {out_c_, in[1] - k_ + 1, in[2] - k_ + 1};
  }

  void forward(const Tensor<T>& in, const Tensor<T>*, Tensor<T>& out) override {
    const int n = in.dim(0), h = in.dim(2), w = in.dim(3);
    oh_ = h - k_ + 1;
    ow_ = w - k_ + 1;
    const int rows = in_c_ * k_ * k_, positions = oh_ * ow_;
    out.resize({n, out_c_, oh_, ow_});
    col_.resize(static_cast<std::size_t>(n) * rows * positions);
    for (int b = 0; b < n; ++b) {
      T* col = col_.data() + static_cast<std::size_t>(b) * rows * positions;
      im2col(in.row(b), h, w, col);
      T* o = out.row(b);
      gemm_nn(out_c_, positions, rows, p_.data(), col, o, false);
      const T* bias = p_.data() + weight_count();
      for (int c = 0; c < out_c_; ++c) {
        T* plane = o + static_cast<std::size_t>(c) * positions;
        for (int p = 0; p < positions; ++p) plane[p] += bias[c];
      }
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout, Tensor<T>* din, Tensor<T>*) override {
    const int n = in.dim(0), h = in.dim(2), w = in.dim(3);
    const int rows = in_c_ * k_ * k_, positions = oh_ * ow_;
    std::fill(g_.begin(), g_.end(), T(0));
    T* dw = g_.data();
    T* db = g_.data() + weight_count();
    if (din) {
      din->resize(in.shape);
      std::fill(din->data.begin(), din->data.end(), T(0));
      dcol_.resize(static_cast<std::size_t>(rows) * positions);
    }
    for (int b = 0; b < n; ++b) {
      const T* col = col_.data() + static_cast<std::size_t>(b) * rows * positions;
      const T* d = dout.row(b);
      gemm_nt(out_c_, rows, positions, d, col, dw, true);
      for (int c = 0; c < out_c_; ++c) {
        const T* plane = d + static_cast<std::size_t>(c) * positions;
        T s = 0;
        for (int p = 0; p < positions; ++p) s += plane[p];
        db[c] += s;
      }
      if (din) {
        gemm_tn(rows, positions, out_c_, p_.data(), d, dcol_.data(), false);
        col2im(dcol_.data(), h, w, din->row(b));
      }
    }
  }

  std::span<T> params() override { return p_; }
  std::span<T> grads() override { return g_; }
  std::vector<std::uint32_t> dims() const override {
    return {static_cast<std::uint32_t>(out_c_), static_cast<std::uint32_t>(in_c_), static_cast<std::uint32_t>(k_)};
  }
  void init(SplitMix64& rng) override {
    xavier(std::span<T>(p_.data(), weight_count()), in_c_ * k_ * k_, out_c_ * k_ * k_, rng);
    std::fill(p_.begin() + weight_count(), p_.end(), T(0));
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ConvLayer>(*this); }

 private:
  std::size_t weight_count() const { return static_cast<std::size_t>(out_c_) * in_c_ * k_ * k_; }

  void im2col(const T* in, int h, int w, T* col) const {
    for (int c = 0; c < in_c_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          T* dst = col + static_cast<std::size_t>((c * k_ + ki) * k_ + kj) * oh_ * ow_;
          for (int oy = 0; oy < oh_; ++oy) {
            const T* src = in + (static_cast<std::size_t>(c) * h + oy + ki) * w + kj;
            std::memcpy(dst + static_cast<std::size_t>(oy) * ow_, src, sizeof(T) * ow_);
          }
        }
  }

  void col2im(const T* col, int h, int w, T* out) const {
    for (int c = 0; c < in_c_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          const T* src = col + static_cast<std::size_t>((c * k_ + ki) * k_ + kj) * oh_ * ow_;
          for (int oy = 0; oy < oh_; ++oy) {
            T* dst = out + (static_cast<std::size_t>(c) * h + oy + ki) * w + kj;
            const T* s = src + static_cast<std::size_t>(oy) * ow_;
            for (int ox = 0; ox < ow_; ++ox) dst[ox] += s[ox];
          }
        }
  }

  int in_c_, out_c_, k_;
  int oh_ = 0, ow_ = 0;
  std::vector<T> p_, g_;
  std::vector<T> col_, dcol_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  explicit MaxPoolLayer(int size) : s_(size) {}

  LayerTag tag() const override { return LayerTag::MaxPool; }

  std::vector<int> output_shape(const std::vector<int>& in, int) const override {
    if (in.size() != 3 || in[1] < s_ || in[2] < s_) shape_error("maxpool input too small: " + shape_string(in));
    return {in[0], in[1] / s_, in[2] / s_};
  }

  void forward(const Tensor<T>& in, const Tensor<T>*, Tensor<T>& out) override {
    const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    const int oh = h / s_, ow = w / s_;
    out.resize({n, c, oh, ow});
    arg_.resize(out.size());
    if (s_ == 2) {
      forward2(in, out, n * c, h, w, oh, ow);
      return;
    }
    std::size_t o = 0;
    for (int b = 0; b < n; ++b)
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * h * w;
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++o) {
            std::size_t best = base + static_cast<std::size_t>(oy * s_) * w + ox * s_;
            for (int dy = 0; dy < s_; ++dy)
              for (int dx = 0; dx < s_; ++dx) {
                const std::size_t i = base + static_cast<std::size_t>(oy * s_ + dy) * w + ox * s_ + dx;
                if (in.data[i] > in.data[best]) best = i;
              }
            arg_[o] = static_cast<std::uint32_t>(best);
            out.data[o] = in.data[best];
          }
      }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout, Tensor<T>* din, Tensor<T>*) override {
    if (!din) return;
    din->resize(in.shape);
    std::fill(din->data.begin(), din->data.end(), T(0));
    for (std::size_t o = 0; o < dout.size(); ++o) din->data[arg_[o]] += dout.data[o];
  }

  std::vector<std::uint32_t> dims() const override { return {static_cast<std::uint32_t>(s_)}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

 private:
  // Same selection rule as the generic loop (first maximum in row-major order).
  void forward2(const Tensor<T>& in, Tensor<T>& out, int planes, int h, int w, int oh, int ow) {
    std::size_t o = 0;
    const T* x = in.data.data();
    for (int p = 0; p < planes; ++p) {
      const std::size_t base = static_cast<std::size_t>(p) * h * w;
      for (int oy = 0; oy < oh; ++oy) {
        const std::size_t r0 = base + static_cast<std::size_t>(2 * oy) * w;
        const std::size_t r1 = r0 + w;
        for (int ox = 0; ox < ow; ++ox, ++o) {
          std::size_t best = r0 + 2 * ox;
          if (x[r0 + 2 * ox + 1] > x[best]) best = r0 + 2 * ox + 1;
          if (x[r1 + 2 * ox] > x[best]) best = r1 + 2 * ox;
          if (x[r1 + 2 * ox + 1] > x[best]) best = r1 + 2 * ox + 1;
          arg_[o] = static_cast<std::uint32_t>(best);
          out.data[o] = x[best];
        }
      }
    }
  }

  int s_;
  std::vector<std::uint32_t> arg_;
};

template <typename T>
class LeakyLayer final : public Layer<T> {
 public:
  // slope 0 is plain ReLU.
  LeakyLayer(T slope, LayerTag tag) : slope_(slope), tag_(tag) {}

  LayerTag tag() const override { return tag_; }
  std::vector<int> output_shape(const std::vector<int>& in, int) const override { return in; }

  void forward(const Tensor<T>& in, const Tensor<T>*, Tensor<T>& out) override {
    out.resize(in.shape);
    const T* x = in.data.data();
    T* y = out.data.data();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope_ * x[i];
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout, Tensor<T>* din, Tensor<T>*) override {
    if (!din) return;
    din->resize(in.shape);
    const T* x = in.data.data();
    const T* d = dout.data.data();
    T* g = din->data.data();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) g[i] = x[i] > T(0) ? d[i] : slope_ * d[i];
  }

  T slope() const { return slope_; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LeakyLayer>(*this); }

 private:
  T slope_;
  LayerTag tag_;
};

// Weights are stored input-major, W[in][units], followed by the biases.
template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(int in_features, int units, LayerTag tag) : in_(in_features), units_(units), tag_(tag) {
    p_.assign(static_cast<std::size_t>(in_) * units_ + units_, T(0));
    g_.assign(p_.size(), T(0));
  }

  LayerTag tag() const override { return tag_; }

  std::vector<int> output_shape(const std::vector<int>& in, int) const override {
    if (static_cast<int>(flat(in)) != in_) shape_error("dense expects " + std::to_string(in_) + " inputs, got " + shape_string(in));
    return {units_};
  }

  void forward(const Tensor<T>& in, const Tensor<T>*, Tensor<T>& out) override {
    const int n = in.dim(0);
    out.resize({n, units_});
    gemm_nn(n, units_, in_, in.data.data(), p_.data(), out.data.data(), false);
    const T* bias = p_.data() + static_cast<std::size_t>(in_) * units_;
    for (int b = 0; b < n; ++b) {
      T* o = out.row(b);
      for (int u = 0; u < units_; ++u) o[u] += bias[u];
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout, Tensor<T>* din, Tensor<T>*) override {
    const int n = in.dim(0);
    T* dw = g_.data();
    T* db = g_.data() + static_cast<std::size_t>(in_) * units_;
    gemm_tn(in_, units_, n, in.data.data(), dout.data.data(), dw, false);
    std::fill(db, db + units_, T(0));
    for (int b = 0; b < n; ++b) {
      const T* d = dout.row(b);
      for (int u = 0; u < units_; ++u) db[u] += d[u];
    }
    if (din) {
      din->resize(in.shape);
      gemm_nt(n, in_, units_, dout.data.data(), p_.data(), din->data.data(), false);
    }
  }

  std::span<T> params() override { return p_; }
  std::span<T> grads() override { return g_; }
  std::vector<std::uint32_t> dims() const override {
    return {static_cast<std::uint32_t>(units_), static_cast<std::uint32_t>(in_)};
  }
  void init(SplitMix64& rng) override {
    const std::size_t nw = static_cast<std::size_t>(in_) * units_;
    xavier(std::span<T>(p_.data(), nw), in_, units_, rng);
    std::fill(p_.begin() + nw, p_.end(), T(0));
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<DenseLayer>(*this); }

 private:
  int in_, units_;
  LayerTag tag_;
  std::vector<T> p_, g_;
};

template <typename T>
class ConcatAuxLayer final : public Layer<T> {
 public:
  ConcatAuxLayer(int in_features, int aux) : in_(in_features), aux_(aux) {}

  LayerTag tag() const override { return LayerTag::ConcatAux; }

  std::vector<int> output_shape(const std::vector<int>& in, int aux) const override {
    if (static_cast<int>(flat(in)) != in_ || aux != aux_) shape_error("concat_aux shape mismatch");
    return {in_ + aux_};
  }

  void forward(const Tensor<T>& in, const Tensor<T>* aux, Tensor<T>& out) override {
    const int n = in.dim(0);
    out.resize({n, in_ + aux_});
    for (int b = 0; b < n; ++b) {
      std::copy_n(in.row(b), in_, out.row(b));
      std::copy_n(aux->row(b), aux_, out.row(b) + in_);
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout, Tensor<T>* din, Tensor<T>* daux) override {
    const int n = in.dim(0);
    if (din) din->resize(in.shape);
    if (daux) daux->resize({n, aux_});
    for (int b = 0; b < n; ++b) {
      if (din) std::copy_n(dout.row(b), in_, din->row(b));
      if (daux) std::copy_n(dout.row(b) + in_, aux_, daux->row(b));
    }
  }

  std::vector<std::uint32_t> dims() const override { return {static_cast<std::uint32_t>(aux_)}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ConcatAuxLayer>(*this); }

 private:
  int in_, aux_;
};

}  // namespace

template <typename T>
Network<T>::Network(InputSpec input, const std::vector<LayerSpec>& layers) : input_(input), specs_(layers) {
  build();
}

template <typename T>
Network<T>::Network(const Network& other) : input_(other.input_), specs_(other.specs_), shapes_(other.shapes_),
                                            output_size_(other.output_size_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
  acts_.resize(layers_.size());
  grads_.resize(layers_.size());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Network<T>::build() {
  if (input_.channels < 1 || input_.height < 1 || input_.width < 1 || input_.aux < 0)
    shape_error("invalid input spec");
  if (specs_.empty()) shape_error("network has no layers");
  std::vector<int> shape{input_.channels, input_.height, input_.width};
  int concat_layers = 0;
  for (const LayerSpec& s : specs_) {
    std::unique_ptr<Layer<T>> layer;
    const int features = static_cast<int>(flat(shape));
    switch (s.tag) {
      case LayerTag::Conv:
        if (shape.size() != 3) shape_error("conv after a flat layer");
        if (s.units < 1 || s.kernel < 1) shape_error("bad conv spec");
        layer = std::make_unique<ConvLayer<T>>(shape[0], s.units, s.kernel);
        break;
      case LayerTag::MaxPool:
        if (s.kernel < 1) shape_error("bad maxpool spec");
        layer = std::make_unique<MaxPoolLayer<T>>(s.kernel);
        break;
      case LayerTag::Relu: layer = std::make_unique<LeakyLayer<T>>(T(0), LayerTag::Relu); break;
      case LayerTag::LeakyRelu: layer = std::make_unique<LeakyLayer<T>>(static_cast<T>(s.slope), LayerTag::LeakyRelu); break;
      case LayerTag::Dense:
      case LayerTag::LinearOut:
        if (s.units < 1) shape_error("bad dense spec");
        layer = std::make_unique<DenseLayer<T>>(features, s.units, s.tag);
        break;
      case LayerTag::ConcatAux:
        ++concat_layers;
        layer = std::make_unique<ConcatAuxLayer<T>>(features, input_.aux);
        break;
      case LayerTag::Input: shape_error("input pseudo-layer inside a network");
    }
    shape = layer->output_shape(shape, input_.aux);
    shapes_.push_back(shape);
    layers_.push_back(std::move(layer));
  }
  if (concat_layers != (input_.aux > 0 ? 1 : 0))
    shape_error("aux inputs need exactly one concat_aux layer");
  if (shape.size() != 1) shape_error("network must end in a flat layer");
  output_size_ = shape[0];
  acts_.resize(layers_.size());
  grads_.resize(layers_.size());
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->params().size();
  return n;
}

template <typename T>
void Network<T>::init(std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& l : layers_) l->init(rng);
}

template <typename T>
void Network<T>::fill_parameters(T value) {
  for (auto& l : layers_) std::fill(l->params().begin(), l->params().end(), value);
}

template <typename T>
const Tensor<T>& Network<T>::forward(const Tensor<T>& x, const Tensor<T>* aux) {
  if (x.shape.size() != 4 || x.dim(0) < 1 || x.dim(1) != input_.channels || x.dim(2) != input_.height ||
      x.dim(3) != input_.width)
    shape_error("network input " + shape_string({input_.channels, input_.height, input_.width}) + ", got " +
                shape_string(x.shape));
  const int n = x.dim(0);
  if (input_.aux > 0) {
    if (!aux || aux->shape.size() != 2 || aux->dim(0) != n || aux->dim(1) != input_.aux)
      shape_error("aux input must be [" + std::to_string(n) + "x" + std::to_string(input_.aux) + "]");
    aux_ = *aux;
  } else if (aux && aux->size() != 0) {
    shape_error("network takes no aux input");
  }
  x_copy_ = x;
  const Tensor<T>* in = &x_copy_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(*in, &aux_, acts_[i]);
    in = &acts_[i];
  }
  has_cache_ = true;
  return acts_.back();
}

template <typename T>
void Network<T>::backward(const Tensor<T>& dq, bool want_input_grads) {
  if (!has_cache_) throw Error(ErrorKind::NoForwardCache, "backward without a forward pass");
  if (dq.shape != acts_.back().shape)
    shape_error("output gradient " + shape_string(dq.shape) + " vs output " + shape_string(acts_.back().shape));
  const Tensor<T>* upstream = &dq;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor<T>& in = i == 0 ? x_copy_ : acts_[i - 1];
    Tensor<T>* din = i > 0 ? &grads_[i - 1] : (want_input_grads ? &dx_ : nullptr);
    Tensor<T>* daux = layers_[i]->tag() == LayerTag::ConcatAux ? &daux_ : nullptr;
    layers_[i]->backward(in, acts_[i], *upstream, din, daux);
    if (i > 0) upstream = &grads_[i - 1];
  }
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(input_, specs_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto src = layers_[i]->params();
    auto dst = out.layer(i).params();
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<U>(src[j]);
  }
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;

namespace {

constexpr std::string_view kCheckpointMagic = "RDQN";
constexpr std::uint32_t kCheckpointVersion = 1;

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorKind::CorruptCheckpoint, what); }

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(net.layer_count() + 1));
  const InputSpec& in = net.input();
  w.u32(static_cast<std::uint32_t>(LayerTag::Input));
  w.u32(4);
  for (int d : {in.channels, in.height, in.width, in.aux}) w.u32(static_cast<std::uint32_t>(d));
  auto& mutable_net = const_cast<Network<float>&>(net);
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Layer<float>& layer = mutable_net.layer(i);
    const auto dims = layer.dims();
    w.u32(static_cast<std::uint32_t>(layer.tag()));
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) w.u32(d);
    if (layer.tag() == LayerTag::LeakyRelu) w.f32(static_cast<float>(net.specs()[i].slope));
    for (float p : layer.params()) w.f32(p);
  }
  return w.take();
}

Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::CorruptCheckpoint);
  if (r.str(4) != kCheckpointMagic) corrupt("bad checkpoint magic");
  if (r.u32() != kCheckpointVersion) corrupt("unsupported checkpoint version");
  const std::uint32_t count = r.u32();
  if (count < 2 || count > 1024) corrupt("bad layer count");
  const auto read_dims = [&] {
    const std::uint32_t n = r.u32();
    if (n > 8) corrupt("bad dimension count");
    std::vector<std::uint32_t> dims(n);
    for (auto& d : dims) {
      d = r.u32();
      if (d > (1u << 24)) corrupt("dimension out of range");
    }
    return dims;
  };
  if (r.u32() != static_cast<std::uint32_t>(LayerTag::Input)) corrupt("missing input layer");
  const auto in_dims = read_dims();
  if (in_dims.size() != 4) corrupt("bad input layer");
  const InputSpec input{static_cast<int>(in_dims[0]), static_cast<int>(in_dims[1]), static_cast<int>(in_dims[2]),
                        static_cast<int>(in_dims[3])};

  struct Stored {
    LayerTag tag;
    std::vector<std::uint32_t> dims;
    std::vector<float> params;
  };
  std::vector<LayerSpec> specs;
  std::vector<Stored> stored;
  for (std::uint32_t i = 1; i < count; ++i) {
    Stored s;
    const std::uint32_t tag = r.u32();
    if (tag < 1 || tag > 7) corrupt("unknown layer tag " + std::to_string(tag));
    s.tag = static_cast<LayerTag>(tag);
    s.dims = read_dims();
    LayerSpec spec;
    spec.tag = s.tag;
    std::size_t n_params = 0;
    const auto need = [&](std::size_t n) {
      if (s.dims.size() != n) corrupt(std::string(layer_name(s.tag)) + " has wrong dims");
    };
    switch (s.tag) {
      case LayerTag::Conv:
        need(3);
        spec.units = static_cast<int>(s.dims[0]);
        spec.kernel = static_cast<int>(s.dims[2]);
        n_params = static_cast<std::size_t>(s.dims[0]) * s.dims[1] * s.dims[2] * s.dims[2] + s.dims[0];
        break;
      case LayerTag::MaxPool:
        need(1);
        spec.kernel = static_cast<int>(s.dims[0]);
        break;
      case LayerTag::Relu: need(0); break;
      case LayerTag::LeakyRelu:
        need(0);
        spec.slope = r.f32();
        break;
      case LayerTag::Dense:
      case LayerTag::LinearOut:
        need(2);
        spec.units = static_cast<int>(s.dims[0]);
        n_params = static_cast<std::size_t>(s.dims[0]) * s.dims[1] + s.dims[0];
        break;
      case LayerTag::ConcatAux: need(1); break;
      case LayerTag::Input: corrupt("duplicate input layer");
    }
    if (n_params * 4 > r.remaining()) corrupt("truncated parameters");
    s.params.resize(n_params);
    for (float& p : s.params) p = r.f32();
    specs.push_back(spec);
    stored.push_back(std::move(s));
  }
  if (r.remaining() != 0) corrupt("trailing bytes in checkpoint");

  Network<float> net;
  try {
    net = Network<float>(input, specs);
  } catch (const Error& e) {
    corrupt(std::string("inconsistent layer shapes: ") + e.what());
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    Layer<float>& layer = net.layer(i);
    if (layer.dims() != stored[i].dims) corrupt("layer " + std::to_string(i) + " dims do not chain");
    auto params = layer.params();
    if (params.size() != stored[i].params.size()) corrupt("layer " + std::to_string(i) + " parameter count");
    std::copy(stored[i].params.begin(), stored[i].params.end(), params.begin());
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace raydoom::deepq
