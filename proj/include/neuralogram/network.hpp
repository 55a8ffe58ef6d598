#pragma once

// Sequential layer stack: conv2d / maxpool2d / relu / dense / dropout / softmax.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/errors.hpp"
#include "neuralogram/layers.hpp"
#include "neuralogram/optim.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/tensor.hpp"

namespace nlg {

enum class LayerKind { conv2d, maxpool2d, relu, dense, dropout, softmax };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::relu: return "relu";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::conv2d, LayerKind::maxpool2d, LayerKind::relu, LayerKind::dense, LayerKind::dropout,
                 LayerKind::softmax})
    if (s == to_string(k)) return k;
  throw FormatError("unknown layer kind '" + s + "'");
}

/// One layer of the stack. Input-side sizes (in_channels, in_units) are
/// inferred by Network::build and recorded so a checkpoint is self-describing.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t kernel_h = 0, kernel_w = 0, in_channels = 0, out_channels = 0, stride = 1;
  std::size_t pool_h = 0, pool_w = 0;
  std::size_t in_units = 0, units = 0;
  double drop_rate = 0.0;

  static LayerSpec conv(std::size_t out_ch, std::size_t kh = 3, std::size_t kw = 3, std::size_t stride = 1) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.out_channels = out_ch;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.stride = stride;
    return s;
  }
  static LayerSpec pool(std::size_t ph, std::size_t pw) {
    LayerSpec s;
    s.kind = LayerKind::maxpool2d;
    s.pool_h = ph;
    s.pool_w = pw;
    return s;
  }
  static LayerSpec dense(std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.drop_rate = rate;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
  }

  bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::conv2d:
      j.update({{"kernel_h", s.kernel_h}, {"kernel_w", s.kernel_w}, {"in_channels", s.in_channels},
                {"out_channels", s.out_channels}, {"stride", s.stride}});
      break;
    case LayerKind::maxpool2d:
      j.update({{"pool_h", s.pool_h}, {"pool_w", s.pool_w}});
      break;
    case LayerKind::dense:
      j.update({{"in_units", s.in_units}, {"units", s.units}});
      break;
    case LayerKind::dropout:
      j["drop_rate"] = s.drop_rate;
      break;
    default:
      break;
  }
}

inline void from_json(const nlohmann::json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  s.kernel_h = j.value("kernel_h", std::size_t{0});
  s.kernel_w = j.value("kernel_w", std::size_t{0});
  s.in_channels = j.value("in_channels", std::size_t{0});
  s.out_channels = j.value("out_channels", std::size_t{0});
  s.stride = j.value("stride", std::size_t{1});
  s.pool_h = j.value("pool_h", std::size_t{0});
  s.pool_w = j.value("pool_w", std::size_t{0});
  s.in_units = j.value("in_units", std::size_t{0});
  s.units = j.value("units", std::size_t{0});
  s.drop_rate = j.value("drop_rate", 0.0);
}

/// An architecture: per-sample input shape [C, H, W], the layer list and the
/// index of the layer whose (flattened) output is the embedding.
struct Architecture {
  Shape input_shape{1, 129, 200};
  std::vector<LayerSpec> layers;
  std::size_t embedding_layer = 0;
  std::string name;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

inline void to_json(nlohmann::json& j, const Architecture& a) {
  j = {{"name", a.name}, {"input_shape", a.input_shape}, {"layers", a.layers},
       {"embedding_layer", a.embedding_layer}};
}

inline void from_json(const nlohmann::json& j, Architecture& a) {
  a.name = j.value("name", std::string{});
  a.input_shape = j.at("input_shape").get<Shape>();
  a.layers = j.at("layers").get<std::vector<LayerSpec>>();
  a.embedding_layer = j.at("embedding_layer").get<std::size_t>();
}

/// Desk-scale classifier: six 3x3 convolutions (8-8-16-16-32-32) with
/// rectangular pools, a ReLU embedding of `embedding_size` units, dropout 0.5
/// and a softmax head over `n_classes`.
///
///   129x200 -conv-> 127x198 -pool 2x1-> 63x198 -conv-> 61x196 -pool 2x2-> 30x98
///   -conv,conv-> 26x94 -pool 2x2-> 13x47 -conv,conv-> 9x43 -pool 2x2-> 4x21 (x32)
inline Architecture desk_architecture(std::size_t embedding_size = 500, std::size_t n_classes = 8) {
  using L = LayerSpec;
  Architecture a;
  a.name = "desk-" + std::to_string(embedding_size);
  a.layers = {L::conv(8),  L::relu(), L::pool(2, 1), L::conv(8),  L::relu(), L::pool(2, 2),
              L::conv(16), L::relu(), L::conv(16),   L::relu(),   L::pool(2, 2),
              L::conv(32), L::relu(), L::conv(32),   L::relu(),   L::pool(2, 2),
              L::dense(embedding_size), L::relu(), L::dropout(0.5), L::dense(n_classes), L::softmax()};
  a.embedding_layer = 17;  // ReLU after the embedding dense layer
  return a;
}

/// VGG-19 style stack (16 conv + 3 dense weight layers)
/// with pools shaped for a 129x200 spectrogram. Used for shape and gradient
/// tests; not trained by default.
inline Architecture deep19_architecture(std::size_t embedding_size = 500, std::size_t n_classes = 8,
                                        std::size_t width = 8) {
  using L = LayerSpec;
  Architecture a;
  a.name = "deep-19";
  auto convs = [&](std::size_t n, std::size_t ch) {
    for (std::size_t i = 0; i < n; ++i) {
      a.layers.push_back(L::conv(ch));
      a.layers.push_back(L::relu());
    }
  };
  convs(2, width);
  a.layers.push_back(L::pool(1, 2));
  convs(2, 2 * width);
  a.layers.push_back(L::pool(2, 2));
  convs(4, 4 * width);
  a.layers.push_back(L::pool(2, 2));
  convs(4, 8 * width);
  a.layers.push_back(L::pool(2, 1));
  convs(4, 8 * width);
  a.layers.push_back(L::pool(2, 2));
  a.layers.push_back(L::dense(embedding_size));
  a.layers.push_back(L::relu());
  a.embedding_layer = a.layers.size() - 1;
  a.layers.push_back(L::dropout(0.5));
  a.layers.push_back(L::dense(embedding_size));
  a.layers.push_back(L::relu());
  a.layers.push_back(L::dropout(0.5));
  a.layers.push_back(L::dense(n_classes));
  a.layers.push_back(L::softmax());
  return a;
}

enum class Mode { train, eval };

template <class T>
class Network {
 public:
  Network() = default;

  /// Infers input-side sizes and allocates zeroed parameters.
  explicit Network(Architecture arch) : arch_(std::move(arch)) { build(); }

  const Architecture& architecture() const { return arch_; }
  std::size_t num_layers() const { return arch_.layers.size(); }

  /// Per-sample output shape of layer i (without the batch axis).
  const Shape& output_shape(std::size_t i) const { return out_shapes_.at(i); }
  std::size_t embedding_size() const { return shape_size(out_shapes_.at(arch_.embedding_layer)); }
  std::size_t num_classes() const { return shape_size(out_shapes_.back()); }

  /// Xavier-uniform weights, zero biases, drawn in layer order.
  void init(Rng& rng) {
    for (std::size_t i = 0; i < num_layers(); ++i) {
      if (!arch_.layers[i].has_params()) continue;
      params_[i][0] = xavier_init<T>(params_[i][0].shape, rng);
      params_[i][1].fill(T(0));
    }
  }

  std::vector<Tensor<T>*> parameters() { return collect(params_); }
  std::vector<const Tensor<T>*> parameters() const { return collect_const(params_); }
  std::vector<Tensor<T>*> gradients() { return collect(grads_); }
  std::vector<const Tensor<T>*> gradients() const { return collect_const(grads_); }

  /// Stable names matching parameters(): "layer<i>.weight" / "layer<i>.bias".
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < num_layers(); ++i)
      if (arch_.layers[i].has_params()) {
        out.push_back("layer" + std::to_string(i) + ".weight");
        out.push_back("layer" + std::to_string(i) + ".bias");
      }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  /// Runs layers [0, last] on a batch [N, C, H, W]. In train mode dropout draws
  /// from `rng`; intermediate values are cached for backward().
  Tensor<T> forward(const Tensor<T>& input, Mode mode, Rng* rng = nullptr,
                    std::optional<std::size_t> last = std::nullopt) {
    const std::size_t stop = last.value_or(num_layers() - 1);
    if (stop >= num_layers()) throw InvalidArgument("layer index " + std::to_string(stop) + " out of range");
    check_input(input);
    acts_.clear();
    acts_.reserve(stop + 2);
    acts_.push_back(input);
    argmax_.assign(num_layers(), {});
    masks_.assign(num_layers(), {});
    for (std::size_t i = 0; i <= stop; ++i) {
      const LayerSpec& s = arch_.layers[i];
      const Tensor<T>& x = acts_.back();
      Tensor<T> y;
      switch (s.kind) {
        case LayerKind::conv2d:
          y = conv2d(x, params_[i][0], params_[i][1], s.stride);
          break;
        case LayerKind::maxpool2d: {
          auto r = maxpool2d(x, s.pool_h, s.pool_w);
          y = std::move(r.output);
          argmax_[i] = std::move(r.argmax);
          break;
        }
        case LayerKind::relu:
          y = relu(x);
          break;
        case LayerKind::dense:
          y = dense(x, params_[i][0], params_[i][1]);
          break;
        case LayerKind::dropout: {
          if (mode == Mode::train && !rng) throw InvalidArgument("training-mode dropout needs a generator");
          Rng unused;
          y = dropout(x, s.drop_rate, mode == Mode::train, rng ? *rng : unused, &masks_[i]);
          break;
        }
        case LayerKind::softmax:
          y = softmax(x);
          break;
      }
#ifndef NDEBUG
      if (!y.all_finite()) throw DivergenceError("non-finite activation after layer " + std::to_string(i));
#endif
      acts_.push_back(std::move(y));
    }
    return acts_.back();
  }

  /// Backpropagates dL/d(output of the last layer run by forward()) and
  /// overwrites the parameter gradients.
  void backward(const Tensor<T>& grad_output) {
    const std::size_t ran = acts_.size() - 1;
    if (ran == 0) throw InvalidArgument("backward() without forward()");
    for (auto& layer : grads_)
      for (auto& g : layer) g.fill(T(0));
    Tensor<T> g = grad_output;
    for (std::size_t k = ran; k-- > 0;) {
      const LayerSpec& s = arch_.layers[k];
      const Tensor<T>& in = acts_[k];
      const Tensor<T>& out = acts_[k + 1];
      switch (s.kind) {
        case LayerKind::conv2d: {
          auto cg = conv2d_backward(in, params_[k][0], g, s.stride, k > 0);
          grads_[k][0] = std::move(cg.kernel);
          grads_[k][1] = std::move(cg.bias);
          g = std::move(cg.input);
          break;
        }
        case LayerKind::maxpool2d:
          g = maxpool2d_backward(g, argmax_[k], in.shape);
          break;
        case LayerKind::relu:
          g = relu_backward(in, g);
          break;
        case LayerKind::dense: {
          auto dg = dense_backward(in, params_[k][0], g);
          grads_[k][0] = std::move(dg.weight);
          grads_[k][1] = std::move(dg.bias);
          g = std::move(dg.input);
          g.shape = in.shape;
          break;
        }
        case LayerKind::dropout:
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= masks_[k][i];
          break;
        case LayerKind::softmax:
          g = softmax_backward(out, g);
          break;
      }
    }
  }

  /// Euclidean loss between the softmax output and multi-hot targets; fills gradients.
  T loss_and_grad(const Tensor<T>& input, const Tensor<T>& targets, Mode mode, Rng* rng = nullptr) {
    if (arch_.layers.back().kind != LayerKind::softmax) throw InvalidArgument("network must end in softmax");
    const Tensor<T> probs = forward(input, mode, rng);
    auto l = euclid_loss_on_probs(probs, targets);
    backward(l.grad);
    return l.loss;
  }

  T loss(const Tensor<T>& input, const Tensor<T>& targets) {
    const Tensor<T> probs = forward(input, Mode::eval);
    return euclid_loss_on_probs(probs, targets).loss;
  }

  /// Flattened embedding vectors [N, embedding_size] in eval mode.
  Tensor<T> embed(const Tensor<T>& input, std::optional<std::size_t> layer = std::nullopt) {
    const std::size_t l = layer.value_or(arch_.embedding_layer);
    Tensor<T> e = forward(input, Mode::eval, nullptr, l);
    const std::size_t n = e.dim(0);
    e.shape = {n, e.size() / n};
    return e;
  }

  /// Piecewise-linear regime of the last forward pass: the ReLU gates and the
  /// input each pool window picked.
  struct Regime {
    std::vector<std::vector<std::uint8_t>> relu_on;
    std::vector<std::vector<std::size_t>> argmax;
  };

  Regime regime() const {
    Regime r{std::vector<std::vector<std::uint8_t>>(num_layers()), argmax_};
    for (std::size_t i = 0; i + 1 < acts_.size(); ++i)
      if (arch_.layers[i].kind == LayerKind::relu)
        for (T v : acts_[i].data) r.relu_on[i].push_back(v > T(0) ? 1 : 0);
    return r;
  }

  /// Eval-mode loss with every ReLU gate and pool choice held at `r`. Equals
  /// loss() on the smooth piece where the regime is `r`, and is smooth across
  /// the kinks where loss() is not.
  T loss_on_regime(const Tensor<T>& input, const Tensor<T>& targets, const Regime& r) const {
    check_input(input);
    if (r.relu_on.size() != num_layers() || r.argmax.size() != num_layers())
      throw InvalidArgument("regime does not match the network");
    Tensor<T> x = input;
    for (std::size_t i = 0; i < num_layers(); ++i) {
      const LayerSpec& s = arch_.layers[i];
      switch (s.kind) {
        case LayerKind::conv2d:
          x = conv2d(x, params_[i][0], params_[i][1], s.stride);
          break;
        case LayerKind::maxpool2d: {
          if (r.argmax[i].size() != (x.shape[0] * x.shape[1] * ((x.shape[2] + s.pool_h - 1) / s.pool_h) *
                                     ((x.shape[3] + s.pool_w - 1) / s.pool_w)))
            throw InvalidArgument("regime does not cover layer " + std::to_string(i));
          Shape shape = x.shape;
          shape[2] = (shape[2] + s.pool_h - 1) / s.pool_h;
          shape[3] = (shape[3] + s.pool_w - 1) / s.pool_w;
          Tensor<T> y(shape);
          for (std::size_t o = 0; o < y.size(); ++o) y.data[o] = x.data[r.argmax[i][o]];
          x = std::move(y);
          break;
        }
        case LayerKind::relu:
          if (r.relu_on[i].size() != x.size()) throw InvalidArgument("regime does not cover layer " + std::to_string(i));
          for (std::size_t k = 0; k < x.size(); ++k) x.data[k] = r.relu_on[i][k] ? x.data[k] : T(0);
          break;
        case LayerKind::dense:
          x = dense(x, params_[i][0], params_[i][1]);
          break;
        case LayerKind::dropout:
          break;
        case LayerKind::softmax:
          x = softmax(x);
          break;
      }
    }
    return euclid_loss_on_probs(x, targets).loss;
  }

  /// Hash of the piecewise-linear regime of the last forward pass: the sign
  /// pattern entering every ReLU and every pool's argmax. Two passes with equal
  /// signatures lie on the same smooth piece of the loss.
  std::uint64_t activation_signature() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ull; };
    for (std::size_t i = 0; i + 1 < acts_.size(); ++i) {
      const LayerKind k = arch_.layers[i].kind;
      if (k == LayerKind::relu) {
        std::uint64_t word = 0;
        std::size_t bits = 0;
        for (T v : acts_[i].data) {
          word = (word << 1) | (v > T(0) ? 1u : 0u);
          if (++bits == 64) {
            mix(word);
            word = 0;
            bits = 0;
          }
        }
        mix(word);
      } else if (k == LayerKind::maxpool2d) {
        for (std::size_t a : argmax_[i]) mix(a);
      }
    }
    return h;
  }

  template <class U>
  Network<U> cast() const {
    Network<U> out(arch_);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }

 private:
  void build() {
    if (arch_.input_shape.size() != 3) throw ShapeError("input shape must be [C, H, W]");
    if (arch_.layers.empty()) throw InvalidArgument("architecture has no layers");
    if (arch_.embedding_layer >= arch_.layers.size()) throw InvalidArgument("embedding layer index out of range");
    Shape cur = arch_.input_shape;
    params_.assign(arch_.layers.size(), {});
    grads_.assign(arch_.layers.size(), {});
    out_shapes_.clear();
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      LayerSpec& s = arch_.layers[i];
      const std::string where = "layer " + std::to_string(i) + " (" + to_string(s.kind) + "): ";
      switch (s.kind) {
        case LayerKind::conv2d: {
          if (cur.size() != 3) throw ShapeError(where + "convolution after a flattening layer");
          if (s.out_channels == 0 || s.kernel_h == 0 || s.kernel_w == 0 || s.stride == 0)
            throw InvalidArgument(where + "parameters must be positive");
          if (s.in_channels != 0 && s.in_channels != cur[0]) throw ShapeError(where + "in_channels mismatch");
          s.in_channels = cur[0];
          if (s.kernel_h > cur[1] || s.kernel_w > cur[2]) throw ShapeError(where + "kernel larger than input");
          params_[i] = {Tensor<T>({s.out_channels, s.in_channels, s.kernel_h, s.kernel_w}),
                        Tensor<T>({s.out_channels})};
          cur = {s.out_channels, conv_out_dim(cur[1], s.kernel_h, s.stride),
                 conv_out_dim(cur[2], s.kernel_w, s.stride)};
          break;
        }
        case LayerKind::maxpool2d:
          if (cur.size() != 3) throw ShapeError(where + "pooling after a flattening layer");
          if (s.pool_h == 0 || s.pool_w == 0) throw InvalidArgument(where + "pool size must be positive");
          cur = {cur[0], (cur[1] + s.pool_h - 1) / s.pool_h, (cur[2] + s.pool_w - 1) / s.pool_w};
          break;
        case LayerKind::dense: {
          if (s.units == 0) throw InvalidArgument(where + "units must be positive");
          const std::size_t d = shape_size(cur);
          if (s.in_units != 0 && s.in_units != d) throw ShapeError(where + "in_units mismatch");
          s.in_units = d;
          params_[i] = {Tensor<T>({s.in_units, s.units}), Tensor<T>({s.units})};
          cur = {s.units};
          break;
        }
        case LayerKind::dropout:
          if (!(s.drop_rate >= 0.0 && s.drop_rate < 1.0)) throw InvalidArgument(where + "drop_rate outside [0,1)");
          break;
        case LayerKind::softmax:
          if (cur.size() != 1) throw ShapeError(where + "softmax needs a flat input");
          break;
        case LayerKind::relu:
          break;
      }
      out_shapes_.push_back(cur);
    }
    for (std::size_t i = 0; i < params_.size(); ++i)
      for (const auto& p : params_[i]) grads_[i].emplace_back(p.shape);
  }

  void check_input(const Tensor<T>& input) const {
    if (input.rank() != 4 || input.dim(1) != arch_.input_shape[0] || input.dim(2) != arch_.input_shape[1] ||
        input.dim(3) != arch_.input_shape[2])
      throw ShapeError("network expects [N," + shape_str(arch_.input_shape).substr(1) + ", got " +
                       shape_str(input.shape));
  }

  static std::vector<Tensor<T>*> collect(std::vector<std::vector<Tensor<T>>>& v) {
    std::vector<Tensor<T>*> out;
    for (auto& layer : v)
      for (auto& t : layer) out.push_back(&t);
    return out;
  }
  static std::vector<const Tensor<T>*> collect_const(const std::vector<std::vector<Tensor<T>>>& v) {
    std::vector<const Tensor<T>*> out;
    for (const auto& layer : v)
      for (const auto& t : layer) out.push_back(&t);
    return out;
  }

  Architecture arch_;
  std::vector<std::vector<Tensor<T>>> params_;
  std::vector<std::vector<Tensor<T>>> grads_;
  std::vector<Shape> out_shapes_;
  std::vector<Tensor<T>> acts_;
  std::vector<std::vector<std::size_t>> argmax_;
  std::vector<std::vector<T>> masks_;
};

}  // namespace nlg
