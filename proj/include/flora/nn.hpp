#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/error.hpp"
#include "flora/matrix.hpp"

namespace flora {

using Rng = std::mt19937_64;

/// splitmix64 step; used to derive independent sub-stream seeds from one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, sigmoid = 3 };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_id(std::uint8_t id) {
  if (id > 3) throw InvalidArgument("unknown activation id " + std::to_string(id));
  return static_cast<Activation>(id);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

// Derivative expressed through the activation's output y.
inline double activation_grad_from_output(Activation a, double y) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

/// y = act(x W + b) with W stored in_dim x out_dim and b as a 1 x out_dim row.
struct DenseLayer {
  Matrix weights;
  Matrix bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const noexcept { return weights.rows(); }
  std::size_t out_dim() const noexcept { return weights.cols(); }
  bool operator==(const DenseLayer&) const = default;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const noexcept { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const noexcept { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }
  bool operator==(const Mlp&) const = default;

  void validate() const {
    FLORA_REQUIRE(!layers.empty(), InvalidArgument, "mlp needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      FLORA_REQUIRE(l.bias.rows() == 1 && l.bias.cols() == l.out_dim(), InvalidArgument,
                    "layer " + std::to_string(i) + ": bias shape does not match weights");
      if (i > 0)
        FLORA_REQUIRE(layers[i - 1].out_dim() == l.in_dim(), InvalidArgument,
                      "layer " + std::to_string(i) + ": in_dim " + std::to_string(l.in_dim()) +
                          " does not chain with previous out_dim " +
                          std::to_string(layers[i - 1].out_dim()));
    }
  }

  /// Same shapes and activations, all values zero. Used for gradients and
  /// optimizer moments.
  Mlp zeros_like() const {
    Mlp z;
    z.layers.reserve(layers.size());
    for (const auto& l : layers)
      z.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()),
                          Matrix(l.bias.rows(), l.bias.cols()), l.activation});
    return z;
  }
};

/// Uniform init in ±sqrt(6/(fan_in+fan_out)), zero bias.
///   widths = {in, hidden..., out}; hidden layers use `hidden`, last uses `output`.
inline Mlp make_mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                    Rng& rng) {
  FLORA_REQUIRE(widths.size() >= 2, InvalidArgument, "make_mlp needs at least in and out widths");
  Mlp net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in = widths[i], out = widths[i + 1];
    FLORA_REQUIRE(in > 0 && out > 0, InvalidArgument, "layer widths must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Matrix(in, out), Matrix(1, out),
                     i + 2 == widths.size() ? output : hidden};
    for (double& w : layer.weights.values()) w = dist(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline Mlp make_mlp(std::initializer_list<std::size_t> widths, Activation hidden,
                    Activation output, Rng& rng) {
  return make_mlp(std::span<const std::size_t>(widths.begin(), widths.size()), hidden, output, rng);
}

/// Layer inputs/outputs kept by a forward pass: activations[0] is the input,
/// activations[l + 1] the post-activation output of layer l.
struct ForwardCache {
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

namespace detail {

inline void dense_forward(const DenseLayer& layer, const Matrix& x, Matrix& y) {
  matmul(x, layer.weights, y);
  const std::size_t cols = y.cols();
  const double* b = layer.bias.data();
  const auto apply = [&](auto&& fn) {
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double* yr = y.row(r).data();
      for (std::size_t c = 0; c < cols; ++c) yr[c] = fn(yr[c] + b[c]);
    }
  };
  switch (layer.activation) {
    case Activation::identity: apply([](double v) { return v; }); break;
    case Activation::relu: apply([](double v) { return v > 0.0 ? v : 0.0; }); break;
    default: apply([&layer](double v) { return activate(layer.activation, v); }); break;
  }
}

inline void check_input(const Mlp& params, const Matrix& x) {
  FLORA_REQUIRE(!params.layers.empty(), InvalidArgument, "forward on an empty network");
  FLORA_REQUIRE(x.cols() == params.in_dim(), InvalidArgument,
                "input has " + std::to_string(x.cols()) + " columns, network expects " +
                    std::to_string(params.in_dim()));
}

}  // namespace detail

/// Batched forward pass; rows are independent samples.
inline Matrix mlp_forward(const Mlp& params, const Matrix& x) {
  detail::check_input(params, x);
  Matrix cur, next;
  detail::dense_forward(params.layers[0], x, cur);
  for (std::size_t l = 1; l < params.layers.size(); ++l) {
    detail::dense_forward(params.layers[l], cur, next);
    std::swap(cur, next);
  }
  return cur;
}

inline Matrix mlp_forward(const Mlp& params, const Matrix& x, ForwardCache& cache) {
  detail::check_input(params, x);
  cache.activations.resize(params.layers.size() + 1);
  cache.activations[0] = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    detail::dense_forward(params.layers[l], cache.activations[l], cache.activations[l + 1]);
  return cache.activations.back();
}

struct MlpGradients {
  Mlp params;    // dL/dW, dL/db per layer
  Matrix input;  // dL/dx
};

/// Backpropagates `upstream` = dL/d(output) through the cached forward pass.
inline MlpGradients mlp_backward(const Mlp& params, const ForwardCache& cache,
                                 const Matrix& upstream) {
  const std::size_t L = params.layers.size();
  FLORA_REQUIRE(cache.activations.size() == L + 1, InvalidArgument,
                "forward cache does not match network depth");
  const Matrix& out = cache.activations.back();
  FLORA_REQUIRE(upstream.rows() == out.rows() && upstream.cols() == out.cols(), InvalidArgument,
                "upstream gradient shape " + std::to_string(upstream.rows()) + "x" +
                    std::to_string(upstream.cols()) + " does not match output " +
                    std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
  MlpGradients g{params.zeros_like(), {}};
  Matrix delta = upstream;
  for (std::size_t l = L; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const Matrix& y = cache.activations[l + 1];
    if (layer.activation != Activation::identity) {
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] *= activation_grad_from_output(layer.activation, y[i]);
    }
    DenseLayer& gl = g.params.layers[l];
    gl.weights = matmul_tn(cache.activations[l], delta);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto dr = delta.row(r);
      for (std::size_t c = 0; c < dr.size(); ++c) gl.bias[c] += dr[c];
    }
    delta = matmul_nt(delta, layer.weights);
  }
  g.input = std::move(delta);
  return g;
}

/// Flat views over every parameter matrix, in layer order (weights, bias).
inline std::vector<Matrix*> parameter_refs(Mlp& net) {
  std::vector<Matrix*> out;
  for (auto& l : net.layers) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

inline std::vector<const Matrix*> parameter_refs(const Mlp& net) {
  std::vector<const Matrix*> out;
  for (const auto& l : net.layers) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

inline std::vector<std::string> parameter_names(const Mlp& net, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.push_back(prefix + ".layer" + std::to_string(i) + ".weights");
    out.push_back(prefix + ".layer" + std::to_string(i) + ".bias");
  }
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first;   // per parameter, same shape
  std::vector<Matrix> second;
};

/// One adaptive-moment (Adam) update over a list of parameter matrices.
/// All gradients are checked before anything is modified; a non-finite entry
/// raises NumericError naming the parameter and step.
inline void optimizer_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                           OptimizerState& state, std::span<const std::string> names = {}) {
  FLORA_REQUIRE(params.size() == grads.size(), InvalidArgument,
                "optimizer: " + std::to_string(params.size()) + " parameters but " +
                    std::to_string(grads.size()) + " gradients");
  if (state.first.empty()) {
    for (const Matrix* p : params) {
      state.first.emplace_back(p->rows(), p->cols());
      state.second.emplace_back(p->rows(), p->cols());
    }
  }
  FLORA_REQUIRE(state.first.size() == params.size(), InvalidArgument,
                "optimizer state was created for a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    FLORA_REQUIRE(grads[i]->rows() == params[i]->rows() && grads[i]->cols() == params[i]->cols() &&
                      state.first[i].size() == params[i]->size(),
                  InvalidArgument, "optimizer: gradient shape mismatch for parameter " +
                                       std::to_string(i));
    if (!grads[i]->all_finite()) {
      const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
      throw NumericError("non-finite gradient in parameter " + name + " at optimizer step " +
                         std::to_string(state.step + 1));
    }
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.first[i].values();
    auto v = state.second[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

inline void optimizer_step(Mlp& params, const Mlp& grads, OptimizerState& state) {
  const auto p = parameter_refs(params);
  const auto g = parameter_refs(grads);
  const auto names = parameter_names(params, "mlp");
  optimizer_step(std::span<Matrix* const>(p), std::span<const Matrix* const>(g), state, names);
}

// ---------------------------------------------------------------------------
// FLNN checkpoint: "FLNN", u32 version, u32 layer count, then per layer
// u32 in_dim, u32 out_dim, u8 activation, in*out f64 weights (row-major),
// out f64 bias. Little-endian throughout.

inline constexpr std::uint32_t kFlnnVersion = 1;

inline void write_mlp(ByteWriter& w, const Mlp& net) {
  w.magic("FLNN");
  w.u32(kFlnnVersion);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.u32(static_cast<std::uint32_t>(l.in_dim()));
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
    w.u8(static_cast<std::uint8_t>(l.activation));
    for (double v : l.weights.values()) w.f64(v);
    for (double v : l.bias.values()) w.f64(v);
  }
}

inline Mlp read_mlp(ByteReader& r) {
  r.expect_magic("FLNN");
  r.expect_version(kFlnnVersion);
  const std::uint32_t count = r.u32();
  r.require_payload(count, 9, "layer table");
  Mlp net;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    const std::size_t act_at = r.offset();
    const std::uint8_t act = r.u8();
    if (act > 3) r.fail_at(act_at, "unknown activation id " + std::to_string(act));
    r.require_payload(static_cast<std::uint64_t>(in) * out + out, 8, "layer weights");
    DenseLayer layer{Matrix(in, out), Matrix(1, out), static_cast<Activation>(act)};
    for (double& v : layer.weights.values()) v = r.f64();
    for (double& v : layer.bias.values()) v = r.f64();
    net.layers.push_back(std::move(layer));
  }
  try {
    if (!net.layers.empty()) net.validate();
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  return net;
}

inline std::string encode_mlp(const Mlp& net) {
  ByteWriter w;
  write_mlp(w, net);
  return w.take();
}

inline Mlp decode_mlp(std::string_view bytes, std::string context = "FLNN") {
  ByteReader r(bytes, std::move(context));
  Mlp net = read_mlp(r);
  r.expect_end();
  return net;
}

inline void save_mlp(const Mlp& net, const std::filesystem::path& path) {
  write_file_atomic(path, encode_mlp(net));
}

inline Mlp load_mlp(const std::filesystem::path& path) {
  return decode_mlp(read_file(path), path.string());
}

}  // namespace flora
