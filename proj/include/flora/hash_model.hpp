#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/error.hpp"
#include "flora/matrix.hpp"
#include "flora/nn.hpp"

namespace flora {

enum class Domain : std::uint8_t { user = 0, item = 1 };

inline constexpr std::size_t kMaxBits = 4096;

struct HashConfig {
  std::size_t bits = 128;
  double lambda_u = 1e-5;  // balance (uniform frequency) weight; larger values stall training at all-zero codes
  double lambda_i = 0.01;  // independence weight
  std::vector<std::size_t> tower_sizes{256, 256};
  std::vector<std::size_t> shared_sizes{128};  // hidden widths of g0; the m-unit tanh layer is appended

  void validate() const {
    FLORA_REQUIRE(bits > 0 && bits <= kMaxBits, InvalidArgument,
                  "bit count must be in [1, " + std::to_string(kMaxBits) + "]");
    FLORA_REQUIRE(lambda_u >= 0.0 && lambda_i >= 0.0, InvalidArgument,
                  "loss weights must be non-negative");
    FLORA_REQUIRE(!tower_sizes.empty(), InvalidArgument, "towers need at least one layer");
  }
};

/// Asymmetric hashing network: user codes come from g0(g1(u)), item codes
/// from g0(g2(v)). The shared head g0 is a single member, so any change to it
/// is seen by both domains.
struct FloraModel {
  Mlp user_tower;   // g1
  Mlp item_tower;   // g2
  Mlp shared_head;  // g0, final layer tanh with `bits()` outputs

  std::size_t bits() const noexcept { return shared_head.out_dim(); }
  std::size_t user_dim() const noexcept { return user_tower.in_dim(); }
  std::size_t item_dim() const noexcept { return item_tower.in_dim(); }
  const Mlp& tower(Domain d) const noexcept { return d == Domain::user ? user_tower : item_tower; }
  bool operator==(const FloraModel&) const = default;

  /// Final projection W of g0 (in_dim x m); the independence loss acts on it.
  const Matrix& projection() const { return shared_head.layers.back().weights; }

  void validate() const {
    user_tower.validate();
    item_tower.validate();
    shared_head.validate();
    FLORA_REQUIRE(user_tower.out_dim() == shared_head.in_dim() &&
                      item_tower.out_dim() == shared_head.in_dim(),
                  InvalidArgument, "tower outputs must match the shared head input");
    FLORA_REQUIRE(shared_head.layers.back().activation == Activation::tanh, InvalidArgument,
                  "shared head must end in tanh");
    FLORA_REQUIRE(bits() > 0 && bits() <= kMaxBits, InvalidArgument, "unsupported bit count");
  }
};

inline FloraModel make_flora_model(std::size_t user_dim, std::size_t item_dim,
                                   const HashConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x484d));
  std::vector<std::size_t> user_w{user_dim}, item_w{item_dim};
  user_w.insert(user_w.end(), config.tower_sizes.begin(), config.tower_sizes.end());
  item_w.insert(item_w.end(), config.tower_sizes.begin(), config.tower_sizes.end());
  std::vector<std::size_t> head_w{config.tower_sizes.back()};
  head_w.insert(head_w.end(), config.shared_sizes.begin(), config.shared_sizes.end());
  head_w.push_back(config.bits);
  FloraModel model;
  model.user_tower = make_mlp(user_w, Activation::relu, Activation::relu, rng);
  model.item_tower = make_mlp(item_w, Activation::relu, Activation::relu, rng);
  model.shared_head = make_mlp(head_w, Activation::relu, Activation::tanh, rng);
  return model;
}

/// Continuous codes h1 (user) or h2 (item), entries in [-1, 1].
inline Matrix encode_continuous(const FloraModel& model, Domain domain, const Matrix& x) {
  const Mlp& tower = model.tower(domain);
  FLORA_REQUIRE(x.cols() == tower.in_dim(), InvalidArgument,
                std::string(domain == Domain::user ? "user" : "item") + " input has dim " +
                    std::to_string(x.cols()) + ", tower expects " + std::to_string(tower.in_dim()));
  if (x.rows() == 0) return Matrix(0, model.bits());
  return mlp_forward(model.shared_head, mlp_forward(tower, x));
}

/// sign with sign(0) = +1.
inline Matrix binarize(const Matrix& h) {
  Matrix out(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] >= 0.0 ? 1.0 : -1.0;
  return out;
}

/// Binary codes H1 / H2.
inline Matrix encode_binary(const FloraModel& model, Domain domain, const Matrix& x) {
  return binarize(encode_continuous(model, domain, x));
}

/// Relaxed similarity h1 . h2 / (2m) + 0.5 of two code rows.
inline double code_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return dot / (2.0 * static_cast<double>(a.size())) + 0.5;
}

// ---------------------------------------------------------------------------
// Gradients and losses

struct ModelGradients {
  Mlp user_tower;
  Mlp item_tower;
  Mlp shared_head;

  static ModelGradients zeros_like(const FloraModel& m) {
    return {m.user_tower.zeros_like(), m.item_tower.zeros_like(), m.shared_head.zeros_like()};
  }

  void add_scaled(const ModelGradients& other, double scale) {
    const auto add = [scale](Mlp& a, const Mlp& b) {
      for (std::size_t l = 0; l < a.layers.size(); ++l) {
        auto aw = a.layers[l].weights.values();
        auto bw = b.layers[l].weights.values();
        for (std::size_t i = 0; i < aw.size(); ++i) aw[i] += scale * bw[i];
        auto ab = a.layers[l].bias.values();
        auto bb = b.layers[l].bias.values();
        for (std::size_t i = 0; i < ab.size(); ++i) ab[i] += scale * bb[i];
      }
    };
    add(user_tower, other.user_tower);
    add(item_tower, other.item_tower);
    add(shared_head, other.shared_head);
  }
};

inline std::vector<Matrix*> parameter_refs(FloraModel& m) {
  auto out = parameter_refs(m.user_tower);
  for (auto* p : parameter_refs(m.item_tower)) out.push_back(p);
  for (auto* p : parameter_refs(m.shared_head)) out.push_back(p);
  return out;
}

inline std::vector<const Matrix*> parameter_refs(const ModelGradients& g) {
  auto out = parameter_refs(g.user_tower);
  for (auto* p : parameter_refs(g.item_tower)) out.push_back(p);
  for (auto* p : parameter_refs(g.shared_head)) out.push_back(p);
  return out;
}

inline std::vector<Matrix> gradient_list(const ModelGradients& g) {
  std::vector<Matrix> out;
  for (const Matrix* p : parameter_refs(g)) out.push_back(*p);
  return out;
}

inline std::vector<std::string> parameter_names(const FloraModel& m) {
  auto out = parameter_names(m.user_tower, "g1");
  for (auto& n : parameter_names(m.item_tower, "g2")) out.push_back(std::move(n));
  for (auto& n : parameter_names(m.shared_head, "g0")) out.push_back(std::move(n));
  return out;
}

inline void optimizer_step(FloraModel& model, const ModelGradients& grads, OptimizerState& state) {
  const auto p = parameter_refs(model);
  const auto g = parameter_refs(grads);
  const auto names = parameter_names(model);
  optimizer_step(std::span<Matrix* const>(p), std::span<const Matrix* const>(g), state, names);
}

/// Forward state of one minibatch through both paths.
struct HashForward {
  ForwardCache user_tower, item_tower, head_user, head_item;
  Matrix h_user;  // batch_u x m
  Matrix h_item;  // batch_i x m
};

inline HashForward hash_forward(const FloraModel& model, const Matrix& users, const Matrix& items) {
  FLORA_REQUIRE(users.cols() == model.user_dim(), InvalidArgument,
                "user batch has dim " + std::to_string(users.cols()) + ", model expects " +
                    std::to_string(model.user_dim()));
  FLORA_REQUIRE(items.cols() == model.item_dim(), InvalidArgument,
                "item batch has dim " + std::to_string(items.cols()) + ", model expects " +
                    std::to_string(model.item_dim()));
  HashForward f;
  const Matrix gu = mlp_forward(model.user_tower, users, f.user_tower);
  const Matrix gv = mlp_forward(model.item_tower, items, f.item_tower);
  f.h_user = mlp_forward(model.shared_head, gu, f.head_user);
  f.h_item = mlp_forward(model.shared_head, gv, f.head_item);
  return f;
}

/// Backpropagates dL/dh_user and dL/dh_item into all three networks. The
/// shared head receives the sum of both paths' contributions.
inline ModelGradients hash_backward(const FloraModel& model, const HashForward& f,
                                    const Matrix& d_user, const Matrix& d_item) {
  MlpGradients head_u = mlp_backward(model.shared_head, f.head_user, d_user);
  MlpGradients head_v = mlp_backward(model.shared_head, f.head_item, d_item);
  MlpGradients tower_u = mlp_backward(model.user_tower, f.user_tower, head_u.input);
  MlpGradients tower_v = mlp_backward(model.item_tower, f.item_tower, head_v.input);
  ModelGradients g{std::move(tower_u.params), std::move(tower_v.params), std::move(head_u.params)};
  ModelGradients other{g.user_tower.zeros_like(), g.item_tower.zeros_like(),
                       std::move(head_v.params)};
  g.add_scaled(other, 1.0);
  return g;
}

/// Loss value plus gradients with respect to the continuous codes.
struct CodeLoss {
  double value = 0.0;
  Matrix d_user;
  Matrix d_item;
};

/// Mean over pairs b of (t_b - (h1_b . h2_b / 2m + 0.5))^2.
inline CodeLoss consistency_on_codes(const Matrix& h_user, const Matrix& h_item,
                                     std::span<const double> targets) {
  const std::size_t B = h_user.rows(), m = h_user.cols();
  FLORA_REQUIRE(h_item.rows() == B && h_item.cols() == m && targets.size() == B, InvalidArgument,
                "consistency loss needs one target per (user, item) pair");
  FLORA_REQUIRE(B > 0, InvalidArgument, "consistency loss on an empty batch");
  CodeLoss out{0.0, Matrix(B, m), Matrix(B, m)};
  const double inv2m = 1.0 / (2.0 * static_cast<double>(m));
  for (std::size_t b = 0; b < B; ++b) {
    FLORA_REQUIRE(std::isfinite(targets[b]), InvalidArgument,
                  "non-finite target at batch row " + std::to_string(b));
    const auto hu = h_user.row(b), hv = h_item.row(b);
    const double r = targets[b] - code_similarity(hu, hv);
    out.value += r * r;
    const double coeff = -2.0 * r * inv2m / static_cast<double>(B);
    auto du = out.d_user.row(b), dv = out.d_item.row(b);
    for (std::size_t k = 0; k < m; ++k) {
      du[k] = coeff * hv[k];
      dv[k] = coeff * hu[k];
    }
  }
  out.value /= static_cast<double>(B);
  return out;
}

/// sum_k |mean_i h1_k(u_i)| + |mean_j h2_k(v_j)|; subgradient 0 where a mean is exactly 0.
inline CodeLoss balance_on_codes(const Matrix& h_user, const Matrix& h_item) {
  FLORA_REQUIRE(h_user.rows() > 0 && h_item.rows() > 0, InvalidArgument,
                "balance loss on an empty batch");
  FLORA_REQUIRE(h_user.cols() == h_item.cols(), InvalidArgument, "code widths differ");
  CodeLoss out{0.0, Matrix(h_user.rows(), h_user.cols()), Matrix(h_item.rows(), h_item.cols())};
  const auto side = [&out](const Matrix& h, Matrix& d) {
    const std::size_t n = h.rows(), m = h.cols();
    std::vector<double> mean(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = h.row(i);
      for (std::size_t k = 0; k < m; ++k) mean[k] += r[k];
    }
    for (std::size_t k = 0; k < m; ++k) {
      mean[k] /= static_cast<double>(n);
      out.value += std::abs(mean[k]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto r = d.row(i);
      for (std::size_t k = 0; k < m; ++k) {
        const double s = mean[k] > 0.0 ? 1.0 : (mean[k] < 0.0 ? -1.0 : 0.0);
        r[k] = s / static_cast<double>(n);
      }
    }
  };
  side(h_user, out.d_user);
  side(h_item, out.d_item);
  return out;
}

/// 2 * ||W^T W - I||_F^2 and its gradient 8 W (W^T W - I). The two terms are
/// the user and item projections, which coincide because g0 is shared.
inline double independence_on_projection(const Matrix& w, Matrix* grad) {
  Matrix gram = matmul_tn(w, w);  // m x m
  for (std::size_t k = 0; k < gram.rows(); ++k) gram(k, k) -= 1.0;
  double fro = 0.0;
  for (double v : gram.values()) fro += v * v;
  if (grad) {
    *grad = matmul(w, gram);
    *grad *= 8.0;
  }
  return 2.0 * fro;
}

struct LossResult {
  double value = 0.0;
  ModelGradients grads;
};

struct LossBreakdown {
  double total = 0.0;
  double consistency = 0.0;
  double balance = 0.0;
  double independence = 0.0;
};

struct TotalLoss {
  LossBreakdown terms;
  ModelGradients grads;
};

/// Minibatch of (user, item, f(item, user)) triples; row b of `users` and
/// `items` form pair b.
struct HashBatch {
  Matrix users;
  Matrix items;
  std::vector<double> targets;
};

inline LossResult loss_consistency(const FloraModel& model, const Matrix& users,
                                   const Matrix& items, std::span<const double> targets) {
  const HashForward f = hash_forward(model, users, items);
  const CodeLoss c = consistency_on_codes(f.h_user, f.h_item, targets);
  return {c.value, hash_backward(model, f, c.d_user, c.d_item)};
}

inline LossResult loss_balance(const FloraModel& model, const Matrix& users, const Matrix& items) {
  const HashForward f = hash_forward(model, users, items);
  const CodeLoss c = balance_on_codes(f.h_user, f.h_item);
  return {c.value, hash_backward(model, f, c.d_user, c.d_item)};
}

inline LossResult loss_independence(const FloraModel& model) {
  LossResult out{0.0, ModelGradients::zeros_like(model)};
  out.value = independence_on_projection(model.projection(), &out.grads.shared_head.layers.back().weights);
  return out;
}

/// L = L_c + lambda_u L_u + lambda_i L_i in one forward/backward pass.
inline TotalLoss loss_total(const FloraModel& model, const HashBatch& batch, double lambda_u,
                            double lambda_i) {
  const HashForward f = hash_forward(model, batch.users, batch.items);
  CodeLoss c = consistency_on_codes(f.h_user, f.h_item, batch.targets);
  TotalLoss out;
  out.terms.consistency = c.value;
  if (lambda_u != 0.0) {
    const CodeLoss u = balance_on_codes(f.h_user, f.h_item);
    out.terms.balance = u.value;
    for (std::size_t i = 0; i < c.d_user.size(); ++i) c.d_user[i] += lambda_u * u.d_user[i];
    for (std::size_t i = 0; i < c.d_item.size(); ++i) c.d_item[i] += lambda_u * u.d_item[i];
  } else {
    out.terms.balance = balance_on_codes(f.h_user, f.h_item).value;
  }
  out.grads = hash_backward(model, f, c.d_user, c.d_item);
  Matrix w_grad;
  out.terms.independence = independence_on_projection(model.projection(), &w_grad);
  if (lambda_i != 0.0) {
    auto dst = out.grads.shared_head.layers.back().weights.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += lambda_i * w_grad[i];
  }
  out.terms.total = out.terms.consistency + lambda_u * out.terms.balance +
                    lambda_i * out.terms.independence;
  return out;
}

inline TotalLoss loss_total(const FloraModel& model, const HashBatch& batch,
                            const HashConfig& config) {
  return loss_total(model, batch, config.lambda_u, config.lambda_i);
}

// ---------------------------------------------------------------------------
// FLHM checkpoint: "FLHM", u32 version, u32 m, u32 user_dim, u32 item_dim,
// then FLNN blocks for g1, g2, g0.

inline constexpr std::uint32_t kFlhmVersion = 1;

inline std::string encode_model(const FloraModel& model) {
  ByteWriter w;
  w.magic("FLHM");
  w.u32(kFlhmVersion);
  w.u32(static_cast<std::uint32_t>(model.bits()));
  w.u32(static_cast<std::uint32_t>(model.user_dim()));
  w.u32(static_cast<std::uint32_t>(model.item_dim()));
  write_mlp(w, model.user_tower);
  write_mlp(w, model.item_tower);
  write_mlp(w, model.shared_head);
  return w.take();
}

inline FloraModel decode_model(std::string_view bytes, std::string context = "FLHM") {
  ByteReader r(bytes, context);
  r.expect_magic("FLHM");
  r.expect_version(kFlhmVersion);
  const std::uint32_t m = r.u32();
  const std::uint32_t ud = r.u32();
  const std::uint32_t id = r.u32();
  FloraModel model;
  model.user_tower = read_mlp(r);
  model.item_tower = read_mlp(r);
  model.shared_head = read_mlp(r);
  r.expect_end();
  try {
    model.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(context + ": " + e.what());
  }
  if (model.bits() != m || model.user_dim() != ud || model.item_dim() != id)
    throw FormatError(context + ": header dims do not match the embedded networks");
  return model;
}

inline void save_model(const FloraModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model));
}

inline FloraModel load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path), path.string());
}

}  // namespace flora
