#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/error.hpp"
#include "flora/matrix.hpp"
#include "flora/nn.hpp"
#include "flora/parallel.hpp"

namespace flora {

/// Architectures of the frozen similarity function f(item, user).
enum class MeasureKind : std::uint8_t {
  mlp_concate = 0,    // [user; item] -> MLP -> sigmoid
  mlp_em_sum = 1,     // embed each side, element-wise sum, MLP -> sigmoid
  deepfm_lite = 2,    // sigmoid(linear + 2nd-order factorization + MLP)
  scaled_cosine = 3,  // (cos + 1) / 2
};

inline std::string_view to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::mlp_concate: return "mlp_concate";
    case MeasureKind::mlp_em_sum: return "mlp_em_sum";
    case MeasureKind::deepfm_lite: return "deepfm_lite";
    case MeasureKind::scaled_cosine: return "scaled_cosine";
  }
  return "?";
}

inline MeasureKind measure_kind_from_string(std::string_view s) {
  for (auto k : {MeasureKind::mlp_concate, MeasureKind::mlp_em_sum, MeasureKind::deepfm_lite,
                 MeasureKind::scaled_cosine})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown measure kind '" + std::string(s) + "'");
}

struct MeasureOptions {
  std::size_t hidden = 64;     // width of the two hidden layers
  std::size_t fm_factors = 8;  // latent factors of the deepfm_lite interaction term
};

class Measure;
Measure make_measure(MeasureKind kind, std::size_t user_dim, std::size_t item_dim,
                     std::uint64_t seed, const MeasureOptions& options = {});
Measure decode_measure(std::string_view bytes, std::string context);

/// A frozen binary function f: item x user -> [0, 1]. Instances are immutable
/// after construction: there is no mutating member, so sharing one across
/// threads for scoring is safe.
class Measure {
 public:
  MeasureKind kind() const noexcept { return kind_; }
  std::size_t user_dim() const noexcept { return user_dim_; }
  std::size_t item_dim() const noexcept { return item_dim_; }
  const std::vector<Mlp>& networks() const noexcept { return nets_; }
  bool operator==(const Measure&) const = default;

  /// Item-side work that does not depend on the user (embeddings for
  /// mlp_em_sum). Reused across users by `score_prepared`.
  struct PreparedItems {
    const Matrix* items = nullptr;
    Matrix embedded;
  };

  PreparedItems prepare_items(const Matrix& items) const {
    FLORA_REQUIRE(items.cols() == item_dim_, InvalidArgument,
                  "item vectors have dim " + std::to_string(items.cols()) + ", measure expects " +
                      std::to_string(item_dim_));
    PreparedItems p{&items, {}};
    if (kind_ == MeasureKind::mlp_em_sum && items.rows() > 0) p.embedded = mlp_forward(nets_[1], items);
    return p;
  }

  std::vector<double> score_prepared(const PreparedItems& prepared,
                                     std::span<const double> user) const {
    FLORA_REQUIRE(user.size() == user_dim_, InvalidArgument,
                  "user vector has dim " + std::to_string(user.size()) + ", measure expects " +
                      std::to_string(user_dim_));
    const Matrix& items = *prepared.items;
    const std::size_t n = items.rows();
    std::vector<double> out(n);
    if (n == 0) return out;
    switch (kind_) {
      case MeasureKind::scaled_cosine: {
        double uu = 0.0;
        for (double x : user) uu = std::fma(x, x, uu);
        for (std::size_t i = 0; i < n; ++i) {
          const auto v = items.row(i);
          double dot = 0.0, vv = 0.0;
          for (std::size_t d = 0; d < v.size(); ++d) {
            dot = std::fma(v[d], user[d], dot);
            vv = std::fma(v[d], v[d], vv);
          }
          const double denom = std::sqrt(uu * vv);
          const double cosine = denom > 0.0 ? dot / denom : 0.0;
          out[i] = std::clamp((cosine + 1.0) * 0.5, 0.0, 1.0);
        }
        return out;
      }
      case MeasureKind::mlp_em_sum:
      case MeasureKind::mlp_concate:
      case MeasureKind::deepfm_lite: {
        const Matrix user_emb = kind_ == MeasureKind::mlp_em_sum
                                    ? mlp_forward(nets_[0], Matrix::row_vector(user))
                                    : Matrix();
        // blocks keep temporaries small; rows are independent so the result
        // does not depend on the block size
        constexpr std::size_t kBlock = 128;
        for (std::size_t b = 0; b < n; b += kBlock) {
          const std::size_t e = std::min(n, b + kBlock);
          score_block(prepared, user, user_emb, b, e, std::span<double>(out).subspan(b, e - b));
        }
        return out;
      }
    }
    return out;
  }

  /// f over every row of `items` against one user.
  std::vector<double> score_batch(const Matrix& items, std::span<const double> user) const {
    return score_prepared(prepare_items(items), user);
  }

  double score(std::span<const double> item, std::span<const double> user) const {
    FLORA_REQUIRE(item.size() == item_dim_, InvalidArgument,
                  "item vector has dim " + std::to_string(item.size()) + ", measure expects " +
                      std::to_string(item_dim_));
    return score_batch(Matrix::row_vector(item), user)[0];
  }

  /// users x items score table; entry (u, i) == score(items.row(i), users.row(u)).
  Matrix score_all(const Matrix& items, const Matrix& users) const {
    const PreparedItems prepared = prepare_items(items);
    Matrix out(users.rows(), items.rows());
    parallel_for(users.rows(), [&](std::size_t u) {
      const auto s = score_prepared(prepared, users.row(u));
      std::copy(s.begin(), s.end(), out.row(u).begin());
    });
    return out;
  }

 private:
  void score_block(const PreparedItems& prepared, std::span<const double> user, const Matrix& user_emb,
                   std::size_t b, std::size_t e, std::span<double> out) const {
    const Matrix& items = *prepared.items;
    const std::size_t n = e - b;
    if (kind_ == MeasureKind::mlp_em_sum) {
      Matrix merged(n, user_emb.cols());
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = prepared.embedded.row(b + i);
        auto r = merged.row(i);
        for (std::size_t c = 0; c < r.size(); ++c) r[c] = src[c] + user_emb[c];
      }
      const Matrix s = mlp_forward(nets_[2], merged);
      for (std::size_t i = 0; i < n; ++i) out[i] = s[i];
      return;
    }
    Matrix z(n, user_dim_ + item_dim_);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = z.row(i);
      std::copy(user.begin(), user.end(), r.begin());
      const auto v = items.row(b + i);
      std::copy(v.begin(), v.end(), r.begin() + static_cast<std::ptrdiff_t>(user_dim_));
    }
    if (kind_ == MeasureKind::mlp_concate) {
      const Matrix s = mlp_forward(nets_[0], z);
      for (std::size_t i = 0; i < n; ++i) out[i] = s[i];
      return;
    }
    const Matrix deep = mlp_forward(nets_[0], z);
    const Matrix linear = mlp_forward(nets_[2], z);
    const Matrix& factors = nets_[1].layers[0].weights;  // d x k
    const Matrix zf = matmul(z, factors);
    Matrix z2 = z;
    for (double& x : z2.values()) x = x * x;
    Matrix f2 = factors;
    for (double& x : f2.values()) x = x * x;
    const Matrix zf2 = matmul(z2, f2);
    for (std::size_t i = 0; i < n; ++i) {
      double pair = 0.0;
      const auto a = zf.row(i);
      const auto c = zf2.row(i);
      for (std::size_t f = 0; f < a.size(); ++f) pair += a[f] * a[f] - c[f];
      out[i] = sigmoid(deep[i] + linear[i] + 0.5 * pair);
    }
  }

  friend Measure make_measure(MeasureKind, std::size_t, std::size_t, std::uint64_t,
                              const MeasureOptions&);
  friend Measure decode_measure(std::string_view, std::string);

  Measure(MeasureKind kind, std::size_t user_dim, std::size_t item_dim, std::vector<Mlp> nets)
      : kind_(kind), user_dim_(user_dim), item_dim_(item_dim), nets_(std::move(nets)) {
    validate();
  }

  void validate() const {
    FLORA_REQUIRE(user_dim_ > 0 && item_dim_ > 0, InvalidArgument, "measure dims must be positive");
    const auto need = [&](std::size_t count) {
      FLORA_REQUIRE(nets_.size() == count, InvalidArgument,
                    std::string(to_string(kind_)) + " expects " + std::to_string(count) +
                        " networks, got " + std::to_string(nets_.size()));
      for (const auto& n : nets_) n.validate();
    };
    const std::size_t joint = user_dim_ + item_dim_;
    switch (kind_) {
      case MeasureKind::scaled_cosine:
        need(0);
        FLORA_REQUIRE(user_dim_ == item_dim_, InvalidArgument,
                      "scaled_cosine needs equal user and item dims");
        break;
      case MeasureKind::mlp_concate:
        need(1);
        FLORA_REQUIRE(nets_[0].in_dim() == joint && nets_[0].out_dim() == 1, InvalidArgument,
                      "mlp_concate network must map user_dim+item_dim -> 1");
        break;
      case MeasureKind::mlp_em_sum:
        need(3);
        FLORA_REQUIRE(nets_[0].in_dim() == user_dim_ && nets_[1].in_dim() == item_dim_,
                      InvalidArgument, "mlp_em_sum embedding input dims mismatch");
        FLORA_REQUIRE(nets_[0].out_dim() == nets_[1].out_dim() &&
                          nets_[2].in_dim() == nets_[0].out_dim() && nets_[2].out_dim() == 1,
                      InvalidArgument, "mlp_em_sum embedded dims must match before the merge");
        break;
      case MeasureKind::deepfm_lite:
        need(3);
        FLORA_REQUIRE(nets_[0].in_dim() == joint && nets_[0].out_dim() == 1, InvalidArgument,
                      "deepfm_lite deep branch must map user_dim+item_dim -> 1");
        FLORA_REQUIRE(nets_[1].layers.size() == 1 && nets_[1].in_dim() == joint, InvalidArgument,
                      "deepfm_lite factor matrix must be (user_dim+item_dim) x k");
        FLORA_REQUIRE(nets_[2].layers.size() == 1 && nets_[2].in_dim() == joint &&
                          nets_[2].out_dim() == 1,
                      InvalidArgument, "deepfm_lite linear term must map user_dim+item_dim -> 1");
        break;
    }
  }

  MeasureKind kind_ = MeasureKind::scaled_cosine;
  std::size_t user_dim_ = 0;
  std::size_t item_dim_ = 0;
  std::vector<Mlp> nets_;
};

/// Builds a measure with random frozen weights, reproducible from `seed`.
inline Measure make_measure(MeasureKind kind, std::size_t user_dim, std::size_t item_dim,
                            std::uint64_t seed, const MeasureOptions& options) {
  FLORA_REQUIRE(user_dim > 0 && item_dim > 0, InvalidArgument, "measure dims must be positive");
  Rng rng(derive_seed(seed, 0x4d45));
  const std::size_t h = options.hidden;
  const std::size_t joint = user_dim + item_dim;
  std::vector<Mlp> nets;
  switch (kind) {
    case MeasureKind::scaled_cosine:
      break;
    case MeasureKind::mlp_concate:
      nets.push_back(make_mlp({joint, h, h, 1}, Activation::relu, Activation::sigmoid, rng));
      break;
    case MeasureKind::mlp_em_sum:
      nets.push_back(make_mlp({user_dim, h}, Activation::tanh, Activation::tanh, rng));
      nets.push_back(make_mlp({item_dim, h}, Activation::tanh, Activation::tanh, rng));
      nets.push_back(make_mlp({h, h, 1}, Activation::relu, Activation::sigmoid, rng));
      break;
    case MeasureKind::deepfm_lite: {
      nets.push_back(make_mlp({joint, h, h, 1}, Activation::relu, Activation::identity, rng));
      Mlp factors = make_mlp({joint, options.fm_factors}, Activation::identity,
                             Activation::identity, rng);
      // keep the pairwise term O(1) so the sigmoid does not saturate
      factors.layers[0].weights *= 1.0 / std::sqrt(static_cast<double>(options.fm_factors));
      nets.push_back(std::move(factors));
      nets.push_back(make_mlp({joint, 1}, Activation::identity, Activation::identity, rng));
      break;
    }
    default:
      throw InvalidArgument("unknown measure kind id " +
                            std::to_string(static_cast<unsigned>(kind)));
  }
  return Measure(kind, user_dim, item_dim, std::move(nets));
}

// FLMS: "FLMS", u32 version, u8 kind, u32 user_dim, u32 item_dim,
// u8 network count, then that many FLNN blocks.
inline constexpr std::uint32_t kFlmsVersion = 1;

inline std::string encode_measure(const Measure& m) {
  ByteWriter w;
  w.magic("FLMS");
  w.u32(kFlmsVersion);
  w.u8(static_cast<std::uint8_t>(m.kind()));
  w.u32(static_cast<std::uint32_t>(m.user_dim()));
  w.u32(static_cast<std::uint32_t>(m.item_dim()));
  w.u8(static_cast<std::uint8_t>(m.networks().size()));
  for (const auto& n : m.networks()) write_mlp(w, n);
  return w.take();
}

inline Measure decode_measure(std::string_view bytes, std::string context = "FLMS") {
  ByteReader r(bytes, context);
  r.expect_magic("FLMS");
  r.expect_version(kFlmsVersion);
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8();
  if (kind > 3) r.fail_at(kind_at, "unknown measure kind id " + std::to_string(kind));
  const std::uint32_t ud = r.u32();
  const std::uint32_t id = r.u32();
  const std::uint8_t count = r.u8();
  std::vector<Mlp> nets;
  for (std::uint8_t i = 0; i < count; ++i) nets.push_back(read_mlp(r));
  r.expect_end();
  try {
    return Measure(static_cast<MeasureKind>(kind), ud, id, std::move(nets));
  } catch (const InvalidArgument& e) {
    throw FormatError(context + ": " + e.what());
  }
}

inline void save_measure(const Measure& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_measure(m));
}

inline Measure load_measure(const std::filesystem::path& path) {
  return decode_measure(read_file(path), path.string());
}

}  // namespace flora
