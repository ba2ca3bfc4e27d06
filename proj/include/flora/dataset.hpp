#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/error.hpp"
#include "flora/hash_model.hpp"
#include "flora/matrix.hpp"
#include "flora/nn.hpp"

namespace flora {

/// A set of user or item vectors, one per row.
struct EmbeddingSet {
  Domain role = Domain::user;
  Matrix vectors;

  std::size_t size() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  bool operator==(const EmbeddingSet&) const = default;
};

inline std::string_view to_string(Domain d) { return d == Domain::user ? "user" : "item"; }

// ---------------------------------------------------------------------------
// FLMX: "FLMX", u32 version, u8 role, u64 n, u32 dim, n*dim f32 row-major.
// Values are stored as 32-bit floats, so a round trip is exact for any set
// whose entries are float-representable (everything read from disk is).

inline constexpr std::uint32_t kFlmxVersion = 1;

inline std::string encode_embeddings(const EmbeddingSet& set) {
  FLORA_REQUIRE(set.vectors.all_finite(), InvalidArgument, "embedding set has non-finite entries");
  FLORA_REQUIRE(set.dim() <= 0xFFFFFFFFu, InvalidArgument, "dimension does not fit in u32");
  ByteWriter w;
  w.magic("FLMX");
  w.u32(kFlmxVersion);
  w.u8(static_cast<std::uint8_t>(set.role));
  w.u64(set.size());
  w.u32(static_cast<std::uint32_t>(set.dim()));
  for (double v : set.vectors.values()) w.f32(static_cast<float>(v));
  return w.take();
}

inline EmbeddingSet decode_embeddings(std::string_view bytes, std::string context = "FLMX") {
  ByteReader r(bytes, std::move(context));
  r.expect_magic("FLMX");
  r.expect_version(kFlmxVersion);
  const std::size_t role_at = r.offset();
  const std::uint8_t role = r.u8();
  if (role > 1) r.fail_at(role_at, "unknown role " + std::to_string(role));
  const std::uint64_t n = r.u64();
  const std::uint32_t dim = r.u32();
  if (dim == 0 && n > 0) r.fail("zero dimension with " + std::to_string(n) + " rows");
  if (dim > 0 && n > r.remaining() / 4 / dim)
    r.fail("truncated payload: header promises " + std::to_string(n) + " x " + std::to_string(dim) +
           " floats, " + std::to_string(r.remaining()) + " bytes available");
  EmbeddingSet set{static_cast<Domain>(role), Matrix(n, dim)};
  for (double& v : set.vectors.values()) {
    const std::size_t at = r.offset();
    v = r.f32();
    if (!std::isfinite(v)) r.fail_at(at, "non-finite value");
  }
  r.expect_end();
  return set;
}

inline void write_matrix(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, encode_embeddings(set));
}

inline EmbeddingSet read_matrix(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// CSV ingestion: `id,v1,...,vd` per line, optional header starting with "id".

inline EmbeddingSet read_csv_embeddings(const std::filesystem::path& path, Domain role) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::set<std::string> ids;
  const auto fail = [&](const std::string& msg) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (rows == 0 && dim == 0 && line.rfind("id", 0) == 0) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) fail("expected id and at least one value");
    if (!ids.insert(std::string(fields[0])).second) fail("duplicate id '" + std::string(fields[0]) + "'");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim)
      fail("expected " + std::to_string(dim) + " values, got " + std::to_string(fields.size() - 1));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::string_view f = fields[i];
      while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
      while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
      double v = 0.0;
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || end != f.data() + f.size() || !std::isfinite(v))
        fail("bad number '" + std::string(fields[i]) + "' in column " + std::to_string(i + 1));
      values.push_back(v);
    }
    ++rows;
  }
  return {role, Matrix(rows, dim, std::move(values))};
}

/// FLMX, or CSV when the extension is .csv.
inline EmbeddingSet load_embeddings(const std::filesystem::path& path, Domain role) {
  if (path.extension() == ".csv") return read_csv_embeddings(path, role);
  EmbeddingSet set = read_matrix(path);
  if (set.role != role)
    throw FormatError(path.string() + ": holds " + std::string(to_string(set.role)) +
                      " vectors, expected " + std::string(to_string(role)));
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class SynthDistribution : std::uint8_t { gaussian = 0, clusters = 1 };

inline SynthDistribution synth_distribution_from_string(std::string_view s) {
  if (s == "gaussian") return SynthDistribution::gaussian;
  if (s == "clusters") return SynthDistribution::clusters;
  throw InvalidArgument("unknown distribution '" + std::string(s) + "' (gaussian, clusters)");
}

struct SynthOptions {
  SynthDistribution distribution = SynthDistribution::gaussian;
  std::size_t clusters = 8;
  double spread = 0.35;  // within-cluster std relative to unit-variance centres
};

struct SynthData {
  EmbeddingSet users;
  EmbeddingSet items;
  std::vector<std::uint32_t> user_cluster;  // empty for gaussian
  std::vector<std::uint32_t> item_cluster;
};

/// Users and items drawn from N(0, I) or from a shared mixture of clusters.
/// Entries are rounded to float so the sets survive the FLMX format exactly.
inline SynthData gen_synth(std::size_t n_users, std::size_t n_items, std::size_t dim,
                           std::uint64_t seed, const SynthOptions& options = {}) {
  FLORA_REQUIRE(n_users > 0 && n_items > 0 && dim > 0, InvalidArgument,
                "gen_synth needs positive counts and dimension");
  FLORA_REQUIRE(options.distribution == SynthDistribution::gaussian || options.clusters > 0,
                InvalidArgument, "cluster mode needs at least one cluster");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix centres;
  if (options.distribution == SynthDistribution::clusters) {
    Rng rng(derive_seed(seed, 0));
    centres = Matrix(options.clusters, dim);
    for (double& v : centres.values()) v = normal(rng);
  }
  SynthData out;
  const auto fill = [&](std::size_t n, std::uint64_t stream, Domain role,
                        std::vector<std::uint32_t>& labels) {
    Rng rng(derive_seed(seed, stream));
    EmbeddingSet set{role, Matrix(n, dim)};
    std::uniform_int_distribution<std::uint32_t> pick(
        0, static_cast<std::uint32_t>(std::max<std::size_t>(options.clusters, 1) - 1));
    for (std::size_t i = 0; i < n; ++i) {
      auto row = set.vectors.row(i);
      if (options.distribution == SynthDistribution::clusters) {
        const std::uint32_t c = pick(rng);
        labels.push_back(c);
        const auto centre = centres.row(c);
        for (std::size_t j = 0; j < dim; ++j)
          row[j] = static_cast<float>(centre[j] + options.spread * normal(rng));
      } else {
        for (double& v : row) v = static_cast<float>(normal(rng));
      }
    }
    return set;
  };
  out.users = fill(n_users, 1, Domain::user, out.user_cluster);
  out.items = fill(n_items, 2, Domain::item, out.item_cluster);
  return out;
}

}  // namespace flora
