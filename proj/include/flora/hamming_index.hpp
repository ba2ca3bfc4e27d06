#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/config.hpp"
#include "flora/error.hpp"
#include "flora/hash_model.hpp"
#include "flora/matrix.hpp"
#include "flora/measures.hpp"
#include "flora/parallel.hpp"
#include "flora/sampler.hpp"

namespace flora {

inline constexpr std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

/// One packed code: `words` holds ceil(bits/64) words, bit b of word b/64
/// position b%64 is 1 iff code entry b is +1. Padding bits are zero.
struct CodeView {
  std::span<const std::uint64_t> words;
  std::size_t bits = 0;
};

/// Sign codes of n items, bit-packed into 64-bit words.
class PackedCodes {
 public:
  PackedCodes() = default;
  PackedCodes(std::size_t n, std::size_t bits)
      : n_(n), bits_(bits), stride_(words_for_bits(bits)), words_(n * stride_, 0) {
    FLORA_REQUIRE(bits > 0 && bits <= kMaxBits, InvalidArgument,
                  "bit count must be in [1, " + std::to_string(kMaxBits) + "]");
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t bits() const noexcept { return bits_; }
  std::size_t words_per_code() const noexcept { return stride_; }
  /// Code payload in bytes: n * ceil(m/64) * 8.
  std::size_t payload_bytes() const noexcept { return words_.size() * sizeof(std::uint64_t); }

  CodeView code(std::size_t i) const noexcept { return {{words_.data() + i * stride_, stride_}, bits_}; }
  std::span<std::uint64_t> mutable_words(std::size_t i) noexcept {
    return {words_.data() + i * stride_, stride_};
  }
  std::span<const std::uint64_t> all_words() const noexcept { return words_; }
  bool operator==(const PackedCodes&) const = default;

  /// True iff no padding bit is set.
  bool padding_clear() const noexcept {
    const std::size_t tail = bits_ % 64;
    if (tail == 0) return true;
    const std::uint64_t mask = ~((std::uint64_t{1} << tail) - 1);
    for (std::size_t i = 0; i < n_; ++i)
      if (words_[i * stride_ + stride_ - 1] & mask) return false;
    return true;
  }

 private:
  std::size_t n_ = 0, bits_ = 0, stride_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Packs a {-1, +1} matrix (one code per row). Any other entry is rejected.
inline PackedCodes pack_codes(const Matrix& signs) {
  PackedCodes out(signs.rows(), signs.cols());
  for (std::size_t i = 0; i < signs.rows(); ++i) {
    const auto r = signs.row(i);
    auto w = out.mutable_words(i);
    for (std::size_t b = 0; b < r.size(); ++b) {
      if (r[b] == 1.0) {
        w[b / 64] |= std::uint64_t{1} << (b % 64);
      } else if (r[b] != -1.0) {
        throw InvalidArgument("code entry (" + std::to_string(i) + ", " + std::to_string(b) +
                              ") is " + std::to_string(r[b]) + ", expected -1 or +1");
      }
    }
  }
  return out;
}

inline Matrix unpack_codes(const PackedCodes& codes) {
  Matrix out(codes.size(), codes.bits());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto w = codes.code(i).words;
    auto r = out.row(i);
    for (std::size_t b = 0; b < codes.bits(); ++b) r[b] = (w[b / 64] >> (b % 64)) & 1U ? 1.0 : -1.0;
  }
  return out;
}

/// XOR + popcount over whole words; padding is zero on both sides.
inline std::size_t hamming_distance(CodeView a, CodeView b) {
  FLORA_REQUIRE(a.bits == b.bits, InvalidArgument,
                "hamming distance between " + std::to_string(a.bits) + "-bit and " +
                    std::to_string(b.bits) + "-bit codes");
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) d += static_cast<std::size_t>(std::popcount(a.words[w] ^ b.words[w]));
  return d;
}

/// Ordered ids with their scores (Hamming distance or f score), plus tie
/// information at the cutoff.
struct RankingResult {
  std::vector<ItemId> ids;
  std::vector<double> scores;
  double cutoff_score = 0.0;       // score of the last returned item
  std::size_t ties_at_cutoff = 0;  // items in the whole collection sharing the cutoff score
  std::size_t tie_inclusive = 0;   // returned items plus the ties cut off after them
  bool truncated = false;          // requested more items than available
  bool empty_input = false;        // no candidates were supplied
};

/// Top-t items by (distance asc, id asc). Distances are computed in parallel
/// chunks and bucketed by distance, which yields the same order as a
/// sequential stable sort.
inline RankingResult rank_full_scan(CodeView query, const PackedCodes& codes, std::size_t t) {
  FLORA_REQUIRE(t >= 1, InvalidArgument, "rank_full_scan needs t >= 1");
  FLORA_REQUIRE(query.bits == codes.bits(), InvalidArgument,
                "query has " + std::to_string(query.bits) + " bits, index has " +
                    std::to_string(codes.bits()));
  const std::size_t n = codes.size();
  RankingResult out;
  if (n == 0) {
    out.truncated = true;
    return out;
  }
  if (t > n) {
    out.truncated = true;
    t = n;
  }
  std::vector<std::uint16_t> dist(n);
  constexpr std::size_t kChunk = 4096;
  parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i)
      dist[i] = static_cast<std::uint16_t>(hamming_distance(query, codes.code(i)));
  });
  // counting sort by distance; ids within a bucket stay ascending
  std::vector<std::size_t> count(codes.bits() + 2, 0);
  for (auto d : dist) ++count[d + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  const std::vector<std::size_t> bucket_start = count;
  std::vector<ItemId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[count[dist[i]]++] = static_cast<ItemId>(i);
  out.ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(t));
  out.scores.resize(t);
  for (std::size_t i = 0; i < t; ++i) out.scores[i] = dist[out.ids[i]];
  const std::size_t cut = dist[out.ids.back()];
  out.cutoff_score = static_cast<double>(cut);
  out.ties_at_cutoff = bucket_start[cut + 1] - bucket_start[cut];
  out.tie_inclusive = bucket_start[cut + 1];
  return out;
}

/// Exact-code buckets over one PackedCodes set.
class HashTable {
 public:
  HashTable() = default;
  explicit HashTable(const PackedCodes& codes) : bits_(codes.bits()) {
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const auto w = codes.code(i).words;
      buckets_[Key(w.begin(), w.end())].push_back(static_cast<ItemId>(i));
    }
  }

  std::size_t bits() const noexcept { return bits_; }
  std::size_t bucket_count() const noexcept { return buckets_.size(); }

  std::span<const ItemId> lookup(CodeView code) const {
    FLORA_REQUIRE(code.bits == bits_, InvalidArgument, "probe code width differs from table");
    const auto it = buckets_.find(Key(code.words.begin(), code.words.end()));
    if (it == buckets_.end()) return {};
    return it->second;
  }

  template <class Fn>
  void for_each_bucket(Fn&& fn) const {
    for (const auto& [key, ids] : buckets_) fn(std::span<const std::uint64_t>(key), std::span<const ItemId>(ids));
  }

 private:
  using Key = std::vector<std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (auto w : k) h = (h ^ w) * 0x100000001b3ULL + (h >> 29);
      return static_cast<std::size_t>(h);
    }
  };
  std::size_t bits_ = 0;
  std::unordered_map<Key, std::vector<ItemId>, KeyHash> buckets_;
};

/// One table of a multi-table index: an independently seeded model, the item
/// codes it produced, and the bucket map over them.
struct IndexTable {
  std::uint64_t seed = 0;
  FloraModel model;
  PackedCodes codes;
  HashTable table;
};

inline IndexTable make_index_table(FloraModel model, std::uint64_t seed, const Matrix& items) {
  IndexTable t;
  t.seed = seed;
  t.codes = pack_codes(encode_binary(model, Domain::item, items));
  t.table = HashTable(t.codes);
  t.model = std::move(model);
  return t;
}

/// L tables over the same item set.
class MultiTableIndex {
 public:
  MultiTableIndex() = default;
  explicit MultiTableIndex(std::vector<IndexTable> tables) : tables_(std::move(tables)) {
    FLORA_REQUIRE(!tables_.empty(), InvalidArgument, "index needs at least one table");
    for (const auto& t : tables_)
      FLORA_REQUIRE(t.codes.size() == tables_.front().codes.size(), InvalidArgument,
                    "all tables must index the same item set");
  }

  std::size_t table_count() const noexcept { return tables_.size(); }
  std::size_t item_count() const noexcept { return tables_.empty() ? 0 : tables_.front().codes.size(); }
  const IndexTable& table(std::size_t l) const { return tables_.at(l); }
  const std::vector<IndexTable>& tables() const noexcept { return tables_; }

  /// First `l` tables as a new index (shares nothing; copies).
  MultiTableIndex prefix(std::size_t l) const {
    FLORA_REQUIRE(l >= 1 && l <= tables_.size(), InvalidArgument, "prefix length out of range");
    return MultiTableIndex(std::vector<IndexTable>(tables_.begin(), tables_.begin() + static_cast<std::ptrdiff_t>(l)));
  }

  /// One packed user code per table.
  std::vector<PackedCodes> query_codes(const Matrix& users) const {
    std::vector<PackedCodes> out;
    for (const auto& t : tables_) out.push_back(pack_codes(encode_binary(t.model, Domain::user, users)));
    return out;
  }

 private:
  std::vector<IndexTable> tables_;
};

/// Union over tables of the items whose code equals the query code, ascending ids.
inline std::vector<ItemId> probe_radius0(std::span<const CodeView> query_codes,
                                         const MultiTableIndex& index) {
  FLORA_REQUIRE(query_codes.size() == index.table_count(), InvalidArgument,
                "got " + std::to_string(query_codes.size()) + " query codes for " +
                    std::to_string(index.table_count()) + " tables");
  std::vector<ItemId> out;
  for (std::size_t l = 0; l < query_codes.size(); ++l) {
    const auto hits = index.table(l).table.lookup(query_codes[l]);
    out.insert(out.end(), hits.begin(), hits.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Query codes for user row `u` of per-table packed user codes.
inline std::vector<CodeView> query_views(std::span<const PackedCodes> per_table, std::size_t u) {
  std::vector<CodeView> v;
  v.reserve(per_table.size());
  for (const auto& p : per_table) v.push_back(p.code(u));
  return v;
}

struct BallProbeLimits {
  std::size_t max_radius = 2;
  std::size_t max_probes = 1'000'000;  // enumerated codes per query per table
};

/// Hamming-ball probing: every code within `radius` bit flips of the query is
/// looked up in every table. Only radius <= 2 is supported since the number
/// of probes grows as C(m, r).
inline std::vector<ItemId> probe_radius(std::span<const CodeView> query_codes,
                                        const MultiTableIndex& index, std::size_t radius,
                                        const BallProbeLimits& limits = {}) {
  FLORA_REQUIRE(query_codes.size() == index.table_count(), InvalidArgument,
                "got " + std::to_string(query_codes.size()) + " query codes for " +
                    std::to_string(index.table_count()) + " tables");
  FLORA_REQUIRE(radius <= limits.max_radius && radius <= 2, InvalidArgument,
                "probe radius " + std::to_string(radius) + " exceeds the supported maximum");
  std::vector<ItemId> out;
  for (std::size_t l = 0; l < query_codes.size(); ++l) {
    const CodeView q = query_codes[l];
    const std::size_t m = q.bits;
    std::size_t probes = 1;
    if (radius >= 1) probes += m;
    if (radius >= 2) probes += m * (m - 1) / 2;
    FLORA_REQUIRE(probes <= limits.max_probes, InvalidArgument,
                  "hamming ball of radius " + std::to_string(radius) + " at m=" + std::to_string(m) +
                      " needs " + std::to_string(probes) + " probes (cap " +
                      std::to_string(limits.max_probes) + ")");
    std::vector<std::uint64_t> buf(q.words.begin(), q.words.end());
    const auto flip = [&buf](std::size_t b) { buf[b / 64] ^= std::uint64_t{1} << (b % 64); };
    const auto look = [&] {
      const auto hits = index.table(l).table.lookup({buf, m});
      out.insert(out.end(), hits.begin(), hits.end());
    };
    look();
    for (std::size_t i = 0; radius >= 1 && i < m; ++i) {
      flip(i);
      look();
      for (std::size_t j = i + 1; radius >= 2 && j < m; ++j) {
        flip(j);
        look();
        flip(j);
      }
      flip(i);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Re-scores `candidates` with `score(id)` and keeps the best k by
/// (score desc, id asc). `score` is invoked exactly once per candidate.
template <class ScoreFn>
RankingResult rerank_with_f(std::span<const ItemId> candidates, ScoreFn&& score, std::size_t k) {
  RankingResult out;
  if (candidates.empty()) {
    out.empty_input = true;
    return out;
  }
  std::vector<std::pair<double, ItemId>> scored;
  scored.reserve(candidates.size());
  for (ItemId id : candidates) scored.emplace_back(static_cast<double>(score(id)), id);
  const auto before = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::sort(scored.begin(), scored.end(), before);
  if (k > scored.size()) out.truncated = true;
  const std::size_t keep = std::min(k, scored.size());
  for (std::size_t i = 0; i < keep; ++i) {
    out.ids.push_back(scored[i].second);
    out.scores.push_back(scored[i].first);
  }
  if (keep > 0) {
    out.cutoff_score = out.scores.back();
    std::size_t ties = 0, through = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (scored[i].first == out.cutoff_score) ++ties;
      if (scored[i].first >= out.cutoff_score) through = i + 1;
    }
    out.ties_at_cutoff = ties;
    out.tie_inclusive = through;
  }
  return out;
}

/// FLORA-R: rerank candidates with the measure f against `user`.
inline RankingResult rerank_with_f(std::span<const ItemId> candidates, const Matrix& items,
                                   std::span<const double> user, const Measure& f, std::size_t k) {
  if (candidates.empty()) return rerank_with_f(candidates, [](ItemId) { return 0.0; }, k);
  const Matrix gathered = items.gather_rows(candidates);
  const std::vector<double> s = f.score_batch(gathered, user);
  std::unordered_map<ItemId, double> by_id;
  for (std::size_t i = 0; i < candidates.size(); ++i) by_id.emplace(candidates[i], s[i]);
  return rerank_with_f(candidates, [&by_id](ItemId id) { return by_id.at(id); }, k);
}

// ---------------------------------------------------------------------------
// FLHC: "FLHC", u32 version, u64 n, u32 m, then n * ceil(m/64) u64 words.

inline constexpr std::uint32_t kFlhcVersion = 1;

inline std::string encode_codes(const PackedCodes& codes) {
  ByteWriter w;
  w.magic("FLHC");
  w.u32(kFlhcVersion);
  w.u64(codes.size());
  w.u32(static_cast<std::uint32_t>(codes.bits()));
  for (auto word : codes.all_words()) w.u64(word);
  return w.take();
}

inline PackedCodes decode_codes(std::string_view bytes, std::string context = "FLHC") {
  ByteReader r(bytes, context);
  r.expect_magic("FLHC");
  r.expect_version(kFlhcVersion);
  const std::uint64_t n = r.u64();
  const std::size_t m_at = r.offset();
  const std::uint32_t m = r.u32();
  if (m == 0 || m > kMaxBits) r.fail_at(m_at, "unsupported bit count " + std::to_string(m));
  r.require_payload(n, words_for_bits(m) * 8, "code words");
  PackedCodes codes(static_cast<std::size_t>(n), m);
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (auto& w : codes.mutable_words(i)) w = r.u64();
  r.expect_end();
  if (!codes.padding_clear()) throw FormatError(context + ": padding bits set beyond bit " + std::to_string(m));
  return codes;
}

inline void save_codes(const PackedCodes& codes, const std::filesystem::path& path) {
  write_file_atomic(path, encode_codes(codes));
}

inline PackedCodes load_codes(const std::filesystem::path& path) {
  return decode_codes(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Multi-table index directory: manifest.txt (key=value: tables, bits, items,
// seeds) plus table_<l>.flhc and table_<l>.flhm per table.

inline void save_index(const MultiTableIndex& index, const std::filesystem::path& dir) {
  FLORA_REQUIRE(index.table_count() > 0, InvalidArgument, "cannot save an index with no tables");
  std::filesystem::create_directories(dir);
  KeyValues manifest;
  std::string seeds;
  for (std::size_t l = 0; l < index.table_count(); ++l) {
    const IndexTable& t = index.table(l);
    save_codes(t.codes, dir / ("table_" + std::to_string(l) + ".flhc"));
    save_model(t.model, dir / ("table_" + std::to_string(l) + ".flhm"));
    seeds += (l ? "," : "") + std::to_string(t.seed);
  }
  manifest["format"] = "1";
  manifest["tables"] = std::to_string(index.table_count());
  manifest["bits"] = std::to_string(index.table(0).codes.bits());
  manifest["items"] = std::to_string(index.item_count());
  manifest["seeds"] = seeds;
  write_file_atomic(dir / "manifest.txt", format_key_values(manifest));
}

inline MultiTableIndex load_index(const std::filesystem::path& dir) {
  const std::string ctx = (dir / "manifest.txt").string();
  const KeyValues manifest = parse_key_values(read_file(dir / "manifest.txt"), ctx);
  std::size_t tables = 0, bits = 0, items = 0;
  try {
    tables = std::stoul(require_key(manifest, "tables", ctx));
    bits = std::stoul(require_key(manifest, "bits", ctx));
    items = std::stoul(require_key(manifest, "items", ctx));
  } catch (const std::logic_error&) {
    throw FormatError(ctx + ": non-numeric table count, bits or items");
  }
  std::vector<std::uint64_t> seeds;
  {
    std::string s = require_key(manifest, "seeds", ctx);
    std::size_t pos = 0;
    while (pos <= s.size() && !s.empty()) {
      const auto comma = s.find(',', pos);
      const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        seeds.push_back(std::stoull(tok));
      } catch (const std::logic_error&) {
        throw FormatError(ctx + ": bad seed '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  if (tables == 0 || seeds.size() != tables)
    throw FormatError(ctx + ": table count and seed list disagree");
  std::vector<IndexTable> out;
  for (std::size_t l = 0; l < tables; ++l) {
    IndexTable t;
    t.seed = seeds[l];
    t.codes = load_codes(dir / ("table_" + std::to_string(l) + ".flhc"));
    t.model = load_model(dir / ("table_" + std::to_string(l) + ".flhm"));
    if (t.codes.bits() != bits || t.model.bits() != bits || t.codes.size() != items)
      throw FormatError(ctx + ": table " + std::to_string(l) + " does not match the manifest");
    t.table = HashTable(t.codes);
    out.push_back(std::move(t));
  }
  return MultiTableIndex(std::move(out));
}

}  // namespace flora
