#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/error.hpp"
#include "flora/hamming_index.hpp"
#include "flora/hash_model.hpp"
#include "flora/matrix.hpp"
#include "flora/measures.hpp"
#include "flora/parallel.hpp"

namespace flora {

/// Per-user Top-K items under f, by (score desc, id asc).
struct GroundTruth {
  std::size_t k = 0;
  std::vector<std::vector<ItemId>> top;
  std::vector<std::vector<double>> scores;

  std::size_t users() const noexcept { return top.size(); }
};

inline std::vector<ItemId> top_k_by_score(std::span<const double> s, std::size_t k) {
  std::vector<ItemId> order(s.size());
  std::iota(order.begin(), order.end(), ItemId{0});
  const auto before = [&s](ItemId a, ItemId b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
  order.resize(k);
  return order;
}

/// Ground truth from a precomputed users x items score table.
inline GroundTruth ground_truth_from_scores(const Matrix& scores, std::size_t k) {
  FLORA_REQUIRE(k >= 1 && k <= scores.cols(), InvalidArgument,
                "K=" + std::to_string(k) + " must be in [1, item count=" +
                    std::to_string(scores.cols()) + "]");
  GroundTruth gt;
  gt.k = k;
  gt.top.resize(scores.rows());
  gt.scores.resize(scores.rows());
  parallel_for(scores.rows(), [&](std::size_t u) {
    const auto s = scores.row(u);
    gt.top[u] = top_k_by_score(s, k);
    for (ItemId i : gt.top[u]) gt.scores[u].push_back(s[i]);
  });
  return gt;
}

/// Exhaustive scan of f over all items for every user.
inline GroundTruth ground_truth(const Matrix& users, const Matrix& items, const Measure& f,
                                std::size_t k) {
  FLORA_REQUIRE(k >= 1 && k <= items.rows(), InvalidArgument,
                "K=" + std::to_string(k) + " must be in [1, item count=" +
                    std::to_string(items.rows()) + "]");
  return ground_truth_from_scores(f.score_all(items, users), k);
}

/// |first t of ranking ∩ gt| / |gt|
inline double recall_at(std::span<const ItemId> ranking, std::span<const ItemId> gt, std::size_t t) {
  FLORA_REQUIRE(t >= 1, InvalidArgument, "recall_at needs t >= 1");
  if (gt.empty()) return 0.0;
  const std::unordered_set<ItemId> relevant(gt.begin(), gt.end());
  const std::size_t upto = std::min(t, ranking.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < upto; ++i) hits += relevant.count(ranking[i]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

struct RecallCurve {
  std::string method;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> recall;  // recall[t - 1] for t = 1..T
  bool padded = false;         // some ranking was shorter than T

  double at(std::size_t t) const { return recall.at(t - 1); }
};

/// Mean over users of recall@t for t = 1..T. Rankings shorter than T count
/// their missing tail as non-relevant and set `padded`.
inline RecallCurve recall_curve(std::span<const std::vector<ItemId>> rankings, const GroundTruth& gt,
                                std::size_t T = 200) {
  FLORA_REQUIRE(T >= 1, InvalidArgument, "recall curve needs T >= 1");
  FLORA_REQUIRE(rankings.size() == gt.users(), InvalidArgument,
                "got rankings for " + std::to_string(rankings.size()) + " users, ground truth has " +
                    std::to_string(gt.users()));
  RecallCurve curve;
  curve.k = gt.k;
  curve.recall.assign(T, 0.0);
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    const auto& r = rankings[u];
    if (r.size() < T) curve.padded = true;
    const std::unordered_set<ItemId> relevant(gt.top[u].begin(), gt.top[u].end());
    std::size_t hits = 0;
    for (std::size_t t = 1; t <= T; ++t) {
      if (t <= r.size()) hits += relevant.count(r[t - 1]);
      curve.recall[t - 1] += static_cast<double>(hits) / static_cast<double>(relevant.size());
    }
  }
  if (!rankings.empty())
    for (double& v : curve.recall) v /= static_cast<double>(rankings.size());
  return curve;
}

/// |candidates \ gt| / (n_items - |gt|): retrieved non-relevant items over all
/// non-relevant items.
inline double fpr_radius0(std::span<const ItemId> candidates, std::span<const ItemId> gt,
                          std::size_t n_items) {
  const std::unordered_set<ItemId> relevant(gt.begin(), gt.end());
  FLORA_REQUIRE(relevant.size() <= n_items, InvalidArgument, "ground truth larger than item set");
  if (relevant.size() == n_items) return 0.0;
  const std::unordered_set<ItemId> cand(candidates.begin(), candidates.end());
  std::size_t fp = 0;
  for (ItemId c : cand) {
    FLORA_REQUIRE(c < n_items, InvalidArgument, "candidate id out of range");
    fp += relevant.count(c) == 0;
  }
  return static_cast<double>(fp) / static_cast<double>(n_items - relevant.size());
}

/// Bits whose sign is (almost) constant: |mean of the ±1 column| > threshold.
inline std::size_t count_collapsed_bits(const Matrix& signs, double threshold = 0.95) {
  if (signs.rows() == 0) return 0;
  std::size_t collapsed = 0;
  for (std::size_t k = 0; k < signs.cols(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < signs.rows(); ++i) s += signs(i, k);
    if (std::abs(s / static_cast<double>(signs.rows())) > threshold) ++collapsed;
  }
  return collapsed;
}

// ---------------------------------------------------------------------------
// Model-level evaluation

/// Full Hamming rankings (top T) for each user row.
inline std::vector<std::vector<ItemId>> hamming_rankings(const FloraModel& model,
                                                         const Matrix& users,
                                                         const PackedCodes& item_codes,
                                                         std::size_t T) {
  const PackedCodes user_codes = pack_codes(encode_binary(model, Domain::user, users));
  std::vector<std::vector<ItemId>> out(users.rows());
  for (std::size_t u = 0; u < users.rows(); ++u)
    out[u] = rank_full_scan(user_codes.code(u), item_codes, T).ids;
  return out;
}

/// Top-K recall@T of Hamming ranking, averaged over users. Used for model
/// selection during training.
inline double hamming_recall(const FloraModel& model, const Matrix& users, const Matrix& items,
                             const GroundTruth& gt, std::size_t T) {
  const PackedCodes item_codes = pack_codes(encode_binary(model, Domain::item, items));
  const auto rankings = hamming_rankings(model, users, item_codes, T);
  return recall_curve(rankings, gt, T).at(T);
}

struct RankingCurves {
  RecallCurve hamming;   // FLORA: Hamming ranking alone
  RecallCurve reranked;  // FLORA-R: tie-inclusive Hamming prefix re-scored with f
};

/// Recall curves of Hamming ranking and of its f re-ranked variant. For each
/// t the re-ranked list takes every item at Hamming distance <= the t-th
/// item's distance (so ties at the cutoff are included), scores those
/// candidates with f and keeps the best t.
inline RankingCurves evaluate_rankings(const FloraModel& model, const Matrix& users,
                                       const Matrix& items, const Measure& f,
                                       const GroundTruth& gt, std::size_t T) {
  FLORA_REQUIRE(users.rows() == gt.users(), InvalidArgument, "ground truth / user count mismatch");
  const PackedCodes item_codes = pack_codes(encode_binary(model, Domain::item, items));
  const PackedCodes user_codes = pack_codes(encode_binary(model, Domain::user, users));
  const std::size_t n = items.rows();
  const std::size_t t_max = std::min(T, n);
  std::vector<std::vector<ItemId>> plain(users.rows());
  std::vector<std::vector<double>> rerank_recall(users.rows(), std::vector<double>(T, 0.0));
  parallel_for(users.rows(), [&](std::size_t u) {
    const RankingResult full = rank_full_scan(user_codes.code(u), item_codes, n);
    plain[u].assign(full.ids.begin(), full.ids.begin() + static_cast<std::ptrdiff_t>(t_max));
    // candidate pool: everything up to the ties of the T-th item
    std::size_t pool = t_max;
    while (pool < n && full.scores[pool] == full.scores[t_max - 1]) ++pool;
    const std::span<const ItemId> pool_ids(full.ids.data(), pool);
    const std::vector<double> pool_scores = f.score_batch(items.gather_rows(pool_ids), users.row(u));
    std::vector<double> by_id(n, 0.0);
    for (std::size_t i = 0; i < pool; ++i) by_id[pool_ids[i]] = pool_scores[i];
    std::size_t end = 0;
    for (std::size_t t = 1; t <= T; ++t) {
      if (t <= t_max) {
        end = std::max(end, t);
        while (end < pool && full.scores[end] == full.scores[t - 1]) ++end;
      }
      const RankingResult r = rerank_with_f(std::span<const ItemId>(full.ids.data(), end),
                                            [&by_id](ItemId id) { return by_id[id]; }, t);
      rerank_recall[u][t - 1] = recall_at(r.ids, gt.top[u], t);
    }
  });
  RankingCurves out;
  out.hamming = recall_curve(plain, gt, T);
  out.hamming.method = "flora";
  out.reranked.method = "flora-r";
  out.reranked.k = gt.k;
  out.reranked.recall.assign(T, 0.0);
  for (const auto& r : rerank_recall)
    for (std::size_t t = 0; t < T; ++t) out.reranked.recall[t] += r[t];
  for (double& v : out.reranked.recall) v /= static_cast<double>(std::max<std::size_t>(1, users.rows()));
  out.reranked.padded = out.hamming.padded;
  return out;
}

struct CandidateStats {
  std::size_t tables = 0;
  double recall = 0.0;          // mean |C ∩ GT| / K
  double fpr = 0.0;             // mean fpr_radius0
  double mean_candidates = 0.0; // mean |C|
};

/// Radius-0 candidate quality of an index over the test users.
inline CandidateStats evaluate_radius0(const MultiTableIndex& index, const Matrix& users,
                                       const GroundTruth& gt) {
  FLORA_REQUIRE(users.rows() == gt.users(), InvalidArgument, "ground truth / user count mismatch");
  const auto queries = index.query_codes(users);
  CandidateStats s;
  s.tables = index.table_count();
  for (std::size_t u = 0; u < users.rows(); ++u) {
    const auto views = query_views(queries, u);
    const auto cand = probe_radius0(views, index);
    const std::unordered_set<ItemId> relevant(gt.top[u].begin(), gt.top[u].end());
    std::size_t hits = 0;
    for (ItemId c : cand) hits += relevant.count(c);
    s.recall += static_cast<double>(hits) / static_cast<double>(gt.k);
    s.fpr += fpr_radius0(cand, gt.top[u], index.item_count());
    s.mean_candidates += static_cast<double>(cand.size());
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, users.rows()));
  s.recall /= n;
  s.fpr /= n;
  s.mean_candidates /= n;
  return s;
}

// ---------------------------------------------------------------------------
// CSV / plot outputs

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void write_curve_csv(const std::filesystem::path& path, const RecallCurve& curve) {
  std::string out = "t,recall\n";
  for (std::size_t t = 1; t <= curve.recall.size(); ++t)
    out += std::to_string(t) + "," + format_double(curve.recall[t - 1]) + "\n";
  write_file_atomic(path, out);
}

/// Whitespace-separated table, one column per curve, for gnuplot.
inline void write_curves_gnuplot(const std::filesystem::path& path,
                                 std::span<const RecallCurve> curves) {
  std::string out = "# t";
  std::size_t T = 0;
  for (const auto& c : curves) {
    out += " " + (c.method.empty() ? std::string("curve") : c.method);
    T = std::max(T, c.recall.size());
  }
  out += "\n";
  for (std::size_t t = 1; t <= T; ++t) {
    out += std::to_string(t);
    for (const auto& c : curves) out += " " + (t <= c.recall.size() ? format_double(c.at(t)) : "nan");
    out += "\n";
  }
  write_file_atomic(path, out);
}

inline void write_candidate_csv(const std::filesystem::path& path,
                                std::span<const CandidateStats> rows) {
  std::string out = "L,recall,fpr\n";
  for (const auto& r : rows)
    out += std::to_string(r.tables) + "," + format_double(r.recall) + "," + format_double(r.fpr) + "\n";
  write_file_atomic(path, out);
}

}  // namespace flora
