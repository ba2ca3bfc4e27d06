#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flora/error.hpp"
#include "flora/matrix.hpp"
#include "flora/measures.hpp"
#include "flora/nn.hpp"
#include "flora/parallel.hpp"

namespace flora {

using ItemId = std::uint32_t;

enum class SamplingVariant : std::uint8_t {
  rand = 1,       // uniform (user, item) pairs
  rand_neg = 2,   // p: uniform positive, 1-p: uniform negative
  rank_neg = 3,   // p: uniform positive, 1-p: negative with probability ~ 1/rank
  score_neg = 4,  // p: uniform positive, 1-p: negative with probability ~ f score
};

inline std::string_view to_string(SamplingVariant v) {
  switch (v) {
    case SamplingVariant::rand: return "rand";
    case SamplingVariant::rand_neg: return "rand_neg";
    case SamplingVariant::rank_neg: return "rank_neg";
    case SamplingVariant::score_neg: return "score_neg";
  }
  return "?";
}

inline SamplingVariant sampling_variant_from_string(std::string_view s) {
  for (auto v : {SamplingVariant::rand, SamplingVariant::rand_neg, SamplingVariant::rank_neg,
                 SamplingVariant::score_neg})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown sampling variant '" + std::string(s) + "'");
}

struct SamplingStrategy {
  SamplingVariant variant = SamplingVariant::rank_neg;
  double p = 0.5;              // probability of drawing from the positive list
  std::size_t positives = 10;  // N_p

  void validate() const {
    FLORA_REQUIRE(p >= 0.0 && p <= 1.0, InvalidArgument, "positive probability must be in [0, 1]");
    FLORA_REQUIRE(positives >= 1, InvalidArgument, "positive list size must be at least 1");
  }
};

/// Per-user f scores for every item and, once ranked, the item order: the
/// first N_p entries are the positives, the rest the negatives, both by
/// descending score with ties broken by ascending item id.
///
/// With `ranked_cap` = T > 0 only the top T negatives are sorted; the tail is
/// kept in ascending id order and sampled uniformly (see PairSampler).
class PositiveCache {
 public:
  PositiveCache() = default;

  bool initialized() const noexcept { return n_users_ > 0; }
  bool ranked() const noexcept { return !order_.empty(); }
  std::size_t users() const noexcept { return n_users_; }
  std::size_t items() const noexcept { return n_items_; }
  std::size_t positive_count() const noexcept { return n_pos_; }
  std::size_t negative_count() const noexcept { return n_items_ - n_pos_; }
  /// Number of sorted negatives (the full negative list unless capped).
  std::size_t ranked_negative_count() const noexcept { return ranked_neg_; }

  double score(std::size_t user, ItemId item) const noexcept { return scores_(user, item); }
  std::span<const double> scores(std::size_t user) const noexcept { return scores_.row(user); }
  const Matrix& score_table() const noexcept { return scores_; }

  std::span<const ItemId> positives(std::size_t user) const {
    require_ranked();
    return {order_.data() + user * n_items_, n_pos_};
  }
  std::span<const ItemId> negatives(std::size_t user) const {
    require_ranked();
    return {order_.data() + user * n_items_ + n_pos_, n_items_ - n_pos_};
  }

  friend PositiveCache build_score_cache(const Matrix&, const Matrix&, const Measure&);
  friend PositiveCache build_positive_cache(const Matrix&, const Matrix&, const Measure&,
                                            std::size_t, std::size_t);

 private:
  void require_ranked() const {
    if (!ranked()) throw ConfigError("positive cache has no ranking; build it with build_positive_cache");
  }

  std::size_t n_users_ = 0, n_items_ = 0, n_pos_ = 0, ranked_neg_ = 0;
  Matrix scores_;              // users x items
  std::vector<ItemId> order_;  // users x items
};

/// Scores only; enough for uniform sampling.
inline PositiveCache build_score_cache(const Matrix& users, const Matrix& items, const Measure& f) {
  FLORA_REQUIRE(items.rows() > 0, InvalidArgument, "positive cache needs a non-empty item set");
  FLORA_REQUIRE(users.rows() > 0, InvalidArgument, "positive cache needs at least one user");
  PositiveCache c;
  c.n_users_ = users.rows();
  c.n_items_ = items.rows();
  c.scores_ = f.score_all(items, users);
  return c;
}

/// Scores every (user, item) pair with f and ranks items per user.
/// `ranked_cap` = 0 sorts the complete negative list.
inline PositiveCache build_positive_cache(const Matrix& users, const Matrix& items,
                                          const Measure& f, std::size_t positives,
                                          std::size_t ranked_cap = 0) {
  FLORA_REQUIRE(items.rows() > 0, InvalidArgument, "positive cache needs a non-empty item set");
  FLORA_REQUIRE(positives >= 1 && positives < items.rows(), InvalidArgument,
                "N_p must be in [1, item count)");
  PositiveCache c = build_score_cache(users, items, f);
  const std::size_t n = c.n_items_;
  c.n_pos_ = positives;
  const std::size_t n_neg = n - positives;
  c.ranked_neg_ = ranked_cap == 0 ? n_neg : std::min(ranked_cap, n_neg);
  c.order_.resize(c.n_users_ * n);
  parallel_for(c.n_users_, [&](std::size_t u) {
    const auto s = c.scores_.row(u);
    std::span<ItemId> order(c.order_.data() + u * n, n);
    std::iota(order.begin(), order.end(), ItemId{0});
    const auto before = [&s](ItemId a, ItemId b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
    const std::size_t sorted = positives + c.ranked_neg_;
    if (sorted == n) {
      std::sort(order.begin(), order.end(), before);
    } else {
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sorted),
                        order.end(), before);
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(sorted), order.end());
    }
  });
  return c;
}

/// w_r = (1/r) / H_n for r = 1..n.
inline std::vector<double> rank_inverse_weights(std::size_t n) {
  FLORA_REQUIRE(n >= 1, InvalidArgument, "rank_inverse_weights needs n >= 1");
  std::vector<double> w(n);
  double harmonic = 0.0;
  // summed smallest-first for accuracy
  for (std::size_t r = n; r >= 1; --r) harmonic += 1.0 / static_cast<double>(r);
  for (std::size_t r = 1; r <= n; ++r) w[r - 1] = (1.0 / static_cast<double>(r)) / harmonic;
  return w;
}

struct TrainingPair {
  std::uint32_t user = 0;
  ItemId item = 0;
  double target = 0.0;
  bool operator==(const TrainingPair&) const = default;
};

/// Draws training pairs from a cache according to a strategy. Users are
/// chosen uniformly. Stateless apart from precomputed sampling tables, so one
/// sampler can serve several independent rng streams.
class PairSampler {
 public:
  PairSampler(SamplingStrategy strategy, const PositiveCache& cache)
      : strategy_(strategy), cache_(&cache) {
    strategy_.validate();
    if (!cache.initialized())
      throw ConfigError("sampling needs an initialized cache (scores for every pair)");
    if (strategy_.variant == SamplingVariant::rand) return;
    if (!cache.ranked())
      throw ConfigError(std::string(to_string(strategy_.variant)) +
                        " sampling needs a ranked positive cache");
    if (cache.positive_count() != strategy_.positives)
      throw ConfigError("cache was built with N_p=" + std::to_string(cache.positive_count()) +
                        " but the strategy asks for " + std::to_string(strategy_.positives));
    const std::size_t n_neg = cache.negative_count();
    if (strategy_.variant == SamplingVariant::rank_neg) {
      // cumulative 1/r mass over the sorted prefix; the unsorted tail keeps its
      // total 1/r mass but spreads it uniformly
      const auto w = rank_inverse_weights(n_neg);
      const std::size_t ranked = cache.ranked_negative_count();
      rank_cdf_.resize(ranked);
      double acc = 0.0;
      for (std::size_t r = 0; r < ranked; ++r) rank_cdf_[r] = (acc += w[r]);
      tail_mass_ = 0.0;
      for (std::size_t r = n_neg; r-- > ranked;) tail_mass_ += w[r];
    } else if (strategy_.variant == SamplingVariant::score_neg) {
      score_cdf_ = Matrix(cache.users(), n_neg);
      parallel_for(cache.users(), [&](std::size_t u) {
        const auto neg = cache.negatives(u);
        auto row = score_cdf_.row(u);
        double acc = 0.0;
        for (std::size_t r = 0; r < n_neg; ++r) row[r] = (acc += cache.score(u, neg[r]));
      });
    }
  }

  const SamplingStrategy& strategy() const noexcept { return strategy_; }
  const PositiveCache& cache() const noexcept { return *cache_; }

  /// Exact probability that a draw for `user` returns `item` (given the user).
  double item_probability(std::size_t user, ItemId item) const {
    const PositiveCache& c = *cache_;
    const double n = static_cast<double>(c.items());
    if (strategy_.variant == SamplingVariant::rand) return 1.0 / n;
    const auto pos = c.positives(user);
    if (std::find(pos.begin(), pos.end(), item) != pos.end())
      return strategy_.p / static_cast<double>(pos.size());
    const auto neg = c.negatives(user);
    const std::size_t r = static_cast<std::size_t>(std::find(neg.begin(), neg.end(), item) - neg.begin());
    const double q = 1.0 - strategy_.p;
    switch (strategy_.variant) {
      case SamplingVariant::rand_neg: return q / static_cast<double>(neg.size());
      case SamplingVariant::rank_neg: {
        const std::size_t ranked = rank_cdf_.size();
        const double total = rank_total();
        if (r < ranked) return q * (r == 0 ? rank_cdf_[0] : rank_cdf_[r] - rank_cdf_[r - 1]) / total;
        return q * tail_mass_ / static_cast<double>(neg.size() - ranked) / total;
      }
      case SamplingVariant::score_neg: {
        const auto row = score_cdf_.row(user);
        return q * c.score(user, item) / row.back();
      }
      default: return 0.0;
    }
  }

  TrainingPair draw(Rng& rng) const {
    const PositiveCache& c = *cache_;
    std::uniform_int_distribution<std::size_t> pick_user(0, c.users() - 1);
    const std::size_t u = pick_user(rng);
    ItemId item = 0;
    if (strategy_.variant == SamplingVariant::rand) {
      std::uniform_int_distribution<std::size_t> pick(0, c.items() - 1);
      item = static_cast<ItemId>(pick(rng));
    } else {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(rng) < strategy_.p) {
        const auto pos = c.positives(u);
        std::uniform_int_distribution<std::size_t> pick(0, pos.size() - 1);
        item = pos[pick(rng)];
      } else {
        item = draw_negative(u, rng);
      }
    }
    return {static_cast<std::uint32_t>(u), item, c.score(u, item)};
  }

  std::vector<TrainingPair> draw_batch(std::size_t batch_size, Rng& rng) const {
    FLORA_REQUIRE(batch_size >= 1, InvalidArgument, "batch size must be at least 1");
    std::vector<TrainingPair> out;
    out.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) out.push_back(draw(rng));
    return out;
  }

 private:
  double rank_total() const { return (rank_cdf_.empty() ? 0.0 : rank_cdf_.back()) + tail_mass_; }

  ItemId draw_negative(std::size_t u, Rng& rng) const {
    const PositiveCache& c = *cache_;
    const auto neg = c.negatives(u);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (strategy_.variant) {
      case SamplingVariant::rand_neg: {
        std::uniform_int_distribution<std::size_t> pick(0, neg.size() - 1);
        return neg[pick(rng)];
      }
      case SamplingVariant::rank_neg: {
        const double x = unit(rng) * rank_total();
        const auto it = std::upper_bound(rank_cdf_.begin(), rank_cdf_.end(), x);
        if (it != rank_cdf_.end()) return neg[static_cast<std::size_t>(it - rank_cdf_.begin())];
        const std::size_t ranked = rank_cdf_.size();
        if (ranked == neg.size()) return neg.back();  // x landed on the rounding edge
        std::uniform_int_distribution<std::size_t> pick(ranked, neg.size() - 1);
        return neg[pick(rng)];
      }
      case SamplingVariant::score_neg: {
        const auto row = score_cdf_.row(u);
        const double x = unit(rng) * row.back();
        const auto it = std::upper_bound(row.begin(), row.end(), x);
        const std::size_t r = std::min<std::size_t>(static_cast<std::size_t>(it - row.begin()), neg.size() - 1);
        return neg[r];
      }
      default: return neg.front();
    }
  }

  SamplingStrategy strategy_;
  const PositiveCache* cache_;
  std::vector<double> rank_cdf_;
  double tail_mass_ = 0.0;
  Matrix score_cdf_;
};

inline TrainingPair sample_pair(const PairSampler& sampler, Rng& rng) { return sampler.draw(rng); }

inline std::vector<TrainingPair> sample_minibatch(const PairSampler& sampler,
                                                  std::size_t batch_size, Rng& rng) {
  return sampler.draw_batch(batch_size, rng);
}

/// Text dump for debugging: one line per user with positives and the first
/// `top_negatives` ranked negatives.
inline void write_cache_diagnostic(std::ostream& os, const PositiveCache& cache,
                                   std::size_t top_negatives = 10) {
  for (std::size_t u = 0; u < cache.users(); ++u) {
    os << "user " << u << " pos";
    for (ItemId i : cache.positives(u)) os << ' ' << i;
    os << " neg";
    const auto neg = cache.negatives(u);
    for (std::size_t r = 0; r < std::min(top_negatives, neg.size()); ++r) os << ' ' << neg[r];
    os << '\n';
  }
}

}  // namespace flora
