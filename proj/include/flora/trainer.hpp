#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flora/binary_io.hpp"
#include "flora/error.hpp"
#include "flora/eval.hpp"
#include "flora/hash_model.hpp"
#include "flora/matrix.hpp"
#include "flora/measures.hpp"
#include "flora/nn.hpp"
#include "flora/parallel.hpp"
#include "flora/sampler.hpp"

namespace flora {

struct TrainConfig {
  std::size_t iterations = 20000;
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
  SamplingStrategy strategy;
  HashConfig hash;
  std::size_t eval_every = 1000;
  double validation_fraction = 0.1;
  AdamConfig adam;
  // validation metric: Top-val_k recall@val_t
  std::size_t val_k = 10;
  std::size_t val_t = 100;
  // negatives sorted per user when building the cache, 0 = all
  std::size_t ranked_cap = 0;

  void validate() const {
    FLORA_REQUIRE(iterations > 0, InvalidArgument, "iterations must be > 0");
    FLORA_REQUIRE(batch_size > 0, InvalidArgument, "batch size must be > 0");
    FLORA_REQUIRE(eval_every > 0, InvalidArgument, "eval_every must be > 0");
    FLORA_REQUIRE(validation_fraction > 0.0 && validation_fraction < 1.0, InvalidArgument,
                  "validation fraction must be in (0, 1)");
    FLORA_REQUIRE(val_k >= 1 && val_t >= 1, InvalidArgument, "validation K and T must be >= 1");
    FLORA_REQUIRE(adam.learning_rate > 0.0, InvalidArgument, "learning rate must be > 0");
    strategy.validate();
    hash.validate();
  }
};

/// Everything derived from the data before optimisation starts: the
/// train/validation user split, the f score cache for training users and the
/// validation ground truth. Independent of the training seed, so several runs
/// can share it.
struct TrainingSetup {
  Matrix train_users;
  Matrix val_users;
  Matrix items;
  PositiveCache cache;
  GroundTruth val_truth;
  std::size_t user_dim = 0;
  std::size_t item_dim = 0;
};

/// Shuffles users with `split_seed` and keeps the first
/// round(fraction * n) (at least one) for validation.
inline TrainingSetup prepare_training(const Matrix& users, const Matrix& items, const Measure& f,
                                      const TrainConfig& config, std::uint64_t split_seed) {
  config.validate();
  FLORA_REQUIRE(users.cols() == f.user_dim(), InvalidArgument,
                "user dim " + std::to_string(users.cols()) + " != measure user dim " +
                    std::to_string(f.user_dim()));
  FLORA_REQUIRE(items.cols() == f.item_dim(), InvalidArgument,
                "item dim " + std::to_string(items.cols()) + " != measure item dim " +
                    std::to_string(f.item_dim()));
  FLORA_REQUIRE(users.rows() >= 2, InvalidArgument, "training needs at least two users");
  FLORA_REQUIRE(items.rows() > config.strategy.positives, InvalidArgument,
                "item count must exceed N_p");
  FLORA_REQUIRE(items.rows() >= config.val_k, InvalidArgument, "item count must be >= validation K");

  std::vector<std::uint32_t> perm(users.rows());
  std::iota(perm.begin(), perm.end(), 0U);
  Rng rng(derive_seed(split_seed, 0x5d1u));
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n = static_cast<double>(users.rows());
  std::size_t n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * n));
  n_val = std::clamp<std::size_t>(n_val, 1, users.rows() - 1);

  TrainingSetup s;
  s.user_dim = users.cols();
  s.item_dim = items.cols();
  s.items = items;
  s.val_users = users.gather_rows(std::span<const std::uint32_t>(perm.data(), n_val));
  s.train_users = users.gather_rows(
      std::span<const std::uint32_t>(perm.data() + n_val, perm.size() - n_val));
  s.cache = build_positive_cache(s.train_users, items, f, config.strategy.positives, config.ranked_cap);
  s.val_truth = ground_truth(s.val_users, items, f, config.val_k);
  return s;
}

/// Rows of users/items and cached targets for a list of sampled pairs.
inline HashBatch gather_pairs(std::span<const TrainingPair> pairs, const Matrix& users,
                              const Matrix& items) {
  std::vector<std::uint32_t> u(pairs.size());
  std::vector<ItemId> v(pairs.size());
  HashBatch b;
  b.targets.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    u[i] = pairs[i].user;
    v[i] = pairs[i].item;
    b.targets[i] = pairs[i].target;
  }
  b.users = users.gather_rows(std::span<const std::uint32_t>(u));
  b.items = items.gather_rows(std::span<const ItemId>(v));
  return b;
}

struct TrainLogRow {
  std::size_t iteration = 0;
  LossBreakdown loss;  // mean over the iterations since the previous row
  double val_recall = 0.0;
};

struct TrainResult {
  FloraModel model;  // best validation checkpoint
  std::vector<TrainLogRow> log;
  double initial_recall = 0.0;
  double best_recall = 0.0;
  std::size_t best_iteration = 0;
};

/// Minibatch training against the cached f scores in `setup`. A checkpoint is
/// taken every `eval_every` iterations and after the last one; the returned
/// model is the checkpoint with the highest validation recall (earliest on
/// ties).
inline TrainResult train(const TrainingSetup& setup, const TrainConfig& config) {
  config.validate();
  const PairSampler sampler(config.strategy, setup.cache);
  Rng rng(derive_seed(config.seed, 0x5a3u));
  FloraModel model =
      make_flora_model(setup.user_dim, setup.item_dim, config.hash, derive_seed(config.seed, 0x1417u));
  OptimizerState state{config.adam, 0, {}, {}};

  const auto validate_recall = [&](const FloraModel& m) {
    return hamming_recall(m, setup.val_users, setup.items, setup.val_truth, config.val_t);
  };

  TrainResult result;
  result.initial_recall = validate_recall(model);
  result.best_recall = -1.0;
  LossBreakdown window;
  std::size_t window_len = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const auto pairs = sampler.draw_batch(config.batch_size, rng);
    const HashBatch batch = gather_pairs(pairs, setup.train_users, setup.items);
    const TotalLoss loss = loss_total(model, batch, config.hash);
    if (!std::isfinite(loss.terms.total))
      throw NumericError("non-finite loss at iteration " + std::to_string(it) +
                         " (L_c=" + format_double(loss.terms.consistency) +
                         ", L_u=" + format_double(loss.terms.balance) +
                         ", L_i=" + format_double(loss.terms.independence) + ")");
    optimizer_step(model, loss.grads, state);
    window.total += loss.terms.total;
    window.consistency += loss.terms.consistency;
    window.balance += loss.terms.balance;
    window.independence += loss.terms.independence;
    ++window_len;

    if (it % config.eval_every == 0 || it == config.iterations) {
      const double k = static_cast<double>(window_len);
      TrainLogRow row{it,
                      {window.total / k, window.consistency / k, window.balance / k,
                       window.independence / k},
                      validate_recall(model)};
      if (row.val_recall > result.best_recall) {
        result.best_recall = row.val_recall;
        result.best_iteration = it;
        result.model = model;
      }
      result.log.push_back(row);
      window = {};
      window_len = 0;
    }
  }
  return result;
}

/// Convenience wrapper: split, cache and train in one call, split seeded by
/// the training seed.
inline TrainResult train(const TrainConfig& config, const Matrix& users, const Matrix& items,
                         const Measure& f) {
  return train(prepare_training(users, items, f, config, config.seed), config);
}

struct GridCell {
  double lambda_u = 0.0;
  double lambda_i = 0.0;
  double recall = 0.0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;  // row-major over (grid_u, grid_i)
  std::size_t best = 0;

  const GridCell& best_cell() const { return cells.at(best); }
};

/// Trains one model per (lambda_u, lambda_i) pair and picks the highest
/// validation recall. Ties go to the smaller lambda_u, then the smaller
/// lambda_i. Cells train concurrently.
inline GridSearchResult grid_search_lambdas(const TrainingSetup& setup, const TrainConfig& config,
                                            std::span<const double> grid_u,
                                            std::span<const double> grid_i) {
  FLORA_REQUIRE(!grid_u.empty() && !grid_i.empty(), InvalidArgument, "lambda grids must be non-empty");
  GridSearchResult out;
  out.cells.resize(grid_u.size() * grid_i.size());
  for (std::size_t a = 0; a < grid_u.size(); ++a)
    for (std::size_t b = 0; b < grid_i.size(); ++b)
      out.cells[a * grid_i.size() + b] = {grid_u[a], grid_i[b], 0.0};
  parallel_for(out.cells.size(), [&](std::size_t c) {
    TrainConfig cell = config;
    cell.hash.lambda_u = out.cells[c].lambda_u;
    cell.hash.lambda_i = out.cells[c].lambda_i;
    out.cells[c].recall = train(setup, cell).best_recall;
  });
  const auto better = [](const GridCell& x, const GridCell& y) {
    if (x.recall != y.recall) return x.recall > y.recall;
    if (x.lambda_u != y.lambda_u) return x.lambda_u < y.lambda_u;
    return x.lambda_i < y.lambda_i;
  };
  for (std::size_t c = 1; c < out.cells.size(); ++c)
    if (better(out.cells[c], out.cells[out.best])) out.best = c;
  return out;
}

inline void write_training_log(const std::filesystem::path& path, std::span<const TrainLogRow> log) {
  std::string out = "iter,loss_total,loss_c,loss_u,loss_i,val_recall\n";
  for (const auto& r : log)
    out += std::to_string(r.iteration) + "," + format_double(r.loss.total) + "," +
           format_double(r.loss.consistency) + "," + format_double(r.loss.balance) + "," +
           format_double(r.loss.independence) + "," + format_double(r.val_recall) + "\n";
  write_file_atomic(path, out);
}

}  // namespace flora
