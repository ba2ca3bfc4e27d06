// Small end-to-end run: synthetic vectors, a frozen em_sum measure, a short
// training run, then Hamming ranking and f re-ranking for the test users.

#include <cstdio>

#include "flora/flora.hpp"

int main() {
  using namespace flora;

  const SynthData data = gen_synth(600, 1500, 16, 7);
  const std::uint32_t n_train = 500;
  std::vector<std::uint32_t> train_rows(n_train), test_rows(100);
  std::iota(train_rows.begin(), train_rows.end(), 0U);
  std::iota(test_rows.begin(), test_rows.end(), n_train);
  const Matrix users = data.users.vectors.gather_rows(std::span<const std::uint32_t>(train_rows));
  const Matrix test = data.users.vectors.gather_rows(std::span<const std::uint32_t>(test_rows));
  const Matrix& items = data.items.vectors;

  const Measure f = make_measure(MeasureKind::mlp_em_sum, 16, 16, 3);

  TrainConfig config;
  config.iterations = 1500;
  config.eval_every = 250;
  config.hash.bits = 32;
  config.hash.tower_sizes = {64};
  config.hash.shared_sizes = {32};
  const TrainResult result = train(config, users, items, f);
  std::printf("validation recall@100: %.3f -> %.3f (iteration %zu)\n", result.initial_recall,
              result.best_recall, result.best_iteration);

  const GroundTruth gt = ground_truth(test, items, f, 10);
  const RankingCurves curves = evaluate_rankings(result.model, test, items, f, gt, 100);
  for (std::size_t t : {10, 50, 100})
    std::printf("t=%3zu  flora %.3f  flora-r %.3f  random %.3f\n", t, curves.hamming.at(t),
                curves.reranked.at(t), static_cast<double>(t) / static_cast<double>(items.rows()));
}
