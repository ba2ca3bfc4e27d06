// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is non-zero if any criterion fails.

#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "flora/flora.hpp"

#ifndef FLORA_ACCEPTANCE_ITERATIONS
#define FLORA_ACCEPTANCE_ITERATIONS 20000
#endif

namespace {

using namespace flora;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Verdict {
  int id = 0;
  bool pass = false;
  std::string summary;
};

std::vector<Verdict> g_verdicts;

void record(int id, bool pass, const std::string& summary) {
  g_verdicts.push_back({id, pass, summary});
  std::fprintf(stderr, "[criterion %d] %s: %s\n", id, pass ? "PASS" : "FAIL", summary.c_str());
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Matrix gaussian(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = nd(rng);
  return m;
}

Matrix random_signs(std::size_t r, std::size_t c, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  Matrix m(r, c);
  for (double& v : m.values()) v = coin(rng) ? 1.0 : -1.0;
  return m;
}

// ---------------------------------------------------------------------------
// 1: analytic gradients against central differences

// Central differences at h = 1e-4 keep roundoff small, but a relu kink inside
// the stencil ruins the estimate. Per entry, shrink the step until two
// successive estimates agree; the analytic value plays no part in the choice.
struct StableDifferences {
  std::vector<Matrix> grads;
  std::size_t shrunk = 0;
};

StableDifferences stable_differences(const std::function<double()>& loss, std::span<Matrix* const> params) {
  const double steps[] = {1e-4, 2.5e-5, 6.25e-6, 1.5625e-6};
  std::vector<std::vector<Matrix>> levels;
  for (double h : steps) levels.push_back(finite_difference_grad(loss, params, h));
  StableDifferences out{levels.front(), 0};
  const auto agree = [](double a, double b) { return std::abs(a - b) <= 1e-3 * std::max({std::abs(a), std::abs(b), 1e-8}); };
  for (std::size_t k = 0; k < out.grads.size(); ++k)
    for (std::size_t i = 0; i < out.grads[k].size(); ++i) {
      std::size_t level = 0;
      while (level + 2 < levels.size() && !agree(levels[level][k][i], levels[level + 1][k][i])) ++level;
      if (level > 0) ++out.shrunk;
      out.grads[k][i] = levels[level][k][i];
    }
  return out;
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  HashConfig cfg;
  cfg.bits = 8;
  cfg.tower_sizes = {16, 16};
  cfg.shared_sizes = {16};
  constexpr double kTol = 1e-4, kFloor = 1e-8;
  std::map<std::string, double> worst{{"consistency", 0}, {"balance", 0}, {"independence", 0}, {"total", 0}};
  std::size_t balance_models = 0, skipped = 0, shrunk = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(derive_seed(seed, 77));
    FloraModel model = make_flora_model(6, 7, cfg, seed);
    const Matrix users = gaussian(10, 6, rng);
    const Matrix items = gaussian(10, 7, rng);
    std::vector<double> targets(10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& t : targets) t = unit(rng);
    const HashBatch batch{users, items, targets};
    auto params = parameter_refs(model);
    const std::span<Matrix* const> ps(params);
    const auto check = [&](const std::string& name, const ModelGradients& g, const std::function<double()>& f) {
      const StableDifferences numeric = stable_differences(f, ps);
      shrunk += numeric.shrunk;
      worst[name] = std::max(worst[name], max_relative_error(gradient_list(g), numeric.grads, kFloor));
    };
    check("consistency", loss_consistency(model, users, items, targets).grads,
          [&] { return loss_consistency(model, users, items, targets).value; });
    check("independence", loss_independence(model).grads, [&] { return loss_independence(model).value; });

    // the L1 term is only differentiable away from zero bit means
    const HashForward fw = hash_forward(model, users, items);
    bool away_from_kink = true;
    for (const Matrix* h : {&fw.h_user, &fw.h_item})
      for (std::size_t k = 0; k < h->cols(); ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < h->rows(); ++i) mean += (*h)(i, k);
        if (std::abs(mean / static_cast<double>(h->rows())) <= 1e-3) away_from_kink = false;
      }
    if (!away_from_kink) {
      ++skipped;
      continue;
    }
    ++balance_models;
    check("balance", loss_balance(model, users, items).grads, [&] { return loss_balance(model, users, items).value; });
    check("total", loss_total(model, batch, 0.7, 0.3).grads,
          [&] { return loss_total(model, batch, 0.7, 0.3).terms.total; });
  }
  bool pass = balance_models > 0;
  std::string detail;
  for (const auto& [name, err] : worst) {
    pass = pass && err <= kTol;
    detail += name + " " + fmt("%.2e", err) + ", ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 60.0;
  record(1, pass,
         "max relative gradient error " + detail + std::to_string(balance_models) + " models off the L1 kink (" +
             std::to_string(skipped) + " skipped), " + std::to_string(shrunk) + " entries needed a smaller step, " + fmt("%.1fs", secs));
}

// ---------------------------------------------------------------------------
// 2: relaxed binary cosine equals 1 - Hamming/m exactly

void criterion_identity() {
  Rng rng(2);
  std::size_t mismatches = 0, pairs = 0;
  for (std::size_t m : {8u, 64u, 128u}) {
    const Matrix a = random_signs(10000, m, rng);
    const Matrix b = random_signs(10000, m, rng);
    const PackedCodes pa = pack_codes(a), pb = pack_codes(b);
    for (std::size_t i = 0; i < 10000; ++i, ++pairs) {
      const double lhs = code_similarity(a.row(i), b.row(i));
      const double rhs = 1.0 - static_cast<double>(hamming_distance(pa.code(i), pb.code(i))) / static_cast<double>(m);
      mismatches += std::bit_cast<std::uint64_t>(lhs) != std::bit_cast<std::uint64_t>(rhs);
    }
  }
  record(2, mismatches == 0,
         std::to_string(pairs) + " code pairs at m = 8, 64, 128, " + std::to_string(mismatches) + " bit mismatches");
}

// ---------------------------------------------------------------------------
// 3: index operations against naive oracles

void criterion_index_oracles() {
  Rng rng(3);
  std::size_t instances = 0, failures = 0;
  std::uniform_int_distribution<std::size_t> pick_n(1, 1000), pick_m(1, 128), pick_l(1, 4);
  for (; instances < 150; ++instances) {
    const std::size_t n = pick_n(rng);
    // short codes are where ties and bucket collisions happen
    const std::size_t m = instances % 3 == 0 ? 1 + pick_m(rng) % 12 : pick_m(rng);
    const Matrix items = random_signs(n, m, rng);
    const Matrix query = random_signs(1, m, rng);
    const PackedCodes pi = pack_codes(items), pq = pack_codes(query);

    std::vector<std::pair<std::size_t, ItemId>> naive;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t d = 0;
      for (std::size_t k = 0; k < m; ++k) d += items(i, k) != query(0, k);
      ok = ok && hamming_distance(pq.code(0), pi.code(i)) == d;
      naive.emplace_back(d, static_cast<ItemId>(i));
    }
    std::sort(naive.begin(), naive.end());
    const std::size_t t = 1 + rng() % n;
    const RankingResult r = rank_full_scan(pq.code(0), pi, t);
    ok = ok && r.ids.size() == t;
    for (std::size_t k = 0; ok && k < t; ++k) ok = r.ids[k] == naive[k].second;

    // radius 0 over L tables built from independent random codes
    const std::size_t L = pick_l(rng);
    std::vector<IndexTable> tables;
    std::vector<PackedCodes> queries;
    std::vector<Matrix> table_codes;
    for (std::size_t l = 0; l < L; ++l) {
      table_codes.push_back(l == 0 ? items : random_signs(n, m, rng));
      IndexTable tab;
      tab.seed = l;
      tab.codes = pack_codes(table_codes.back());
      tab.table = HashTable(tab.codes);
      tables.push_back(std::move(tab));
      queries.push_back(l == 0 ? pq : pack_codes(random_signs(1, m, rng)));
    }
    const MultiTableIndex index(std::move(tables));
    const auto views = query_views(queries, 0);
    const auto got = probe_radius0(views, index);
    std::set<ItemId> expect;
    for (std::size_t l = 0; l < L; ++l) {
      const Matrix q = unpack_codes(queries[l]);
      for (std::size_t i = 0; i < n; ++i) {
        bool same = true;
        for (std::size_t k = 0; same && k < m; ++k) same = table_codes[l](i, k) == q(0, k);
        if (same) expect.insert(static_cast<ItemId>(i));
      }
    }
    ok = ok && got == std::vector<ItemId>(expect.begin(), expect.end());
    failures += !ok;
  }
  record(3, failures == 0,
         std::to_string(instances) + " random instances (n <= 1000, m <= 128): " + std::to_string(failures) +
             " disagreements with the naive distance, sort and scan oracles");
}

// ---------------------------------------------------------------------------
// desk-scale experiment shared by 4-8

struct DeskRun {
  std::string label;
  std::uint64_t seed = 0;
  TrainResult result;
  RankingCurves curves;
  std::size_t collapsed_items = 0, collapsed_users = 0;
};

struct Desk {
  Matrix users, test, items;
  Measure f = make_measure(MeasureKind::mlp_em_sum, 32, 32, 1);
  TrainConfig base;
  TrainingSetup setup;
  GroundTruth test_truth;
};

Desk make_desk() {
  const auto t0 = Clock::now();
  Desk d;
  const SynthData data = gen_synth(2200, 5000, 32, 1);
  std::vector<std::uint32_t> train_rows(2000), test_rows(200);
  std::iota(train_rows.begin(), train_rows.end(), 0U);
  std::iota(test_rows.begin(), test_rows.end(), 2000U);
  d.users = data.users.vectors.gather_rows(std::span<const std::uint32_t>(train_rows));
  d.test = data.users.vectors.gather_rows(std::span<const std::uint32_t>(test_rows));
  d.items = data.items.vectors;
  d.base.iterations = FLORA_ACCEPTANCE_ITERATIONS;
  d.base.eval_every = 1000;
  d.base.hash.bits = 64;
  d.base.hash.tower_sizes = {64, 64};
  d.base.hash.shared_sizes = {64};
  d.base.strategy = {SamplingVariant::rank_neg, 0.5, 10};
  d.setup = prepare_training(d.users, d.items, d.f, d.base, 1);
  d.test_truth = ground_truth(d.test, d.items, d.f, 10);
  std::fprintf(stderr, "desk setup: %zu train users (%zu for validation), %zu test users, %zu items, %.1fs\n",
               d.users.rows(), d.setup.val_users.rows(), d.test.rows(), d.items.rows(), seconds_since(t0));
  return d;
}

DeskRun run_desk(const Desk& d, const std::string& label, TrainConfig config, std::uint64_t seed) {
  const auto t0 = Clock::now();
  config.seed = seed;
  DeskRun run;
  run.label = label;
  run.seed = seed;
  run.result = train(d.setup, config);
  run.curves = evaluate_rankings(run.result.model, d.test, d.items, d.f, d.test_truth, 200);
  run.collapsed_items = count_collapsed_bits(encode_binary(run.result.model, Domain::item, d.items));
  run.collapsed_users = count_collapsed_bits(encode_binary(run.result.model, Domain::user, d.test));
  std::fprintf(stderr,
               "  %-10s seed %llu: val %.3f (iter %zu), test recall@100 %.4f @200 %.4f, flora-r@100 %.4f, "
               "collapsed item/user bits %zu/%zu, %.0fs\n",
               label.c_str(), static_cast<unsigned long long>(seed), run.result.best_recall,
               run.result.best_iteration, run.curves.hamming.at(100), run.curves.hamming.at(200),
               run.curves.reranked.at(100), run.collapsed_items, run.collapsed_users, seconds_since(t0));
  return run;
}

double mean_at(const std::vector<DeskRun>& runs, std::size_t t) {
  double s = 0.0;
  for (const auto& r : runs) s += r.curves.hamming.at(t);
  return s / static_cast<double>(runs.size());
}

double mean_collapsed(const std::vector<DeskRun>& runs) {
  double s = 0.0;
  for (const auto& r : runs) s += static_cast<double>(r.collapsed_items + r.collapsed_users);
  return s / static_cast<double>(runs.size());
}

void criterion_recall(const std::vector<DeskRun>& full) {
  const double random = 100.0 / 5000.0;
  bool pass = true;
  std::string per_seed;
  for (const auto& r : full) {
    pass = pass && r.curves.hamming.at(100) >= 10.0 * random;
    per_seed += fmt("%.3f ", r.curves.hamming.at(100));
  }
  record(4, pass,
         "Top-10 recall@100 per seed " + per_seed + "(mean " + fmt("%.3f", mean_at(full, 100)) +
             ") vs 10x random = " + fmt("%.2f", 10.0 * random));
}

void criterion_sampling(const std::vector<DeskRun>& rand, const std::vector<DeskRun>& rand_neg,
                        const std::vector<DeskRun>& rank_neg) {
  const double o1 = mean_at(rand, 100), o2 = mean_at(rand_neg, 100), o3 = mean_at(rank_neg, 100);
  const bool pass = o3 >= o2 && o2 >= o1 && o3 >= 1.2 * o1;
  record(5, pass,
         "mean recall@100 over 3 seeds: rank_neg " + fmt("%.4f", o3) + ", rand_neg " + fmt("%.4f", o2) + ", rand " +
             fmt("%.4f", o1) + " (rank_neg/rand = " + fmt("%.2f", o1 > 0 ? o3 / o1 : 0.0) + ")");
}

void criterion_rerank(const std::vector<DeskRun>& full) {
  std::size_t violations = 0;
  double min_gap = 1.0;
  for (const auto& r : full)
    for (std::size_t t = 1; t <= 200; ++t) {
      const double gap = r.curves.reranked.at(t) - r.curves.hamming.at(t);
      min_gap = std::min(min_gap, gap);
      violations += gap < 0.0;
    }
  record(6, violations == 0,
         "FLORA-R minus FLORA over t = 1..200 on " + std::to_string(full.size()) + " runs: min gap " +
             fmt("%.4f", min_gap) + ", " + std::to_string(violations) + " cutoffs below");
}

// 64-bit user and item codes almost never coincide exactly, which would leave
// every radius-0 candidate set empty; short codes populate the buckets.
constexpr std::size_t kTableBits = 8;

void criterion_multitable(const Desk& d) {
  TrainConfig config = d.base;
  config.hash.bits = kTableBits;
  std::vector<IndexTable> tables;
  for (std::uint64_t seed = 1; tables.size() < 8; ++seed)
    tables.push_back(make_index_table(run_desk(d, "table m=8", config, seed).result.model, seed, d.items));
  const MultiTableIndex index(std::move(tables));

  bool monotone = true, superset = true;
  std::string detail;
  double previous = -1.0;
  const auto queries = index.query_codes(d.test);
  for (std::size_t L : {1u, 2u, 4u, 8u}) {
    const CandidateStats s = evaluate_radius0(index.prefix(L), d.test, d.test_truth);
    monotone = monotone && s.recall >= previous;
    previous = s.recall;
    detail += "L=" + std::to_string(L) + " recall " + fmt("%.4f", s.recall) + " fpr " + fmt("%.2e", s.fpr) +
              " |C| " + fmt("%.1f", s.mean_candidates) + "; ";
  }
  for (std::size_t u = 0; u < d.test.rows(); ++u) {
    const auto views = query_views(queries, u);
    std::vector<ItemId> prev;
    for (std::size_t L = 1; L <= 8; ++L) {
      const auto cand = probe_radius0(std::span<const CodeView>(views).first(L), index.prefix(L));
      superset = superset && std::includes(cand.begin(), cand.end(), prev.begin(), prev.end());
      prev = cand;
    }
  }
  const bool nonempty = previous > 0.0;
  record(7, monotone && superset && nonempty,
         "m=" + std::to_string(kTableBits) + " tables: " + detail +
             (superset ? "candidate sets nested for every query" : "candidate sets NOT nested"));
}

void criterion_losses(const std::vector<DeskRun>& full, const std::vector<DeskRun>& lc) {
  const double rf = mean_at(full, 200), rc = mean_at(lc, 200);
  const double cf = mean_collapsed(full), cc = mean_collapsed(lc);
  record(8, rf >= rc && cc > cf,
         "mean recall@200 full " + fmt("%.4f", rf) + " vs L_c-only " + fmt("%.4f", rc) +
             "; mean collapsed bits (item + test-user codes) full " + fmt("%.1f", cf) + " vs L_c-only " +
             fmt("%.1f", cc));
}

// ---------------------------------------------------------------------------
// 9: reproducibility and format round trips

class ScratchDir {
 public:
  ScratchDir() {
    path_ = fs::temp_directory_path() / ("flora_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void criterion_determinism(const Desk& d, const DeskRun& reference) {
  std::vector<std::string> problems;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  // pipeline reruns: a shortened desk run twice, with different worker counts
  TrainConfig quick = d.base;
  quick.iterations = 1500;
  quick.eval_every = 500;
  quick.seed = 11;
  const std::size_t saved_workers = worker_count();
  worker_count() = 1;
  const TrainingSetup setup_a = prepare_training(d.users, d.items, d.f, quick, 1);
  const TrainResult a = train(setup_a, quick);
  const RankingCurves ca = evaluate_rankings(a.model, d.test, d.items, d.f, d.test_truth, 200);
  worker_count() = 4;
  const TrainingSetup setup_b = prepare_training(d.users, d.items, d.f, quick, 1);
  const TrainResult b = train(setup_b, quick);
  const RankingCurves cb = evaluate_rankings(b.model, d.test, d.items, d.f, d.test_truth, 200);
  worker_count() = saved_workers;
  expect(setup_a.val_users == setup_b.val_users && setup_a.cache.score_table() == setup_b.cache.score_table(),
         "training setup differs between runs");
  expect(encode_model(a.model) == encode_model(b.model), "trained model bytes differ");
  bool logs_equal = a.log.size() == b.log.size();
  for (std::size_t i = 0; logs_equal && i < a.log.size(); ++i)
    logs_equal = a.log[i].loss.total == b.log[i].loss.total && a.log[i].loss.balance == b.log[i].loss.balance &&
                 a.log[i].val_recall == b.log[i].val_recall;
  expect(logs_equal, "training logs differ");
  expect(ca.hamming.recall == cb.hamming.recall && ca.reranked.recall == cb.reranked.recall, "recall curves differ");
  expect(ground_truth(d.test, d.items, d.f, 10).top == d.test_truth.top, "ground truth differs on recomputation");

  // file formats: random instances plus the desk artifacts
  ScratchDir dir;
  Rng rng(9);
  std::size_t round_trips = 0;
  for (std::uint64_t s = 0; s < 20; ++s, ++round_trips) {
    const std::size_t din = 1 + rng() % 20, dout = 1 + rng() % 20;
    const Mlp net = make_mlp({din, 1 + rng() % 16, dout}, Activation::relu, Activation::tanh, rng);
    expect(encode_mlp(decode_mlp(encode_mlp(net))) == encode_mlp(net) && decode_mlp(encode_mlp(net)) == net,
           "FLNN round trip");
    const MeasureKind kinds[] = {MeasureKind::mlp_concate, MeasureKind::mlp_em_sum, MeasureKind::deepfm_lite,
                                 MeasureKind::scaled_cosine};
    const MeasureKind kind = kinds[s % 4];
    const Measure f = make_measure(kind, din, kind == MeasureKind::scaled_cosine ? din : dout, s);
    save_measure(f, dir.path() / "f.flms");
    expect(encode_measure(load_measure(dir.path() / "f.flms")) == encode_measure(f), "FLMS round trip");
    HashConfig hc;
    hc.bits = 1 + rng() % 200;
    hc.tower_sizes = {1 + rng() % 12};
    hc.shared_sizes = {1 + rng() % 12};
    const FloraModel model = make_flora_model(din, dout, hc, s);
    save_model(model, dir.path() / "m.flhm");
    expect(load_model(dir.path() / "m.flhm") == model, "FLHM round trip");
    const PackedCodes codes = pack_codes(random_signs(rng() % 300, hc.bits, rng));
    save_codes(codes, dir.path() / "c.flhc");
    expect(load_codes(dir.path() / "c.flhc") == codes, "FLHC round trip");
    Matrix v = gaussian(rng() % 50, 1 + rng() % 40, rng);
    for (double& x : v.values()) x = static_cast<float>(x);
    const EmbeddingSet set{s % 2 ? Domain::item : Domain::user, v};
    write_matrix(set, dir.path() / "x.flmx");
    expect(read_matrix(dir.path() / "x.flmx") == set, "FLMX round trip");
  }
  save_model(reference.result.model, dir.path() / "desk.flhm");
  const std::string desk_bytes = read_file(dir.path() / "desk.flhm");
  expect(encode_model(load_model(dir.path() / "desk.flhm")) == desk_bytes, "desk model round trip");
  std::vector<IndexTable> tabs;
  tabs.push_back(make_index_table(reference.result.model, reference.seed, d.items));
  tabs.push_back(make_index_table(a.model, quick.seed, d.items));
  const MultiTableIndex index(std::move(tabs));
  save_index(index, dir.path() / "index");
  const MultiTableIndex back = load_index(dir.path() / "index");
  bool index_equal = back.table_count() == 2;
  for (std::size_t l = 0; index_equal && l < 2; ++l)
    index_equal = back.table(l).codes == index.table(l).codes && back.table(l).model == index.table(l).model &&
                  back.table(l).seed == index.table(l).seed;
  expect(index_equal, "index directory round trip");
  write_matrix({Domain::item, d.items}, dir.path() / "items.flmx");
  expect(read_matrix(dir.path() / "items.flmx").vectors == d.items, "desk item matrix round trip");

  std::string detail = "two desk pipeline reruns (1 vs 4 workers) identical in setup, model bytes, logs, curves; " +
                       std::to_string(round_trips) + " random round trips per format plus desk artifacts";
  if (!problems.empty()) {
    detail = "problems:";
    for (const auto& p : problems) detail += " " + p + ";";
  }
  record(9, problems.empty(), detail);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    criterion_gradients();
    criterion_identity();
    criterion_index_oracles();

    const Desk desk = make_desk();
    const TrainConfig& base = desk.base;
    std::fprintf(stderr, "training with lambda_u %g, lambda_i %g, %zu iterations\n", base.hash.lambda_u,
                 base.hash.lambda_i, base.iterations);
    std::vector<DeskRun> full, rand_neg, rand, lc;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) full.push_back(run_desk(desk, "rank_neg", base, seed));
    criterion_recall(full);
    criterion_rerank(full);

    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      TrainConfig c = base;
      c.strategy.variant = SamplingVariant::rand_neg;
      rand_neg.push_back(run_desk(desk, "rand_neg", c, seed));
      c.strategy.variant = SamplingVariant::rand;
      rand.push_back(run_desk(desk, "rand", c, seed));
    }
    criterion_sampling(rand, rand_neg, full);

    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      TrainConfig c = base;
      c.hash.lambda_u = 0.0;
      c.hash.lambda_i = 0.0;
      lc.push_back(run_desk(desk, "lc_only", c, seed));
    }
    criterion_losses(full, lc);

    criterion_multitable(desk);
    criterion_determinism(desk, full.front());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
  }

  std::sort(g_verdicts.begin(), g_verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  bool all = g_verdicts.size() == 9;
  for (int id = 1; id <= 9; ++id) {
    const auto it = std::find_if(g_verdicts.begin(), g_verdicts.end(), [id](const Verdict& v) { return v.id == id; });
    if (it == g_verdicts.end()) {
      std::printf("criterion %d: FAIL (not reached)\n", id);
      all = false;
      continue;
    }
    std::printf("criterion %d: %s  %s\n", id, it->pass ? "PASS" : "FAIL", it->summary.c_str());
    all = all && it->pass;
  }
  std::printf("total %.0fs\n", seconds_since(t0));
  return all ? 0 : 1;
}
