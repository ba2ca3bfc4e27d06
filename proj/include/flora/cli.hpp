#pragma once

// Command-line front end. Kept in a header so tests can drive `cli_dispatch`
// in-process; tools/flora.cpp is a thin main().

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "flora/config.hpp"
#include "flora/dataset.hpp"
#include "flora/error.hpp"
#include "flora/eval.hpp"
#include "flora/hamming_index.hpp"
#include "flora/hash_model.hpp"
#include "flora/measures.hpp"
#include "flora/parallel.hpp"
#include "flora/trainer.hpp"

namespace flora::cli {

namespace fs = std::filesystem;

inline std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(tok, &used);
      if (used != tok.size() || v == 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw InvalidArgument(what + ": expected comma-separated positive integers, got '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

/// Training flags bound straight onto a TrainConfig.
struct TrainOptions {
  TrainConfig config;
  std::string sampling{to_string(config.strategy.variant)};
  std::string towers = join_sizes(config.hash.tower_sizes);
  std::string shared = join_sizes(config.hash.shared_sizes);

  // `with_sampling` = false leaves the variant at its default (ablate uses
  // --sampling as a switch of its own)
  void attach(CLI::App* app, bool with_sampling = true) {
    app->add_option("--iterations", config.iterations, "optimizer steps")->capture_default_str();
    app->add_option("--batch", config.batch_size, "pairs per minibatch")->capture_default_str();
    app->add_option("--seed", config.seed, "training seed")->capture_default_str();
    app->add_option("--bits", config.hash.bits, "code length m")->capture_default_str();
    app->add_option("--lambda-u", config.hash.lambda_u, "balance loss weight")->capture_default_str();
    app->add_option("--lambda-i", config.hash.lambda_i, "independence loss weight")->capture_default_str();
    if (with_sampling)
      app->add_option("--sampling", sampling, "rand | rand_neg | rank_neg | score_neg")->capture_default_str();
    app->add_option("--p", config.strategy.p, "probability of a positive draw")->capture_default_str();
    app->add_option("--positives", config.strategy.positives, "positive list size N_p")->capture_default_str();
    app->add_option("--ranked-cap", config.ranked_cap, "negatives sorted per user (0 = all)")->capture_default_str();
    app->add_option("--eval-every", config.eval_every, "iterations between checkpoints")->capture_default_str();
    app->add_option("--val-fraction", config.validation_fraction, "share of users held out for validation")
        ->capture_default_str();
    app->add_option("--lr", config.adam.learning_rate, "learning rate")->capture_default_str();
    app->add_option("--towers", towers, "hidden widths of the user/item towers")->capture_default_str();
    app->add_option("--shared", shared, "hidden widths of the shared head")->capture_default_str();
  }

  TrainConfig resolve() const {
    TrainConfig c = config;
    c.strategy.variant = sampling_variant_from_string(sampling);
    c.hash.tower_sizes = parse_sizes(towers, "--towers");
    c.hash.shared_sizes = parse_sizes(shared, "--shared");
    c.validate();
    return c;
  }
};

inline Matrix load_side(const std::string& path, Domain role) { return load_embeddings(path, role).vectors; }

inline RecallCurve mean_curve(std::span<const RecallCurve> curves, const std::string& method) {
  RecallCurve out = curves.front();
  out.method = method;
  for (std::size_t c = 1; c < curves.size(); ++c) {
    for (std::size_t t = 0; t < out.recall.size(); ++t) out.recall[t] += curves[c].recall[t];
    out.padded = out.padded || curves[c].padded;
  }
  for (double& v : out.recall) v /= static_cast<double>(curves.size());
  return out;
}

// ---------------------------------------------------------------------------
// commands

struct GenSynthArgs {
  std::size_t users = 2000, test_users = 1000, items = 5000, dim = 32, clusters = 8;
  std::uint64_t seed = 1;
  std::string distribution = "gaussian", out = ".";
};

inline int run_gen_synth(const GenSynthArgs& a, std::ostream& out) {
  SynthOptions opt;
  opt.distribution = synth_distribution_from_string(a.distribution);
  opt.clusters = a.clusters;
  SynthData d = gen_synth(a.users + a.test_users, a.items, a.dim, a.seed, opt);
  // test users are the last rows of the user draw
  std::vector<std::uint32_t> train_ids(a.users), test_ids(a.test_users);
  std::iota(train_ids.begin(), train_ids.end(), 0U);
  std::iota(test_ids.begin(), test_ids.end(), static_cast<std::uint32_t>(a.users));
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_matrix({Domain::user, d.users.vectors.gather_rows(std::span<const std::uint32_t>(train_ids))},
               dir / "users.flmx");
  write_matrix({Domain::user, d.users.vectors.gather_rows(std::span<const std::uint32_t>(test_ids))},
               dir / "test_users.flmx");
  write_matrix(d.items, dir / "items.flmx");
  out << "wrote " << a.users << " users, " << a.test_users << " test users, " << a.items
      << " items (dim " << a.dim << ") to " << dir.string() << "\n";
  return 0;
}

struct MakeMeasureArgs {
  std::string kind = "mlp_em_sum", out;
  std::size_t user_dim = 32, item_dim = 32;
  std::uint64_t seed = 1;
  MeasureOptions options;
};

inline int run_make_measure(const MakeMeasureArgs& a, std::ostream& out) {
  const Measure f = make_measure(measure_kind_from_string(a.kind), a.user_dim, a.item_dim, a.seed, a.options);
  save_measure(f, a.out);
  out << "wrote " << a.kind << " measure (" << a.user_dim << " x " << a.item_dim << ") to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string users, items, measure, out, log;
  std::string grid;  // comma-separated lambda values, empty = no search
  std::size_t grid_iterations = 2000;
  TrainOptions train;
};

inline std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw InvalidArgument(what + ": expected comma-separated numbers, got '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline int run_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig config = a.train.resolve();
  const Matrix users = load_side(a.users, Domain::user);
  const Matrix items = load_side(a.items, Domain::item);
  const Measure f = load_measure(a.measure);
  const TrainingSetup setup = prepare_training(users, items, f, config, config.seed);
  if (!a.grid.empty()) {
    const std::vector<double> grid = parse_doubles(a.grid, "--grid");
    TrainConfig short_run = config;
    short_run.iterations = a.grid_iterations;
    const GridSearchResult g = grid_search_lambdas(setup, short_run, grid, grid);
    for (const auto& c : g.cells)
      out << "grid lambda_u=" << c.lambda_u << " lambda_i=" << c.lambda_i << " recall=" << c.recall << "\n";
    config.hash.lambda_u = g.best_cell().lambda_u;
    config.hash.lambda_i = g.best_cell().lambda_i;
    out << "selected lambda_u=" << config.hash.lambda_u << " lambda_i=" << config.hash.lambda_i << "\n";
  }
  const TrainResult r = train(setup, config);
  save_model(r.model, a.out);
  if (!a.log.empty()) write_training_log(a.log, r.log);
  out << "initial val recall " << r.initial_recall << ", best " << r.best_recall << " at iteration "
      << r.best_iteration << "; model written to " << a.out << "\n";
  return 0;
}

struct BuildIndexArgs {
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds;
  std::string items, out;
};

inline int run_build_index(const BuildIndexArgs& a, std::ostream& out) {
  FLORA_REQUIRE(a.seeds.empty() || a.seeds.size() == a.models.size(), InvalidArgument,
                "--seed must be given once per --model or not at all");
  const Matrix items = load_side(a.items, Domain::item);
  std::vector<IndexTable> tables;
  for (std::size_t l = 0; l < a.models.size(); ++l)
    tables.push_back(make_index_table(load_model(a.models[l]), a.seeds.empty() ? l : a.seeds[l], items));
  const MultiTableIndex index(std::move(tables));
  save_index(index, a.out);
  out << "indexed " << index.item_count() << " items in " << index.table_count() << " table(s) at "
      << a.out << "\n";
  return 0;
}

struct QueryArgs {
  std::string index, users, measure, items, mode = "scan";
  std::optional<std::size_t> user;
  std::size_t top = 10;
  bool rerank = false;
};

inline int run_query(const QueryArgs& a, std::ostream& out) {
  FLORA_REQUIRE(a.mode == "scan" || a.mode == "radius0", InvalidArgument,
                "--mode must be scan or radius0");
  FLORA_REQUIRE(a.top >= 1, InvalidArgument, "--top must be >= 1");
  const MultiTableIndex index = load_index(a.index);
  const Matrix users = load_side(a.users, Domain::user);
  std::optional<Measure> f;
  Matrix items;
  if (a.rerank) {
    FLORA_REQUIRE(!a.measure.empty() && !a.items.empty(), InvalidArgument,
                  "--rerank needs --measure and --items");
    f = load_measure(a.measure);
    items = load_side(a.items, Domain::item);
    FLORA_REQUIRE(items.rows() == index.item_count(), InvalidArgument,
                  "item file has " + std::to_string(items.rows()) + " rows, index has " +
                      std::to_string(index.item_count()));
  }
  std::vector<std::size_t> rows;
  if (a.user) {
    FLORA_REQUIRE(*a.user < users.rows(), InvalidArgument, "--user out of range");
    rows.push_back(*a.user);
  } else {
    for (std::size_t u = 0; u < users.rows(); ++u) rows.push_back(u);
  }
  const auto queries = index.query_codes(users);
  for (std::size_t u : rows) {
    std::vector<ItemId> ids;
    if (a.mode == "radius0") {
      const auto views = query_views(queries, u);
      ids = probe_radius0(views, index);
      if (f) ids = rerank_with_f(ids, items, users.row(u), *f, a.top).ids;
    } else {
      const RankingResult r = rank_full_scan(queries[0].code(u), index.table(0).codes, a.top);
      ids = r.ids;
      if (f) {
        // re-score every item tied with the last one as well
        const RankingResult pool = rank_full_scan(queries[0].code(u), index.table(0).codes, r.tie_inclusive);
        ids = rerank_with_f(pool.ids, items, users.row(u), *f, a.top).ids;
      }
    }
    out << u << ":";
    for (ItemId id : ids) out << " " << id;
    out << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string model, index, users, items, measure, out = ".";
  std::size_t k = 10, t = 200;
};

inline int run_eval(const EvalArgs& a, std::ostream& out) {
  FLORA_REQUIRE(!a.model.empty() || !a.index.empty(), InvalidArgument, "eval needs --model or --index");
  const Matrix users = load_side(a.users, Domain::user);
  const Matrix items = load_side(a.items, Domain::item);
  const Measure f = load_measure(a.measure);
  std::optional<MultiTableIndex> index;
  if (!a.index.empty()) index = load_index(a.index);
  const FloraModel model = a.model.empty() ? index->table(0).model : load_model(a.model);
  const GroundTruth gt = ground_truth(users, items, f, a.k);
  const RankingCurves curves = evaluate_rankings(model, users, items, f, gt, a.t);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_curve_csv(dir / "flora.csv", curves.hamming);
  write_curve_csv(dir / "flora_r.csv", curves.reranked);
  const RecallCurve both[] = {curves.hamming, curves.reranked};
  write_curves_gnuplot(dir / "curves.dat", both);
  out << "Top-" << a.k << " recall@" << a.t << ": flora " << curves.hamming.at(a.t) << ", flora-r "
      << curves.reranked.at(a.t) << (curves.hamming.padded ? " (rankings padded)" : "") << "\n";
  if (index) {
    FLORA_REQUIRE(index->item_count() == items.rows(), InvalidArgument, "index and item file disagree");
    std::vector<CandidateStats> rows;
    for (std::size_t l = 1; l <= index->table_count(); ++l) {
      rows.push_back(evaluate_radius0(index->prefix(l), users, gt));
      out << "L=" << l << " radius-0 recall " << rows.back().recall << ", fpr " << rows.back().fpr
          << " (false positives over all non-relevant items)\n";
    }
    write_candidate_csv(dir / "multitable.csv", rows);
  }
  return 0;
}

struct AblateArgs {
  std::string users, test_users, items, measure, out = ".";
  bool sampling = false, losses = false;
  std::size_t seeds = 1, k = 10, t = 200;
  TrainOptions train;
};

struct AblationVariant {
  std::string name;
  TrainConfig config;
};

inline int run_ablate(const AblateArgs& a, std::ostream& out) {
  FLORA_REQUIRE(a.sampling || a.losses, InvalidArgument, "ablate needs --sampling and/or --losses");
  FLORA_REQUIRE(a.seeds >= 1, InvalidArgument, "--seeds must be >= 1");
  const TrainConfig base = a.train.resolve();
  const Matrix users = load_side(a.users, Domain::user);
  const Matrix test = load_side(a.test_users, Domain::user);
  const Matrix items = load_side(a.items, Domain::item);
  const Measure f = load_measure(a.measure);
  const TrainingSetup setup = prepare_training(users, items, f, base, base.seed);
  const GroundTruth gt = ground_truth(test, items, f, a.k);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  const auto run_group = [&](const std::string& group, const std::vector<AblationVariant>& variants) {
    std::vector<RecallCurve> curves;
    for (const auto& v : variants) {
      std::vector<RecallCurve> per_seed;
      double collapsed = 0.0;
      for (std::size_t s = 0; s < a.seeds; ++s) {
        TrainConfig c = v.config;
        c.seed = base.seed + s;
        const TrainResult r = train(setup, c);
        per_seed.push_back(recall_curve(hamming_rankings(r.model, test,
                                                         pack_codes(encode_binary(r.model, Domain::item, items)),
                                                         a.t),
                                        gt, a.t));
        collapsed += static_cast<double>(count_collapsed_bits(encode_binary(r.model, Domain::item, items)));
      }
      curves.push_back(mean_curve(per_seed, v.name));
      write_curve_csv(dir / (group + "_" + v.name + ".csv"), curves.back());
      out << group << " " << v.name << ": recall@" << a.t << " " << curves.back().at(a.t)
          << ", collapsed item bits " << collapsed / static_cast<double>(a.seeds) << "\n";
    }
    write_curves_gnuplot(dir / (group + ".dat"), curves);
    return curves;
  };

  if (a.sampling) {
    std::vector<AblationVariant> v;
    for (auto s : {SamplingVariant::rand, SamplingVariant::rand_neg, SamplingVariant::rank_neg}) {
      TrainConfig c = base;
      c.strategy.variant = s;
      v.push_back({std::string(to_string(s)), c});
    }
    run_group("sampling", v);
  }
  if (a.losses) {
    const auto with = [&base](double lu, double li) {
      TrainConfig c = base;
      c.hash.lambda_u = lu;
      c.hash.lambda_i = li;
      return c;
    };
    const double lu = base.hash.lambda_u, li = base.hash.lambda_i;
    const auto curves = run_group("losses", {{"lc", with(0, 0)},
                                             {"lc_lu", with(lu, 0)},
                                             {"lc_li", with(0, li)},
                                             {"full", with(lu, li)}});
    out << "full vs lc recall@" << a.t << ": " << curves[3].at(a.t) << " vs " << curves[0].at(a.t) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// dispatch

/// Expands `--config FILE` into `--key=value` arguments placed right after the
/// subcommand, so explicit flags (which come later) override them.
inline std::vector<std::string> expand_config(std::vector<std::string> args,
                                              const std::vector<std::string>& subcommands) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    std::size_t consumed = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      consumed = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      consumed = 1;
    } else {
      continue;
    }
    const KeyValues kv = parse_key_values(read_file(path), path);
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
               args.begin() + static_cast<std::ptrdiff_t>(i + consumed));
    std::vector<std::string> injected;
    for (const auto& [k, v] : kv) injected.push_back("--" + k + "=" + v);
    std::size_t at = 1;
    while (at < args.size() && std::find(subcommands.begin(), subcommands.end(), args[at]) == subcommands.end()) ++at;
    at = std::min(at + 1, args.size());
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
    break;
  }
  return args;
}

/// Parses and runs one command. Returns the process exit status:
/// 0 ok, 1 usage or invalid input, 2 format/I-O error, 3 numeric failure.
inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"Learned asymmetric hashing for neural similarity search", "flora"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  const auto config_opt = [](CLI::App* sub) {
    sub->add_option("--config", "key=value file; keys are option names, explicit flags win");
  };

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "write synthetic user/test-user/item matrices");
  gen->add_option("--users", gs.users, "training users")->capture_default_str();
  gen->add_option("--test-users", gs.test_users, "held-out test users")->capture_default_str();
  gen->add_option("--items", gs.items, "items")->capture_default_str();
  gen->add_option("--dim", gs.dim, "vector dimension")->capture_default_str();
  gen->add_option("--seed", gs.seed, "rng seed")->capture_default_str();
  gen->add_option("--distribution", gs.distribution, "gaussian | clusters")->capture_default_str();
  gen->add_option("--clusters", gs.clusters, "cluster count")->capture_default_str();
  gen->add_option("--out", gs.out, "output directory")->capture_default_str();
  config_opt(gen);

  MakeMeasureArgs mm;
  auto* mk = app.add_subcommand("make-measure", "write a frozen random similarity network");
  mk->add_option("--kind", mm.kind, "mlp_concate | mlp_em_sum | deepfm_lite | scaled_cosine")
      ->capture_default_str();
  mk->add_option("--user-dim", mm.user_dim)->capture_default_str();
  mk->add_option("--item-dim", mm.item_dim)->capture_default_str();
  mk->add_option("--seed", mm.seed)->capture_default_str();
  mk->add_option("--hidden", mm.options.hidden, "hidden width")->capture_default_str();
  mk->add_option("--factors", mm.options.fm_factors, "deepfm_lite latent factors")->capture_default_str();
  mk->add_option("--out", mm.out, "output file")->required();
  config_opt(mk);

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "train a hashing model against a measure");
  trn->add_option("--users", tr.users, "training users (FLMX or CSV)")->required();
  trn->add_option("--items", tr.items, "items (FLMX or CSV)")->required();
  trn->add_option("--measure", tr.measure, "FLMS measure")->required();
  trn->add_option("--out", tr.out, "output model (FLHM)")->required();
  trn->add_option("--log", tr.log, "training log CSV");
  trn->add_option("--grid", tr.grid, "lambda grid, e.g. 0.1,1,10 (searched before training)");
  trn->add_option("--grid-iterations", tr.grid_iterations, "iterations per grid cell")->capture_default_str();
  tr.train.attach(trn);
  config_opt(trn);

  BuildIndexArgs bi;
  auto* bld = app.add_subcommand("build-index", "hash items into one table per model");
  bld->add_option("--model", bi.models, "FLHM model, once per table")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  bld->add_option("--seed", bi.seeds, "seed recorded per table")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  bld->add_option("--items", bi.items)->required();
  bld->add_option("--out", bi.out, "index directory")->required();
  config_opt(bld);

  QueryArgs qa;
  auto* qry = app.add_subcommand("query", "print the top items per user");
  qry->add_option("--index", qa.index)->required();
  qry->add_option("--users", qa.users)->required();
  qry->add_option("--user", qa.user, "only this user row");
  qry->add_option("--top", qa.top)->capture_default_str();
  qry->add_option("--mode", qa.mode, "scan (Hamming ranking, table 0) | radius0 (exact buckets, all tables)")
      ->capture_default_str();
  qry->add_flag("--rerank", qa.rerank, "re-score candidates with the measure");
  qry->add_option("--measure", qa.measure);
  qry->add_option("--items", qa.items);
  config_opt(qry);

  EvalArgs ev;
  auto* evl = app.add_subcommand("eval", "recall curves and radius-0 candidate statistics");
  evl->add_option("--model", ev.model);
  evl->add_option("--index", ev.index, "also report radius-0 recall/fpr per table prefix");
  evl->add_option("--users", ev.users, "test users")->required();
  evl->add_option("--items", ev.items)->required();
  evl->add_option("--measure", ev.measure)->required();
  evl->add_option("--K", ev.k, "ground-truth size")->capture_default_str();
  evl->add_option("--T", ev.t, "curve length")->capture_default_str();
  evl->add_option("--out", ev.out, "output directory")->capture_default_str();
  config_opt(evl);

  AblateArgs ab;
  auto* abl = app.add_subcommand("ablate", "compare sampling or loss variants");
  abl->add_option("--users", ab.users, "training users")->required();
  abl->add_option("--test-users", ab.test_users)->required();
  abl->add_option("--items", ab.items)->required();
  abl->add_option("--measure", ab.measure)->required();
  abl->add_option("--out", ab.out, "output directory")->capture_default_str();
  abl->add_flag("--sampling", ab.sampling, "rand vs rand_neg vs rank_neg");
  abl->add_flag("--losses", ab.losses, "L_c, L_c+L_u, L_c+L_i, full");
  abl->add_option("--seeds", ab.seeds, "runs per variant")->capture_default_str();
  abl->add_option("--K", ab.k)->capture_default_str();
  abl->add_option("--T", ab.t)->capture_default_str();
  ab.train.attach(abl, false);
  config_opt(abl);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args.insert(args.begin(), argc > 0 ? argv[0] : "flora");
    std::vector<std::string> names;
    for (const auto* sub : app.get_subcommands({})) names.push_back(sub->get_name());
    args = expand_config(std::move(args), names);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  }

  try {
    worker_count() = threads;
    if (gen->parsed()) return run_gen_synth(gs, out);
    if (mk->parsed()) return run_make_measure(mm, out);
    if (trn->parsed()) return run_train(tr, out);
    if (bld->parsed()) return run_build_index(bi, out);
    if (qry->parsed()) return run_query(qa, out);
    if (evl->parsed()) return run_eval(ev, out);
    if (abl->parsed()) return run_ablate(ab, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace flora::cli
