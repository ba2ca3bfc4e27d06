#include <gtest/gtest.h>

#include <bit>

#include "test_support.hpp"

namespace flora {
namespace {

using testing::random_matrix;

HashConfig small_config(std::size_t bits = 8) {
  HashConfig c;
  c.bits = bits;
  c.tower_sizes = {16, 16};
  c.shared_sizes = {16};
  return c;
}

std::vector<Matrix> grads_of(const ModelGradients& g) { return gradient_list(g); }

std::vector<Matrix> numeric_grads(FloraModel& model, const std::function<double()>& loss) {
  auto params = parameter_refs(model);
  return finite_difference_grad(loss, std::span<Matrix* const>(params), 1e-5);
}

TEST(HashConfig, Validation) {
  HashConfig c;
  EXPECT_NO_THROW(c.validate());
  c.bits = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.bits = kMaxBits + 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = HashConfig{};
  c.lambda_u = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Encode, CodesStayInRangeAndRouteByDomain) {
  const FloraModel model = make_flora_model(6, 6, small_config(), 1);
  const Matrix x = random_matrix(30, 6, 2, 5.0);
  const Matrix hu = encode_continuous(model, Domain::user, x);
  const Matrix hv = encode_continuous(model, Domain::item, x);
  EXPECT_EQ(hu.cols(), 8u);
  for (double v : hu.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_NE(hu, hv);
  EXPECT_THROW(encode_continuous(model, Domain::user, Matrix(2, 5)), InvalidArgument);
  EXPECT_EQ(encode_continuous(model, Domain::item, Matrix(0, 6)).rows(), 0u);
}

TEST(Encode, ZeroWeightsGiveZeroCodes) {
  FloraModel model = make_flora_model(4, 5, small_config(), 1);
  for (Matrix* p : parameter_refs(model)) p->fill(0.0);
  const Matrix h = encode_continuous(model, Domain::user, random_matrix(3, 4, 1));
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, MatchesScalarOracle) {
  const FloraModel model = make_flora_model(5, 7, small_config(), 3);
  const Matrix users = random_matrix(4, 5, 1);
  const Matrix items = random_matrix(4, 7, 2);
  const Matrix hu = encode_continuous(model, Domain::user, users);
  const Matrix hv = encode_continuous(model, Domain::item, items);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto ru = testing::reference_forward(
        model.shared_head, testing::reference_forward(model.user_tower, {users.row(r).begin(), users.row(r).end()}));
    const auto rv = testing::reference_forward(
        model.shared_head, testing::reference_forward(model.item_tower, {items.row(r).begin(), items.row(r).end()}));
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_NEAR(hu(r, k), ru[k], 1e-12);
      EXPECT_NEAR(hv(r, k), rv[k], 1e-12);
    }
  }
}

TEST(Encode, SharedHeadIsSeenByBothDomains) {
  FloraModel model = make_flora_model(4, 4, small_config(), 5);
  const Matrix x = random_matrix(3, 4, 1);
  const Matrix u0 = encode_continuous(model, Domain::user, x);
  const Matrix v0 = encode_continuous(model, Domain::item, x);
  model.shared_head.layers.back().bias.fill(0.25);
  EXPECT_NE(encode_continuous(model, Domain::user, x), u0);
  EXPECT_NE(encode_continuous(model, Domain::item, x), v0);
}

TEST(Binarize, SignWithZeroAsPlusOne) {
  EXPECT_EQ(binarize(Matrix{{0.3, -0.7}}), (Matrix{{1, -1}}));
  EXPECT_EQ(binarize(Matrix{{0.0}}), (Matrix{{1}}));
  EXPECT_EQ(binarize(Matrix{{-0.0}}), (Matrix{{1}}));
  const Matrix b = binarize(random_matrix(10, 10, 3));
  EXPECT_EQ(binarize(b), b);
}

TEST(BinaryCosine, EqualsOneMinusNormalisedHamming) {
  Rng rng(9);
  for (std::size_t m : {8u, 64u, 128u}) {
    for (int trial = 0; trial < 2000; ++trial) {
      const Matrix a = binarize(random_matrix(1, m, rng()));
      const Matrix b = binarize(random_matrix(1, m, rng()));
      std::size_t d = 0;
      for (std::size_t k = 0; k < m; ++k) d += a[k] != b[k];
      ASSERT_EQ(code_similarity(a.row(0), b.row(0)), 1.0 - static_cast<double>(d) / static_cast<double>(m));
    }
  }
}

TEST(Consistency, PerfectCodesHaveZeroResidual) {
  const Matrix h{{1, -1, 1, 1}};
  const Matrix neg{{-1, 1, -1, -1}};
  const double one[] = {1.0}, zero[] = {0.0};
  EXPECT_EQ(consistency_on_codes(h, h, one).value, 0.0);
  EXPECT_EQ(consistency_on_codes(h, neg, zero).value, 0.0);
  const double half[] = {0.5};
  EXPECT_DOUBLE_EQ(consistency_on_codes(h, h, half).value, 0.25);
  const double nan[] = {std::nan("")};
  EXPECT_THROW(consistency_on_codes(h, h, nan), InvalidArgument);
}

TEST(Balance, Examples) {
  const Matrix users{{0.5}, {-0.5}};
  const Matrix items{{0.2}, {0.4}};
  const CodeLoss l = balance_on_codes(users, items);
  EXPECT_NEAR(l.value, 0.0 + 0.3, 1e-15);
  EXPECT_EQ(l.d_user(0, 0), 0.0);  // kink
  const Matrix ones(5, 6, 1.0);
  EXPECT_EQ(balance_on_codes(ones, ones).value, 12.0);
}

TEST(Independence, Examples) {
  Matrix eye(4, 3);
  for (std::size_t k = 0; k < 3; ++k) eye(k, k) = 1.0;
  Matrix g;
  EXPECT_EQ(independence_on_projection(eye, &g), 0.0);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
  const Matrix two{{2.0}, {0.0}};
  EXPECT_EQ(independence_on_projection(two, nullptr), 18.0);
}

TEST(Gradients, ConsistencyMatchesFiniteDifferences) {
  FloraModel model = make_flora_model(6, 5, small_config(), 11);
  const Matrix users = random_matrix(8, 6, 1);
  const Matrix items = random_matrix(8, 5, 2);
  std::vector<double> targets(8);
  Rng rng(3);
  for (double& t : targets) t = std::uniform_real_distribution<double>(0, 1)(rng);
  const LossResult r = loss_consistency(model, users, items, targets);
  const auto numeric = numeric_grads(model, [&] { return loss_consistency(model, users, items, targets).value; });
  EXPECT_LT(max_relative_error(grads_of(r.grads), numeric), 1e-4);
}

TEST(Gradients, BalanceMatchesFiniteDifferencesAwayFromKink) {
  FloraModel model = make_flora_model(6, 5, small_config(), 12);
  const Matrix users = random_matrix(8, 6, 3);
  const Matrix items = random_matrix(8, 5, 4);
  const HashForward f = hash_forward(model, users, items);
  for (const Matrix* h : {&f.h_user, &f.h_item})
    for (std::size_t k = 0; k < h->cols(); ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < h->rows(); ++i) mean += (*h)(i, k);
      ASSERT_GT(std::abs(mean / static_cast<double>(h->rows())), 1e-3) << "test point sits on a kink";
    }
  const LossResult r = loss_balance(model, users, items);
  const auto numeric = numeric_grads(model, [&] { return loss_balance(model, users, items).value; });
  EXPECT_LT(max_relative_error(grads_of(r.grads), numeric), 1e-4);
}

TEST(Gradients, IndependenceMatchesFiniteDifferences) {
  FloraModel model = make_flora_model(6, 5, small_config(), 13);
  const LossResult r = loss_independence(model);
  const auto numeric = numeric_grads(model, [&] { return loss_independence(model).value; });
  EXPECT_LT(max_relative_error(grads_of(r.grads), numeric), 1e-4);
}

TEST(Gradients, TotalMatchesFiniteDifferences) {
  FloraModel model = make_flora_model(6, 5, small_config(), 14);
  HashBatch batch{random_matrix(8, 6, 5), random_matrix(8, 5, 6), std::vector<double>(8, 0.7)};
  const TotalLoss t = loss_total(model, batch, 0.3, 0.05);
  const auto numeric = numeric_grads(model, [&] { return loss_total(model, batch, 0.3, 0.05).terms.total; });
  EXPECT_LT(max_relative_error(grads_of(t.grads), numeric), 1e-4);
}

TEST(TotalLoss, WeightsCombineLinearly) {
  const FloraModel model = make_flora_model(6, 5, small_config(), 15);
  HashBatch batch{random_matrix(8, 6, 5), random_matrix(8, 5, 6), std::vector<double>(8, 0.4)};
  const TotalLoss plain = loss_total(model, batch, 0.0, 0.0);
  const LossResult c = loss_consistency(model, batch.users, batch.items, batch.targets);
  EXPECT_EQ(plain.terms.total, c.value);
  EXPECT_EQ(gradient_list(plain.grads), gradient_list(c.grads));

  const TotalLoss one = loss_total(model, batch, 1.0, 0.0);
  const TotalLoss two = loss_total(model, batch, 2.0, 0.0);
  EXPECT_NEAR(two.terms.total - plain.terms.total, 2.0 * (one.terms.total - plain.terms.total), 1e-12);
  EXPECT_NEAR(one.terms.total, one.terms.consistency + one.terms.balance, 1e-15);
}

TEST(Checkpoint, ModelRoundTripIsBitExact) {
  testing::TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    HashConfig c = small_config(1 + seed * 37);
    c.tower_sizes = {3 + seed, 4};
    const FloraModel model = make_flora_model(2 + seed, 3, c, seed);
    const std::string bytes = encode_model(model);
    EXPECT_EQ(decode_model(bytes), model);
    save_model(model, dir / "m.flhm");
    EXPECT_EQ(encode_model(load_model(dir / "m.flhm")), bytes);
  }
}

TEST(Checkpoint, CorruptModelIsRejected) {
  const std::string bytes = encode_model(make_flora_model(2, 3, small_config(4), 1));
  testing::expect_all_truncations_rejected(bytes, [](std::string_view b) { return decode_model(b); });
  std::string bad = bytes;
  bad[8] = 5;  // header m disagrees with the head
  EXPECT_THROW(decode_model(bad), FormatError);
}

}  // namespace
}  // namespace flora
