#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "cts/error.hpp"
#include "cts/rng.hpp"
#include "cts/specialize.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace cts;

namespace {

RowMatrixD gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<double> flatten(const HeadD& h) {
  std::vector<double> p(h.weight().data(), h.weight().data() + h.weight().size());
  p.insert(p.end(), h.bias().data(), h.bias().data() + h.bias().size());
  return p;
}

HeadD unflatten(std::span<const double> p, std::size_t dim, bool residual) {
  HeadD h(dim, residual);
  std::copy(p.begin(), p.begin() + dim * dim, h.weight().data());
  std::copy(p.begin() + dim * dim, p.end(), h.bias().data());
  return h;
}

}  // namespace

TEST(Head, FreshResidualHeadNormalizesInput) {
  const auto x = gaussian(5, 8, 1);
  const HeadD head(8);
  const auto z = head.encode(x);
  for (Eigen::Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(z.row(i).norm(), 1.0, 1e-12);
    EXPECT_NEAR((z.row(i) - x.row(i).normalized()).norm(), 0.0, 1e-12);
  }
}

TEST(Head, EncodedRowsAreUnitNormOrZero) {
  HeadD head(6, false);
  head.weight() = gaussian(6, 6, 2);
  auto x = gaussian(10, 6, 3);
  x.row(4).setZero();  // tanh(0 W + 0) = 0 without a bias
  const auto z = head.encode(x);
  for (Eigen::Index i = 0; i < 10; ++i) {
    if (i == 4)
      EXPECT_EQ(z.row(i).norm(), 0.0);
    else
      EXPECT_NEAR(z.row(i).norm(), 1.0, 1e-12);
  }
  EXPECT_THROW(head.encode(gaussian(2, 5, 4)), ArgumentError);
}

TEST(Head, PairDistancesClampedCosine) {
  RowMatrixD z(3, 2);
  z << 1, 0, 0, 1, -1, 0;
  const std::vector<SentencePair> pairs{{0, 1, Polarity::positive},
                                        {0, 2, Polarity::negative},
                                        {0, 0, Polarity::positive}};
  const auto d = pair_distances(z, std::span<const SentencePair>(pairs));
  ASSERT_EQ(d.positive.size(), 2u);
  EXPECT_NEAR(d.positive[0], 1.0, 1e-15);
  EXPECT_NEAR(d.positive[1], 0.0, 1e-15);
  EXPECT_NEAR(d.negative[0], 2.0, 1e-15);
}

TEST(HardMining, WorkedExampleAndLoss) {
  const std::vector<double> pos{0.2, 0.6}, neg{0.4, 0.9};
  const auto sel = ocl_select_hard(pos, neg);
  EXPECT_EQ(sel.positive, std::vector<std::size_t>{1});
  EXPECT_EQ(sel.negative, std::vector<std::size_t>{0});
  EXPECT_FALSE(sel.positive_fallback || sel.negative_fallback);
  const std::vector<double> sp{0.6}, sn{0.4};
  EXPECT_NEAR(contrastive_loss(sp, sn, 0.5), 0.0925, 1e-12);
  const std::vector<double> none, zero{0.0};
  EXPECT_NEAR(contrastive_loss(none, zero, 0.5), 0.125, 1e-15);
  EXPECT_EQ(contrastive_loss(none, none, 0.5), 0.0);
}

TEST(HardMining, FallbackCases) {
  const std::vector<double> pos{0.1, 0.2}, neg{0.5, 0.7};
  const auto sel = ocl_select_hard(pos, neg);
  EXPECT_TRUE(sel.positive_fallback && sel.negative_fallback);
  EXPECT_EQ(sel.positive.size(), 2u);
  EXPECT_EQ(sel.negative.size(), 2u);
  const std::vector<double> eq{0.3, 0.3};
  const auto tie = ocl_select_hard(eq, eq);
  EXPECT_TRUE(tie.positive_fallback && tie.negative_fallback);
  const std::vector<double> empty;
  EXPECT_THROW(ocl_select_hard(empty, neg), ArgumentError);
}

TEST(HardMining, MatchesBruteForceOnRandomBatches) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> pos(1 + rng.uniform_index(8)), neg(1 + rng.uniform_index(8));
    // coarse grid so ties happen
    for (auto& d : pos) d = static_cast<double>(rng.uniform_index(9)) / 4.0;
    for (auto& d : neg) d = static_cast<double>(rng.uniform_index(9)) / 4.0;
    const auto got = ocl_select_hard(pos, neg);
    const auto want = test::oracle::select_hard(pos, neg);
    EXPECT_EQ(got.positive, want.positive);
    EXPECT_EQ(got.negative, want.negative);
    EXPECT_EQ(got.positive_fallback, want.positive_fallback);
    EXPECT_EQ(got.negative_fallback, want.negative_fallback);
  }
}

class OclGradient : public ::testing::TestWithParam<bool> {};

TEST_P(OclGradient, MatchesCentralDifferences) {
  const bool residual = GetParam();
  const std::size_t dim = 5;
  const auto x = gaussian(6, dim, 21);
  HeadD head(dim, residual);
  head.weight() = 0.3 * gaussian(dim, dim, 22);
  head.bias() = 0.3 * gaussian(1, dim, 23);
  const std::vector<SentencePair> pairs{
      {0, 1, Polarity::positive}, {2, 3, Polarity::positive}, {4, 5, Polarity::positive},
      {0, 3, Polarity::negative}, {1, 4, Polarity::negative}, {2, 5, Polarity::negative}};
  const double margin = 1.5;  // wide so negatives stay active

  HeadGradient<double> g;
  ocl_objective(head, x, std::span<const SentencePair>(pairs), margin, &g);
  std::vector<double> analytic(g.weight.data(), g.weight.data() + g.weight.size());
  analytic.insert(analytic.end(), g.bias.data(), g.bias.data() + g.bias.size());

  auto loss = [&](std::span<const double> p) {
    return ocl_objective(unflatten(p, dim, residual), x, std::span<const SentencePair>(pairs),
                         margin, static_cast<HeadGradient<double>*>(nullptr));
  };
  const auto params = flatten(head);
  const auto res = grad_check(loss, params, analytic, params.size(), 1e-6, 7);
  EXPECT_LT(res.max_relative_error, 1e-4) << "worst coordinate " << res.worst_index;
  // independent spot check through the test oracle
  const double fd = test::oracle::central_difference(loss, params, 3, 1e-6);
  EXPECT_NEAR(analytic[3], fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

INSTANTIATE_TEST_SUITE_P(Residual, OclGradient, ::testing::Values(true, false));

TEST(Specialize, DeterministicAndLossDecreases) {
  const auto data = test::cluster_dataset(3, 1, 30, {.dim = 8, .noise = 0.6}, 5);
  std::vector<std::size_t> posts(data.corpus.size());
  std::iota(posts.begin(), posts.end(), std::size_t{0});
  const auto pairs = generate_pairs(data.corpus, posts, {.n = 5, .seed = 9});
  CtsConfig cfg;
  cfg.lr = 5e-3;
  cfg.epochs = 4;
  cfg.batch_pairs = 32;
  cfg.seed = 3;
  const auto a = specialize(HeadF(8), data.embeddings.rows(), pairs, cfg);
  const auto b = specialize(HeadF(8), data.embeddings.rows(), pairs, cfg);
  EXPECT_EQ(a.head, b.head);
  ASSERT_EQ(a.losses.size(), b.losses.size());
  ASSERT_GT(a.losses.size(), 8u);
  for (std::size_t i = 0; i < a.losses.size(); ++i) EXPECT_EQ(a.losses[i].loss, b.losses[i].loss);

  // pairs are all-pairs objective: compare the full-set loss before and after
  const auto all = pairs.all();
  const RowMatrixD xd = data.embeddings.rows().cast<double>();
  const double before = ocl_objective(HeadD(8), xd, std::span<const SentencePair>(all), 0.5,
                                      static_cast<HeadGradient<double>*>(nullptr));
  const double after = ocl_objective(a.head.cast<double>(), xd, std::span<const SentencePair>(all),
                                     0.5, static_cast<HeadGradient<double>*>(nullptr));
  EXPECT_LT(after, before);
  EXPECT_FALSE(a.head == HeadF(8));

  cfg.seed = 4;
  EXPECT_FALSE(specialize(HeadF(8), data.embeddings.rows(), pairs, cfg).head == a.head);
}

TEST(Specialize, RejectsDegeneratePairs) {
  const auto x = gaussian(4, 3, 1).cast<float>().eval();
  PairSet only_pos;
  only_pos.positives = {{0, 1, Polarity::positive}};
  EXPECT_THROW(specialize(HeadF(3), x, only_pos, {}), ArgumentError);
  PairSet out_of_range;
  out_of_range.positives = {{0, 9, Polarity::positive}};
  out_of_range.negatives = {{0, 2, Polarity::negative}};
  EXPECT_THROW(specialize(HeadF(3), x, out_of_range, {}), ArgumentError);
}

TEST(HeadIo, RoundTripAndCorruption) {
  test::TempDir dir;
  HeadF head(4, false);
  head.weight() = gaussian(4, 4, 8).cast<float>();
  head.bias() = gaussian(1, 4, 9).cast<float>();
  save_head(head, dir / "h.ctsh");
  EXPECT_EQ(load_head(dir / "h.ctsh"), head);
  EXPECT_EQ(std::filesystem::file_size(dir / "h.ctsh"), 16u + 4 * (16 + 4));

  std::filesystem::resize_file(dir / "h.ctsh", 30);
  EXPECT_THROW(load_head(dir / "h.ctsh"), FormatError);
  {
    std::ofstream(dir / "bad.ctsh") << "NOPE0000000000000000";
  }
  EXPECT_THROW(load_head(dir / "bad.ctsh"), FormatError);
}

TEST(HeadIo, LossCurveCsv) {
  std::ostringstream out;
  const std::vector<StepLoss> losses{{0, 0.0, 0.25}, {1, 1e-5, 0.125}};
  write_loss_curve_csv(out, losses);
  EXPECT_EQ(out.str().substr(0, 13), "step,lr,loss\n");
  EXPECT_NE(out.str().find("1,1e-05,0.125"), std::string::npos);
}
