#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hyspec/error.hpp"
#include "hyspec/mae.hpp"
#include "hyspec/nn.hpp"

namespace hyspec::mae {
namespace {

MAEConfig tiny_config() {
  MAEConfig c;
  c.token_len = 5;
  c.embed_dim = 8;
  c.n_heads = 2;
  c.decoder_dim = 8;
  c.decoder_heads = 2;
  c.mask_ratio = 0.5;
  return c;
}

RowMatrix uniform_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RowMatrix b(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  return b;
}

std::span<const double> row(const RowMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

TEST(Config, Validation) {
  MAEConfig c;
  EXPECT_NO_THROW(c.validate(310));
  EXPECT_EQ(c.token_count(310), 31u);
  c.n_heads = 5;
  EXPECT_THROW(c.validate(310), ConfigError);
  c = {};
  c.mask_ratio = 1.0;
  EXPECT_THROW(c.validate(310), ConfigError);
  c = {};
  EXPECT_THROW(c.validate(10), ConfigError);  // one token
}

TEST(Tokenize, CountsPaddingAndRoundTrip) {
  std::vector<double> x310(310, 0.5);
  EXPECT_EQ(tokenize(x310, 10).token_count(), 31u);
  EXPECT_EQ(tokenize(x310, 10).valid_channels(30), 10u);
  std::vector<double> x103(103);
  for (std::size_t i = 0; i < 103; ++i) x103[i] = 0.01 * static_cast<double>(i);
  const TokenSequence s = tokenize(x103, 10);
  EXPECT_EQ(s.token_count(), 11u);
  EXPECT_EQ(s.valid_channels(10), 3u);
  EXPECT_TRUE(s.is_padding(10, 3));
  EXPECT_FALSE(s.is_padding(10, 2));
  for (std::size_t ch = 3; ch < 10; ++ch) EXPECT_EQ(s.tokens(10, static_cast<Eigen::Index>(ch)), 0.0);
  EXPECT_EQ(detokenize(s), x103);
  EXPECT_THROW(tokenize(std::vector<double>(7, 0.0), 10), SizeError);
}

TEST(Mask, CountsAndClamp) {
  EXPECT_EQ(mask_count(31, 0.7), 22u);
  EXPECT_EQ(mask_count(10, 1e-6), 1u);
  EXPECT_EQ(mask_count(10, 0.999), 9u);
  const TokenSequence s = random_mask(tokenize(std::vector<double>(310, 0.1), 10), 0.7, 3);
  EXPECT_EQ(s.masked.size(), 22u);
  EXPECT_EQ(s.visible.size(), 9u);
  std::vector<int> seen(31);
  for (auto t : s.masked) ++seen[t];
  for (auto t : s.visible) ++seen[t];
  for (int v : seen) EXPECT_EQ(v, 1);
  EXPECT_TRUE(std::is_sorted(s.masked.begin(), s.masked.end()));
  const TokenSequence again = random_mask(tokenize(std::vector<double>(310, 0.1), 10), 0.7, 3);
  EXPECT_EQ(s.masked, again.masked);
}

TEST(Mask, UniformOverTokens) {
  const TokenSequence base = tokenize(std::vector<double>(100, 0.1), 10);
  std::vector<int> hits(10);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    for (auto t : random_mask(base, 0.5, static_cast<std::uint64_t>(i)).masked) ++hits[t];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / draws, 0.5, 0.02);
}

TEST(Encode, VisibleOnlyAndPermutation) {
  const MAEModel model(tiny_config(), 30);
  const std::vector<double> x(30, 0.3);
  TokenSequence s = tokenize(x, 5);
  s.masked = {0, 1, 2, 4, 5};
  s.visible = {3};
  const EncoderOutput one = encode(model, s);
  EXPECT_EQ(one.tokens.rows(), 1);
  EXPECT_EQ(one.cls.size(), 8);

  const RowMatrix b = uniform_batch(1, 30, 2);
  TokenSequence a = random_mask(tokenize(row(b, 0), 5), 0.5, 1);
  TokenSequence swapped = a;
  std::swap(swapped.visible[0], swapped.visible[1]);
  const EncoderOutput ea = encode(model, a);
  const EncoderOutput eb = encode(model, swapped);
  EXPECT_LE((ea.cls - eb.cls).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((ea.tokens.row(0) - eb.tokens.row(1)).cwiseAbs().maxCoeff(), 1e-12);

  TokenSequence bad = tokenize(std::vector<double>(40, 0.1), 5);
  EXPECT_THROW(encode(model, bad), ConfigError);
}

TEST(Encode, ZeroAttentionLeavesClsPathAlone) {
  MAEModel model(tiny_config(), 30);
  auto& store = model.parameters();
  for (const auto& block : model.layers().encoder) {
    store.value(block.attn.qkv.weight).setZero();
    store.value(block.attn.qkv.bias).setZero();
  }
  const RowMatrix b = uniform_batch(2, 30, 5);
  const Vector c0 = cls_embedding(model, row(b, 0));
  const Vector c1 = cls_embedding(model, row(b, 1));
  EXPECT_LE((c0 - c1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClsEmbedding, MatchesEncodeWithEmptyMask) {
  MAEConfig c = tiny_config();
  const MAEModel model(c, 30);
  const RowMatrix b = uniform_batch(5, 30, 9);
  const RowMatrix all = cls_embeddings(model, b);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Vector e = encode(model, tokenize(row(b, i), 5)).cls;
    EXPECT_EQ(all.row(i).transpose(), e);
    EXPECT_EQ(cls_embedding(model, row(b, i)), e);
  }
  EXPECT_EQ(cls_embedding(model, row(b, 0)), cls_embedding(model, row(b, 0)));
}

TEST(Loss, MatchesRecomputationAndIgnoresVisible) {
  const MAEModel model(tiny_config(), 28);
  const RowMatrix b = uniform_batch(1, 28, 4);
  const TokenSequence s = random_mask(tokenize(row(b, 0), 5), 0.5, 2);
  const Reconstruction rec = decode_and_loss(model, s, encode(model, s));
  double sum = 0.0;
  std::size_t n = 0;
  for (auto t : s.masked) {
    for (std::size_t ch = 0; ch < s.valid_channels(t); ++ch) {
      const double d = rec.tokens(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ch)) -
                       s.tokens(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ch));
      sum += d * d;
      ++n;
    }
  }
  EXPECT_NEAR(rec.loss, sum / static_cast<double>(n), 1e-14);
  EXPECT_DOUBLE_EQ(masked_mse(s, rec.tokens), rec.loss);
  RowMatrix exact = rec.tokens;
  for (auto t : s.masked) exact.row(static_cast<Eigen::Index>(t)) = s.tokens.row(static_cast<Eigen::Index>(t));
  EXPECT_EQ(masked_mse(s, exact), 0.0);
  const RowMatrix zero = RowMatrix::Zero(s.tokens.rows(), s.tokens.cols());
  TokenSequence ones = s;
  ones.tokens.setOnes();
  for (std::size_t ch = 3; ch < 5; ++ch) ones.tokens(5, static_cast<Eigen::Index>(ch)) = 0.0;
  EXPECT_DOUBLE_EQ(masked_mse(ones, zero), 1.0);
}

TEST(Gradient, TinyModelMatchesFiniteDifferences) {
  MAEConfig c = tiny_config();
  const MAEModel model(c, 30);
  ASSERT_EQ(model.token_count(), 6u);
  const GradientCheckResult r = gradient_check(model, uniform_batch(4, 30, 1), 1e-4, 7, 400);
  EXPECT_LE(r.max_relative_error, 1e-4);
  EXPECT_GE(r.checked, 200u);
}

TEST(Gradient, ScaleIsLinear) {
  const MAEModel model(tiny_config(), 30);
  const RowMatrix b = uniform_batch(1, 30, 6);
  const TokenSequence s = random_mask(tokenize(row(b, 0), 5), 0.5, 1);
  std::vector<double> g1(model.parameter_count()), g2(model.parameter_count());
  const double l1 = loss_and_gradient(model, s, g1, 1.0);
  const double l2 = loss_and_gradient(model, s, g2, 2.0);
  EXPECT_EQ(l1, l2);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g2[i], 2.0 * g1[i], 1e-15 + 1e-12 * std::abs(g1[i]));
}

TEST(Gradient, HeadBiasStationaryAtZeroResidual) {
  MAEModel model(tiny_config(), 30);
  auto& store = model.parameters();
  store.value(model.layers().head.weight).setZero();
  store.value(model.layers().head.bias).setConstant(0.25);
  const std::vector<double> x(30, 0.25);
  const TokenSequence s = random_mask(tokenize(x, 5), 0.5, 0);
  std::vector<double> g(model.parameter_count());
  EXPECT_NEAR(loss_and_gradient(model, s, g), 0.0, 1e-30);
  const auto bias = model.layers().head.bias;
  for (std::size_t i = 0; i < bias.size(); ++i) EXPECT_NEAR(g[bias.offset + i], 0.0, 1e-15);
}

TEST(Gradient, FailureNamesWorstCoordinate) {
  const MAEModel model(tiny_config(), 30);
  EXPECT_THROW(gradient_check(model, uniform_batch(2, 30, 1), -1.0, 1), GradientCheckFailure);
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  MAEConfig c = tiny_config();
  c.epochs = 5;
  c.batch_size = 16;
  const RowMatrix data = uniform_batch(200, 30, 3) * 0.5;
  const MAETrainResult a = train_mae(data, c);
  ASSERT_EQ(a.curve.train.size(), 6u);
  EXPECT_LT(a.curve.train.back(), a.curve.train.front());
  const MAETrainResult b = train_mae(data, c);
  EXPECT_EQ(a.curve.train, b.curve.train);
  EXPECT_EQ(a.curve.validation, b.curve.validation);
  EXPECT_EQ(a.model.parameters().values(), b.model.parameters().values());
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  MAEConfig c = tiny_config();
  c.epochs = 3;
  c.learning_rate = 0.0;
  c.weight_decay = 0.0;
  const RowMatrix data = uniform_batch(64, 30, 3);
  const MAEModel fresh(c, 30);
  const MAETrainResult r = train_mae(data, c);
  EXPECT_EQ(r.model.parameters().values(), fresh.parameters().values());
  for (double v : r.curve.train) EXPECT_EQ(v, r.curve.train.front());
}

TEST(Train, RejectsBadInputAndDiverges) {
  MAEConfig c = tiny_config();
  c.epochs = 2;
  RowMatrix data = uniform_batch(20, 30, 3);
  data(3, 4) = std::nan("");
  EXPECT_THROW(train_mae(data, c), DomainError);
  c.learning_rate = 1e200;
  c.clip_norm = 0.0;
  try {
    train_mae(uniform_batch(20, 30, 3) * 1e150, c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 0);
  }
}

TEST(Nn, SinusoidalEncoding) {
  const nn::Mat pe = nn::sinusoidal_encoding(4, 6);
  EXPECT_EQ(pe(0, 0), 0.0);
  EXPECT_EQ(pe(0, 1), 1.0);
  EXPECT_NEAR(pe(2, 0), std::sin(2.0), 1e-15);
  EXPECT_NEAR(pe(3, 1), std::cos(3.0), 1e-15);
}

TEST(Nn, SgdStepAndChecksum) {
  nn::Sgd opt(2, {0.1, 0.0, 0.0, 0.0});
  std::vector<double> v = {1.0, 2.0};
  std::vector<double> g = {1.0, -1.0};
  opt.step(v, g);
  EXPECT_DOUBLE_EQ(v[0], 0.9);
  EXPECT_DOUBLE_EQ(v[1], 2.1);
  EXPECT_EQ(nn::checksum(v), nn::checksum(std::vector<double>{0.9, 2.1}));
  EXPECT_NE(nn::checksum(v), nn::checksum(std::vector<double>{0.9, 2.2}));
  EXPECT_FALSE(nn::all_finite(std::vector<double>{1.0, INFINITY}));
}

}  // namespace
}  // namespace hyspec::mae
