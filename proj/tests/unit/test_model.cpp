#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "volt/attention.hpp"
#include "volt/error.hpp"
#include "volt/grad_check.hpp"
#include "volt/model.hpp"
#include "volt/ops.hpp"

namespace volt {
namespace {

using testing::random_tensor;

ModelConfig small_config(bool enhance = true) {
  ModelConfig c;
  c.d = 4;
  c.heads = 2;
  c.d_k = 2;
  c.ffn_hidden = 6;
  c.l_enc = 2;
  c.l_dec = 2;
  c.g = 4;
  c.s = 2;
  c.m_max = 6;
  c.enhance = enhance;
  return c;
}

// A model with every parameter (including the head) randomized, so hand
// composition exercises every term.
VoltModel random_model(const ModelConfig& c, std::uint64_t seed) {
  VoltModel m = VoltModel::create(c, Rng(seed));
  Rng rng(seed + 100);
  for (auto& e : m.params().entries()) {
    if (!e.trainable) continue;
    for (double& v : e.value.data()) v = rng.normal(0.0, 0.4);
  }
  return m;
}

std::vector<attention::HeadParams> heads_of(const ParamStore& p, const ModelConfig& c,
                                            const std::string& block) {
  std::vector<attention::HeadParams> out;
  for (std::size_t h = 0; h < c.heads; ++h) {
    const std::string b = block + ".h" + std::to_string(h) + ".";
    out.push_back({p.get(b + "wq"), p.get(b + "wk"), p.get(b + "wv")});
  }
  return out;
}

Tensor ln(const ParamStore& p, const std::string& name, const Tensor& x) {
  return layer_norm(x, p.get(name + ".gamma"), p.get(name + ".beta"));
}

Tensor ffn(const ParamStore& p, const std::string& name, const Tensor& x) {
  Tensor h = matmul(x, p.get(name + ".w1"));
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) += p.get(name + ".b1")[c];
  h = relu(h);
  Tensor o = matmul(h, p.get(name + ".w2"));
  for (std::size_t r = 0; r < o.rows(); ++r)
    for (std::size_t c = 0; c < o.cols(); ++c) o(r, c) += p.get(name + ".b2")[c];
  return o;
}

Tensor plus(Tensor a, const Tensor& b) {
  add_inplace(a, b);
  return a;
}

Tensor reference_encode(const VoltModel& m, const Tensor& x0) {
  const ParamStore& p = m.params();
  const ModelConfig& c = m.config();
  Tensor x = x0;
  for (std::size_t l = 0; l < c.l_enc; ++l) {
    const std::string e = "enc." + std::to_string(l) + ".";
    const Tensor a =
        attention::mh_deatt(x, x0, heads_of(p, c, e + "att"), p.get(e + "att.w_view"), c.enhance).out;
    const Tensor xh = ln(p, e + "ln1", plus(a, x));
    x = ln(p, e + "ln2", plus(ffn(p, e + "ffn", xh), xh));
  }
  return x;
}

Tensor reference_decode(const VoltModel& m, const Tensor& xl) {
  const ParamStore& p = m.params();
  const ModelConfig& c = m.config();
  Tensor y = plus(p.get("queries"), p.get("pos_enc"));
  for (std::size_t l = 0; l < c.l_dec; ++l) {
    const std::string d = "dec." + std::to_string(l) + ".";
    const Tensor v = attention::mh_vol_attn(y, heads_of(p, c, d + "vol"), p.get(d + "vol.w")).out;
    const Tensor yh = ln(p, d + "ln1", plus(v, y));
    const Tensor x =
        attention::mh_view_vol_attn(yh, xl, heads_of(p, c, d + "cross"), p.get(d + "cross.w")).out;
    const Tensor yt = ln(p, d + "ln2", plus(x, yh));
    y = ln(p, d + "ln3", plus(ffn(p, d + "ffn", yt), yt));
  }
  return y;
}

TEST(ModelConfig, RejectsIndivisibleGrid) {
  ModelConfig c = small_config();
  c.g = 6;
  c.s = 4;
  EXPECT_THROW(VoltModel::create(c, Rng(1)), ConfigError);
}

TEST(Stitching, IsABijection) {
  ModelConfig c = small_config();
  c.g = 8;
  c.s = 2;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < c.g; ++k)
    for (std::size_t j = 0; j < c.g; ++j)
      for (std::size_t i = 0; i < c.g; ++i) {
        const TokenSlot slot = voxel_to_token(c, i, j, k);
        ASSERT_LT(slot.token, c.tokens());
        ASSERT_LT(slot.offset, c.logits_per_token());
        EXPECT_TRUE(seen.insert({slot.token, slot.offset}).second);
        const auto back = token_to_voxel(c, slot);
        EXPECT_EQ(back[0], i);
        EXPECT_EQ(back[1], j);
        EXPECT_EQ(back[2], k);
      }
  EXPECT_EQ(seen.size(), c.g * c.g * c.g);
}

TEST(Stitching, TokenOwnsItsSubVolume) {
  ModelConfig c = small_config();
  c.g = 8;
  c.s = 4;
  Tensor per_token({c.tokens(), c.logits_per_token()});
  for (std::size_t n = 0; n < c.tokens(); ++n)
    for (std::size_t o = 0; o < c.logits_per_token(); ++o) per_token(n, o) = static_cast<double>(n);
  const VoxelGrid g = stitch(c, per_token, GridKind::Probabilistic);
  const std::size_t t = c.token_grid();
  for (std::size_t k = 0; k < c.g; ++k)
    for (std::size_t j = 0; j < c.g; ++j)
      for (std::size_t i = 0; i < c.g; ++i) {
        const std::size_t n = i / c.s + t * (j / c.s + t * (k / c.s));
        EXPECT_EQ(g.at(i, j, k), static_cast<double>(n));
      }
  EXPECT_EQ(unstitch(c, g), per_token);
}

TEST(Model, ParameterShapes) {
  for (bool enhance : {false, true}) {
    const ModelConfig c = small_config(enhance);
    const VoltModel m = VoltModel::create(c, Rng(1));
    const ParamStore& p = m.params();
    EXPECT_EQ(p.get("enc.0.att.w_view").shape(),
              (std::vector<std::size_t>{c.heads * c.d_k + (enhance ? c.d : 0), c.d}));
    EXPECT_EQ(p.get("queries").shape(), (std::vector<std::size_t>{c.tokens(), c.d}));
    EXPECT_EQ(p.get("head.w").shape(), (std::vector<std::size_t>{c.d, c.logits_per_token()}));
    EXPECT_FALSE(p.entry("pos_enc").trainable);
    EXPECT_TRUE(p.contains("dec.1.ln3.gamma"));
    EXPECT_FALSE(p.contains("enc.2.ln1.gamma"));
  }
}

TEST(Model, VariantsDifferOnlyInViewProjection) {
  const VoltModel a = VoltModel::create(small_config(true), Rng(3));
  const VoltModel b = VoltModel::create(small_config(false), Rng(3));
  ASSERT_EQ(a.params().size(), b.params().size());
  for (const auto& e : a.params().entries()) {
    const Tensor& other = b.params().get(e.name);
    if (e.name.ends_with("att.w_view")) {
      EXPECT_NE(e.value.shape(), other.shape());
    } else {
      EXPECT_EQ(e.value, other) << e.name;
    }
  }
}

TEST(Model, XavierBounds) {
  const ModelConfig c = small_config();
  const VoltModel m = VoltModel::create(c, Rng(4));
  const Tensor& w1 = m.params().get("enc.0.ffn.w1");
  const double limit = std::sqrt(6.0 / static_cast<double>(c.d + c.ffn_hidden));
  for (double v : w1.data()) EXPECT_LE(std::abs(v), limit);
}

TEST(Model, InitializationIsDeterministic) {
  const VoltModel a = VoltModel::create(small_config(), Rng(9));
  const VoltModel b = VoltModel::create(small_config(), Rng(9));
  const VoltModel c = VoltModel::create(small_config(), Rng(10));
  EXPECT_EQ(a.params().get("enc.1.att.h1.wk"), b.params().get("enc.1.att.h1.wk"));
  EXPECT_NE(a.params().get("enc.1.att.h1.wk"), c.params().get("enc.1.att.h1.wk"));
}

TEST(PositionalEncoding, RowsAreDistinctAndBounded) {
  ModelConfig c = small_config();
  c.d = 12;
  c.g = 12;
  c.s = 4;
  const Tensor pe = volume_positional_encoding(c);
  ASSERT_EQ(pe.rows(), c.tokens());
  for (double v : pe.data()) EXPECT_LE(std::abs(v), 1.0);
  for (std::size_t a = 0; a < pe.rows(); ++a)
    for (std::size_t b = a + 1; b < pe.rows(); ++b)
      EXPECT_GT(max_abs_diff(slice_rows(pe, a, a + 1), slice_rows(pe, b, b + 1)), 1e-3);
}

class ModelVariantTest : public ::testing::TestWithParam<bool> {};

TEST_P(ModelVariantTest, EncodeMatchesHandComposition) {
  const VoltModel m = random_model(small_config(GetParam()), 5);
  Rng rng(6);
  const Tensor x0 = random_tensor({3, 4}, rng);
  EXPECT_LT(max_abs_diff(encode(x0, m).x_l, reference_encode(m, x0)), 1e-12);
}

TEST_P(ModelVariantTest, DecodeMatchesHandComposition) {
  const VoltModel m = random_model(small_config(GetParam()), 7);
  Rng rng(8);
  const Tensor xl = random_tensor({2, 4}, rng);
  const DecodeResult r = decode(xl, m);
  ASSERT_EQ(r.y_l.rows(), 8u);
  EXPECT_LT(max_abs_diff(r.y_l, reference_decode(m, xl)), 1e-12);
}

TEST_P(ModelVariantTest, EncoderEquivariantDecoderInvariant) {
  ModelConfig c = small_config(GetParam());
  const VoltModel m = random_model(c, 11);
  Rng rng(12);
  const Tensor x0 = random_tensor({5, 4}, rng);
  const std::vector<std::size_t> pi{4, 2, 0, 3, 1};
  const Tensor a = encode(x0, m).x_l;
  const Tensor b = encode(permute_rows(x0, pi), m).x_l;
  EXPECT_LT(max_abs_diff(b, permute_rows(a, pi)), 1e-9);
  EXPECT_LT(max_abs_diff(decode(a, m).y_l, decode(b, m).y_l), 1e-9);
  const VoxelGrid ga = predict_volume(x0, m), gb = predict_volume(permute_rows(x0, pi), m);
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(ga[i], gb[i], 1e-9);
}

TEST_P(ModelVariantTest, EqualViewsStayEqualThroughEveryLayer) {
  const VoltModel m = random_model(small_config(GetParam()), 13);
  Rng rng(14);
  const Tensor row = random_tensor({1, 4}, rng);
  Tensor x0({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) x0(i, j) = row(0, j);
  const Tensor x = encode(x0, m).x_l;
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(x(i, j), x(0, j));
}

INSTANTIATE_TEST_SUITE_P(Variants, ModelVariantTest, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "EVolT" : "VolT"; });

TEST(Model, EnhancementChangesEncoderOutput) {
  const VoltModel a = random_model(small_config(true), 15);
  VoltModel b = VoltModel(small_config(false), [&] {
    ParamStore p = a.params();
    for (auto& e : p.entries()) {
      if (e.name.ends_with("att.w_view")) {
        e.value = slice_rows(e.value, 0, 4);
      }
    }
    return p;
  }());
  Rng rng(16);
  const Tensor x0 = random_tensor({3, 4}, rng);
  EXPECT_GT(max_abs_diff(encode(x0, a).x_l, encode(x0, b).x_l), 1e-6);
}

TEST(Model, ZeroHeadPredictsOneHalf) {
  const VoltModel m = VoltModel::create(small_config(), Rng(17));
  Rng rng(18);
  const VoxelGrid g = predict_volume(random_tensor({3, 4}, rng), m);
  ASSERT_EQ(g.size(), 64u);
  for (double v : g.values()) EXPECT_EQ(v, 0.5);
}

TEST(Model, PredictionsAreProbabilities) {
  const VoltModel m = random_model(small_config(), 19);
  Rng rng(20);
  const VoxelGrid g = predict_volume(random_tensor({2, 4}, rng, 3.0), m);
  for (double v : g.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Model, EmptyViewSetRejected) {
  const VoltModel m = VoltModel::create(small_config(), Rng(21));
  EXPECT_THROW(predict_volume(Tensor({0, 4}), m), Error);
}

TEST(BceLoss, KnownValues) {
  const VoxelGrid half(2, GridKind::Probabilistic, std::vector<double>(8, 0.5));
  VoxelGrid gt(2, GridKind::Binary);
  gt[3] = 1.0;
  EXPECT_NEAR(bce_loss(half, gt), std::log(2.0), 1e-15);
  VoxelGrid exact(2, GridKind::Probabilistic, gt.values());
  EXPECT_NEAR(bce_loss(exact, gt), -std::log(1.0 - 1e-7), 1e-15);
  EXPECT_THROW(bce_loss(half, VoxelGrid(4, GridKind::Binary)), Error);
}

TEST(SampleLoss, MatchesPredictVolumeBce) {
  const ModelConfig c = small_config();
  const VoltModel m = random_model(c, 22);
  Rng rng(23);
  const Tensor views = random_tensor({3, 4}, rng);
  VoxelGrid gt(c.g, GridKind::Binary);
  for (double& v : gt.values()) v = rng.uniform(0, 1) < 0.3 ? 1.0 : 0.0;
  const double loss = sample_loss(c, m.params(), views, unstitch(c, gt), nullptr);
  EXPECT_NEAR(loss, bce_loss(predict_volume(views, m), gt), 1e-14);
}

TEST(SampleLoss, FullModelGradientMatchesFiniteDifferences) {
  for (bool enhance : {false, true}) {
    ModelConfig c = small_config(enhance);
    c.d = 8;
    c.d_k = 4;
    c.ffn_hidden = 16;
    c.m_max = 2;
    VoltModel m = VoltModel::create(c, Rng(24));
    Rng rng(25);
    const double limit = std::sqrt(6.0 / 16.0);
    for (double& v : m.params().get(names::kHead).data()) v = rng.uniform(-limit, limit);
    const Tensor views = random_tensor({2, 8}, rng);
    Tensor target({c.tokens(), c.logits_per_token()});
    for (double& v : target.data()) v = rng.uniform(0, 1) < 0.5 ? 1.0 : 0.0;
    const Objective f = [&](const ParamStore& p, ParamStore* grads) {
      return sample_loss(c, p, views, target, grads);
    };
    const GradCheckResult r = grad_check(f, m.params());
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "] " << r.worst_analytic << " vs " << r.worst_numeric;
  }
}

}  // namespace
}  // namespace volt
