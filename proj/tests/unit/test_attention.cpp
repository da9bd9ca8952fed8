#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "volt/attention.hpp"
#include "volt/error.hpp"
#include "volt/ops.hpp"

namespace volt {
namespace {

using attention::HeadParams;
using testing::random_tensor;

std::vector<HeadParams> random_heads(std::size_t h, std::size_t d, std::size_t dk, Rng& rng) {
  std::vector<HeadParams> heads;
  for (std::size_t i = 0; i < h; ++i) {
    heads.push_back({random_tensor({d, dk}, rng, 0.5), random_tensor({d, dk}, rng, 0.5),
                     random_tensor({d, dk}, rng, 0.5)});
  }
  return heads;
}

// softmax(q k^T / sqrt(dk)) v from primitives.
Tensor reference_attn(const Tensor& q, const Tensor& k, const Tensor& v) {
  Tensor s = matmul_nt(q, k);
  for (double& x : s.data()) x /= std::sqrt(static_cast<double>(q.cols()));
  return matmul(softmax_rows(s), v);
}

Tensor reference_heads(const Tensor& queries_from, const Tensor& keys_from,
                       const std::vector<HeadParams>& heads) {
  Tensor cat;
  for (const HeadParams& h : heads) {
    const Tensor a = reference_attn(matmul(queries_from, h.w_q), matmul(keys_from, h.w_k),
                                    matmul(keys_from, h.w_v));
    cat = cat.empty() ? a : concat_cols(cat, a);
  }
  return cat;
}

Tensor permuted(const Tensor& t, const std::vector<std::size_t>& order) {
  return permute_rows(t, order);
}

TEST(Attn, SingleKeyReturnsItsValue) {
  const auto r = attention::attn(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{5, 5}}),
                                 Tensor::from_rows({{7, 9}}));
  EXPECT_EQ(r.output, Tensor::from_rows({{7, 9}}));
  EXPECT_EQ(r.scores, Tensor::from_rows({{1}}));
}

TEST(Attn, DominantKeySelectsItsValue) {
  const double dk = 2.0;
  const Tensor q = Tensor::from_rows({{1, 0}});
  const Tensor k = Tensor::from_rows({{0, 0}, {60 * std::sqrt(dk), 0}, {-3, 1}});
  const Tensor v = Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const auto r = attention::attn(q, k, v);
  EXPECT_NEAR(r.output(0, 0), 3.0, 1e-9);
  EXPECT_NEAR(r.output(0, 1), 4.0, 1e-9);
}

TEST(Attn, EqualScoresAverageValues) {
  const auto r = attention::attn(Tensor::from_rows({{0}}), Tensor::from_rows({{0}, {0}}),
                                 Tensor::from_rows({{2}, {4}}));
  EXPECT_DOUBLE_EQ(r.output(0, 0), 3.0);
}

TEST(Attn, MatchesReference) {
  Rng rng(1);
  const Tensor q = random_tensor({4, 3}, rng), k = random_tensor({6, 3}, rng),
               v = random_tensor({6, 5}, rng);
  EXPECT_LT(max_abs_diff(attention::attn(q, k, v).output, reference_attn(q, k, v)), 1e-14);
}

TEST(DiView, ConcatenatesSkipInput) {
  EXPECT_EQ(attention::diview(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}})),
            Tensor::from_rows({{1, 2, 3}}));
}

TEST(DiView, LastColumnsRecoverX0) {
  Rng rng(2);
  const Tensor a = random_tensor({5, 8}, rng), x0 = random_tensor({5, 4}, rng);
  const Tensor out = attention::diview(a, x0);
  ASSERT_EQ(out.cols(), 12u);
  EXPECT_EQ(slice_cols(out, 8, 12), x0);
}

class MhDeattTest : public ::testing::TestWithParam<bool> {};

TEST_P(MhDeattTest, MatchesHandComposition) {
  const bool enhance = GetParam();
  Rng rng(3);
  const std::size_t d = 4, dk = 3, h = 2;
  for (std::size_t m : {1u, 3u}) {
    const Tensor x = random_tensor({m, d}, rng), x0 = random_tensor({m, d}, rng);
    const auto heads = random_heads(h, d, dk, rng);
    const Tensor w = random_tensor({h * dk + (enhance ? d : 0), d}, rng);
    Tensor cat = reference_heads(x, x, heads);
    if (enhance) cat = concat_cols(cat, x0);
    const auto r = attention::mh_deatt(x, x0, heads, w, enhance);
    EXPECT_LT(max_abs_diff(r.out, matmul(cat, w)), 1e-13) << "m=" << m;
    ASSERT_EQ(r.scores.size(), h);
    if (m == 1) EXPECT_EQ(r.scores[0], Tensor::from_rows({{1}}));
  }
}

TEST_P(MhDeattTest, IdenticalRowsGiveIdenticalOutputs) {
  const bool enhance = GetParam();
  Rng rng(4);
  const std::size_t d = 6, dk = 2, h = 3, m = 5;
  const Tensor row = random_tensor({1, d}, rng), row0 = random_tensor({1, d}, rng);
  Tensor x({m, d}), x0({m, d});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      x(i, j) = row(0, j);
      x0(i, j) = row0(0, j);
    }
  const auto r = attention::mh_deatt(x, x0, random_heads(h, d, dk, rng),
                                     random_tensor({h * dk + (enhance ? d : 0), d}, rng), enhance);
  for (std::size_t i = 1; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(r.out(i, j), r.out(0, j));
}

TEST_P(MhDeattTest, PermutationEquivariance) {
  const bool enhance = GetParam();
  Rng rng(5);
  const std::size_t d = 6, dk = 3, h = 2, m = 6;
  const Tensor x = random_tensor({m, d}, rng), x0 = random_tensor({m, d}, rng);
  const auto heads = random_heads(h, d, dk, rng);
  const Tensor w = random_tensor({h * dk + (enhance ? d : 0), d}, rng);
  const std::vector<std::size_t> pi{3, 0, 5, 1, 4, 2};
  const auto base = attention::mh_deatt(x, x0, heads, w, enhance);
  const auto perm = attention::mh_deatt(permuted(x, pi), permuted(x0, pi), heads, w, enhance);
  EXPECT_LT(max_abs_diff(perm.out, permuted(base.out, pi)), 1e-12);
}

TEST_P(MhDeattTest, WrongProjectionShapeThrows) {
  const bool enhance = GetParam();
  Rng rng(6);
  const Tensor x = random_tensor({2, 4}, rng);
  EXPECT_THROW(attention::mh_deatt(x, x, random_heads(2, 4, 2, rng),
                                   random_tensor({4 + (enhance ? 0 : 4), 4}, rng), enhance),
               ShapeError);
}

INSTANTIATE_TEST_SUITE_P(Variants, MhDeattTest, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Enhanced" : "Plain"; });

TEST(MhDeatt, EnhancedDiffersFromPlain) {
  Rng rng(7);
  const std::size_t d = 4, dk = 2, h = 2;
  const Tensor x = random_tensor({3, d}, rng), x0 = random_tensor({3, d}, rng);
  const auto heads = random_heads(h, d, dk, rng);
  const Tensor w_full = random_tensor({h * dk + d, d}, rng);
  const Tensor w_plain = slice_rows(w_full, 0, h * dk);
  const auto a = attention::mh_deatt(x, x0, heads, w_full, true);
  const auto b = attention::mh_deatt(x, x0, heads, w_plain, false);
  EXPECT_GT(max_abs_diff(a.out, b.out), 1e-6);
  // The difference is exactly the skip path.
  EXPECT_LT(max_abs_diff(a.out, [&] {
              Tensor t = b.out;
              add_inplace(t, matmul(x0, slice_rows(w_full, h * dk, h * dk + d)));
              return t;
            }()),
            1e-13);
}

TEST(MhVolAttn, SingleTokenAttendsToItself) {
  Rng rng(8);
  const auto heads = random_heads(2, 4, 3, rng);
  const Tensor y = random_tensor({1, 4}, rng), w = random_tensor({6, 4}, rng);
  const auto r = attention::mh_vol_attn(y, heads, w);
  const Tensor v = concat_cols(matmul(y, heads[0].w_v), matmul(y, heads[1].w_v));
  EXPECT_LT(max_abs_diff(r.out, matmul(v, w)), 1e-14);
}

TEST(MhVolAttn, MatchesHandComposition) {
  Rng rng(9);
  const auto heads = random_heads(2, 4, 3, rng);
  const Tensor y = random_tensor({2, 4}, rng), w = random_tensor({6, 4}, rng);
  EXPECT_LT(max_abs_diff(attention::mh_vol_attn(y, heads, w).out,
                         matmul(reference_heads(y, y, heads), w)),
            1e-13);
}

TEST(MhVolAttn, IdenticalRowsStayIdentical) {
  Rng rng(10);
  const Tensor row = random_tensor({1, 4}, rng);
  Tensor y({5, 4});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) y(i, j) = row(0, j);
  const auto r = attention::mh_vol_attn(y, random_heads(2, 4, 2, rng), random_tensor({4, 4}, rng));
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(r.out(i, j), r.out(0, j));
}

TEST(MhViewVolAttn, SingleViewBroadcastsItsValue) {
  Rng rng(11);
  const auto heads = random_heads(2, 4, 3, rng);
  const Tensor y = random_tensor({6, 4}, rng), xl = random_tensor({1, 4}, rng);
  const Tensor w = random_tensor({6, 4}, rng);
  const auto r = attention::mh_view_vol_attn(y, xl, heads, w);
  const Tensor v = matmul(concat_cols(matmul(xl, heads[0].w_v), matmul(xl, heads[1].w_v)), w);
  for (std::size_t n = 0; n < 6; ++n)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.out(n, j), v(0, j), 1e-14);
  EXPECT_EQ(r.scores[0].cols(), 1u);
}

TEST(MhViewVolAttn, MatchesHandComposition) {
  Rng rng(12);
  const auto heads = random_heads(2, 4, 3, rng);
  const Tensor y = random_tensor({2, 4}, rng), xl = random_tensor({2, 4}, rng);
  const Tensor w = random_tensor({6, 4}, rng);
  EXPECT_LT(max_abs_diff(attention::mh_view_vol_attn(y, xl, heads, w).out,
                         matmul(reference_heads(y, xl, heads), w)),
            1e-13);
}

TEST(MhViewVolAttn, InvariantToViewOrder) {
  Rng rng(13);
  const auto heads = random_heads(4, 8, 2, rng);
  const Tensor y = random_tensor({10, 8}, rng), xl = random_tensor({7, 8}, rng);
  const Tensor w = random_tensor({8, 8}, rng);
  const std::vector<std::size_t> pi{6, 2, 0, 5, 1, 3, 4};
  const auto a = attention::mh_view_vol_attn(y, xl, heads, w);
  const auto b = attention::mh_view_vol_attn(y, permuted(xl, pi), heads, w);
  EXPECT_LT(max_abs_diff(a.out, b.out), 1e-9);
}

TEST(AttentionScores, RowsAreProbabilityVectors) {
  Rng rng(14);
  const Tensor x = random_tensor({5, 6}, rng);
  const auto r = attention::mh_deatt(x, x, random_heads(3, 6, 2, rng), random_tensor({12, 6}, rng),
                                     true);
  for (const Tensor& s : r.scores) {
    for (std::size_t i = 0; i < s.rows(); ++i) {
      double sum = 0.0;
      for (double v : s.row(i)) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

}  // namespace
}  // namespace volt
