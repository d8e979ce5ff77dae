// Copyright 2026 The ccodec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ccodec/tensor/grid.h"
#include "ccodec/tensor/ops.h"
#include "ccodec/tensor/param.h"
#include "ccodec/tensor/rng.h"
#include "ccodec/tensor/tape.h"
#include "grad_check.h"

namespace ccodec {
namespace {

using testing::CheckGradients;
using testing::WeightedSum;

Grid<double> RandomGrid(size_t c, size_t h, size_t w, uint64_t seed, double lo = -1,
                        double hi = 1) {
  Rng rng(seed);
  Grid<double> g(c, h, w);
  for (double& v : g.span()) v = rng.Uniform(lo, hi);
  return g;
}

Param<double>& AddGridParam(ParamStore<double>& s, const std::string& name, const Grid<double>& g) {
  Param<double>& p = s.Add(name, {g.channels(), g.height(), g.width()});
  p.value = g.vec();
  return p;
}

// Naive cross-correlation written independently of the library kernels.
Grid<double> ReferenceConv(const Grid<double>& x, const std::vector<double>& k, size_t out_c,
                           size_t ks, size_t stride, size_t pad) {
  const size_t oh = (x.height() + 2 * pad - ks) / stride + 1;
  const size_t ow = (x.width() + 2 * pad - ks) / stride + 1;
  Grid<double> y(out_c, oh, ow);
  for (size_t o = 0; o < out_c; ++o)
    for (size_t r = 0; r < oh; ++r)
      for (size_t c = 0; c < ow; ++c) {
        double s = 0;
        for (size_t i = 0; i < x.channels(); ++i)
          for (size_t dy = 0; dy < ks; ++dy)
            for (size_t dx = 0; dx < ks; ++dx) {
              const long yy = long(r * stride + dy) - long(pad);
              const long xx = long(c * stride + dx) - long(pad);
              if (yy < 0 || xx < 0 || yy >= long(x.height()) || xx >= long(x.width())) continue;
              s += k[((o * x.channels() + i) * ks + dy) * ks + dx] * x(i, yy, xx);
            }
        y(o, r, c) = s;
      }
  return y;
}

TEST(GridTest, DataLengthMustMatchShape) {
  EXPECT_THROW(Grid<float>(2, 2, 2, std::vector<float>(7)), ShapeError);
  Grid<float> g(2, 3, 4);
  EXPECT_EQ(g.size(), 24u);
  g(1, 2, 3) = 5;
  EXPECT_EQ(g[23], 5);
}

TEST(LinearTest, IdentityWeightsReproduceInput) {
  ParamStore<double> s;
  auto& w = s.Add("w", {3, 3});
  auto& b = s.Add("b", {3});
  for (size_t i = 0; i < 3; ++i) w.value[i * 3 + i] = 1;
  Tape<double> t(false);
  Grid<double> x = RandomGrid(3, 4, 5, 1);
  EXPECT_EQ(Linear(t, t.Constant(x), w, &b).value(), x);
}

TEST(LinearTest, HandMatrixProduct) {
  ParamStore<double> s;
  auto& w = s.Add("w", {2, 2});
  w.value = {1, 1, 0, 1};
  auto& b = s.Add("b", {2});
  Tape<double> t(false);
  Var<double> y = Linear(t, t.Constant(Grid<double>(2, 1, 1, std::vector<double>{1, 2})), w, &b);
  EXPECT_EQ(y.value()[0], 3);
  EXPECT_EQ(y.value()[1], 2);
}

TEST(LinearTest, ZeroWeightsGiveBias) {
  ParamStore<double> s;
  auto& w = s.Add("w", {1, 4});
  auto& b = s.AddConstant("b", {1}, 2.5);
  Tape<double> t(false);
  Var<double> y = Linear(t, t.Constant(RandomGrid(4, 3, 3, 2)), w, &b);
  for (double v : y.value().span()) EXPECT_EQ(v, 2.5);
}

TEST(LinearTest, ShapeMismatchNamesBothShapes) {
  ParamStore<double> s;
  auto& w = s.Add("w", {2, 3});
  Tape<double> t(false);
  try {
    Linear(t, t.Constant(Grid<double>(4, 2, 2)), w);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x2x2"), std::string::npos) << msg;
  }
}

TEST(LayerNormTest, TwoChannelClosedForm) {
  ParamStore<double> s;
  auto& g = s.AddConstant("g", {2}, 1.0);
  auto& b = s.AddConstant("b", {2}, 0.0);
  Tape<double> t(false);
  Grid<double> x(2, 1, 3);
  for (size_t p = 0; p < 3; ++p) {
    x(0, 0, p) = 1 + p;
    x(1, 0, p) = 3 + p;
  }
  Var<double> y = LayerNorm(t, t.Constant(x), g, b, 1e-12);
  for (size_t p = 0; p < 3; ++p) {
    EXPECT_NEAR(y.value()(0, 0, p), -1.0, 1e-9);
    EXPECT_NEAR(y.value()(1, 0, p), 1.0, 1e-9);
  }
}

TEST(LayerNormTest, ConstantVectorAndZeroGain) {
  ParamStore<double> s;
  auto& g = s.AddConstant("g", {4}, 1.0);
  auto& zero_g = s.AddConstant("zg", {4}, 0.0);
  auto& b = s.Add("b", {4});
  b.value = {0.5, -1, 2, 3};
  Tape<double> t(false);
  Var<double> y = LayerNorm(t, t.Constant(Grid<double>(4, 2, 2, 7.0)), g, b, 1e-6);
  for (size_t c = 0; c < 4; ++c)
    for (size_t p = 0; p < 4; ++p) EXPECT_NEAR(y.value().channel(c)[p], b.value[c], 1e-12);
  Var<double> z = LayerNorm(t, t.Constant(RandomGrid(4, 2, 2, 3)), zero_g, b, 1e-6);
  for (size_t c = 0; c < 4; ++c)
    for (size_t p = 0; p < 4; ++p) EXPECT_EQ(z.value().channel(c)[p], b.value[c]);
}

TEST(LayerNormTest, NormalizesEachPosition) {
  ParamStore<double> s;
  auto& g = s.AddConstant("g", {6}, 1.0);
  auto& b = s.AddConstant("b", {6}, 0.0);
  Tape<double> t(false);
  Var<double> y = LayerNorm(t, t.Constant(RandomGrid(6, 3, 3, 4, -5, 5)), g, b, 1e-9);
  for (size_t p = 0; p < 9; ++p) {
    double m = 0, v = 0;
    for (size_t c = 0; c < 6; ++c) m += y.value().channel(c)[p];
    m /= 6;
    for (size_t c = 0; c < 6; ++c) v += std::pow(y.value().channel(c)[p] - m, 2);
    EXPECT_NEAR(m, 0, 1e-12);
    EXPECT_NEAR(v / 6, 1, 1e-6);
  }
}

TEST(ConvTest, UnitKernelIsIdentity) {
  ParamStore<double> s;
  auto& k = s.AddConstant("k", {1, 1, 1, 1}, 1.0);
  Tape<double> t(false);
  Grid<double> x = RandomGrid(1, 5, 4, 5);
  EXPECT_EQ(Conv2d(t, t.Constant(x), k, nullptr, 1, 0).value(), x);
}

TEST(ConvTest, BoxKernelOnImpulse) {
  ParamStore<double> s;
  auto& k = s.AddConstant("k", {1, 1, 3, 3}, 1.0);
  Tape<double> t(false);
  Grid<double> x(1, 3, 3);
  x(0, 1, 1) = 1;
  Var<double> y = Conv2d(t, t.Constant(x), k, nullptr, 1, 1);
  ASSERT_EQ(y.value().ShapeString(), "1x3x3");
  for (double v : y.value().span()) EXPECT_EQ(v, 1.0);
}

TEST(ConvTest, MatchesReferenceWithStrideAndPadding) {
  for (size_t stride : {1, 2}) {
    for (size_t pad : {0, 1, 2}) {
      ParamStore<double> s;
      Rng rng(stride * 10 + pad);
      auto& k = s.AddUniform("k", {4, 3, 3, 3}, 27, rng);
      Tape<double> t(false);
      Grid<double> x = RandomGrid(3, 7, 6, pad + 17);
      Var<double> y = Conv2d(t, t.Constant(x), k, nullptr, stride, pad);
      Grid<double> ref = ReferenceConv(x, k.value, 4, 3, stride, pad);
      ASSERT_TRUE(y.value().SameShape(ref));
      for (size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.value()[i], ref[i], 1e-12);
    }
  }
}

TEST(ConvTest, OutputSmallerThanOneThrows) {
  ParamStore<double> s;
  auto& k = s.Add("k", {1, 1, 5, 5});
  Tape<double> t(false);
  EXPECT_THROW(Conv2d(t, t.Constant(Grid<double>(1, 3, 3)), k, nullptr, 1, 0), ShapeError);
}

TEST(ConvTest, TransposeIsAdjoint) {
  for (size_t stride : {1, 2}) {
    ParamStore<double> s;
    Rng rng(stride);
    auto& k = s.AddUniform("k", {3, 2, 3, 3}, 18, rng);  // conv: 2 -> 3 channels
    Tape<double> t(false);
    Grid<double> x = RandomGrid(2, 8, 8, 21);
    Var<double> cx = Conv2d(t, t.Constant(x), k, nullptr, stride, 1);
    Grid<double> y = RandomGrid(3, cx.height(), cx.width(), 22);
    Var<double> ty = ConvTranspose2d(t, t.Constant(y), k, nullptr, stride, 1, stride - 1);
    ASSERT_TRUE(ty.value().SameShape(x));
    double lhs = 0, rhs = 0;
    for (size_t i = 0; i < y.size(); ++i) lhs += cx.value()[i] * y[i];
    for (size_t i = 0; i < x.size(); ++i) rhs += x[i] * ty.value()[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(ShuffleTest, HandIndexMapping) {
  Tape<double> t(false);
  Grid<double> x(1, 2, 2, std::vector<double>{1, 2, 3, 4});
  Var<double> u = PixelUnshuffle(t, t.Constant(x), 2);
  ASSERT_EQ(u.value().ShapeString(), "4x1x1");
  EXPECT_EQ(u.value().vec(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(ShuffleTest, RoundTripAndIdentity) {
  Tape<double> t(false);
  Grid<double> x = RandomGrid(3, 8, 4, 6);
  EXPECT_EQ(PixelShuffle(t, PixelUnshuffle(t, t.Constant(x), 2), 2).value(), x);
  EXPECT_EQ(PixelUnshuffle(t, t.Constant(x), 1).value(), x);
  EXPECT_THROW(PixelUnshuffle(t, t.Constant(Grid<double>(1, 3, 4)), 2), ShapeError);
}

TEST(PoolTest, MeanOfPartition) {
  Tape<double> t(false);
  Grid<double> x(1, 2, 2, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(AvgPoolTo(t, t.Constant(x), 1, 1).value()[0], 2.5);
  Grid<double> r = RandomGrid(2, 5, 7, 8);
  Var<double> p = AvgPoolTo(t, t.Constant(r), 2, 3);
  // Independent partition: cell i covers [floor(i*n/k), floor((i+1)*n/k)).
  for (size_t c = 0; c < 2; ++c)
    for (size_t i = 0; i < 2; ++i)
      for (size_t j = 0; j < 3; ++j) {
        double s = 0;
        int n = 0;
        for (size_t y = i * 5 / 2; y < (i + 1) * 5 / 2; ++y)
          for (size_t x = j * 7 / 3; x < (j + 1) * 7 / 3; ++x, ++n) s += r(c, y, x);
        EXPECT_NEAR(p.value()(c, i, j), s / n, 1e-12);
      }
  EXPECT_THROW(AvgPoolTo(t, t.Constant(r), 0, 1), ShapeError);
  EXPECT_THROW(AvgPoolTo(t, t.Constant(r), 6, 1), ShapeError);
}

TEST(TapeTest, BackwardOnceAndScalarOnly) {
  ParamStore<double> s;
  auto& w = s.AddConstant("w", {1, 1}, 2.0);
  Tape<double> t(true);
  Var<double> y = Linear(t, t.Constant(Grid<double>(1, 2, 1, 1.0)), w);
  EXPECT_THROW(t.Backward(y), TapeError);
  Var<double> l = Sum(t, y);
  t.Backward(l);
  EXPECT_EQ(w.grad[0], 2.0);
  EXPECT_THROW(t.Backward(l), TapeError);
  Tape<double> other(true);
  Var<double> l2 = Sum(other, Linear(other, other.Constant(Grid<double>(1, 1, 1, 1.0)), w));
  Tape<double> third(true);
  EXPECT_THROW(third.Backward(l2), TapeError);
}

TEST(TapeTest, BackwardVisitsOpsInReverseOrder) {
  std::vector<int> order;
  Tape<double> t(true);
  Var<double> leaf = t.Leaf(Grid<double>(1, 1, 1, 1.0));
  for (int i = 0; i < 5; ++i) t.Record([&order, i] { order.push_back(i); });
  t.Backward(Sum(t, leaf));
  EXPECT_EQ(order, (std::vector<int>{4, 3, 2, 1, 0}));
}

TEST(GradientTest, LinearAndLayerNorm) {
  ParamStore<double> s;
  Rng rng(3);
  auto& x = AddGridParam(s, "x", RandomGrid(4, 3, 2, 30));
  auto& w = s.AddUniform("w", {5, 4}, 4, rng);
  auto& b = s.AddUniform("b", {5}, 1, rng);
  auto& g = s.AddUniform("g", {5}, 1, rng);
  auto& nb = s.AddUniform("nb", {5}, 1, rng);
  auto res = CheckGradients(s, [&](Tape<double>& t) {
    Var<double> xv = FromParam(t, x, 4, 3, 2);
    return WeightedSum(t, LayerNorm(t, Linear(t, xv, w, &b), g, nb, 1e-6));
  });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(GradientTest, ConvAndTransposedConv) {
  ParamStore<double> s;
  Rng rng(4);
  auto& x = AddGridParam(s, "x", RandomGrid(2, 6, 5, 31));
  auto& k = s.AddUniform("k", {3, 2, 3, 3}, 18, rng);
  auto& b = s.AddUniform("b", {3}, 1, rng);
  auto& kt = s.AddUniform("kt", {3, 2, 3, 3}, 27, rng);
  auto& bt = s.AddUniform("bt", {2}, 1, rng);
  auto res = CheckGradients(s, [&](Tape<double>& t) {
    Var<double> h = Conv2d(t, FromParam(t, x, 2, 6, 5), k, &b, 2, 1);
    return WeightedSum(t, ConvTranspose2d(t, h, kt, &bt, 2, 1, 1));
  });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(GradientTest, ActivationsPoolingAndLayout) {
  ParamStore<double> s;
  auto& x = AddGridParam(s, "x", RandomGrid(4, 4, 6, 32, -3, 3));
  auto& gate = AddGridParam(s, "gate", RandomGrid(1, 2, 3, 33));
  auto res = CheckGradients(s, [&](Tape<double>& t) {
    Var<double> xv = FromParam(t, x, 4, 4, 6);
    Var<double> a = Add(t, Gelu(t, xv), Sigmoid(t, xv));
    Var<double> b = Softplus(t, PixelShuffle(t, PixelUnshuffle(t, a, 2), 2));
    Var<double> m = ChannelMeanMax(t, b);
    Var<double> p = AvgPoolTo(t, Concat(t, {b, m}), 2, 3);
    Var<double> gp = MulBroadcast(t, p, FromParam(t, gate, 1, 2, 3));
    Var<double> ga = MulBroadcast(t, gp, GlobalAvgPool(t, gp));
    return Add(t, WeightedSum(t, SliceChannels(t, ga, 1, 4)),
               Add(t, MeanSquaredError(t, Crop(t, xv, 2, 3), Crop(t, a, 2, 3)), Mean(t, b)));
  });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(GeluTest, TanhApproximationValues) {
  EXPECT_NEAR(GeluScalar(1.0), 0.8411919906082768, 1e-12);
  EXPECT_EQ(GeluScalar(0.0), 0.0);
  EXPECT_NEAR(GeluScalar(-3.0), -0.0036373920817729943, 1e-12);
}

}  // namespace
}  // namespace ccodec
