// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "support/gradient_cases.hpp"
#include "unitlens/tensorgrad/blas.hpp"

namespace tg = unitlens::tensorgrad;
using tg::Tape;
using tg::Tensor;
using tg::Var;
using namespace testsupport;

namespace {

Tensor forward(const std::function<Var(Tape&)>& f) {
  Tape tape(false);
  return f(tape).value();
}

void expect_values(const Tensor& t, const std::vector<double>& want) {
  ASSERT_EQ(t.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_DOUBLE_EQ(t[i], want[i]) << "entry " << i;
}

}  // namespace

TEST(Tensor, RejectsZeroDimensionsAndMismatchedStorage) {
  EXPECT_THROW(Tensor({2, 0}), unitlens::DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), unitlens::DimensionError);
  EXPECT_EQ(Tensor::scalar(3.5).item(), 3.5);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(Matmul, Examples) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  expect_values(forward([&](Tape& t) { return tg::matmul(t.leaf(a), t.leaf(Tensor({2, 2}, {1, 0, 0, 1}))); }),
                {1, 2, 3, 4});
  expect_values(forward([&](Tape& t) {
                  return tg::matmul(t.leaf(Tensor({2, 2}, {1, 0, 0, 1})), t.leaf(Tensor({2, 1}, {5, 7})));
                }),
                {5, 7});
  expect_values(forward([&](Tape& t) { return tg::matmul(t.leaf(a), t.leaf(Tensor({2, 1}, {1, 1}))); }), {3, 7});
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  try {
    tg::matmul(tape.leaf(Tensor({2, 3})), tape.leaf(Tensor({4, 5})));
    FAIL() << "expected DimensionError";
  } catch (const unitlens::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Gemm, MatchesNaiveLoopForAllTransposes) {
  TestRng rng(3);
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      const int m = 7, n = 5, k = 9;
      const Tensor a = random_tensor({std::size_t(ta ? k : m), std::size_t(ta ? m : k)}, rng);
      const Tensor b = random_tensor({std::size_t(tb ? n : k), std::size_t(tb ? k : n)}, rng);
      Tensor c = random_tensor({std::size_t(m), std::size_t(n)}, rng);
      Tensor want = c;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          double acc = 0;
          for (int p = 0; p < k; ++p) {
            acc += (ta ? a[p * m + i] : a[i * k + p]) * (tb ? b[j * k + p] : b[p * n + j]);
          }
          want[i * n + j] = 0.5 * want[i * n + j] + 2.0 * acc;
        }
      }
      tg::blas::gemm(ta, tb, m, n, k, 2.0, a.data(), ta ? m : k, b.data(), tb ? k : n, 0.5, c.data(), n);
      for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], want[i], 1e-12);
    }
  }
}

TEST(Conv2d, ZeroKernelsGiveZeroOutput) {
  TestRng rng(1);
  const Tensor x = random_tensor({2, 3, 4, 5}, rng);
  const Tensor out = forward([&](Tape& t) {
    return tg::conv2d(t.leaf(x), t.leaf(Tensor({4, 3, 3, 3})), t.leaf(Tensor({4})));
  });
  EXPECT_EQ(out.shape(), (tg::Shape{2, 4, 4, 5}));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, CenteredDeltaKernelSumsChannels) {
  TestRng rng(2);
  const Tensor x = random_tensor({1, 3, 4, 4}, rng);
  Tensor k({1, 3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) k[c * 9 + 4] = 1.0;
  const Tensor out = forward([&](Tape& t) { return tg::conv2d(t.leaf(x), t.leaf(k), t.leaf(Tensor({1}))); });
  for (std::size_t p = 0; p < 16; ++p) EXPECT_DOUBLE_EQ(out[p], x[p] + x[16 + p] + x[32 + p]);
}

TEST(Conv2d, OnesWithZeroPadding) {
  const Tensor out = forward([&](Tape& t) {
    return tg::conv2d(t.leaf(Tensor({1, 1, 3, 3}, 1.0)), t.leaf(Tensor({1, 1, 3, 3}, 1.0)), t.leaf(Tensor({1})));
  });
  expect_values(out, {4, 6, 4, 6, 9, 6, 4, 6, 4});
}

TEST(Conv2d, ChannelMismatchIsDimensionError) {
  Tape tape;
  EXPECT_THROW(tg::conv2d(tape.leaf(Tensor({1, 2, 3, 3})), tape.leaf(Tensor({1, 3, 3, 3})), tape.leaf(Tensor({1}))),
               unitlens::DimensionError);
  EXPECT_THROW(tg::conv2d(tape.leaf(Tensor({1, 2, 3, 3})), tape.leaf(Tensor({1, 2, 5, 5})), tape.leaf(Tensor({1}))),
               unitlens::DimensionError);
}

TEST(Conv2d, BatchedMatchesOneSampleAtATime) {
  TestRng rng(9);
  const Tensor x = random_tensor({70, 5, 6, 6}, rng), k = random_tensor({4, 5, 3, 3}, rng), b = random_tensor({4}, rng);
  const Tensor all = forward([&](Tape& t) { return tg::conv2d(t.leaf(x), t.leaf(k), t.leaf(b)); });
  const std::size_t per = 5 * 36, out_per = 4 * 36;
  for (std::size_t n = 0; n < 70; n += 23) {
    Tensor one({1, 5, 6, 6}, std::vector<double>(x.data() + n * per, x.data() + (n + 1) * per));
    const Tensor single = forward([&](Tape& t) { return tg::conv2d(t.leaf(one), t.leaf(k), t.leaf(b)); });
    for (std::size_t i = 0; i < out_per; ++i) EXPECT_NEAR(all[n * out_per + i], single[i], 1e-12);
  }
}

TEST(Elementwise, ReluSpatialMeanCrossEntropy) {
  expect_values(forward([](Tape& t) { return tg::relu(t.leaf(Tensor({3}, {-1, 0, 2}))); }), {0, 0, 2});
  expect_values(forward([](Tape& t) { return tg::spatial_mean(t.leaf(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}))); }),
                {2.5});
  for (int label : {0, 3, 9}) {
    const std::vector<int> labels{label};
    const double ce = forward([&](Tape& t) {
                        return tg::softmax_cross_entropy(t.leaf(Tensor({1, 10}, 0.7)), labels);
                      }).item();
    EXPECT_NEAR(ce, std::log(10.0), 1e-15);
    EXPECT_NEAR(ce, 2.302585, 1e-6);
  }
}

TEST(Elementwise, ReluGradientAtZeroIsZero) {
  Tape tape;
  Var x = tape.leaf(Tensor({3}, {-1, 0, 2}));
  auto g = tape.backward(tg::sum(tg::relu(x)));
  expect_values(g.at(x), {0, 0, 1});
}

TEST(Elementwise, CrossEntropyRejectsBadLabels) {
  Tape tape;
  const std::vector<int> bad{5};
  EXPECT_THROW(tg::softmax_cross_entropy(tape.leaf(Tensor({1, 3})), bad), unitlens::RangeError);
}

TEST(Maxpool, FloorsOddSizesAndPicksFirstMaxOnTies) {
  Tape tape;
  Var x = tape.leaf(Tensor({1, 1, 3, 3}, {1, 1, 0, 1, 1, 0, 0, 0, 0}));
  Var y = tg::maxpool2x2(x);
  EXPECT_EQ(y.value().shape(), (tg::Shape{1, 1, 1, 1}));
  auto g = tape.backward(tg::sum(y));
  expect_values(g.at(x), {1, 0, 0, 0, 0, 0, 0, 0, 0});
}

TEST(Backward, SumGivesOnesAndHalfNormGivesInput) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}, {1, -2, 3, 0.5, 7, -1}));
  auto g = tape.backward(tg::sum(x));
  expect_values(g.at(x), {1, 1, 1, 1, 1, 1});

  Tape tape2;
  Var v = tape2.leaf(Tensor({2}, {3, 4}));
  auto g2 = tape2.backward(tg::scale(tg::sum(tg::mul(v, v)), 0.5));
  expect_values(g2.at(v), {3, 4});
}

TEST(Backward, FanOutAccumulates) {
  // f(x) = x * x from two references to the same node: df/dx = 2x.
  Tape tape;
  Var x = tape.leaf(Tensor({3}, {1.5, -2, 4}));
  auto g = tape.backward(tg::sum(tg::mul(x, x)));
  expect_values(g.at(x), {3, -4, 8});
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1, 2}));
  EXPECT_THROW(tape.backward(tg::relu(x)), unitlens::ContractError);
}

TEST(Backward, LossGradientIsOne) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1, 2}));
  Var loss = tg::sum(x);
  auto g = tape.backward(loss);
  ASSERT_TRUE(g.has(loss));
  EXPECT_EQ(g.at(loss).item(), 1.0);
}

TEST(Forward, BitIdenticalAcrossRuns) {
  TestRng rng(5);
  const Tensor x = random_tensor({3, 2, 5, 5}, rng), k = random_tensor({4, 2, 3, 3}, rng), b = random_tensor({4}, rng);
  auto run = [&] {
    return forward([&](Tape& t) { return tg::spatial_mean(tg::relu(tg::conv2d(t.leaf(x), t.leaf(k), t.leaf(b)))); });
  };
  EXPECT_TRUE(run() == run());
}

class OpGradient : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  TestRng rng(std::hash<std::string>{}(GetParam()));
  for (int i = 0; i < 8; ++i) {
    GradientCase c = make_gradient_case(GetParam(), rng);
    const auto r = check_gradients(c.fn, c.inputs);
    EXPECT_LT(r.max_rel_error, 1e-6) << GetParam() << " instance " << i;
    EXPECT_GT(r.entries, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(differentiable_ops()),
                         [](const auto& info) { return info.param; });

TEST(Gradient, ComposedNetworkMatchesCentralDifferences) {
  TestRng rng(11);
  const std::vector<int> labels{1, 0};
  ScalarFn f = [&](Tape&, const std::vector<Var>& v) {
    Var h = tg::relu(tg::conv2d(v[0], v[1], v[2]));
    h = tg::flatten(tg::maxpool2x2(h));
    return tg::softmax_cross_entropy(tg::add(tg::matmul(h, v[3]), v[4]), labels);
  };
  // relu inputs are continuous random values; a kink within eps is vanishingly unlikely.
  const auto r = check_gradients(f, {random_tensor({2, 2, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng),
                                     random_tensor({3}, rng), random_tensor({12, 2}, rng), random_tensor({2}, rng)});
  EXPECT_LT(r.max_rel_error, 1e-6);
}
