#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nasaswin/ops.hpp"
#include "nasaswin/oracles/oracles.hpp"
#include "nasaswin/tensor.hpp"

using namespace nasaswin;
namespace oracle = nasaswin::oracle;

namespace {

void expect_near_all(std::span<const double> got, std::span<const double> want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}

}  // namespace

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.size(1), 3u);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(t.reshape({4, 2}), DimensionError);
  EXPECT_EQ(t.reshape({3, 2}).to_vector(), t.to_vector());
}

TEST(Matmul, IdentityAndProjector) {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, m).to_vector(), (std::vector<double>{1, 2, 3, 4}));
  Tensor proj = Tensor::from({2, 2}, {1, 0, 0, 0});
  Tensor n = Tensor::from({2, 2}, {5, 6, 7, 8});
  EXPECT_EQ(matmul(proj, n).to_vector(), (std::vector<double>{5, 6, 0, 0}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(3);
  Tensor a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({4, 2}, rng);
  auto want = oracle::matmul(a.to_vector(), b.to_vector(), 3, 4, 2);
  expect_near_all(matmul(a, b).data(), want, 1e-12);
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4,5]"), std::string::npos) << msg;
  }
}

TEST(Softmax, ClosedFormCases) {
  expect_near_all(softmax(Tensor::from({3}, {0, 0, 0}), 0).data(), std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3},
                  1e-15);
  expect_near_all(softmax(Tensor::from({2}, {1000, 1000}), 0).data(), std::vector<double>{0.5, 0.5}, 1e-15);
  expect_near_all(softmax(Tensor::from({2}, {0, std::log(3.0)}), 0).data(), std::vector<double>{0.25, 0.75}, 1e-15);
}

TEST(Softmax, FullyMaskedSliceIsAnError) {
  const double ninf = -std::numeric_limits<double>::infinity();
  Tensor x = Tensor::from({2, 2}, {0, 1, ninf, ninf});
  try {
    softmax(x, 1);
    FAIL() << "expected an error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("fully masked slice"), std::string::npos);
  }
}

TEST(Softmax, SumsToOneAndIsPermutationEquivariant) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(5), k = 2 + rng.below(7);
    Tensor x = oracle::random_tensor({n, k}, rng, false, -5, 5);
    auto y = softmax(x, 1).to_vector();
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < k; ++c) s += y[r * k + c];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = k; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::size_t> index;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) index.push_back(r * k + perm[c]);
    auto yp = softmax(gather(x, index, {n, k}), 1).to_vector();
    for (std::size_t i = 0; i < index.size(); ++i) EXPECT_DOUBLE_EQ(yp[i], y[index[i]]);  // summation order moves the last ulp
  }
}

TEST(Conv2d, IdentityAndDepthwise) {
  Rng rng(5);
  Tensor x = oracle::random_tensor({2, 5, 5}, rng);
  Tensor id = Tensor::from({2, 2, 1, 1}, {1, 0, 0, 1});
  EXPECT_EQ(conv2d_grouped(x, id, Tensor::zeros({2}), {}).to_vector(), x.to_vector());
  Tensor one = Tensor::from({1, 1, 1, 1}, {1});
  Tensor x1 = oracle::random_tensor({1, 4, 3}, rng);
  EXPECT_EQ(conv2d_grouped(x1, one, Tensor::zeros({1}), {}).to_vector(), x1.to_vector());

  Tensor dw = Tensor::full({3, 1, 1, 1}, 2.0);
  Tensor x3 = oracle::random_tensor({3, 4, 4}, rng);
  auto got = conv2d_grouped(x3, dw, Tensor(), {.stride = 1, .groups = 3}).to_vector();
  auto xv = x3.to_vector();
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_EQ(got[i], 2.0 * xv[i]);
}

TEST(Conv2d, GroupedStrideFourMatchesLoop) {
  Rng rng(7);
  Tensor x = oracle::random_tensor({6, 8, 8}, rng);
  Tensor w = oracle::random_tensor({6, 2, 4, 4}, rng);
  Tensor b = oracle::random_tensor({6}, rng);
  auto got = conv2d_grouped(x, w, b, {.stride = 4, .groups = 3});
  EXPECT_EQ(got.shape(), (Shape{6, 2, 2}));
  auto want = oracle::conv2d_grouped(x.to_vector(), w.to_vector(), b.to_vector(), 6, 8, 8, 6, 4, 4, 4, 3);
  expect_near_all(got.data(), want, 1e-12);
}

TEST(Conv2d, ConfigurationErrors) {
  EXPECT_THROW(conv2d_grouped(Tensor::zeros({4, 8, 8}), Tensor::zeros({6, 2, 3, 3}), Tensor(), {.groups = 3}),
               ConfigError);
  EXPECT_THROW(conv2d_grouped(Tensor::zeros({2, 3, 3}), Tensor::zeros({2, 2, 4, 4}), Tensor(), {}), ConfigError);
}

TEST(LayerNorm, HandCases) {
  Tensor one = Tensor::full({2}, 1.0), zero = Tensor::zeros({2});
  auto c = layer_norm(Tensor::full({1, 2}, 7.0), one, zero).to_vector();
  EXPECT_EQ(c, (std::vector<double>{0.0, 0.0}));
  expect_near_all(layer_norm(Tensor::from({1, 2}, {1, 3}), one, zero, 1e-300).data(), std::vector<double>{-1, 1},
                  1e-15);
  auto fives = layer_norm(Tensor::from({1, 2}, {1, 3}), zero, Tensor::full({2}, 5.0)).to_vector();
  EXPECT_EQ(fives, (std::vector<double>{5, 5}));
}

TEST(CrossEntropy, HandCases) {
  EXPECT_NEAR(cross_entropy(Tensor::from({1, 2}, {0, 0}), {1}).item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(Tensor::from({1, 2}, {30, -30}), {0}).item(), 0.0, 1e-20);
  Rng rng(9);
  Tensor logits = oracle::random_tensor({4, 2}, rng, false, -3, 3);
  std::vector<int> labels{0, 1, 1, 0};
  EXPECT_NEAR(cross_entropy(logits, labels).item(), oracle::cross_entropy(logits.to_vector(), labels, 2), 1e-12);
  EXPECT_THROW(cross_entropy(Tensor::zeros({0, 2}), {}), std::exception);
}

TEST(Backward, ElementaryGradients) {
  Tensor x = Tensor::from({3}, {1, -2, 0.5}, true);
  sum(x).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 1, 1}));
  sum(mul(x, x)).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, -4, 1}));
}

TEST(Backward, NonScalarSeedIsAnError) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(scale(x, 2.0).backward(), std::exception);
}

TEST(Backward, NonParticipatingTensorsGetZeroGrad) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor unused = Tensor::from({2}, {3, 4}, true);
  sum(x).backward();
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, IdempotentAcrossCalls) {
  Rng rng(21);
  Tensor x = oracle::random_tensor({4, 6}, rng, true);
  Tensor w = oracle::random_tensor({6, 3}, rng, true);
  auto run = [&] {
    Tensor loss = mean(gelu(matmul(softmax(x, 1), w)));
    loss.backward();
    return std::make_pair(std::vector<double>(x.grad().begin(), x.grad().end()),
                          std::vector<double>(w.grad().begin(), w.grad().end()));
  };
  auto first = run();
  auto second = run();
  EXPECT_EQ(first, second);
}

TEST(Graph, TopologicalOrderVisitsEachOpOnce) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor y = mul(x, x);
  Tensor z = add(y, y);  // y consumed twice
  Tensor loss = sum(z);
  Graph g = Graph::trace(loss);
  auto names = g.op_names();
  EXPECT_EQ(std::count(names.begin(), names.end(), std::string("mul")), 1);
  auto pos = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) - names.begin(); };
  EXPECT_LT(pos("mul"), pos("add"));
  EXPECT_LT(pos("add"), pos("sum"));
  loss.backward();
  // d/dx sum(2 x^2) = 4x
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{4, 8}));
}

TEST(Graph, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  NoGradGuard guard;
  EXPECT_FALSE(mul(x, x).requires_grad());
}
