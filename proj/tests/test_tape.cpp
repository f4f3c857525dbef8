#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cgl/numdiff.hpp"
#include "cgl/random.hpp"
#include "cgl/tape.hpp"

using namespace cgl;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Wraps a unary op on a [rows, cols] input into a scalar function by pairing
// the output with fixed random weights.
TapeFn weighted(const Shape& in, const std::function<Var(Var)>& op, std::uint64_t seed) {
  return [in, op, seed](Tape& tape, Var theta) {
    Var x = reshape(theta, in);
    Var y = op(x);
    Rng rng(seed);
    Var w = tape.constant(Tensor(y.shape(), random_values(y.value().size(), rng)));
    return sum_all(mul(y, w));
  };
}

}  // namespace

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor({2}).dim(1), ShapeError);
  EXPECT_EQ(Tensor({2, 3}).size(), 6U);
}

TEST(Tape, MatmulShapeErrorNamesShapes) {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 3}));
  Var b = tape.leaf(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2, 3]"), std::string::npos) << e.what();
  }
}

TEST(Tape, BackwardNeedsScalar) {
  Tape tape;
  Var a = tape.leaf(Tensor({2}, std::vector<double>{1, 2}));
  EXPECT_THROW(tape.backward(a), ShapeError);
}

TEST(Tape, GradOfUnreachedLeafIsZero) {
  Tape tape;
  Var a = tape.leaf(Tensor({2}, std::vector<double>{1, 2}));
  Var b = tape.leaf(Tensor({2}, std::vector<double>{3, 4}));
  tape.backward(sum_all(mul(a, a)));
  EXPECT_EQ(tape.grad(b).values(), (std::vector<double>{0, 0}));
  EXPECT_EQ(tape.grad(a).values(), (std::vector<double>{2, 4}));
}

TEST(Tape, RepeatedBackwardDoesNotAccumulate) {
  Tape tape;
  Var a = tape.leaf(Tensor::scalar(3.0));
  Var loss = mul(a, a);
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(tape.grad(a).item(), 6.0);
}

TEST(Tape, SharedSubexpressionGradientsAdd) {
  Tape tape;
  Var a = tape.leaf(Tensor::scalar(2.0));
  Var b = add(a, a);
  tape.backward(mul(b, a));  // 2a^2 -> 4a
  EXPECT_DOUBLE_EQ(tape.grad(a).item(), 8.0);
}

TEST(Tape, SoftmaxSumsToOneAlongAxis) {
  Tape tape;
  Rng rng(3);
  Var x = tape.leaf(Tensor({4, 3, 5}, random_values(60, rng, -30, 30)));
  const Tensor s = softmax(x, 1).value();
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t n = 0; n < 5; ++n) {
      double total = 0.0;
      for (std::size_t k = 0; k < 3; ++k) total += s[(b * 3 + k) * 5 + n];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Tape, SigmoidIsStableForLargeInputs) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, std::vector<double>{-800.0, 800.0}));
  const Tensor y = sigmoid(x).value();
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
}

TEST(Tape, StandardizeHasZeroMeanUnitStd) {
  Tape tape;
  Rng rng(5);
  Var x = tape.leaf(Tensor({50, 3}, random_values(150, rng, -4, 9)));
  const Tensor y = standardize(x, 1e-6).value();
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, s = 0;
    for (std::size_t r = 0; r < 50; ++r) m += y.at(r, c);
    m /= 50;
    for (std::size_t r = 0; r < 50; ++r) s += (y.at(r, c) - m) * (y.at(r, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(s / 50), 1.0, 1e-12);
  }
}

TEST(Tape, StandardizeFloorsConstantColumns) {
  Tape tape;
  Var x = tape.leaf(Tensor({3, 1}, std::vector<double>{2.0, 2.0, 2.0}));
  const Tensor y = standardize(x, 1e-6).value();
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

struct OpCase {
  const char* name;
  Shape shape;
  std::function<Var(Var)> op;
};

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  Rng rng(100 + GetParam());
  const std::vector<OpCase> cases = {
      {"elu", {3, 4}, [](Var x) { return elu(x); }},
      {"sigmoid", {3, 4}, [](Var x) { return sigmoid(x); }},
      {"softmax0", {3, 4}, [](Var x) { return softmax(x, 0); }},
      {"softmax1", {2, 3, 4}, [](Var x) { return softmax(x, 1); }},
      {"sum0", {3, 4}, [](Var x) { return sum(x, 0); }},
      {"sum1", {2, 3, 4}, [](Var x) { return sum(x, 1); }},
      {"mean_all", {3, 4}, [](Var x) { return reshape(mean_all(x), {1}); }},
      {"scale", {3, 4}, [](Var x) { return scale(x, -2.5); }},
      {"mul_self", {3, 4}, [](Var x) { return mul(x, x); }},
      {"sub", {3, 4}, [](Var x) { return sub(x, scale(x, 0.3)); }},
      {"standardize", {6, 3}, [](Var x) { return standardize(x, 1e-6); }},
      {"gather", {3, 4}, [](Var x) { return gather(x, {11, 0, 0, 5, 7}, {5}); }},
      {"matmul_self", {3, 3}, [](Var x) { return matmul(x, x); }},
      {"add_bias", {3, 4}, [](Var x) { return add_bias(x, reshape(sum(x, 0), {4})); }},
      {"squared_error", {3, 4}, [](Var x) { return reshape(squared_error(x, scale(x, 0.5)), {1}); }},
      {"stack", {3, 4}, [](Var x) {
         const Var parts[] = {x, elu(x)};
         return stack(parts, 1);
       }},
  };
  for (const OpCase& c : cases) {
    const std::vector<double> theta = random_values(element_count(c.shape), rng, -2.0, 2.0);
    const double err = grad_check(weighted(c.shape, c.op, 7 + GetParam()), theta, 1e-5);
    EXPECT_LT(err, 1e-6) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 5));

TEST(Tape, TwoLayerMlpGradient) {
  Rng rng(11);
  const std::vector<double> x = random_values(4 * 5, rng);
  const TapeFn fn = [&](Tape& tape, Var theta) {
    Var w1 = reshape(gather(theta, [] {
                       std::vector<std::size_t> i(5 * 6);
                       for (std::size_t k = 0; k < i.size(); ++k) i[k] = k;
                       return i;
                     }(),
                            {30}),
                     {5, 6});
    Var rest = gather(theta, {30, 31, 32, 33, 34, 35}, {6, 1});
    Var input = tape.constant(Tensor({4, 5}, x));
    return sum_all(matmul(elu(matmul(input, w1)), rest));
  };
  const std::vector<double> theta = random_values(36, rng);
  EXPECT_LT(grad_check(fn, theta, 1e-5), 1e-6);
}
