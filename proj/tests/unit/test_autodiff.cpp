#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "splitpit/autodiff.hpp"
#include "splitpit/error.hpp"
#include "support.hpp"

namespace splitpit {
namespace {

using ad::Tape;
using ad::Tensor;
using testing::random_tensor;

std::vector<double> values_of(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Autodiff, SoftmaxOfEqualLogitsIsUniform) {
  const Tensor out = ad::softmax(Tensor::vector({0.0, 0.0}));
  EXPECT_EQ(values_of(out), (std::vector<double>{0.5, 0.5}));
}

TEST(Autodiff, MatmulByIdentity) {
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor out = ad::matmul(eye, m);
  EXPECT_EQ(out.shape(), (ad::Shape{2, 2}));
  EXPECT_EQ(values_of(out), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Autodiff, Relu) {
  EXPECT_EQ(values_of(ad::relu(Tensor::vector({-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
}

TEST(Autodiff, BackwardOfSquare) {
  Tape tape;
  const Tensor x = tape.leaf(Tensor::vector({3.0}));
  tape.backward(ad::sum(ad::mul(x, x)));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{6.0}));
}

TEST(Autodiff, BackwardOfSumIsOneForEachAddend) {
  Tape tape;
  const Tensor a = tape.leaf(Tensor::scalar(1.5));
  const Tensor b = tape.leaf(Tensor::scalar(-2.0));
  tape.backward(ad::add(a, b));
  EXPECT_EQ(tape.grad(a), (std::vector<double>{1.0}));
  EXPECT_EQ(tape.grad(b), (std::vector<double>{1.0}));
}

TEST(Autodiff, BackwardRejectsNonScalarLoss) {
  Tape tape;
  const Tensor x = tape.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(ad::relu(x)), ShapeError);
}

TEST(Autodiff, UntrackedTensorsGetNoGradient) {
  Tape tape;
  const Tensor x = tape.leaf(Tensor::vector({1.0, 2.0}));
  const Tensor c = Tensor::vector({5.0, 7.0});
  tape.backward(ad::sum(ad::mul(x, c)));
  EXPECT_FALSE(c.tracked());
  EXPECT_FALSE(tape.has_grad(c));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{5.0, 7.0}));
}

TEST(Autodiff, ValueOnlyOpsRecordNothing) {
  const Tensor out = ad::tanh(ad::matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::vector({3, 4})));
  EXPECT_FALSE(out.tracked());
}

TEST(Autodiff, ShapeErrorNamesOpAndShapes) {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    ad::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("matmul"), std::string::npos) << what;
    EXPECT_NE(what.find("[2,3]"), std::string::npos) << what;
  }
  EXPECT_THROW(ad::add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(ad::mul(Tensor::zeros({2, 2}), Tensor::zeros({4})), ShapeError);
  EXPECT_THROW(ad::concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 3})}), ShapeError);
  EXPECT_THROW(ad::slice(Tensor::zeros({3}), 2, 5), ShapeError);
  EXPECT_THROW(ad::conv1d(Tensor::zeros({2, 3}), Tensor::zeros({9, 1}), Tensor::zeros({1}), 3), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST(Autodiff, EmbeddingRejectsOutOfRangeIds) {
  const std::vector<int> ids{0, 4};
  EXPECT_THROW(ad::embedding(Tensor::zeros({4, 2}), ids), Error);
}

TEST(Autodiff, SoftmaxRowsSumToOneAndLogSoftmaxAgrees) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({4, 7}, rng, -20.0, 20.0);
    const Tensor p = ad::softmax(x);
    const Tensor lp = ad::log_softmax(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        total += p[r * 7 + c];
        EXPECT_NEAR(lp[r * 7 + c], std::log(p[r * 7 + c]), 1e-10);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Autodiff, Conv1dAndMaxPoolByHand) {
  // x rows [1,2], [3,4], [5,6]; one width-2 filter summing everything, bias 1.
  const Tensor x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const Tensor w = Tensor::matrix(4, 1, {1, 1, 1, 1});
  const Tensor out = ad::conv1d(x, w, Tensor::vector({1.0}), 2);
  EXPECT_EQ(out.shape(), (ad::Shape{2, 1}));
  EXPECT_EQ(values_of(out), (std::vector<double>{11.0, 19.0}));
  EXPECT_EQ(values_of(ad::max_pool_time(out)), (std::vector<double>{19.0}));
}

TEST(Autodiff, MaxPoolTiesRouteToFirstRow) {
  Tape tape;
  const Tensor x = tape.leaf(Tensor::matrix(3, 2, {1, 5, 4, 5, 4, 2}));
  tape.backward(ad::sum(ad::max_pool_time(x)));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{0, 1, 1, 0, 0, 0}));
}

TEST(Autodiff, ScatterAddAccumulatesDuplicates) {
  const std::vector<int> idx{2, 0, 2};
  const Tensor out = ad::scatter_add(Tensor::vector({1, 2, 3}), idx, 4);
  EXPECT_EQ(values_of(out), (std::vector<double>{2, 0, 4, 0}));
}

TEST(Autodiff, BackwardDistributesOverAddition) {
  Rng rng(5);
  const Tensor x0 = random_tensor({3, 4}, rng);
  const Tensor w0 = random_tensor({4}, rng);
  auto fa = [](const Tensor& x, const Tensor& w) { return ad::sum(ad::tanh(ad::matmul(x, w))); };
  auto fb = [](const Tensor& x, const Tensor&) { return ad::sum(ad::mul(ad::sigmoid(x), ad::sigmoid(x))); };

  auto grads = [&](auto build) {
    Tape tape;
    const Tensor x = tape.leaf(x0);
    const Tensor w = tape.leaf(w0);
    tape.backward(build(x, w));
    return std::pair{tape.grad(x), tape.grad(w)};
  };
  const auto ga = grads(fa);
  const auto gb = grads([&](const Tensor& x, const Tensor& w) { return ad::add(fb(x, w), ad::scale(ad::sum(w), 0.0)); });
  const auto gab = grads([&](const Tensor& x, const Tensor& w) { return ad::add(fa(x, w), fb(x, w)); });
  for (std::size_t i = 0; i < ga.first.size(); ++i) {
    EXPECT_NEAR(gab.first[i], ga.first[i] + gb.first[i], 1e-14);
  }
  for (std::size_t i = 0; i < ga.second.size(); ++i) {
    EXPECT_NEAR(gab.second[i], ga.second[i] + gb.second[i], 1e-14);
  }
}

TEST(Autodiff, RepeatedForwardBackwardIsBitIdentical) {
  auto run = [] {
    Rng rng(11);
    const Tensor x0 = random_tensor({5, 3}, rng);
    const Tensor w0 = random_tensor({3, 4}, rng);
    Tape tape;
    const Tensor x = tape.leaf(x0);
    const Tensor w = tape.leaf(w0);
    const Tensor loss = ad::mean(ad::log_softmax(ad::matmul(x, w)));
    tape.backward(loss);
    std::vector<double> out = tape.grad(x);
    const auto gw = tape.grad(w);
    out.insert(out.end(), gw.begin(), gw.end());
    out.push_back(loss.item());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// --- Finite-difference checks per op kind ------------------------------------

using Build = std::function<Tensor(std::span<const Tensor>)>;

/// Independent central-difference oracle: evaluates the op value-only and
/// compares with tape gradients of sum(out * w) for a fixed random w.
double fd_error(const Build& op, std::vector<Tensor> inputs, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor probe = op(inputs);
  const Tensor weights = random_tensor(probe.shape(), rng);
  auto objective = [&](std::span<const Tensor> xs) { return ad::sum(ad::mul(op(xs), weights)); };

  Tape tape;
  std::vector<Tensor> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  tape.backward(objective(leaves));

  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::vector<double> analytic = tape.grad(leaves[i]);
    std::vector<double> v = values_of(inputs[i]);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double keep = v[j];
      std::vector<Tensor> shifted = inputs;
      v[j] = keep + eps;
      shifted[i] = Tensor(inputs[i].shape(), v);
      const double plus = objective(shifted).item();
      v[j] = keep - eps;
      shifted[i] = Tensor(inputs[i].shape(), v);
      const double minus = objective(shifted).item();
      v[j] = keep;
      const double numeric = (plus - minus) / (2 * eps);
      worst = std::max(worst, std::abs(numeric - analytic[j]) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

struct OpCase {
  std::string name;
  std::vector<ad::Shape> shapes;
  Build build;
  double lo = -1.0;
  double hi = 1.0;
};

std::vector<OpCase> op_cases() {
  static const std::vector<int> ids{2, 0, 3, 2};
  static const std::vector<int> scatter_ids{1, 4, 1};
  return {
      {"matmul_mm", {{3, 4}, {4, 2}}, [](auto x) { return ad::matmul(x[0], x[1]); }},
      {"matmul_vm", {{4}, {4, 2}}, [](auto x) { return ad::matmul(x[0], x[1]); }},
      {"matmul_mv", {{3, 4}, {4}}, [](auto x) { return ad::matmul(x[0], x[1]); }},
      {"add", {{2, 3}, {2, 3}}, [](auto x) { return ad::add(x[0], x[1]); }},
      {"add_scalar", {{1}, {2, 3}}, [](auto x) { return ad::add(x[0], x[1]); }},
      {"sub", {{2, 3}, {1}}, [](auto x) { return ad::sub(x[0], x[1]); }},
      {"mul", {{5}, {5}}, [](auto x) { return ad::mul(x[0], x[1]); }},
      {"mul_scalar", {{5}, {1}}, [](auto x) { return ad::mul(x[0], x[1]); }},
      {"scale", {{2, 2}}, [](auto x) { return ad::scale(x[0], -2.5); }},
      {"concat", {{2, 3}, {1, 3}, {4, 3}}, [](auto x) { return ad::concat(x); }},
      {"slice", {{5, 2}}, [](auto x) { return ad::slice(x[0], 1, 4); }},
      {"reshape", {{2, 3}}, [](auto x) { return ad::reshape(x[0], {6}); }},
      {"sigmoid", {{6}}, [](auto x) { return ad::sigmoid(x[0]); }},
      {"tanh", {{6}}, [](auto x) { return ad::tanh(x[0]); }},
      {"relu", {{2, 5}}, [](auto x) { return ad::relu(x[0]); }},
      {"log", {{4}}, [](auto x) { return ad::log(x[0]); }, 0.5, 2.0},
      {"softmax_row", {{6}}, [](auto x) { return ad::softmax(x[0]); }},
      {"softmax_rows", {{3, 4}}, [](auto x) { return ad::softmax(x[0]); }},
      {"log_softmax_row", {{6}}, [](auto x) { return ad::log_softmax(x[0]); }},
      {"log_softmax_rows", {{3, 4}}, [](auto x) { return ad::log_softmax(x[0]); }},
      {"embedding", {{5, 3}}, [](auto x) { return ad::embedding(x[0], ids); }},
      {"conv1d", {{6, 3}, {9, 2}, {2}}, [](auto x) { return ad::conv1d(x[0], x[1], x[2], 3); }},
      {"max_pool_time", {{5, 4}}, [](auto x) { return ad::max_pool_time(x[0]); }},
      {"scatter_add", {{3}}, [](auto x) { return ad::scatter_add(x[0], scatter_ids, 6); }},
      {"sum", {{3, 3}}, [](auto x) { return ad::sum(x[0]); }},
      {"mean", {{3, 3}}, [](auto x) { return ad::mean(x[0]); }},
  };
}

TEST(AutodiffGradients, EveryOpMatchesCentralDifferences) {
  std::uint64_t seed = 100;
  for (const OpCase& c : op_cases()) {
    for (int trial = 0; trial < 3; ++trial) {
      Rng rng(++seed);
      std::vector<Tensor> inputs;
      for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng, c.lo, c.hi));
      EXPECT_LT(fd_error(c.build, inputs, seed), 1e-4) << c.name;
      // The library's own checker must agree with the independent oracle.
      Rng wrng(seed);
      const Tensor w = random_tensor(c.build(inputs).shape(), wrng);
      const double lib = ad::grad_check(
          [&](std::span<const Tensor> xs) { return ad::sum(ad::mul(c.build(xs), w)); }, inputs);
      EXPECT_LT(lib, 1e-4) << c.name;
    }
  }
}

TEST(GradCheck, SumOfSquaresIsExactToRoundoff) {
  Rng rng(2);
  const std::vector<Tensor> params{random_tensor({4, 3}, rng, -3, 3), random_tensor({5}, rng, -3, 3)};
  const double err = ad::grad_check(
      [](std::span<const Tensor> p) {
        return ad::add(ad::sum(ad::mul(p[0], p[0])), ad::sum(ad::mul(p[1], p[1])));
      },
      params);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, DetectsAWrongBackwardRule) {
  // Value x^2 with a deliberately wrong VJP of x (instead of 2x).
  auto bad_square = [](const Tensor& x) {
    auto value = std::make_shared<std::vector<double>>();
    for (double v : x.data()) value->push_back(v * v);
    if (!x.tracked()) return Tensor(x.shape(), *value);
    const std::vector<double> xs = values_of(x);
    const Tensor* inputs[] = {&x};
    return x.tape()->record(x.shape(), value, inputs,
                            [xs](std::span<const double> g, std::span<double* const> in) {
                              if (!in[0]) return;
                              for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i] * xs[i];
                            });
  };
  const std::vector<Tensor> params{Tensor::vector({1.0, -2.0, 3.0})};
  const double err = ad::grad_check([&](std::span<const Tensor> p) { return ad::sum(bad_square(p[0])); }, params);
  EXPECT_GT(err, 0.5);
}

TEST(GradCheck, RejectsNonFiniteValues) {
  const std::vector<Tensor> params{Tensor::vector({-1.0})};
  EXPECT_THROW(ad::grad_check([](std::span<const Tensor> p) { return ad::sum(ad::log(p[0])); }, params), Error);
}

TEST(GradCheck, RejectsNonPositiveEps) {
  const std::vector<Tensor> params{Tensor::vector({1.0})};
  EXPECT_THROW(ad::grad_check([](std::span<const Tensor> p) { return ad::sum(p[0]); }, params, 0.0),
               ValidationError);
}

}  // namespace
}  // namespace splitpit
