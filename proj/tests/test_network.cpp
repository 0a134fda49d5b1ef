#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "lazyadv/network.hpp"
#include "test_util.hpp"

using namespace lazyadv;
using lazyadv::testing::hand_input;
using lazyadv::testing::hand_network;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double min_abs_preactivation(const Network& net, const Vector& x) {
  return (net.weights().transpose() * x).cwiseAbs().minCoeff();
}

}  // namespace

TEST(Init, ShapesAndDeterminism) {
  Rng a(3), b(3);
  const Network n1 = init_network(a, 4, 6);
  const Network n2 = init_network(b, 4, 6);
  EXPECT_EQ(n1.dim(), 4);
  EXPECT_EQ(n1.width(), 6);
  EXPECT_EQ(n1.weights(), n2.weights());
  EXPECT_EQ(n1.signs(), n2.signs());
  EXPECT_EQ(n1.weights(), n1.initial_weights());
}

TEST(Init, ZeroDimensionsThrow) {
  Rng rng(1);
  EXPECT_THROW(init_network(rng, 0, 3), InvalidDimension);
  EXPECT_THROW(init_network(rng, 3, 0), InvalidDimension);
}

TEST(Init, ColumnSquaredNormMatchesDimension) {
  Rng rng(8);
  const Network net = init_network(rng, 100, 10000);
  const double mean_sq = net.initial_weights().colwise().squaredNorm().mean();
  EXPECT_GE(mean_sq, 95.0);
  EXPECT_LE(mean_sq, 105.0);
}

TEST(Network, RejectsBadTopLayer) {
  Vector a(2);
  a << 1.0, 0.5;
  EXPECT_THROW(Network(a, Matrix::Identity(2, 2)), InvalidArgument);
  EXPECT_THROW(Network(Vector::Ones(3), Matrix::Identity(2, 2)), InvalidDimension);
}

TEST(Forward, HandInstance) {
  const Network net = hand_network();
  EXPECT_NEAR(forward(net, hand_input()), (0.6 - 0.8) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(forward(net, hand_input()), -0.141421, 1e-6);
  EXPECT_EQ(forward(net, Vector::Zero(2)), 0.0);
}

TEST(Forward, DimensionMismatchThrows) {
  const Network net = hand_network();
  EXPECT_THROW(forward(net, Vector::Zero(3)), InvalidArgument);
  EXPECT_THROW(input_gradient(net, Vector::Zero(3)), InvalidArgument);
}

TEST(Forward, BatchMatchesSingle) {
  Rng rng(4);
  const Network net = init_network(rng, 7, 30);
  Matrix X(7, 9);
  for (Index i = 0; i < 9; ++i) X.col(i) = sample_gaussian_vec(rng, 7);
  const Vector fb = forward_batch(net, X);
  const Matrix gb = input_gradient_batch(net, X);
  for (Index i = 0; i < 9; ++i) {
    const Vector x = X.col(i);
    EXPECT_NEAR(fb[i], forward(net, x), 1e-12);
    EXPECT_LE((gb.col(i) - input_gradient(net, x)).norm(), 1e-12);
    const auto [f, g] = forward_and_gradient(net, x);
    EXPECT_EQ(f, forward(net, x));
    EXPECT_EQ(g, input_gradient(net, x));
  }
}

TEST(Forward, PositiveHomogeneity) {
  Rng rng(5);
  const Network net = init_network(rng, 6, 20);
  for (int t = 0; t < 50; ++t) {
    const Vector x = sample_gaussian_vec(rng, 6);
    const double c = 10.0 * rng.uniform() + 1e-3;
    EXPECT_NEAR(forward(net, Vector(c * x)), c * forward(net, x), 1e-10 * (1 + c));
  }
}

TEST(Gradient, HandInstance) {
  const Vector g = input_gradient(hand_network(), hand_input());
  EXPECT_NEAR(g[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(g[1], -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Gradient, AllUnitsInactiveGivesZero) {
  const Network net(Vector::Ones(2), Matrix::Identity(2, 2));
  Vector x(2);
  x << -1.0, -2.0;
  EXPECT_EQ(input_gradient(net, x), Vector::Zero(2));
}

TEST(Gradient, KinkUsesZeroDerivative) {
  const Network net = hand_network();
  Vector x(2);
  x << 0.0, 1.0;
  const Vector g = input_gradient(net, x);
  EXPECT_EQ(g[0], 0.0);
}

TEST(Gradient, NormAtInitIsNearHalfSqrtD) {
  const Index d = 400;
  int inside = 0;
  const int trials = 40;
  for (int s = 0; s < trials; ++s) {
    Rng rng(derive_seed(31, s));
    const Network net = init_network(rng, d, 10000);
    const double gn = input_gradient(net, sample_unit_sphere(rng, d)).norm();
    const double root = std::sqrt(static_cast<double>(d));
    if (gn >= 0.6 * root && gn <= 0.85 * root) ++inside;
  }
  EXPECT_GE(inside, static_cast<int>(std::ceil(0.95 * trials)));
}

TEST(Gradient, PiecewiseLinearAwayFromKinks) {
  Rng rng(12);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const Network net = init_network(rng, 5, 15);
    const Vector x = sample_gaussian_vec(rng, 5);
    const Vector u = sample_unit_sphere(rng, 5);
    const double h = 1e-4;
    const Vector z0 = net.weights().transpose() * x;
    const Vector z1 = net.weights().transpose() * Vector(x + h * u);
    if (((z0.array() > 0) != (z1.array() > 0)).any() || min_abs_preactivation(net, x) == 0) continue;
    ++checked;
    const double fd = (forward(net, Vector(x + h * u)) - forward(net, x)) / h;
    const double an = input_gradient(net, x).dot(u);
    EXPECT_LE(std::abs(fd - an), 1e-9 * std::max(1.0, std::abs(an)) + 1e-10);
  }
  EXPECT_GT(checked, 150);
}

TEST(Loss, Examples) {
  const Network net = hand_network();
  EXPECT_NEAR(logistic_loss(net, Vector(Vector::Zero(2)), 1), std::log(2.0), 1e-15);
  const Network big(Vector::Ones(1), Matrix::Constant(1, 1, 20.0));
  EXPECT_LT(logistic_loss(big, Vector(Vector::Ones(1)), 1), 1e-8);
  EXPECT_THROW(logistic_loss(net, hand_input(), 0), InvalidLabel);
  EXPECT_THROW(logistic_loss(net, hand_input(), 2), InvalidLabel);
}

TEST(Loss, WeightGradientMatchesFiniteDifferences) {
  Rng rng(21);
  const Index d = 5, m = 7, n = 3;
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const Network net = init_network(rng, d, m);
    Matrix X(d, n);
    std::vector<std::int8_t> y(n);
    for (Index i = 0; i < n; ++i) {
      X.col(i) = sample_gaussian_vec(rng, d);
      y[i] = static_cast<std::int8_t>(rng.sign());
    }
    if ((net.weights().transpose() * X).cwiseAbs().minCoeff() <= 1e-3) continue;
    ++checked;
    const Matrix G = weight_gradient(net, X, y);
    const double h = 1e-6;
    for (Index s = 0; s < m; ++s)
      for (Index k = 0; k < d; ++k) {
        Network plus = net, minus = net;
        plus.weights()(k, s) += h;
        minus.weights()(k, s) -= h;
        const double fd = (mean_logistic_loss(plus, X, y) - mean_logistic_loss(minus, X, y)) / (2 * h);
        EXPECT_LE(std::abs(fd - G(k, s)), 1e-5 * std::max(1.0, std::abs(G(k, s))));
      }
  }
  EXPECT_GT(checked, 20);
}

TEST(Loss, WeightGradientValidatesBatch) {
  const Network net = hand_network();
  Matrix X = Matrix::Identity(2, 2);
  std::vector<std::int8_t> one{1};
  EXPECT_THROW(weight_gradient(net, X, one), InvalidArgument);
  std::vector<std::int8_t> bad{1, 3};
  EXPECT_THROW(weight_gradient(net, X, bad), InvalidLabel);
}

TEST(Lazy, DeviationExamples) {
  Rng rng(2);
  Network net = init_network(rng, 6, 4);
  EXPECT_EQ(lazy_deviation(net), 0.0);
  net.weights()(0, 2) += 0.3;
  net.weights()(1, 2) += 0.4;
  EXPECT_NEAR(lazy_deviation(net), 0.5, 1e-15);
}

TEST(Lazy, ProjectionExamples) {
  Rng rng(6);
  Network net = init_network(rng, 3, 5);
  const double V = 0.25;
  net.weights().col(1) += Vector::Constant(3, 0.01);
  const Network inside = project_weights(net, V);
  EXPECT_EQ(inside.weights(), net.weights());

  Network far = net;
  const Vector dir = Vector::Ones(3).normalized();
  far.weights().col(3) = far.initial_weights().col(3) + 2 * V * dir;
  const Network p = project_weights(far, V);
  const Vector moved = p.weights().col(3) - p.initial_weights().col(3);
  EXPECT_NEAR(moved.norm(), V, 1e-15);
  EXPECT_NEAR(moved.normalized().dot(dir), 1.0, 1e-15);
  EXPECT_THROW(project_weights(net, -1.0), InvalidArgument);
}

TEST(Lazy, ProjectionAlwaysFeasible) {
  Rng rng(14);
  for (int t = 0; t < 100; ++t) {
    Network net = init_network(rng, 8, 12);
    net.weights() += 3.0 * rng.uniform() * Matrix::Random(8, 12);
    const double V = rng.uniform();
    project_weights_inplace(net, V);
    const double center = net.initial_weights().colwise().norm().maxCoeff();
    EXPECT_LE(lazy_deviation(net), V + 4 * kEps * (V + center));
  }
}

TEST(Lazy, BudgetConversions) {
  const LazyBudget b = LazyBudget::from_c0(10.0, 100);
  EXPECT_DOUBLE_EQ(b.radius, 1.0);
  EXPECT_DOUBLE_EQ(LazyBudget::from_radius(1.0, 100).C0, 10.0);
  EXPECT_THROW(LazyBudget::from_c0(-1.0, 100), InvalidArgument);
}

TEST(Cone, ScalingIsHomogeneous) {
  Rng rng(19);
  const Network net = init_network(rng, 4, 9);
  EXPECT_THROW(cone_scale(net, 0.0), InvalidArgument);
  EXPECT_THROW(cone_scale(net, -2.0), InvalidArgument);
  const Network same = cone_scale(net, 1.0);
  EXPECT_EQ(same.weights(), net.weights());
  for (double r : {0.1, 10.0}) {
    const Network s = cone_scale(net, r);
    EXPECT_EQ(s.initial_weights(), net.initial_weights());
    const Vector x = sample_gaussian_vec(rng, 4);
    EXPECT_NEAR(forward(s, x), r * forward(net, x), 1e-12 * (1 + r));
  }
}

TEST(Descent, LineSearchReducesLoss) {
  Rng rng(41);
  int descended = 0;
  for (int t = 0; t < 100; ++t) {
    const Network net = init_network(rng, 6, 10);
    Matrix X(6, 8);
    std::vector<std::int8_t> y(8);
    for (Index i = 0; i < 8; ++i) {
      X.col(i) = sample_unit_sphere(rng, 6);
      y[i] = static_cast<std::int8_t>(rng.sign());
    }
    const Matrix G = weight_gradient(net, X, y);
    if (G.norm() == 0) continue;
    const double base = mean_logistic_loss(net, X, y);
    bool found = false;
    for (double step = 1.0; step > 1e-12 && !found; step *= 0.5) {
      Network next = net;
      next.weights() -= step * G;
      found = mean_logistic_loss(next, X, y) < base;
    }
    descended += found;
  }
  EXPECT_EQ(descended, 100);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(77);
  Network net = init_network(rng, 5, 3);
  net.weights()(2, 1) += 0.125;
  const Checkpoint ck{net, 77, 10.0};
  const auto bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  EXPECT_EQ(back.net.weights(), net.weights());
  EXPECT_EQ(back.net.initial_weights(), net.initial_weights());
  EXPECT_EQ(back.net.signs(), net.signs());
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.C0, 10.0);
  EXPECT_EQ(encode_checkpoint(back), bytes);

  const auto dir = lazyadv::testing::scratch_dir("ckpt");
  save_checkpoint(dir / "a.lzck", ck);
  EXPECT_EQ(load_checkpoint(dir / "a.lzck").net.weights(), net.weights());
}

TEST(Checkpoint, CorruptInputThrows) {
  Rng rng(1);
  auto bytes = encode_checkpoint({init_network(rng, 2, 2), 1, 1.0});
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), LengthError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/none.lzck"), IoError);
}
