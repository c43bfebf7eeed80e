#include "doctest.h"
#include "oracles.hpp"

#include "spgc/objective.hpp"

#include <cmath>

using namespace spgc;
using oracle::Mat;
using oracle::Vec;

TEST_CASE("gradient at the origin and against finite differences") {
  Rng rng = make_stream(1, 0);
  const auto p = generate_lasso<double>(3, 6, 4, 0.1, rng);
  const Mat G0 = smooth_gradient(p, Mat(Mat::Zero(6, 3)));
  for (int i = 0; i < 3; ++i) CHECK((G0.col(i) + p.smooth[i].A.transpose() * p.smooth[i].b).norm() <= 1e-12);

  std::mt19937_64 r(2);
  std::normal_distribution<double> z(0, 1);
  for (int k = 0; k < 20; ++k) {
    const Vec x = Vec::NullaryExpr(6, [&] { return z(r); });
    for (int i = 0; i < 3; ++i) {
      const auto& gi = p.smooth[i];
      const Vec fd = oracle::fd_gradient([&](const Vec& y) { return gi.value(y); }, x, 1e-5);
      const Vec an = gi.gradient(x);
      REQUIRE((fd - an).norm() <= 1e-6 * std::max(1.0, an.norm()));
    }
  }
  CHECK_THROWS_AS(smooth_gradient(p, Mat(Mat::Zero(5, 3))), Error);
}

TEST_CASE("Lipschitz constants") {
  std::mt19937_64 r(3);
  std::normal_distribution<double> z(0, 1);
  for (int k = 0; k < 10; ++k) {
    const int rows = 2 + k % 7, cols = 3 + (k * 5) % 11;
    const Mat A = Mat::NullaryExpr(rows, cols, [&] { return z(r); });
    Eigen::SelfAdjointEigenSolver<Mat> eig(A * A.transpose());
    const double exact = eig.eigenvalues().maxCoeff();
    CHECK(std::abs(spectral_norm_gram(A) - exact) <= 1e-8 * exact);
  }
  Rng rng = make_stream(4, 0);
  const auto p = generate_lasso<double>(2, 8, 5, 0.0, rng);
  for (int k = 0; k < 100; ++k) {
    const Vec y = Vec::NullaryExpr(8, [&] { return z(r); }), v = Vec::NullaryExpr(8, [&] { return z(r); });
    for (int i = 0; i < 2; ++i)
      REQUIRE((p.smooth[i].gradient(y) - p.smooth[i].gradient(v)).norm() <=
              p.lipschitz[i] * (y - v).norm() * (1 + 1e-10));
  }
}

TEST_CASE("stochastic oracle moments") {
  Rng rng = make_stream(5, 0);
  const auto p = generate_lasso<double>(2, 4, 3, 0.0, rng);
  const Mat x = Mat::Zero(4, 2);
  const auto exact = stochastic_gradient(p, x, 0.0, rng);
  CHECK(exact.estimate == smooth_gradient(p, x));
  for (double sigma2 : {0.1, 10.0}) {
    Rng noise = make_stream(7, 3);
    const int samples = 100000;
    double second = 0.0;
    Vec mean = Vec::Zero(4);
    for (int k = 0; k < samples; ++k) {
      const auto s = stochastic_gradient(p, x, sigma2, noise);
      second += s.noise.col(0).squaredNorm();
      mean += s.noise.col(0);
    }
    second /= samples;
    mean /= samples;
    CHECK(std::abs(second - sigma2) <= 0.05 * sigma2);
    CHECK(mean.cwiseAbs().maxCoeff() <= 3 * std::sqrt(sigma2 / 4) / std::sqrt(double(samples)) * 1.5);
  }
}

TEST_CASE("prox operators") {
  const auto zero = Regularizer<double>::zero();
  Vec u(2);
  u << 3, 4;
  CHECK(zero.prox(2.0, u) == u);
  const auto ball = Regularizer<double>::ball(1.0);
  CHECK((ball.prox(1.0, u) - Vec((Vec(2) << 0.6, 0.8).finished())).norm() <= 1e-15);
  const auto l1 = Regularizer<double>::l1(1.0);
  CHECK(l1.prox(1.0, Vec::Constant(1, 2.0))(0) == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 r(6);
  std::uniform_real_distribution<double> ub(0.2, 5.0), uu(-4, 4);
  const auto l1w = Regularizer<double>::l1(0.7);
  const auto ball1 = Regularizer<double>::ball(1.3);
  for (int k = 0; k < 50; ++k) {
    const double beta = ub(r), v = uu(r);
    const double grid = oracle::grid_prox([](double y) { return 0.7 * std::abs(y); }, beta, v, -5, 5);
    REQUIRE(std::abs(l1w.prox(beta, Vec::Constant(1, v))(0) - grid) <= 1e-6);
    const double gb = oracle::grid_prox([](double y) { return 0.0 * y; }, beta,
                                        std::clamp(v, -1.3, 1.3), -1.3, 1.3);
    REQUIRE(std::abs(ball1.prox(beta, Vec::Constant(1, v))(0) - gb) <= 1e-6);
  }
  CHECK_THROWS_AS(regularizer_from_name<double>("huber", 1.0), Error);
  try {
    regularizer_from_name<double>("huber", 1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedProx);
  }
}

TEST_CASE("LASSO generator shapes") {
  Rng rng = make_stream(8, 0);
  const auto p = generate_lasso<double>(4, 40, 10, 0.5, rng);
  CHECK(p.agent_count() == 4);
  CHECK(p.dim == 40);
  CHECK(p.smooth[0].A.rows() == 10);
  REQUIRE(p.planted.has_value());
  CHECK((p.planted->array() != 0).count() == 2);
  for (const auto& h : p.nonsmooth) {
    CHECK(h.kind == RegularizerKind::l1);
    CHECK(h.weight == doctest::Approx(0.125));
  }
  double half = 0;
  for (const auto& g : p.smooth) half += 0.5 * g.b.squaredNorm();
  CHECK(objective_value(p, Vec(Vec::Zero(40))) == doctest::Approx(half));
  Rng again = make_stream(8, 0);
  const auto q = generate_lasso<double>(4, 40, 10, 0.5, again);
  CHECK(q.smooth[3].A == p.smooth[3].A);
  CHECK(q.smooth[3].b == p.smooth[3].b);
}

TEST_CASE("reference optimum") {
  Rng rng = make_stream(9, 0);
  const auto p = generate_lasso<double>(2, 5, 8, 0.0, rng);
  const auto ref = reference_optimum(p);
  CHECK(ref.converged);
  Mat AtA = Mat::Zero(5, 5);
  Vec Atb = Vec::Zero(5);
  for (const auto& g : p.smooth) {
    AtA += g.A.transpose() * g.A;
    Atb += g.A.transpose() * g.b;
  }
  const Vec ls = AtA.ldlt().solve(Atb);
  CHECK((ref.x - ls).norm() <= 1e-8);
  CHECK(total_gradient(p, ref.x).norm() <= 1e-8);

  LeastSquares<double> g1;
  g1.A = Mat::Ones(1, 1);
  g1.b = Vec::Constant(1, 2.0);
  const auto one = ConsensusProblem<double>::make({g1}, {Regularizer<double>::l1(1.0)});
  const auto r1 = reference_optimum(one);
  CHECK(r1.x(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r1.value == doctest::Approx(1.5).epsilon(1e-9));

  Rng rng2 = make_stream(10, 0);
  const auto lasso = generate_lasso<double>(3, 30, 8, 0.3, rng2);
  const auto rl = reference_optimum(lasso);
  CHECK(rl.converged);
  CHECK(rl.residual <= 1e-10);
  CHECK(rl.value <= objective_value(lasso, Vec(Vec::Zero(30))));
  CHECK(rl.value <= objective_value(lasso, *lasso.planted));
  CHECK(rl.value == objective_value(lasso, rl.x));

  std::mt19937_64 r(1);
  std::normal_distribution<double> z(0, 1);
  for (int k = 0; k < 10; ++k) {
    const Vec a = Vec::NullaryExpr(30, [&] { return z(r); }), b = Vec::NullaryExpr(30, [&] { return z(r); });
    CHECK(objective_value(lasso, Vec(0.5 * a + 0.5 * b)) <=
          0.5 * objective_value(lasso, a) + 0.5 * objective_value(lasso, b) + 1e-10);
  }
}
