#include "doctest.h"
#include "oracles.hpp"

#include "spgc/diagnostics.hpp"
#include "spgc/solvers.hpp"

#include <sstream>

using namespace spgc;
using oracle::Mat;
using oracle::Vec;

TEST_CASE("consensus error") {
  Mat x(1, 2);
  x << 1, -1;
  CHECK(consensus_error(x) == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(consensus_error(Mat(Mat::Constant(3, 4, 2.5))) == 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0, 1);
  const Mat y = Mat::NullaryExpr(3, 5, [&] { return z(rng); });
  Mat perm(3, 5);
  const int order[] = {3, 0, 4, 1, 2};
  for (int k = 0; k < 5; ++k) perm.col(k) = y.col(order[k]);
  CHECK(consensus_error(perm) == doctest::Approx(consensus_error(y)).epsilon(1e-14));
  const Mat shifted = y.colwise() + Vec::Constant(3, 7.0);
  CHECK(consensus_error(shifted) == doctest::Approx(consensus_error(y)).epsilon(1e-12));
}

TEST_CASE("accuracy and gap") {
  Rng rng = make_stream(2, 0);
  const auto p = generate_lasso<double>(3, 10, 6, 0.2, rng);
  const auto ref = reference_optimum(p);
  const Mat at_opt = ref.x.replicate(1, 3);
  CHECK(accuracy(p, at_opt, ref.value) <= 1e-12);
  const double f0 = objective_value(p, Vec(Vec::Zero(10)));
  CHECK(accuracy(p, Mat(Mat::Zero(10, 3)), ref.value) == doctest::Approx((f0 - ref.value) / ref.value));
  CHECK_THROWS_AS(accuracy(p, at_opt, 0.0), Error);
  CHECK(worst_agent_accuracy(p, at_opt, ref.value) <= 1e-12);

  const auto g = GraphTopology::build(3, {{0, 1}, {1, 2}});
  const Mat z_opt = implied_links(g, at_opt);
  CHECK(constraint_residual(g, at_opt, z_opt) <= 1e-15);
  CHECK(std::abs(optimality_gap(p, g, at_opt, z_opt, 10.0, ref.value)) <= 1e-9);

  std::mt19937_64 r(3);
  std::normal_distribution<double> nz(0, 1);
  const Mat x = Mat::NullaryExpr(10, 3, [&] { return nz(r); });
  const Mat zz = Mat::NullaryExpr(10, 4, [&] { return nz(r); });
  const double plain = stacked_objective(p, x) - ref.value;
  CHECK(optimality_gap(p, g, x, zz, 0.0, ref.value) == doctest::Approx(plain));
  CHECK(optimality_gap(p, g, x, zz, 5.0, ref.value) >= plain);

  // Residual against the dense A x + B z.
  Mat A1, A2;
  oracle::dense_incidence(g, 10, A1, A2);
  const Vec xv = oracle::flatten(x), zv = oracle::flatten(zz);
  const double dense = std::sqrt((A1 * xv - zv).squaredNorm() + (A2 * xv - zv).squaredNorm());
  CHECK(constraint_residual(g, x, zz) == doctest::Approx(dense).epsilon(1e-13));
}

TEST_CASE("accuracy is invariant to rescaling the data of a smooth problem") {
  Rng rng = make_stream(11, 0);
  auto p = generate_lasso<double>(3, 6, 4, 0.0, rng);
  auto scaled = p;
  for (auto& g : scaled.smooth) g.b *= 2.0;
  const double f1 = reference_optimum(p).value, f2 = reference_optimum(scaled).value;
  std::mt19937_64 r(1);
  std::normal_distribution<double> z(0, 1);
  const Mat x = Mat::NullaryExpr(6, 3, [&] { return z(r); });
  CHECK(accuracy(p, x, f1) == doctest::Approx(accuracy(scaled, Mat(2.0 * x), f2)).epsilon(1e-8));
}

TEST_CASE("running average") {
  RunningAverage<double> avg;
  avg.add(Mat::Constant(2, 2, 3.0));
  avg.add(Mat::Constant(2, 2, 3.0));
  CHECK(avg.mean() == Mat::Constant(2, 2, 3.0));
  RunningAverage<double> two;
  two.add(Mat::Constant(1, 1, 1.0));
  two.add(Mat::Constant(1, 1, 4.0));
  CHECK(two.mean()(0, 0) == 2.5);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0, 1);
  RunningAverage<double> online;
  Mat batch = Mat::Zero(3, 2);
  for (int k = 0; k < 1000; ++k) {
    const Mat w = Mat::NullaryExpr(3, 2, [&] { return z(rng); });
    online.add(w);
    batch += w;
  }
  batch /= 1000.0;
  CHECK((online.mean() - batch).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rate slopes") {
  std::vector<double> r, inv, isq;
  for (int k = 1; k <= 1000; ++k) {
    r.push_back(k);
    inv.push_back(1.0 / k);
    isq.push_back(1.0 / std::sqrt(double(k)));
  }
  CHECK(std::abs(rate_slope(r, inv, 1, 1000) + 1) <= 1e-6);
  CHECK(std::abs(rate_slope(r, isq, 10, 500) + 0.5) <= 1e-6);
  inv[20] = 0.0;
  try {
    rate_slope(r, inv, 1, 1000);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonpositiveMetric);
  }
}

TEST_CASE("trace CSV round trip") {
  std::vector<TraceRecord> t(3);
  for (int k = 0; k < 3; ++k) {
    t[k].r = k + 1;
    t[k].accuracy = 1.0 / 3 / (k + 1);
    t[k].consensus_error = 1e-7 * k;
    if (k != 1) t[k].gap = 0.1 * k + 1e-17;
    t[k].residual = 2.0 / 7;
    t[k].active_nodes = 4;
    t[k].active_edges = 3 - k;
    t[k].eta = std::sqrt(2.0) * k;
    t[k].seconds = 0.001 * k;
  }
  std::stringstream ss;
  write_trace_csv(ss, t);
  CHECK(ss.str().rfind(kTraceHeader, 0) == 0);
  const auto back = read_trace_csv(ss);
  REQUIRE(back.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(back[k].r == t[k].r);
    CHECK(back[k].accuracy == t[k].accuracy);
    CHECK(back[k].gap.has_value() == t[k].gap.has_value());
    if (t[k].gap) CHECK(*back[k].gap == *t[k].gap);
    CHECK(back[k].eta == t[k].eta);
    CHECK(back[k].active_edges == t[k].active_edges);
  }
  std::stringstream bad("r,acc\n1,2\n");
  CHECK_THROWS_AS(read_trace_csv(bad), Error);
}
