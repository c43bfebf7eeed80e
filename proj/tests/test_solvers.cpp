#include "doctest.h"
#include "oracles.hpp"

#include "spgc/diagnostics.hpp"
#include "spgc/solvers.hpp"

using namespace spgc;
using oracle::Mat;
using oracle::Vec;

namespace {

Vec random_vec(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec::NullaryExpr(n, [&] { return u(rng); });
}

PenaltyConfig<double> random_penalties(const GraphTopology& g, const ConsensusProblem<double>& p, std::mt19937_64& rng) {
  const Vec omega = p.lipschitz_vector().cwiseProduct(random_vec(g.node_count(), 0.6, 1.2, rng));
  return penalty_config<double>(g, random_vec(g.arc_count(), 0.5, 3.0, rng), omega);
}

oracle::DenseState dense_of(const SolverState<double>& s) {
  oracle::DenseState d;
  d.x = oracle::flatten(s.x);
  d.z = oracle::flatten(s.z);
  d.lam.resize(s.delta.size() + s.gamma.size());
  d.lam << oracle::flatten(s.delta), oracle::flatten(s.gamma);
  return d;
}

double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("init_state is zero and dual balanced") {
  const auto g = GraphTopology::build(3, {{0, 1}, {1, 2}});
  std::mt19937_64 rng(1);
  const auto p = oracle::random_problem(3, 2, 3, 0.0, rng);
  const auto s = init_state(p, g);
  CHECK(s.arc_count() == 4);
  CHECK(s.z.cols() == 4);
  CHECK(s.delta.cols() == 4);
  CHECK(max_abs(dual_imbalance(s)) == 0.0);
  CHECK(max_abs(s.z - implied_links(g, s.x)) == 0.0);
  const auto p4 = oracle::random_problem(4, 2, 3, 0.0, rng);
  CHECK_THROWS_AS(init_state(p4, g), Error);
}

TEST_CASE("decomposed x-step matches the dense augmented-Lagrangian solve") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 3, m = 1 + trial % 2;
    const bool l1 = trial % 2 == 1;
    const auto g = oracle::random_connected(n, 0.5, rng);
    const auto p = oracle::random_problem(n, m, 3, l1 ? 0.3 : 0.0, rng);
    const auto pen = random_penalties(g, p, rng);
    const auto model = ActivationModel::uniform(g, 0.6);
    auto s = init_state(p, g);
    Rng act = make_stream(trial, 2), noise = make_stream(trial, 3);
    for (int r = 0; r < 30; ++r) {
      const auto draw = sample_activation(g, model, act);
      const auto sample = stochastic_gradient(p, s.x, 0.05, noise);
      IterationInputs<double> in;
      in.draw = &draw;
      in.gradient_sample = &sample.estimate;
      in.schedule.eta = 0.5 * std::sqrt(r + 1.0);
      const auto expect = oracle::dense_admm_step(g, m, pen.rho, pen.omega, in.schedule.eta, p,
                                                  oracle::flatten(sample.estimate), dense_of(s), draw.arc_active,
                                                  draw.node_active);
      dyspgc_iterate(s, in, p, g, pen);
      const auto got = dense_of(s);
      REQUIRE(max_abs(got.x - expect.x) <= 1e-10);
      REQUIRE(max_abs(got.z - expect.z) <= 1e-10);
      REQUIRE(max_abs(got.lam - expect.lam) <= 1e-10);
      REQUIRE(max_abs(dual_imbalance(s)) <= 1e-13);
    }
  }
}

TEST_CASE("inactive agents and arcs are frozen") {
  const auto g = GraphTopology::build(3, {{0, 1}, {1, 2}});
  std::mt19937_64 rng(3);
  const auto p = oracle::random_problem(3, 2, 4, 0.0, rng);
  const auto pen = random_penalties(g, p, rng);
  auto s = init_state(p, g);
  pgc_iterate(s, p, g, pen);
  pgc_iterate(s, p, g, pen);
  const auto before = s;
  const auto draw = ActivationDraw::from_edges(g, {1, 0});  // agent 2 isolated
  IterationInputs<double> in;
  in.draw = &draw;
  dyspgc_iterate(s, in, p, g, pen);
  CHECK(max_abs(s.x.col(2) - before.x.col(2)) == 0.0);
  CHECK(max_abs(s.z.col(1) - before.z.col(1)) == 0.0);
  CHECK(max_abs(s.z.col(3) - before.z.col(3)) == 0.0);
  CHECK(max_abs(s.delta.col(1) - before.delta.col(1)) == 0.0);
  CHECK(max_abs(s.gamma.col(3) - before.gamma.col(3)) == 0.0);
  CHECK(max_abs(s.x.col(0) - before.x.col(0)) > 0.0);
  CHECK(s.active_nodes == 2);
  CHECK(s.active_arcs == 2);
}

TEST_CASE("full activation reproduces the static path") {
  std::mt19937_64 rng(8);
  const auto g = oracle::random_connected(5, 0.4, rng);
  const auto p = oracle::random_problem(5, 3, 4, 0.2, rng);
  const auto pen = random_penalties(g, p, rng);
  auto a = init_state(p, g), b = a;
  const auto model = ActivationModel::always_on(g);
  Rng act = make_stream(1, 2);
  for (int r = 0; r < 50; ++r) {
    const auto draw = sample_activation(g, model, act);
    IterationInputs<double> in;
    in.draw = &draw;
    dyspgc_iterate(a, in, p, g, pen);
    pgc_iterate(b, p, g, pen);
  }
  CHECK(a.x == b.x);
  CHECK(a.z == b.z);
  CHECK(a.delta == b.delta);
}

TEST_CASE("static exact runs keep z on the implied links") {
  std::mt19937_64 rng(4);
  const auto g = oracle::random_connected(6, 0.3, rng);
  const auto p = oracle::random_problem(6, 3, 4, 0.1, rng);
  const auto pen = random_penalties(g, p, rng);
  auto s = init_state(p, g);
  for (int r = 0; r < 100; ++r) {
    pgc_iterate(s, p, g, pen);
    REQUIRE(max_abs(s.z - implied_links(g, s.x)) <= 1e-10);
    REQUIRE(max_abs(dual_imbalance(s)) <= 1e-13);
  }
}

TEST_CASE("single-variable form tracks the matrix form") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1 + trial % 4, m = 1 + trial % 3;
    const auto g = n == 1 ? GraphTopology::build(1, {}) : oracle::random_connected(n, 0.5, rng);
    const auto p = oracle::random_problem(n, m, 3, trial % 2 ? 0.4 : 0.0, rng);
    const auto pen = random_penalties(g, p, rng);
    auto a = init_state(p, g), b = a;
    for (int r = 0; r < 100; ++r) {
      pgc_iterate(a, p, g, pen);
      pgc_single_variable_iterate(b, IterationInputs<double>{}, p, g, pen);
      REQUIRE(max_abs(a.x - b.x) <= 1e-9);
    }
  }
}

TEST_CASE("single-variable form on one agent is proximal gradient descent") {
  std::mt19937_64 rng(2);
  const auto g = GraphTopology::build(1, {});
  const auto p = oracle::random_problem(1, 3, 5, 0.5, rng);
  const auto pen = penalty_config<double>(g, Vec(0), Vec::Constant(1, 1.5 * p.lipschitz[0]));
  auto s = init_state(p, g);
  Vec y = Vec::Zero(3);
  const double w = pen.omega(0);
  for (int r = 0; r < 40; ++r) {
    pgc_single_variable_iterate(s, IterationInputs<double>{}, p, g, pen);
    y = p.nonsmooth[0].prox(w, y - p.smooth[0].gradient(y) / w);
    REQUIRE(max_abs(s.x.col(0) - y) <= 1e-12);
  }
}

TEST_CASE("single-variable form rejects dynamic graphs and noisy gradients") {
  const auto g = GraphTopology::build(3, {{0, 1}, {1, 2}});
  std::mt19937_64 rng(1);
  const auto p = oracle::random_problem(3, 2, 3, 0.0, rng);
  const auto pen = random_penalties(g, p, rng);
  auto s = init_state(p, g);
  const auto draw = ActivationDraw::from_edges(g, {1, 0});
  IterationInputs<double> in;
  in.draw = &draw;
  try {
    pgc_single_variable_iterate(s, in, p, g, pen);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RequiresStaticGraph);
  }
  Rng noise(1);
  IterationInputs<double> noisy;
  noisy.gradient = {0.1, &noise};
  CHECK_THROWS_AS(pgc_single_variable_iterate(s, noisy, p, g, pen), Error);
  CHECK_THROWS_AS(accelerated_iterate(s, in, p, g, pen), Error);
}

TEST_CASE("EXTRA and PG-EXTRA reproduce PGC under the weight mapping") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 5;
    const bool l1 = trial % 2 == 1;
    const auto g = oracle::random_connected(n, 0.4, rng);
    const auto p = oracle::random_problem(n, 3, 4, l1 ? 0.3 : 0.0, rng);
    const Mat W = metropolis_weights<double>(g);
    const double beta = extra_beta(W, p.lipschitz_vector());
    const auto mapped = weights_to_penalties(g, W, beta);
    const auto pen = penalty_config<double>(g, mapped.rho, mapped.omega);
    REQUIRE(max_abs(pen.W - W) <= 1e-14);
    REQUIRE(max_abs(pen.beta.array() - beta) <= 1e-10 * beta);
    const Mat Wt = half_lazy(W);
    const Vec b = Vec::Constant(n, beta);
    auto a = init_state(p, g), e = a;
    for (int r = 0; r < 200; ++r) {
      pgc_iterate(a, p, g, pen);
      if (l1)
        pg_extra_iterate(e, W, Wt, b, IterationInputs<double>{}, p);
      else
        extra_iterate(e, W, Wt, b, IterationInputs<double>{}, p);
      REQUIRE(max_abs(a.x - e.x) <= 1e-9);
    }
  }
}

TEST_CASE("EXTRA on one node is gradient descent and rejects asymmetric weights") {
  std::mt19937_64 rng(6);
  const auto p = oracle::random_problem(1, 2, 4, 0.0, rng);
  const Mat I = Mat::Identity(1, 1);
  const double beta = 2.0 * p.lipschitz[0];
  auto s = init_state(p, GraphTopology::build(1, {}));
  Vec y = Vec::Zero(2);
  for (int r = 0; r < 30; ++r) {
    extra_iterate(s, I, I, Vec(Vec::Constant(1, beta)), IterationInputs<double>{}, p);
    y -= p.smooth[0].gradient(y) / beta;
    REQUIRE(max_abs(s.x.col(0) - y) <= 1e-12);
  }
  const auto q = oracle::random_problem(2, 2, 4, 0.0, rng);
  auto s2 = init_state(q, GraphTopology::build(2, {{0, 1}}));
  Mat A(2, 2);
  A << 0.5, 0.5, 0.4, 0.6;
  try {
    extra_iterate(s2, A, half_lazy(A), Vec(Vec::Constant(2, 1.0)), IterationInputs<double>{}, q);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AsymmetricWeights);
  }
}

TEST_CASE("dual-free PGC step is the DSG update") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 4;
    const auto g = oracle::random_connected(n, 0.5, rng);
    const auto p = oracle::random_problem(n, 3, 4, 0.0, rng);
    const Mat W = metropolis_weights<double>(g);
    const double beta = extra_beta(W, p.lipschitz_vector());
    const auto mapped = weights_to_penalties(g, W, beta);
    const auto pen = penalty_config<double>(g, mapped.rho, mapped.omega);
    auto s = init_state(p, g);
    for (int r = 0; r < 5 + trial; ++r) pgc_iterate(s, p, g, pen);
    const Mat x_free = pgc_dual_free_x_step(s, p, g, pen);
    auto d = s;
    dsg_iterate(d, half_lazy(W), 1.0 / beta, smooth_gradient(p, s.x));
    CHECK(max_abs(x_free - d.x) <= 1e-12);
  }
}

TEST_CASE("DSG basics") {
  std::mt19937_64 rng(2);
  const auto p = oracle::random_problem(1, 2, 3, 0.0, rng);
  auto s = init_state(p, GraphTopology::build(1, {}));
  s.x.setOnes();
  const Mat d = Mat::Constant(2, 1, 0.5);
  dsg_iterate(s, Mat(Mat::Identity(1, 1)), 0.1, d);
  CHECK(max_abs(s.x.array() - 0.95) <= 1e-15);
  Mat bad(1, 1);
  bad << 0.9;
  try {
    dsg_iterate(s, bad, 0.1, d);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotRowStochastic);
  }
  CHECK(dsg_stepsize<double>(0) == doctest::Approx(0.01 / 5000));

  // f = 0: pure averaging reaches consensus.
  const auto g = GraphTopology::build(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}});
  const Mat Wt = half_lazy(metropolis_weights<double>(g));
  auto c = init_state(oracle::random_problem(5, 2, 2, 0.0, rng), g);
  c.x = Mat::NullaryExpr(2, 5, [&] { return std::normal_distribution<double>(0, 1)(rng); });
  for (int r = 0; r < 500; ++r) dsg_iterate(c, Wt, 1e-3, Mat(Mat::Zero(2, 5)));
  CHECK(consensus_error(c.x) <= 1e-8);
}

TEST_CASE("accelerated kernel first step and averaging") {
  std::mt19937_64 rng(13);
  const auto g = oracle::random_connected(4, 0.5, rng);
  const auto p = oracle::random_problem(4, 2, 3, 0.0, rng);
  const auto pen = random_penalties(g, p, rng);
  auto s = init_state(p, g);
  IterationInputs<double> in;
  in.schedule = schedules<double>(1, ScheduleMode::accelerated, 0.0);
  CHECK(in.schedule.nu == 1.0);
  accelerated_iterate(s, in, p, g, pen);
  CHECK(s.x_ag == s.x);
  CHECK(s.z_ag == s.z);
  CHECK(max_abs(s.grad_prev - smooth_gradient(p, Mat(Mat::Zero(2, 4)))) == 0.0);
  auto plain = init_state(p, g);
  pgc_iterate(plain, p, g, pen);
  CHECK(max_abs(plain.x - s.x) <= 1e-14);
  in.schedule = schedules<double>(2, ScheduleMode::accelerated, 0.0);
  const Mat x_ag = s.x_ag, x1 = s.x;
  accelerated_iterate(s, in, p, g, pen);
  CHECK(max_abs(s.x_ag - ((1 - in.schedule.nu) * x_ag + in.schedule.nu * s.x)) <= 1e-15);
  CHECK(max_abs(s.x_prev - x1) == 0.0);
}

TEST_CASE("acceleration weight identities hold exactly") {
  for (int r = 2; r <= 10000; ++r) {
    const auto w = acceleration_weights(r), prev = acceleration_weights(r - 1);
    REQUIRE(w.varpi == (Fraction{1, 1} - w.nu) * prev.varpi);
    REQUIRE(w.nu / w.varpi == Fraction{r, 1});
  }
}

TEST_CASE("stochastic runs reject a decreasing eta") {
  const auto g = GraphTopology::build(2, {{0, 1}});
  std::mt19937_64 rng(1);
  const auto p = oracle::random_problem(2, 2, 3, 0.0, rng);
  const auto pen = random_penalties(g, p, rng);
  auto s = init_state(p, g);
  Rng noise(3);
  IterationInputs<double> in;
  in.gradient = {0.1, &noise};
  in.sqrt_schedule = true;
  in.schedule.eta = 2.0;
  dyspgc_iterate(s, in, p, g, pen);
  in.schedule.eta = 1.0;
  try {
    dyspgc_iterate(s, in, p, g, pen);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScheduleViolation);
  }
}

TEST_CASE("kernel names round trip") {
  for (const auto& name : kernel_names()) CHECK(to_string(kernel_from_name(name)) == name);
  CHECK_THROWS_AS(kernel_from_name("admm"), Error);
}
