#pragma once

#include "spgc/core.hpp"
#include "spgc/graph.hpp"
#include "spgc/objective.hpp"
#include "spgc/penalties.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spgc {

enum class Kernel { dyspgc, pgc, pgc_sv, accelerated, extra, pg_extra, dlm, dsg, dsgd };

Kernel kernel_from_name(const std::string& name);
std::string to_string(Kernel kernel);
const std::vector<std::string>& kernel_names();

/// Primal copies, per-arc link variables and duals of the consensus ADMM.
///
/// Stacks store one M-vector per column: x is M x N, z and both dual halves
/// are M x 2E in arc order. lambda = [delta; gamma].
template <typename Scalar>
struct SolverState {
  int r = 0;
  Stack<Scalar> x;
  Stack<Scalar> x_prev;
  Stack<Scalar> z;
  Stack<Scalar> delta;
  Stack<Scalar> gamma;
  Stack<Scalar> zeta;
  Stack<Scalar> grad_prev;
  Stack<Scalar> x_ag;
  Stack<Scalar> z_ag;
  Stack<Scalar> delta_ag;
  Stack<Scalar> gamma_ag;
  Stack<Scalar> mix_sum;
  Scalar last_eta = Scalar(0);
  int active_nodes = 0;
  int active_arcs = 0;

  int dim() const noexcept { return static_cast<int>(x.rows()); }
  int agent_count() const noexcept { return static_cast<int>(x.cols()); }
  int arc_count() const noexcept { return static_cast<int>(z.cols()); }
};

/// x0 = 0, z0 = M+' x0 / 2 = 0, lambda0 = 0 and zero gradient memory.
template <typename Scalar>
SolverState<Scalar> init_state(const ConsensusProblem<Scalar>& problem, const GraphTopology& topology) {
  require(problem.agent_count() == topology.node_count(), ErrorCode::DimensionMismatch,
          "problem and topology disagree on the agent count");
  const int m = problem.dim, n = topology.node_count(), a = topology.arc_count();
  SolverState<Scalar> s;
  s.x = s.x_prev = s.zeta = s.grad_prev = s.x_ag = s.mix_sum = Stack<Scalar>::Zero(m, n);
  s.z = s.delta = s.gamma = s.z_ag = s.delta_ag = s.gamma_ag = Stack<Scalar>::Zero(m, a);
  s.active_nodes = n;
  s.active_arcs = a;
  return s;
}

/// B' lambda = -(delta + gamma), stacked per arc.
template <typename Scalar>
Stack<Scalar> dual_imbalance(const SolverState<Scalar>& s) {
  return -(s.delta + s.gamma);
}

/// z implied by the primal iterate on a static graph: z_ij = (x_i + x_j) / 2.
template <typename Scalar>
Stack<Scalar> implied_links(const GraphTopology& topology, const Stack<Scalar>& x) {
  Stack<Scalar> z(x.rows(), topology.arc_count());
  for (int q = 0; q < topology.arc_count(); ++q) {
    const Arc& a = topology.arc(q);
    z.col(q) = Scalar(0.5) * (x.col(a.tail) + x.col(a.head));
  }
  return z;
}

/// Exact or noisy gradient oracle for one round.
template <typename Scalar>
struct GradientSource {
  Scalar sigma2 = Scalar(0);
  Rng* rng = nullptr;

  bool exact() const noexcept { return sigma2 == Scalar(0); }

  Stack<Scalar> evaluate(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& at) const {
    if (exact()) return smooth_gradient(problem, at);
    require(rng != nullptr, ErrorCode::InvalidArgument, "stochastic gradients need a generator");
    return stochastic_gradient(problem, at, sigma2, *rng).estimate;
  }
};

template <typename Scalar>
struct IterationInputs {
  const ActivationDraw* draw = nullptr;  // nullptr: the whole graph is active
  GradientSource<Scalar> gradient;
  const Stack<Scalar>* gradient_sample = nullptr;  // replaces the source when set
  Schedule<Scalar> schedule;
  bool sqrt_schedule = false;

  bool static_graph() const noexcept { return draw == nullptr || draw->is_full(); }
};

namespace detail {

template <typename Scalar>
Stack<Scalar> sample_gradient(const IterationInputs<Scalar>& in, const ConsensusProblem<Scalar>& problem,
                              const Stack<Scalar>& at) {
  if (in.gradient_sample != nullptr) {
    require(in.gradient_sample->rows() == at.rows() && in.gradient_sample->cols() == at.cols(),
            ErrorCode::DimensionMismatch, "gradient sample shape");
    return *in.gradient_sample;
  }
  return in.gradient.evaluate(problem, at);
}

// Per-agent closed form of the linearized augmented-Lagrangian x-step:
//   c_i x_i + d h_i(x_i) ∋ -g_i + sum_active [rho_q z_q - delta_q] (i tail)
//                                + sum_active [rho_q z_q - gamma_q] (i head) + w_i x_i
//   c_i = w_i + sum of rho over active arcs touching i.
template <typename Scalar>
Stack<Scalar> x_step(const SolverState<Scalar>& s, const Stack<Scalar>& grad, const ActivationDraw* draw,
                     const ConsensusProblem<Scalar>& problem, const GraphTopology& topology,
                     const PenaltyConfig<Scalar>& pen, const Vector<Scalar>& prox_weight) {
  const int n = topology.node_count();
  Stack<Scalar> x_next(s.x.rows(), n);
  Vector<Scalar> rhs(s.x.rows());
  for (int i = 0; i < n; ++i) {
    if (draw != nullptr && !draw->node(i)) {
      x_next.col(i) = s.x.col(i);
      continue;
    }
    Scalar c = prox_weight(i);
    rhs = prox_weight(i) * s.x.col(i) - grad.col(i);
    for (const Incidence& inc : topology.incident(i)) {
      if (draw != nullptr && !draw->arc(inc.out_arc)) continue;
      const Scalar r_out = pen.rho(inc.out_arc), r_in = pen.rho(inc.in_arc);
      rhs += r_out * s.z.col(inc.out_arc) - s.delta.col(inc.out_arc);
      rhs += r_in * s.z.col(inc.in_arc) - s.gamma.col(inc.in_arc);
      c += r_out + r_in;
    }
    require(c > Scalar(0), ErrorCode::NumericalFailure, "degenerate x-step weight at agent " + std::to_string(i));
    x_next.col(i) = problem.nonsmooth[i].prox(c, rhs / c);
  }
  return x_next;
}

// z_q = argmin rho/2 (||x_tail - z + delta/rho||^2 + ||x_head - z + gamma/rho||^2),
// then the dual ascent step, on active arcs only.
template <typename Scalar>
void link_and_dual_step(SolverState<Scalar>& s, const ActivationDraw* draw, const GraphTopology& topology,
                        const PenaltyConfig<Scalar>& pen) {
  for (int q = 0; q < topology.arc_count(); ++q) {
    if (draw != nullptr && !draw->arc(q)) continue;
    const Arc& a = topology.arc(q);
    const Scalar rho = pen.rho(q);
    s.z.col(q) = Scalar(0.5) * (s.x.col(a.tail) + s.x.col(a.head) + (s.delta.col(q) + s.gamma.col(q)) / rho);
    s.delta.col(q) += rho * (s.x.col(a.tail) - s.z.col(q));
    s.gamma.col(q) += rho * (s.x.col(a.head) - s.z.col(q));
  }
}

template <typename Scalar>
void check_penalties(const PenaltyConfig<Scalar>& pen, const GraphTopology& topology) {
  require(pen.rho.size() == topology.arc_count() && pen.omega.size() == topology.node_count(),
          ErrorCode::DimensionMismatch, "penalties do not match the topology");
}

}  // namespace detail

/// One round of the dynamic stochastic proximal-gradient consensus method.
/// Inactive agents and arcs keep their previous values.
template <typename Scalar>
void dyspgc_iterate(SolverState<Scalar>& s, const IterationInputs<Scalar>& in, const ConsensusProblem<Scalar>& problem,
                    const GraphTopology& topology, const PenaltyConfig<Scalar>& pen) {
  detail::check_penalties(pen, topology);
  check_stack(problem, s.x);
  const Scalar eta = in.schedule.eta;
  require(eta >= Scalar(0), ErrorCode::InvalidArgument, "eta must be nonnegative");
  if (in.sqrt_schedule && !in.gradient.exact() && s.r > 0)
    require(eta >= s.last_eta, ErrorCode::ScheduleViolation,
            "eta decreased at iteration " + std::to_string(s.r + 1));

  const ActivationDraw* draw = in.static_graph() ? nullptr : in.draw;
  const Stack<Scalar> grad = detail::sample_gradient(in, problem, s.x);
  const Vector<Scalar> weight = pen.omega.array() + eta;
  Stack<Scalar> x_next = detail::x_step(s, grad, draw, problem, topology, pen, weight);

  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  detail::link_and_dual_step(s, draw, topology, pen);
  s.grad_prev = grad;
  s.last_eta = eta;
  s.active_nodes = draw ? draw->active_nodes : topology.node_count();
  s.active_arcs = draw ? draw->active_arcs : topology.arc_count();
  ++s.r;
}

/// Static graph, exact gradient, eta = 0.
template <typename Scalar>
void pgc_iterate(SolverState<Scalar>& s, const ConsensusProblem<Scalar>& problem, const GraphTopology& topology,
                 const PenaltyConfig<Scalar>& pen) {
  dyspgc_iterate(s, IterationInputs<Scalar>{}, problem, topology, pen);
}

/// The same PGC round written as the single-variable recursion in x and the
/// subgradient memory zeta (no z or lambda).
template <typename Scalar>
void pgc_single_variable_iterate(SolverState<Scalar>& s, const IterationInputs<Scalar>& in,
                                 const ConsensusProblem<Scalar>& problem, const GraphTopology& topology,
                                 const PenaltyConfig<Scalar>& pen) {
  detail::check_penalties(pen, topology);
  check_stack(problem, s.x);
  require(in.static_graph(), ErrorCode::RequiresStaticGraph, "single-variable form needs the static graph");
  require(in.gradient.exact() && in.gradient_sample == nullptr, ErrorCode::RequiresExactGradient,
          "single-variable form needs exact gradients");

  const int n = topology.node_count();
  const Stack<Scalar> grad = smooth_gradient(problem, s.x);
  Stack<Scalar> x_next(s.x.rows(), n);
  Vector<Scalar> mix(s.x.rows()), mix_prev(s.x.rows());
  for (int i = 0; i < n; ++i) {
    const Scalar b = pen.beta(i);
    mix = Scalar(0.5) * pen.omega(i) * s.x.col(i);
    mix_prev = Scalar(0.5) * pen.omega(i) * s.x_prev.col(i);
    for (const Incidence& inc : topology.incident(i)) {
      mix += pen.rho_hat(inc.edge) * s.x.col(inc.neighbor);
      mix_prev += pen.rho_hat(inc.edge) * s.x_prev.col(inc.neighbor);
    }
    const Scalar half_b = b / Scalar(2);
    const Vector<Scalar> c = (s.grad_prev.col(i) - grad.col(i)) / b + mix / half_b -
                             Scalar(0.5) * (s.x_prev.col(i) + mix_prev / half_b);
    x_next.col(i) = problem.nonsmooth[i].prox(b, c + s.x.col(i) + s.zeta.col(i) / b);
    s.zeta.col(i) = b * (s.x.col(i) + c - x_next.col(i)) + s.zeta.col(i);
  }
  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  s.grad_prev = grad;
  ++s.r;
}

/// Accelerated variant: gradient at the md point, proximal weight
/// theta*Omega + eta*I and nu-weighted aggregate sequences.
template <typename Scalar>
void accelerated_iterate(SolverState<Scalar>& s, const IterationInputs<Scalar>& in,
                         const ConsensusProblem<Scalar>& problem, const GraphTopology& topology,
                         const PenaltyConfig<Scalar>& pen) {
  detail::check_penalties(pen, topology);
  check_stack(problem, s.x);
  require(in.static_graph(), ErrorCode::RequiresStaticGraph, "accelerated kernel needs the static graph");
  const Scalar nu = in.schedule.nu, theta = in.schedule.theta, eta = in.schedule.eta;
  require(nu > Scalar(0) && nu <= Scalar(1) && theta > Scalar(0) && theta <= Scalar(1), ErrorCode::InvalidArgument,
          "nu and theta must lie in (0, 1]");

  const Stack<Scalar> md = (Scalar(1) - nu) * s.x_ag + nu * s.x;
  const Stack<Scalar> grad = detail::sample_gradient(in, problem, md);
  const Vector<Scalar> weight = theta * pen.omega.array() + eta;
  Stack<Scalar> x_next = detail::x_step(s, grad, nullptr, problem, topology, pen, weight);

  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  s.x_ag = (Scalar(1) - nu) * s.x_ag + nu * s.x;
  detail::link_and_dual_step(s, nullptr, topology, pen);
  s.z_ag = (Scalar(1) - nu) * s.z_ag + nu * s.z;
  s.delta_ag = (Scalar(1) - nu) * s.delta_ag + nu * s.delta;
  s.gamma_ag = (Scalar(1) - nu) * s.gamma_ag + nu * s.gamma;
  s.grad_prev = grad;
  s.last_eta = eta;
  ++s.r;
}

/// x+ = x + Upsilon^{-1}(G(x_prev) - G(x)) + W x - W~ x_prev, Upsilon = diag(beta) (x) I.
template <typename Scalar>
void extra_iterate(SolverState<Scalar>& s, const Matrix<Scalar>& W, const Matrix<Scalar>& W_tilde,
                   const Vector<Scalar>& beta, const IterationInputs<Scalar>& in,
                   const ConsensusProblem<Scalar>& problem) {
  check_stack(problem, s.x);
  require_symmetric(W);
  require_symmetric(W_tilde);
  require(beta.size() == s.agent_count() && W.rows() == s.agent_count(), ErrorCode::DimensionMismatch,
          "EXTRA parameters do not match the agent count");
  const Stack<Scalar> grad = detail::sample_gradient(in, problem, s.x);
  Stack<Scalar> x_next = s.x + (s.grad_prev - grad) * beta.cwiseInverse().asDiagonal() + s.x * W.transpose() -
                         s.x_prev * W_tilde.transpose();
  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  s.grad_prev = grad;
  ++s.r;
}

/// Proximal EXTRA with the running correction sum_t (W - W~) x^{t-1}.
template <typename Scalar>
void pg_extra_iterate(SolverState<Scalar>& s, const Matrix<Scalar>& W, const Matrix<Scalar>& W_tilde,
                      const Vector<Scalar>& beta, const IterationInputs<Scalar>& in,
                      const ConsensusProblem<Scalar>& problem) {
  check_stack(problem, s.x);
  require_symmetric(W);
  require_symmetric(W_tilde);
  require(beta.size() == s.agent_count() && W.rows() == s.agent_count(), ErrorCode::DimensionMismatch,
          "PG-EXTRA parameters do not match the agent count");
  const Stack<Scalar> grad = detail::sample_gradient(in, problem, s.x);
  s.mix_sum += s.x_prev * (W - W_tilde).transpose();
  const Stack<Scalar> u = -grad * beta.cwiseInverse().asDiagonal() + s.x * W.transpose() + s.mix_sum;
  Stack<Scalar> x_next(s.x.rows(), s.x.cols());
  for (int i = 0; i < s.agent_count(); ++i) x_next.col(i) = problem.nonsmooth[i].prox(beta(i), u.col(i));
  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  s.grad_prev = grad;
  ++s.r;
}

/// Distributed (sub)gradient step x_i+ = sum_j W~[i,j] x_j - step * d_i.
template <typename Scalar>
void dsg_iterate(SolverState<Scalar>& s, const Matrix<Scalar>& W_tilde, Scalar step, const Stack<Scalar>& direction) {
  require_row_stochastic(W_tilde);
  require(step > Scalar(0), ErrorCode::InvalidArgument, "DSG stepsize must be positive");
  require(direction.rows() == s.x.rows() && direction.cols() == s.x.cols() && W_tilde.rows() == s.x.cols(),
          ErrorCode::DimensionMismatch, "DSG direction shape");
  Stack<Scalar> x_next = s.x * W_tilde.transpose() - step * direction;
  s.x_prev = std::move(s.x);
  s.x = std::move(x_next);
  s.grad_prev = direction;
  ++s.r;
}

/// (Stochastic) gradient of g_i plus a subgradient of h_i at each x_i.
template <typename Scalar>
Stack<Scalar> subgradient_direction(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x,
                                    const GradientSource<Scalar>& source) {
  Stack<Scalar> d = source.evaluate(problem, x);
  for (int i = 0; i < problem.agent_count(); ++i) d.col(i) += problem.nonsmooth[i].subgradient(x.col(i));
  return d;
}

/// 0.01 / (r + 5000) by default.
template <typename Scalar>
Scalar dsg_stepsize(int r, Scalar numerator = Scalar(0.01), Scalar offset = Scalar(5000)) {
  return numerator / (static_cast<Scalar>(r) + offset);
}

/// The PGC x-step with lambda^r set to zero (static graph, exact gradient).
template <typename Scalar>
Stack<Scalar> pgc_dual_free_x_step(const SolverState<Scalar>& s, const ConsensusProblem<Scalar>& problem,
                                   const GraphTopology& topology, const PenaltyConfig<Scalar>& pen) {
  SolverState<Scalar> zeroed = s;
  zeroed.delta.setZero();
  zeroed.gamma.setZero();
  return detail::x_step(zeroed, smooth_gradient(problem, s.x), nullptr, problem, topology, pen, pen.omega);
}

/// W~ = (I + W) / 2.
template <typename Scalar>
Matrix<Scalar> half_lazy(const Matrix<Scalar>& W) {
  return Scalar(0.5) * (Matrix<Scalar>::Identity(W.rows(), W.cols()) + W);
}

/// Uniform-parameter PGC preset (h = 0 problems in the DLM setting).
template <typename Scalar>
PenaltyConfig<Scalar> dlm_penalties(const GraphTopology& topology, Scalar rho, Scalar omega) {
  return penalty_config<Scalar>(topology, Vector<Scalar>::Constant(topology.arc_count(), rho),
                                Vector<Scalar>::Constant(topology.node_count(), omega));
}

}  // namespace spgc
