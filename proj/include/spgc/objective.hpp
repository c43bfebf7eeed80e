#pragma once

#include "spgc/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace spgc {

/// g(y) = 1/2 ||A y - b||^2.
template <typename Scalar>
struct LeastSquares {
  Matrix<Scalar> A;
  Vector<Scalar> b;

  int dim() const noexcept { return static_cast<int>(A.cols()); }

  template <typename Derived>
  Scalar value(const Eigen::MatrixBase<Derived>& y) const {
    return Scalar(0.5) * (A * y - b).squaredNorm();
  }

  template <typename Derived>
  Vector<Scalar> gradient(const Eigen::MatrixBase<Derived>& y) const {
    return A.transpose() * (A * y - b);
  }
};

enum class RegularizerKind { zero, l1, ball };

/// Nonsmooth part h with a closed-form prox: 0, weight*||y||_1, or the
/// indicator of {||y|| <= radius}.
template <typename Scalar>
struct Regularizer {
  RegularizerKind kind = RegularizerKind::zero;
  Scalar weight = Scalar(0);
  Scalar radius = Scalar(1);

  static Regularizer zero() { return {}; }
  static Regularizer l1(Scalar w) {
    require(w >= Scalar(0), ErrorCode::InvalidArgument, "l1 weight must be nonnegative");
    return {RegularizerKind::l1, w, Scalar(1)};
  }
  static Regularizer ball(Scalar r) {
    require(r > Scalar(0), ErrorCode::InvalidArgument, "ball radius must be positive");
    return {RegularizerKind::ball, Scalar(0), r};
  }

  template <typename Derived>
  Scalar value(const Eigen::MatrixBase<Derived>& y) const {
    switch (kind) {
      case RegularizerKind::zero: return Scalar(0);
      case RegularizerKind::l1: return weight * y.template lpNorm<1>();
      case RegularizerKind::ball:
        return y.norm() <= radius * (Scalar(1) + Scalar(1e-12)) ? Scalar(0) : std::numeric_limits<Scalar>::infinity();
    }
    return Scalar(0);
  }

  /// argmin_y h(y) + beta/2 ||y - u||^2.
  template <typename Derived>
  Vector<Scalar> prox(Scalar beta, const Eigen::MatrixBase<Derived>& u) const {
    require(beta > Scalar(0), ErrorCode::InvalidArgument, "prox weight must be positive");
    switch (kind) {
      case RegularizerKind::zero: return u;
      case RegularizerKind::l1: {
        const Scalar t = weight / beta;
        return u.unaryExpr([t](Scalar v) { return v > t ? v - t : (v < -t ? v + t : Scalar(0)); });
      }
      case RegularizerKind::ball: {
        const Scalar n = u.norm();
        if (n <= radius) return u;
        return (radius / n) * u;
      }
    }
    return u;
  }

  /// An element of the subdifferential (sign for l1; 0 elsewhere in the domain).
  template <typename Derived>
  Vector<Scalar> subgradient(const Eigen::MatrixBase<Derived>& y) const {
    if (kind == RegularizerKind::l1)
      return y.unaryExpr([w = weight](Scalar v) { return v > 0 ? w : (v < 0 ? -w : Scalar(0)); });
    return Vector<Scalar>::Zero(y.size());
  }
};

/// Builds a regularizer from its family name ("zero", "l1", "ball").
template <typename Scalar>
Regularizer<Scalar> regularizer_from_name(const std::string& name, Scalar parameter) {
  if (name == "zero" || name == "none") return Regularizer<Scalar>::zero();
  if (name == "l1") return Regularizer<Scalar>::l1(parameter);
  if (name == "ball" || name == "l2-ball") return Regularizer<Scalar>::ball(parameter);
  throw Error(ErrorCode::UnsupportedProx, "no closed-form prox registered for \"" + name + "\"");
}

/// sum_i h_i as a single regularizer; fails when the families cannot be merged.
template <typename Scalar>
Regularizer<Scalar> aggregate(const std::vector<Regularizer<Scalar>>& parts) {
  Regularizer<Scalar> out;
  bool any_l1 = false, any_ball = false;
  for (const auto& h : parts) {
    if (h.kind == RegularizerKind::l1) {
      any_l1 = true;
      out.weight += h.weight;
    } else if (h.kind == RegularizerKind::ball) {
      require(!any_ball || h.radius == out.radius, ErrorCode::UnsupportedProx, "balls of different radii");
      any_ball = true;
      out.radius = h.radius;
    }
  }
  require(!(any_l1 && any_ball), ErrorCode::UnsupportedProx, "l1 plus ball indicator has no registered prox");
  out.kind = any_l1 ? RegularizerKind::l1 : (any_ball ? RegularizerKind::ball : RegularizerKind::zero);
  return out;
}

/// ||A A'|| by power iteration on the smaller Gram matrix.
template <typename Scalar>
Scalar spectral_norm_gram(const Matrix<Scalar>& A, Scalar tol = Scalar(1e-10), int max_iters = 10000) {
  if (A.size() == 0) return Scalar(0);
  const bool tall = A.rows() >= A.cols();
  const Eigen::Index n = tall ? A.cols() : A.rows();
  Vector<Scalar> v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = Scalar(1) + Scalar(k % 7) / Scalar(10);
  v.normalize();
  Scalar lambda = Scalar(0);
  for (int it = 0; it < max_iters; ++it) {
    Vector<Scalar> w = tall ? Vector<Scalar>(A.transpose() * (A * v)) : Vector<Scalar>(A * (A.transpose() * v));
    const Scalar next = v.dot(w);
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) return Scalar(0);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

/// Composite consensus objective sum_i g_i(y) + h_i(y) over N agents in R^M.
template <typename Scalar>
struct ConsensusProblem {
  int dim = 0;
  std::vector<LeastSquares<Scalar>> smooth;
  std::vector<Scalar> lipschitz;
  std::vector<Regularizer<Scalar>> nonsmooth;
  std::string description;
  std::optional<Vector<Scalar>> planted;

  int agent_count() const noexcept { return static_cast<int>(smooth.size()); }

  static ConsensusProblem make(std::vector<LeastSquares<Scalar>> g, std::vector<Regularizer<Scalar>> h,
                               std::string description = {}) {
    require(!g.empty() && g.size() == h.size(), ErrorCode::DimensionMismatch, "one g_i and one h_i per agent");
    ConsensusProblem p;
    p.dim = g.front().dim();
    for (const auto& gi : g)
      require(gi.dim() == p.dim && gi.A.rows() == gi.b.size(), ErrorCode::DimensionMismatch,
              "inconsistent least-squares block");
    p.lipschitz.reserve(g.size());
    for (const auto& gi : g) p.lipschitz.push_back(spectral_norm_gram(gi.A));
    p.smooth = std::move(g);
    p.nonsmooth = std::move(h);
    p.description = std::move(description);
    return p;
  }

  Vector<Scalar> lipschitz_vector() const {
    return Eigen::Map<const Vector<Scalar>>(lipschitz.data(), static_cast<Eigen::Index>(lipschitz.size()));
  }
};

template <typename Scalar>
void check_stack(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x) {
  require(x.rows() == problem.dim && x.cols() == problem.agent_count(), ErrorCode::DimensionMismatch,
          "stack must be M x N");
}

/// G(x) = [grad g_1(x_1); ...; grad g_N(x_N)].
template <typename Scalar>
Stack<Scalar> smooth_gradient(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x) {
  check_stack(problem, x);
  Stack<Scalar> g(x.rows(), x.cols());
  for (int i = 0; i < problem.agent_count(); ++i) g.col(i) = problem.smooth[i].gradient(x.col(i));
  return g;
}

template <typename Scalar>
struct StochasticSample {
  Stack<Scalar> estimate;
  Stack<Scalar> noise;
  Scalar sigma2 = Scalar(0);
};

/// Unbiased estimate: exact gradient plus i.i.d. N(0, sigma2 / M) per coordinate.
template <typename Scalar>
StochasticSample<Scalar> stochastic_gradient(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x,
                                             Scalar sigma2, Rng& rng) {
  require(sigma2 >= Scalar(0), ErrorCode::InvalidArgument, "noise power must be nonnegative");
  StochasticSample<Scalar> s;
  s.sigma2 = sigma2;
  s.estimate = smooth_gradient(problem, x);
  s.noise = Stack<Scalar>::Zero(x.rows(), x.cols());
  if (sigma2 > Scalar(0)) {
    std::normal_distribution<double> normal(0.0, std::sqrt(static_cast<double>(sigma2) / problem.dim));
    for (Eigen::Index i = 0; i < s.noise.cols(); ++i)
      for (Eigen::Index k = 0; k < s.noise.rows(); ++k) s.noise(k, i) = static_cast<Scalar>(normal(rng));
    s.estimate += s.noise;
  }
  return s;
}

/// f(y) = sum_i g_i(y) + h_i(y).
template <typename Scalar, typename Derived>
Scalar objective_value(const ConsensusProblem<Scalar>& problem, const Eigen::MatrixBase<Derived>& y) {
  require(y.size() == problem.dim, ErrorCode::DimensionMismatch, "objective point must be an M-vector");
  Scalar f = Scalar(0);
  for (int i = 0; i < problem.agent_count(); ++i) f += problem.smooth[i].value(y) + problem.nonsmooth[i].value(y);
  return f;
}

/// sum_i f_i(x_i) on a per-agent stack.
template <typename Scalar>
Scalar stacked_objective(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x) {
  check_stack(problem, x);
  Scalar f = Scalar(0);
  for (int i = 0; i < problem.agent_count(); ++i)
    f += problem.smooth[i].value(x.col(i)) + problem.nonsmooth[i].value(x.col(i));
  return f;
}

template <typename Scalar>
Vector<Scalar> total_gradient(const ConsensusProblem<Scalar>& problem, const Vector<Scalar>& y) {
  Vector<Scalar> g = Vector<Scalar>::Zero(problem.dim);
  for (const auto& gi : problem.smooth) g += gi.gradient(y);
  return g;
}

template <typename Scalar>
struct ReferenceSolution {
  Vector<Scalar> x;
  Scalar value = Scalar(0);
  Scalar residual = Scalar(0);
  int iterations = 0;
  bool converged = false;
};

/// ||y - prox_{h/L}(y - grad g(y) / L)|| for the centralized problem.
template <typename Scalar>
Scalar prox_gradient_residual(const ConsensusProblem<Scalar>& problem, const Vector<Scalar>& y, Scalar L) {
  const auto h = aggregate(problem.nonsmooth);
  return (y - h.prox(L, y - total_gradient(problem, y) / L)).norm();
}

/// Centralized optimum by FISTA with step 1/sum_i P_i and gradient-based restart.
template <typename Scalar>
ReferenceSolution<Scalar> reference_optimum(const ConsensusProblem<Scalar>& problem, Scalar tol = Scalar(1e-10),
                                            int max_iters = 100000) {
  const auto h = aggregate(problem.nonsmooth);
  const Scalar L = std::accumulate(problem.lipschitz.begin(), problem.lipschitz.end(), Scalar(0));
  require(L > Scalar(0), ErrorCode::NumericalFailure, "zero Lipschitz constant");

  ReferenceSolution<Scalar> out;
  Vector<Scalar> x = Vector<Scalar>::Zero(problem.dim);
  Vector<Scalar> y = x;
  Scalar t = Scalar(1);
  for (int k = 1; k <= max_iters; ++k) {
    Vector<Scalar> x_next = h.prox(L, y - total_gradient(problem, y) / L);
    out.iterations = k;
    if ((x_next - y).norm() <= tol) {
      const Scalar res = prox_gradient_residual(problem, x_next, L);
      if (res <= tol) {
        x = std::move(x_next);
        out.residual = res;
        out.converged = true;
        break;
      }
    }
    if ((y - x_next).dot(x_next - x) > Scalar(0)) {
      t = Scalar(1);
      y = x_next;
    } else {
      const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
      y = x_next + ((t - Scalar(1)) / t_next) * (x_next - x);
      t = t_next;
    }
    x = std::move(x_next);
  }
  if (!out.converged) out.residual = prox_gradient_residual(problem, x, L);
  out.value = objective_value(problem, x);
  out.x = std::move(x);
  return out;
}

/// LASSO benchmark instance: A_i = L_i Q_i, b_i = A_i c + d_i, h_i = (nu/N)||.||_1.
template <typename Scalar>
ConsensusProblem<Scalar> generate_lasso(int agents, int dim, int rows, Scalar nu, Rng& rng) {
  require(agents >= 1 && dim >= 1 && rows >= 1, ErrorCode::InvalidArgument, "N, M, K must be positive");
  require(nu >= Scalar(0), ErrorCode::InvalidArgument, "nu must be nonnegative");
  std::normal_distribution<double> standard(0.0, 1.0);
  std::normal_distribution<double> measurement(0.0, 0.01);
  std::uniform_real_distribution<double> scale(0.0, 10.0);

  const int nnz = static_cast<int>(std::ceil(0.05 * dim));
  std::vector<int> positions(dim);
  std::iota(positions.begin(), positions.end(), 0);
  std::shuffle(positions.begin(), positions.end(), rng);
  Vector<Scalar> c = Vector<Scalar>::Zero(dim);
  for (int k = 0; k < nnz; ++k) c(positions[k]) = static_cast<Scalar>(standard(rng));

  std::vector<LeastSquares<Scalar>> g;
  std::vector<Regularizer<Scalar>> h;
  g.reserve(agents);
  for (int i = 0; i < agents; ++i) {
    const Scalar li = static_cast<Scalar>(scale(rng));
    LeastSquares<Scalar> gi;
    gi.A.resize(rows, dim);
    for (int col = 0; col < dim; ++col)
      for (int row = 0; row < rows; ++row) gi.A(row, col) = li * static_cast<Scalar>(standard(rng));
    gi.b = gi.A * c;
    for (int row = 0; row < rows; ++row) gi.b(row) += static_cast<Scalar>(measurement(rng));
    g.push_back(std::move(gi));
    h.push_back(nu > Scalar(0) ? Regularizer<Scalar>::l1(nu / agents) : Regularizer<Scalar>::zero());
  }
  auto p = ConsensusProblem<Scalar>::make(std::move(g), std::move(h), "lasso");
  p.planted = std::move(c);
  return p;
}

}  // namespace spgc
