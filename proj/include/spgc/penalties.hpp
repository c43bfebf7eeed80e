#pragma once

#include "spgc/core.hpp"
#include "spgc/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace spgc {

/// Per-arc penalties rho_ij, per-agent proximal weights omega_i and every
/// quantity derived from them.
template <typename Scalar>
struct PenaltyConfig {
  Vector<Scalar> rho;      // per arc, in arc order; also the diagonal of Xi
  Vector<Scalar> omega;    // per agent
  Vector<Scalar> rho_hat;  // per edge, (rho_ij + rho_ji) / 2
  Vector<Scalar> beta;     // per agent, 2 (sum_j rho_hat_ij + omega_i / 2)
  Matrix<Scalar> W;        // N x N row-stochastic mixing matrix

  int agent_count() const noexcept { return static_cast<int>(omega.size()); }

  /// diag(Gamma) = [Xi (x) I_M; Xi (x) I_M], length 4EM.
  Vector<Scalar> gamma_diagonal(int m) const {
    const Eigen::Index arcs = rho.size();
    Vector<Scalar> g(2 * arcs * m);
    for (Eigen::Index q = 0; q < arcs; ++q) {
      g.segment(q * m, m).setConstant(rho(q));
      g.segment((arcs + q) * m, m).setConstant(rho(q));
    }
    return g;
  }

  static Vector<Scalar> kron_identity(const Vector<Scalar>& d, int m) {
    Vector<Scalar> out(d.size() * m);
    for (Eigen::Index k = 0; k < d.size(); ++k) out.segment(k * m, m).setConstant(d(k));
    return out;
  }

  Vector<Scalar> xi_diagonal(int m) const { return kron_identity(rho, m); }
  Vector<Scalar> omega_diagonal(int m) const { return kron_identity(omega, m); }
  Vector<Scalar> upsilon_diagonal(int m) const { return kron_identity(beta, m); }
};

template <typename Scalar>
PenaltyConfig<Scalar> penalty_config(const GraphTopology& topology, const Vector<Scalar>& rho_per_arc,
                                     const Vector<Scalar>& omega) {
  const int n = topology.node_count();
  const int e = topology.edge_count();
  require(rho_per_arc.size() == topology.arc_count(), ErrorCode::DimensionMismatch, "one rho per arc expected");
  require(omega.size() == n, ErrorCode::DimensionMismatch, "one omega per agent expected");
  for (Eigen::Index q = 0; q < rho_per_arc.size(); ++q)
    require(rho_per_arc(q) > Scalar(0), ErrorCode::NonpositiveRho, "rho on arc " + std::to_string(q) + " must be positive");
  for (Eigen::Index i = 0; i < omega.size(); ++i)
    require(omega(i) >= Scalar(0), ErrorCode::InvalidArgument, "omega must be nonnegative");

  PenaltyConfig<Scalar> c;
  c.rho = rho_per_arc;
  c.omega = omega;
  c.rho_hat.resize(e);
  for (int k = 0; k < e; ++k) c.rho_hat(k) = Scalar(0.5) * (rho_per_arc(k) + rho_per_arc(k + e));
  c.beta.resize(n);
  c.W = Matrix<Scalar>::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    Scalar s = Scalar(0);
    for (const Incidence& inc : topology.incident(i)) s += c.rho_hat(inc.edge);
    c.beta(i) = Scalar(2) * (s + omega(i) / Scalar(2));
    require(c.beta(i) > Scalar(0), ErrorCode::InvalidArgument,
            "agent " + std::to_string(i) + " has zero stepsize parameter (isolated with omega = 0)");
    for (const Incidence& inc : topology.incident(i)) c.W(i, inc.neighbor) = Scalar(2) * c.rho_hat(inc.edge) / c.beta(i);
    c.W(i, i) = omega(i) / c.beta(i);
  }
  return c;
}

/// Per-arc rho from a scalar or a map keyed by arc (i, j); a key (i, j)
/// without its reversal sets both directions.
template <typename Scalar>
Vector<Scalar> rho_per_arc(const GraphTopology& topology, Scalar scalar,
                           const std::map<std::pair<int, int>, Scalar>& overrides = {}) {
  Vector<Scalar> rho = Vector<Scalar>::Constant(topology.arc_count(), scalar);
  for (const auto& [key, value] : overrides) {
    auto q = topology.arc_index(key.first, key.second);
    require(q.has_value(), ErrorCode::ConfigError,
            "rho given for non-arc (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
    rho(*q) = value;
    if (!overrides.count({key.second, key.first})) rho(topology.reverse_arc(*q)) = value;
  }
  return rho;
}

enum class OmegaRule { explicit_values, half_lipschitz, lipschitz, uniform_max_lipschitz };

OmegaRule omega_rule_from_name(const std::string& name);
std::string to_string(OmegaRule rule);

template <typename Scalar>
Vector<Scalar> omega_from_rule(OmegaRule rule, const Vector<Scalar>& lipschitz, Scalar factor = Scalar(1)) {
  switch (rule) {
    case OmegaRule::half_lipschitz: return factor * Scalar(0.5) * lipschitz;
    case OmegaRule::lipschitz: return factor * lipschitz;
    case OmegaRule::uniform_max_lipschitz:
      return Vector<Scalar>::Constant(lipschitz.size(), factor * lipschitz.maxCoeff());
    case OmegaRule::explicit_values: break;
  }
  throw Error(ErrorCode::ConfigError, "explicit omega needs a value list");
}

/// M+ (Xi (x) I) M+' restricted to one coordinate (N x N): 2 rho_hat on
/// edges and 2 sum_j rho_hat_ij on the diagonal.
template <typename Scalar>
Matrix<Scalar> signless_weighted_laplacian(const GraphTopology& topology, const PenaltyConfig<Scalar>& config) {
  const int n = topology.node_count();
  Matrix<Scalar> S = Matrix<Scalar>::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (const Incidence& inc : topology.incident(i)) {
      S(i, i) += Scalar(2) * config.rho_hat(inc.edge);
      S(i, inc.neighbor) += Scalar(2) * config.rho_hat(inc.edge);
    }
  return S;
}

// ---------------------------------------------------------------------------
// Convergence conditions

enum class ConditionVariant {
  static_exact,
  static_rate,
  static_stochastic,
  random_exact,
  random_exact_rate,
  random_stochastic,
  accelerated,
};

inline constexpr ConditionVariant kAllConditionVariants[] = {
    ConditionVariant::static_exact,      ConditionVariant::static_rate,       ConditionVariant::static_stochastic,
    ConditionVariant::random_exact,      ConditionVariant::random_exact_rate, ConditionVariant::random_stochastic,
    ConditionVariant::accelerated,
};

std::string to_string(ConditionVariant v);
ConditionVariant condition_variant_from_name(const std::string& name);

inline constexpr double kDefiniteTolerance = 1e-10;

struct ConditionVerdict {
  std::string name;
  bool holds = false;
  double margin = 0.0;
};

/// The tested difference matrix for one coordinate; the full NM x NM
/// matrix is this Kronecker I_M and has the same spectrum.
template <typename Scalar>
Matrix<Scalar> condition_matrix(const GraphTopology& topology, const PenaltyConfig<Scalar>& config,
                                const Vector<Scalar>& lipschitz, ConditionVariant variant) {
  require(lipschitz.size() == topology.node_count(), ErrorCode::DimensionMismatch, "one Lipschitz constant per agent");
  const Matrix<Scalar> Om = config.omega.asDiagonal();
  const Matrix<Scalar> P = lipschitz.asDiagonal();
  switch (variant) {
    case ConditionVariant::static_exact: return Scalar(2) * Om + signless_weighted_laplacian(topology, config) - P;
    case ConditionVariant::static_rate:
    case ConditionVariant::static_stochastic:
      return Scalar(2) * Om + signless_weighted_laplacian(topology, config) - Scalar(2) * P;
    case ConditionVariant::random_exact: return Scalar(2) * Om - P;
    case ConditionVariant::random_exact_rate:
    case ConditionVariant::random_stochastic: return Om - P;
    case ConditionVariant::accelerated:
      return Scalar(4) * Om + signless_weighted_laplacian(topology, config) - Scalar(4) * P;
  }
  return Om;
}

template <typename Scalar>
ConditionVerdict check_condition(const GraphTopology& topology, const PenaltyConfig<Scalar>& config,
                                 const Vector<Scalar>& lipschitz, ConditionVariant variant) {
  const Matrix<Scalar> D = condition_matrix(topology, config, lipschitz, variant);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(D, Eigen::EigenvaluesOnly);
  ConditionVerdict v;
  v.name = to_string(variant);
  v.margin = static_cast<double>(eig.eigenvalues().minCoeff());
  v.holds = v.margin > kDefiniteTolerance;
  return v;
}

// ---------------------------------------------------------------------------
// Weight matrices

/// W[i,j] = 1 / (1 + max(deg_i, deg_j)) on edges, rows completed on the diagonal.
template <typename Scalar>
Matrix<Scalar> metropolis_weights(const GraphTopology& topology) {
  const int n = topology.node_count();
  Matrix<Scalar> W = Matrix<Scalar>::Zero(n, n);
  for (const Edge& e : topology.edges()) {
    const Scalar w = Scalar(1) / Scalar(1 + std::max(topology.degree(e.i), topology.degree(e.j)));
    W(e.i, e.j) = W(e.j, e.i) = w;
  }
  for (int i = 0; i < n; ++i) W(i, i) = Scalar(1) - W.row(i).sum();
  return W;
}

inline constexpr double kWeightTolerance = 1e-12;

template <typename Scalar>
void require_symmetric(const Matrix<Scalar>& W) {
  require(W.rows() == W.cols(), ErrorCode::DimensionMismatch, "weight matrix must be square");
  require((W - W.transpose()).cwiseAbs().maxCoeff() <= Scalar(kWeightTolerance), ErrorCode::AsymmetricWeights,
          "weight matrix is not symmetric");
}

template <typename Scalar>
void require_row_stochastic(const Matrix<Scalar>& W) {
  require(W.rows() == W.cols(), ErrorCode::DimensionMismatch, "weight matrix must be square");
  require(W.minCoeff() >= Scalar(0), ErrorCode::NotRowStochastic, "negative weight");
  const Scalar dev = (W.rowwise().sum().array() - Scalar(1)).abs().maxCoeff();
  require(dev <= Scalar(kWeightTolerance), ErrorCode::NotRowStochastic, "row sums differ from one");
}

template <typename Scalar>
struct PenaltyParameters {
  Vector<Scalar> rho;  // per arc
  Vector<Scalar> omega;
};

/// Inverse map for a symmetric doubly stochastic W and scalar beta:
/// rho_ij = rho_ji = beta W[i,j] / 2 and omega_i = beta W[i,i].
template <typename Scalar>
PenaltyParameters<Scalar> weights_to_penalties(const GraphTopology& topology, const Matrix<Scalar>& W, Scalar beta) {
  const int n = topology.node_count();
  require(W.rows() == n && W.cols() == n, ErrorCode::DimensionMismatch, "W must be N x N");
  require(beta > Scalar(0), ErrorCode::InvalidArgument, "beta must be positive");
  require_symmetric(W);
  require(W.minCoeff() >= Scalar(0), ErrorCode::NotDoublyStochastic, "negative weight");
  const Scalar rows = (W.rowwise().sum().array() - Scalar(1)).abs().maxCoeff();
  const Scalar cols = (W.colwise().sum().array() - Scalar(1)).abs().maxCoeff();
  require(rows <= Scalar(kWeightTolerance) && cols <= Scalar(kWeightTolerance), ErrorCode::NotDoublyStochastic,
          "W is not doubly stochastic");
  for (int i = 0; i < n; ++i) {
    require(W(i, i) > Scalar(0), ErrorCode::InvalidArgument, "W needs a positive diagonal");
    for (int j = 0; j < n; ++j)
      if (i != j)
        require((W(i, j) > Scalar(0)) == topology.arc_index(i, j).has_value(), ErrorCode::InvalidArgument,
                "support of W differs from the graph");
  }
  PenaltyParameters<Scalar> out;
  out.rho.resize(topology.arc_count());
  for (int q = 0; q < topology.arc_count(); ++q) {
    const Arc& a = topology.arc(q);
    out.rho(q) = beta * W(a.tail, a.head) / Scalar(2);
  }
  out.omega = beta * W.diagonal();
  return out;
}

template <typename Scalar>
Matrix<Scalar> penalties_to_weights(const PenaltyConfig<Scalar>& config) {
  return config.W;
}

/// Scalar stepsize parameter for EXTRA-type baselines: beta lambda_min(I + W) > max_i P_i.
template <typename Scalar>
Scalar extra_beta(const Matrix<Scalar>& W, const Vector<Scalar>& lipschitz, Scalar safety = Scalar(1.01)) {
  const Matrix<Scalar> IW = Matrix<Scalar>::Identity(W.rows(), W.cols()) + W;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(Scalar(0.5) * (IW + IW.transpose()), Eigen::EigenvaluesOnly);
  const Scalar lmin = eig.eigenvalues().minCoeff();
  require(lmin > Scalar(0), ErrorCode::NumericalFailure, "I + W is not positive definite");
  return safety * lipschitz.maxCoeff() / lmin;
}

// ---------------------------------------------------------------------------
// Iteration-dependent schedules

enum class ScheduleMode { exact, stochastic, accelerated };

ScheduleMode schedule_mode_from_name(const std::string& name);

template <typename Scalar>
struct Schedule {
  Scalar eta = Scalar(0);    // eta^{r+1}
  Scalar nu = Scalar(1);     // nu^r
  Scalar theta = Scalar(1);  // theta^r
};

/// eta^{r+1} = eta0 sqrt(r + 1) (stochastic and accelerated modes), 0 in
/// exact mode; nu^r = theta^r = 2 / (r + 1) in accelerated mode.
template <typename Scalar>
Schedule<Scalar> schedules(int r, ScheduleMode mode, Scalar eta0 = Scalar(1)) {
  require(r >= 0, ErrorCode::InvalidArgument, "iteration index must be nonnegative");
  Schedule<Scalar> s;
  if (mode != ScheduleMode::exact) s.eta = eta0 * std::sqrt(static_cast<Scalar>(r + 1));
  if (mode == ScheduleMode::accelerated && r >= 1) s.nu = s.theta = Scalar(2) / static_cast<Scalar>(r + 1);
  return s;
}

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  friend bool operator==(const Fraction& a, const Fraction& b) { return a.num * b.den == b.num * a.den; }
  friend Fraction operator*(const Fraction& a, const Fraction& b) {
    Fraction f{a.num * b.num, a.den * b.den};
    const std::int64_t g = std::gcd(f.num, f.den);
    return g ? Fraction{f.num / g, f.den / g} : f;
  }
  friend Fraction operator/(const Fraction& a, const Fraction& b) { return a * Fraction{b.den, b.num}; }
  friend Fraction operator-(const Fraction& a, const Fraction& b) {
    Fraction f{a.num * b.den - b.num * a.den, a.den * b.den};
    const std::int64_t g = std::gcd(f.num, f.den);
    return g ? Fraction{f.num / g, f.den / g} : f;
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Exact nu^r = 2/(r+1) and averaging weight varpi^r = 2/(r(r+1)), r >= 1.
struct AccelerationWeights {
  Fraction nu;
  Fraction varpi;
};

AccelerationWeights acceleration_weights(int r);

}  // namespace spgc
