#pragma once

#include "spgc/core.hpp"
#include "spgc/graph.hpp"
#include "spgc/objective.hpp"

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spgc {

template <typename Scalar>
Vector<Scalar> agent_mean(const Stack<Scalar>& x) {
  return x.rowwise().mean();
}

/// |f(x_hat) - f*| / f* at the agent mean x_hat.
template <typename Scalar>
Scalar accuracy(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x, Scalar f_star) {
  require(f_star != Scalar(0), ErrorCode::ZeroOptimum, "relative accuracy is undefined for f* = 0");
  return std::abs(objective_value(problem, agent_mean(x)) - f_star) / std::abs(f_star);
}

/// max_i |f(x_i) - f*| / f*.
template <typename Scalar>
Scalar worst_agent_accuracy(const ConsensusProblem<Scalar>& problem, const Stack<Scalar>& x, Scalar f_star) {
  require(f_star != Scalar(0), ErrorCode::ZeroOptimum, "relative accuracy is undefined for f* = 0");
  Scalar worst = Scalar(0);
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    worst = std::max(worst, std::abs(objective_value(problem, x.col(i)) - f_star) / std::abs(f_star));
  return worst;
}

/// sqrt(sum_i ||x_i - x_hat||^2) / N.
template <typename Scalar>
Scalar consensus_error(const Stack<Scalar>& x) {
  require(x.cols() >= 1, ErrorCode::DimensionMismatch, "consensus error needs at least one agent");
  return (x.colwise() - agent_mean(x)).norm() / static_cast<Scalar>(x.cols());
}

/// ||A x + B z||: per arc q = (i, j) the blocks x_i - z_q and x_j - z_q.
template <typename Scalar>
Scalar constraint_residual(const GraphTopology& topology, const Stack<Scalar>& x, const Stack<Scalar>& z) {
  require(z.cols() == topology.arc_count() && x.cols() == topology.node_count() && x.rows() == z.rows(),
          ErrorCode::DimensionMismatch, "residual needs an M x N stack and an M x 2E link stack");
  Scalar sq = Scalar(0);
  for (int q = 0; q < topology.arc_count(); ++q) {
    const Arc& a = topology.arc(q);
    sq += (x.col(a.tail) - z.col(q)).squaredNorm() + (x.col(a.head) - z.col(q)).squaredNorm();
  }
  return std::sqrt(sq);
}

/// f(x_bar) - f* + rho ||A x_bar + B z_bar|| with f summed over the agents' own copies.
template <typename Scalar>
Scalar optimality_gap(const ConsensusProblem<Scalar>& problem, const GraphTopology& topology, const Stack<Scalar>& x_bar,
                      const Stack<Scalar>& z_bar, Scalar rho, Scalar f_star) {
  require(rho >= Scalar(0), ErrorCode::InvalidArgument, "gap weight must be nonnegative");
  return stacked_objective(problem, x_bar) - f_star + rho * constraint_residual(topology, x_bar, z_bar);
}

/// 10 (1 + ||lambda||_inf).
template <typename Scalar>
Scalar default_gap_rho(const Stack<Scalar>& delta, const Stack<Scalar>& gamma) {
  Scalar m = Scalar(0);
  if (delta.size() > 0) m = std::max(delta.cwiseAbs().maxCoeff(), gamma.cwiseAbs().maxCoeff());
  return Scalar(10) * (Scalar(1) + m);
}

/// Online mean (w^0 + ... + w^r) / (r + 1).
template <typename Scalar>
class RunningAverage {
 public:
  void add(const Stack<Scalar>& w) {
    if (count_ == 0) {
      mean_ = w;
    } else {
      mean_ += (w - mean_) / static_cast<Scalar>(count_ + 1);
    }
    ++count_;
  }

  const Stack<Scalar>& mean() const { return mean_; }
  long count() const noexcept { return count_; }

 private:
  Stack<Scalar> mean_;
  long count_ = 0;
};

/// Least-squares slope of log(value) against log(r) over r in [r0, r1].
double rate_slope(const std::vector<double>& r, const std::vector<double>& value, double r0, double r1);

struct TraceRecord {
  int r = 0;
  double accuracy = 0.0;
  double consensus_error = 0.0;
  std::optional<double> gap;
  double residual = 0.0;
  int active_nodes = 0;
  int active_edges = 0;
  double eta = 0.0;
  double seconds = 0.0;
};

inline constexpr const char* kTraceHeader = "r,accuracy,consensus_error,gap,residual,active_nodes,active_edges,eta,seconds";

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace);
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& is);
std::vector<TraceRecord> read_trace_csv(const std::string& path);

enum class TraceMetric { accuracy, consensus_error, gap, residual };

TraceMetric trace_metric_from_name(const std::string& name);
double metric_of(const TraceRecord& rec, TraceMetric metric);

/// Slope of a metric over a trace window; records without the metric are skipped.
double trace_slope(const std::vector<TraceRecord>& trace, TraceMetric metric, double r0, double r1);

}  // namespace spgc
