#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace spgc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Per-agent (or per-arc) stack of M-vectors: column k holds block k.
template <typename Scalar>
using Stack = Matrix<Scalar>;

using Rng = std::mt19937_64;

enum class ErrorCode {
  InvalidArgument,
  InvalidEdge,
  DisconnectedGraph,
  InvalidProbability,
  GenerationFailed,
  DimensionMismatch,
  UnsupportedProx,
  ScheduleViolation,
  RequiresStaticGraph,
  RequiresExactGradient,
  AsymmetricWeights,
  NotRowStochastic,
  NotDoublyStochastic,
  NonpositiveRho,
  ZeroOptimum,
  NonpositiveMetric,
  ConfigError,
  UnknownPreset,
  UnknownKernel,
  GridMismatch,
  IoError,
  NumericalFailure,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

// Independent generator for a named randomness source derived from a master seed.
Rng make_stream(std::uint64_t seed, std::uint64_t stream_id);

}  // namespace spgc
