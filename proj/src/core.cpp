#include "spgc/core.hpp"

namespace spgc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedProx: return "UnsupportedProx";
    case ErrorCode::ScheduleViolation: return "ScheduleViolation";
    case ErrorCode::RequiresStaticGraph: return "RequiresStaticGraph";
    case ErrorCode::RequiresExactGradient: return "RequiresExactGradient";
    case ErrorCode::AsymmetricWeights: return "AsymmetricWeights";
    case ErrorCode::NotRowStochastic: return "NotRowStochastic";
    case ErrorCode::NotDoublyStochastic: return "NotDoublyStochastic";
    case ErrorCode::NonpositiveRho: return "NonpositiveRho";
    case ErrorCode::ZeroOptimum: return "ZeroOptimum";
    case ErrorCode::NonpositiveMetric: return "NonpositiveMetric";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::UnknownKernel: return "UnknownKernel";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t state = seed ^ (0xd1b54a32d192ed03ULL * (stream_id + 1));
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state))};
  return Rng(seq);
}

}  // namespace spgc
