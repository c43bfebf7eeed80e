#pragma once

#include "spgc/objective.hpp"
#include "spgc/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace spgc {

/// {"n", "m", "agents": [{"A": [[row]...], "b": [...], "h": {"kind", "weight", "radius"}}], ...}
nlohmann::json problem_to_json(const ConsensusProblem<double>& problem);
ConsensusProblem<double> problem_from_json(const nlohmann::json& j);

/// Little-endian binary dump: magic, version, N, M, then per agent K, A
/// (column major), b and the regularizer triple.
void write_problem_binary(const std::string& path, const ConsensusProblem<double>& problem);
ConsensusProblem<double> read_problem_binary(const std::string& path);

/// Reads either format, chosen by the file extension (.json or anything else).
ConsensusProblem<double> load_problem(const std::string& path);
void save_problem(const std::string& path, const ConsensusProblem<double>& problem);

/// FNV-1a over the binary serialization.
std::uint64_t instance_hash(const ConsensusProblem<double>& problem);

/// On-disk cache of centralized optima, one JSON file per instance hash.
class ReferenceCache {
 public:
  explicit ReferenceCache(std::string directory) : dir_(std::move(directory)) {}

  std::optional<ReferenceSolution<double>> load(std::uint64_t hash) const;
  void store(std::uint64_t hash, const ReferenceSolution<double>& solution) const;
  std::string path_for(std::uint64_t hash) const;

 private:
  std::string dir_;
};

/// Cached reference_optimum; an empty directory disables the cache.
ReferenceSolution<double> cached_reference(const ConsensusProblem<double>& problem, const std::string& cache_dir);

/// Versioned JSON checkpoint of the full solver state; doubles are stored
/// as hex-float strings so a resumed run is bit-identical.
nlohmann::json state_to_json(const SolverState<double>& state);
SolverState<double> state_from_json(const nlohmann::json& j);

}  // namespace spgc
