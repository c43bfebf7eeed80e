#pragma once

#include "spgc/diagnostics.hpp"
#include "spgc/graph.hpp"
#include "spgc/objective.hpp"
#include "spgc/penalties.hpp"
#include "spgc/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spgc {

struct InstanceSpec {
  int agents = 16;
  int dim = 1000;
  int rows = 200;
  double nu = 0.1;
  std::optional<std::uint64_t> seed;  // unset: the repetition seed
  std::string file;                   // overrides generation when set
};

struct TopologySpec {
  double radius = 0.4;
  std::optional<std::uint64_t> seed;  // unset: the repetition seed
  std::optional<nlohmann::json> graph;  // explicit {"n", "edges"}; must match the agent count
};

struct ActivationSpec {
  bool dynamic = false;
  double p = 1.0;
  std::map<std::pair<int, int>, double> per_edge;
};

struct PenaltySpec {
  double rho = 1e3;
  std::map<std::pair<int, int>, double> rho_edges;
  std::string omega_rule = "auto";  // auto | half-lipschitz | lipschitz | uniform-max-lipschitz | explicit
  std::vector<double> omega;
  double omega_scale = 1.0;
  std::optional<double> beta;  // EXTRA-family scalar stepsize parameter; default from the Lipschitz bound
};

struct ExperimentConfig {
  std::string name = "run";
  InstanceSpec instance;
  TopologySpec topology;
  ActivationSpec activation;
  Kernel kernel = Kernel::pgc;
  PenaltySpec penalty;
  double sigma2 = 0.0;
  double eta0 = 0.0;
  int iterations = 2000;
  int log_every = 10;
  std::vector<std::uint64_t> seeds{1};
  std::optional<double> gap_rho;
  double dsg_numerator = 0.01;
  double dsg_offset = 5000.0;
  bool record_time = true;
  std::string output;     // directory; empty: no files
  std::string cache_dir;  // reference-optimum cache; empty: no cache
  int threads = 0;        // 0: hardware concurrency
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// Checks kernel/feature compatibility; throws ConfigError naming the field.
void validate(const ExperimentConfig& config);

const std::vector<std::string>& preset_names();
ExperimentConfig scenario_preset(const std::string& name);

/// Everything a repetition needs before the first iteration.
struct Setup {
  ConsensusProblem<double> problem;
  GraphTopology topology;
  ActivationModel activation;
  PenaltyConfig<double> penalties;  // PGC family; the mapped parameters for EXTRA family
  Matrix<double> W;                 // mixing matrix of the baselines
  double beta = 0.0;                // scalar stepsize parameter of the EXTRA family
  ReferenceSolution<double> reference;
  std::vector<ConditionVerdict> verdicts;
  std::string checked_condition;  // the variant that applies to this run
};

Setup prepare(const ExperimentConfig& config, std::uint64_t seed);
/// Skips the (possibly slow) centralized reference when with_reference is false.
Setup prepare(const ExperimentConfig& config, std::uint64_t seed, bool with_reference);

struct RepetitionResult {
  std::uint64_t seed = 0;
  std::vector<TraceRecord> trace;
  double f_star = 0.0;
  double final_accuracy = 0.0;
  double final_worst_agent_accuracy = 0.0;
  double final_consensus_error = 0.0;
  std::optional<double> final_gap;
  double seconds = 0.0;
  std::vector<ConditionVerdict> verdicts;
  std::string checked_condition;
  std::string csv_path;
};

using RecordSink = std::function<void(const TraceRecord&)>;

RepetitionResult run_repetition(const ExperimentConfig& config, std::uint64_t seed, const RecordSink& sink = {});

struct ExperimentResult {
  std::vector<RepetitionResult> repetitions;
  double seconds = 0.0;
  std::string summary_path;
};

/// Runs every seed (in parallel), writes one CSV per repetition and a summary JSON.
ExperimentResult run_experiment(const ExperimentConfig& config);

nlohmann::json summary_json(const ExperimentConfig& config, const ExperimentResult& result);

struct ComparisonRow {
  std::string label;
  double final_accuracy = 0.0;
  double final_consensus_error = 0.0;
  std::optional<int> iterations_to_threshold;
  std::optional<double> accuracy_slope;
  std::optional<double> gap_slope;
};

struct ComparisonOptions {
  double threshold = 1e-4;
  double slope_from = 100.0;
  double slope_to = 5000.0;
};

std::vector<ComparisonRow> compare_runs(const std::vector<std::string>& labels,
                                        const std::vector<std::vector<TraceRecord>>& traces,
                                        const ComparisonOptions& options = {});
std::string comparison_markdown(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

/// Every condition variant for the configured penalties on the seed's instance.
std::vector<ConditionVerdict> check_conditions(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace spgc
