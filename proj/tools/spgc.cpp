// Command-line driver: run experiments, compare traces, report parameter conditions.

#include "spgc/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace spgc;

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownPreset:
    case ErrorCode::UnknownKernel:
    case ErrorCode::GridMismatch:
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidEdge:
    case ErrorCode::InvalidProbability:
    case ErrorCode::DisconnectedGraph:
    case ErrorCode::RequiresStaticGraph:
    case ErrorCode::RequiresExactGradient:
      return kConfigExit;
    default:
      return kNumericalExit;
  }
}

struct ConfigSource {
  std::string preset;
  std::string config;
  std::string kernel;
  std::vector<std::uint64_t> seeds;
  int iterations = 0;
  int log_every = 0;
  int threads = -1;
  std::string out;
  std::string cache;

  void attach(CLI::App* app, bool run_options) {
    auto* p = app->add_option("--preset", preset, "scenario preset (" + std::to_string(preset_names().size()) +
                                                       " names, see --list-presets)");
    auto* c = app->add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    p->excludes(c);
    app->add_option("--kernel", kernel, "override the kernel");
    app->add_option("--seed,--seeds", seeds, "repetition seed(s)");
    if (!run_options) return;
    app->add_option("--iterations", iterations, "override the iteration budget");
    app->add_option("--log-every", log_every, "override the log cadence");
    app->add_option("--threads", threads, "worker threads (0: all cores)");
    app->add_option("--out", out, "output directory (default $SPGC_OUTPUT_DIR)");
    app->add_option("--cache", cache, "reference-optimum cache directory");
  }

  ExperimentConfig resolve() const {
    if (preset.empty() && config.empty()) throw Error(ErrorCode::ConfigError, "give --preset or --config");
    ExperimentConfig c = config.empty() ? scenario_preset(preset) : load_config(config);
    if (!kernel.empty()) {
      try {
        c.kernel = kernel_from_name(kernel);
      } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, std::string("kernel: ") + e.what());
      }
    }
    if (!seeds.empty()) c.seeds = seeds;
    if (iterations > 0) c.iterations = iterations;
    if (log_every > 0) c.log_every = log_every;
    if (threads >= 0) c.threads = threads;
    if (!out.empty()) {
      c.output = out;
    } else if (c.output.empty()) {
      if (const char* env = std::getenv("SPGC_OUTPUT_DIR")) c.output = env;
    }
    if (!cache.empty()) c.cache_dir = cache;
    validate(c);
    return c;
  }
};

void print_verdicts(const std::vector<ConditionVerdict>& verdicts, const std::string& applies) {
  for (const auto& v : verdicts)
    std::cout << std::left << std::setw(20) << v.name << (v.holds ? "holds  " : "FAILS  ") << "margin "
              << std::setprecision(6) << v.margin << (v.name == applies ? "   <- applies to this run" : "") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed proximal-gradient consensus simulator"};
  app.require_subcommand(0, 1);
  bool list_presets = false;
  app.add_flag("--list-presets", list_presets, "print preset names and exit");

  ConfigSource run_src;
  auto* run = app.add_subcommand("run", "run an experiment and write traces");
  run_src.attach(run, true);
  bool quiet = false;
  run->add_flag("-q,--quiet", quiet, "no per-repetition summary");

  std::vector<std::string> traces;
  std::string table;
  std::vector<std::string> labels;
  ComparisonOptions copt;
  auto* cmp = app.add_subcommand("compare", "tabulate two or more trace CSVs");
  cmp->add_option("traces", traces, "trace CSV files")->required()->expected(2, -1)->check(CLI::ExistingFile);
  cmp->add_option("--out", table, "output table (.csv or Markdown)");
  cmp->add_option("--labels", labels, "row labels (default: file stems)");
  cmp->add_option("--threshold", copt.threshold, "accuracy threshold for iterations-to-threshold");
  cmp->add_option("--from", copt.slope_from, "slope window start");
  cmp->add_option("--to", copt.slope_to, "slope window end");

  ConfigSource cond_src;
  auto* cond = app.add_subcommand("check-conditions", "evaluate every parameter condition for a config");
  cond_src.attach(cond, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }
  if (list_presets) {
    for (const auto& n : preset_names()) std::cout << n << '\n';
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kConfigExit;
  }

  try {
    if (*run) {
      const ExperimentConfig c = run_src.resolve();
      const ExperimentResult res = run_experiment(c);
      if (!quiet) {
        for (const auto& r : res.repetitions) {
          std::cout << c.name << " " << to_string(c.kernel) << " seed " << r.seed << ": accuracy "
                    << std::setprecision(4) << r.final_accuracy << ", consensus error " << r.final_consensus_error;
          if (r.final_gap) std::cout << ", gap " << *r.final_gap;
          std::cout << " (" << r.seconds << " s)";
          if (!r.csv_path.empty()) std::cout << " -> " << r.csv_path;
          std::cout << '\n';
        }
        if (!res.summary_path.empty()) std::cout << "summary: " << res.summary_path << '\n';
      }
    } else if (*cmp) {
      if (labels.empty())
        for (const auto& t : traces) labels.push_back(std::filesystem::path(t).stem().string());
      if (labels.size() != traces.size()) throw Error(ErrorCode::ConfigError, "labels: one per trace");
      std::vector<std::vector<TraceRecord>> data;
      for (const auto& t : traces) data.push_back(read_trace_csv(t));
      const auto rows = compare_runs(labels, data, copt);
      const bool csv = std::filesystem::path(table).extension() == ".csv";
      const std::string text = csv ? comparison_csv(rows) : comparison_markdown(rows);
      if (table.empty()) {
        std::cout << text;
      } else {
        std::ofstream os(table);
        if (!os) throw Error(ErrorCode::IoError, "cannot write " + table);
        os << text;
      }
    } else if (*cond) {
      const ExperimentConfig c = cond_src.resolve();
      const Setup s = prepare(c, c.seeds.front(), false);
      std::cout << c.name << " (" << to_string(c.kernel) << ", seed " << c.seeds.front() << ")\n";
      print_verdicts(s.verdicts, s.checked_condition);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalExit;
  }
  return 0;
}
