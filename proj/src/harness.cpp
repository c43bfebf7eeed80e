#include "spgc/harness.hpp"

#include "spgc/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace spgc {

namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, field + ": " + msg);
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where.empty() ? "config" : where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) config_error(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
}

template <typename T>
T read(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(where.empty() ? key : where + "." + key, "wrong type");
  }
}

std::pair<int, int> edge_key(const std::string& key, const std::string& field) {
  const auto dash = key.find('-');
  try {
    if (dash != std::string::npos) return {std::stoi(key.substr(0, dash)), std::stoi(key.substr(dash + 1))};
  } catch (const std::exception&) {
  }
  config_error(field, "edge key \"" + key + "\" is not of the form i-j");
}

std::map<std::pair<int, int>, double> edge_map(const json& j, const std::string& field) {
  if (!j.is_object()) config_error(field, "expected an object of \"i-j\": value");
  std::map<std::pair<int, int>, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number()) config_error(field + "." + it.key(), "expected a number");
    out[edge_key(it.key(), field)] = it.value().get<double>();
  }
  return out;
}

json edge_map_json(const std::map<std::pair<int, int>, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k.first) + "-" + std::to_string(k.second)] = v;
  return j;
}

bool uses_links(Kernel k) {
  return k == Kernel::dyspgc || k == Kernel::pgc || k == Kernel::dlm || k == Kernel::accelerated;
}

bool extra_family(Kernel k) { return k == Kernel::extra || k == Kernel::pg_extra; }
bool dsg_family(Kernel k) { return k == Kernel::dsg || k == Kernel::dsgd; }

OmegaRule resolve_omega_rule(const ExperimentConfig& c) {
  const std::string& rule = c.penalty.omega_rule;
  if (rule == "explicit") return OmegaRule::explicit_values;
  if (rule != "auto") return omega_rule_from_name(rule);
  switch (c.kernel) {
    case Kernel::dyspgc: return OmegaRule::half_lipschitz;
    case Kernel::dlm: return OmegaRule::uniform_max_lipschitz;
    default: return OmegaRule::lipschitz;
  }
}

std::string applicable_condition(const ExperimentConfig& c) {
  switch (c.kernel) {
    case Kernel::dyspgc:
      if (c.activation.dynamic) return c.sigma2 > 0 ? "random-stochastic" : "random-exact";
      return c.sigma2 > 0 ? "static-stochastic" : "static-exact";
    case Kernel::accelerated: return "accelerated";
    case Kernel::dsg:
    case Kernel::dsgd: return "";
    default: return "static-exact";
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, "", {"name", "instance", "topology", "activation", "kernel", "penalty", "sigma2", "eta0",
                         "iterations", "log_every", "seeds", "seed", "gap_rho", "dsg_step", "record_time", "output",
                         "cache_dir", "threads", "preset"});
  ExperimentConfig c;
  if (j.contains("preset")) {
    try {
      c = scenario_preset(j.at("preset").get<std::string>());
    } catch (const json::exception&) {
      config_error("preset", "expected a string");
    }
  }
  c.name = read<std::string>(j, "name", "", c.name);

  if (j.contains("instance")) {
    const json& in = j.at("instance");
    reject_unknown(in, "instance", {"n", "m", "k", "nu", "seed", "file"});
    c.instance.agents = read<int>(in, "n", "instance", c.instance.agents);
    c.instance.dim = read<int>(in, "m", "instance", c.instance.dim);
    c.instance.rows = read<int>(in, "k", "instance", c.instance.rows);
    c.instance.nu = read<double>(in, "nu", "instance", c.instance.nu);
    if (in.contains("seed")) c.instance.seed = read<std::uint64_t>(in, "seed", "instance", 0);
    c.instance.file = read<std::string>(in, "file", "instance", c.instance.file);
  }
  if (j.contains("topology")) {
    const json& t = j.at("topology");
    reject_unknown(t, "topology", {"radius", "seed", "n", "edges", "p"});
    c.topology.radius = read<double>(t, "radius", "topology", c.topology.radius);
    if (t.contains("seed")) c.topology.seed = read<std::uint64_t>(t, "seed", "topology", 0);
    if (t.contains("edges")) {
      if (!t.contains("n")) config_error("topology.n", "required with an edge list");
      c.topology.graph = json{{"n", t.at("n")}, {"edges", t.at("edges")}};
    }
    if (t.contains("p")) {
      c.activation.dynamic = true;
      if (t.at("p").is_number())
        c.activation.p = t.at("p").get<double>();
      else
        c.activation.per_edge = edge_map(t.at("p"), "topology.p");
    }
  }
  if (j.contains("activation")) {
    const json& a = j.at("activation");
    if (a.is_string()) {
      if (a.get<std::string>() != "static") config_error("activation", "expected \"static\" or an object");
      c.activation = ActivationSpec{};
    } else {
      reject_unknown(a, "activation", {"p"});
      if (!a.contains("p")) config_error("activation.p", "required");
      c.activation.dynamic = true;
      if (a.at("p").is_number()) {
        c.activation.p = a.at("p").get<double>();
        c.activation.per_edge.clear();
      } else {
        c.activation.per_edge = edge_map(a.at("p"), "activation.p");
      }
    }
  }
  if (j.contains("kernel")) {
    try {
      c.kernel = kernel_from_name(read<std::string>(j, "kernel", "", ""));
    } catch (const Error& e) {
      config_error("kernel", e.what());
    }
  }
  if (j.contains("penalty")) {
    const json& p = j.at("penalty");
    reject_unknown(p, "penalty", {"rho", "omega", "omega_scale", "beta"});
    if (p.contains("rho")) {
      const json& r = p.at("rho");
      if (r.is_number()) {
        c.penalty.rho = r.get<double>();
      } else if (r.is_object()) {
        c.penalty.rho = read<double>(r, "default", "penalty.rho", c.penalty.rho);
        if (r.contains("edges")) c.penalty.rho_edges = edge_map(r.at("edges"), "penalty.rho.edges");
      } else {
        config_error("penalty.rho", "expected a number or {\"default\", \"edges\"}");
      }
    }
    if (p.contains("omega")) {
      const json& o = p.at("omega");
      if (o.is_string()) {
        c.penalty.omega_rule = o.get<std::string>();
        if (c.penalty.omega_rule != "auto") {
          try {
            omega_rule_from_name(c.penalty.omega_rule);
          } catch (const Error&) {
            config_error("penalty.omega", "unknown rule \"" + c.penalty.omega_rule + "\"");
          }
        }
      } else if (o.is_array()) {
        c.penalty.omega_rule = "explicit";
        c.penalty.omega = read<std::vector<double>>(p, "omega", "penalty", {});
      } else {
        config_error("penalty.omega", "expected a rule name or a list");
      }
    }
    c.penalty.omega_scale = read<double>(p, "omega_scale", "penalty", c.penalty.omega_scale);
    if (p.contains("beta")) c.penalty.beta = read<double>(p, "beta", "penalty", 0.0);
  }
  c.sigma2 = read<double>(j, "sigma2", "", c.sigma2);
  c.eta0 = read<double>(j, "eta0", "", c.eta0);
  c.iterations = read<int>(j, "iterations", "", c.iterations);
  c.log_every = read<int>(j, "log_every", "", c.log_every);
  if (j.contains("seeds")) c.seeds = read<std::vector<std::uint64_t>>(j, "seeds", "", {});
  if (j.contains("seed")) c.seeds = {read<std::uint64_t>(j, "seed", "", 1)};
  if (j.contains("gap_rho")) c.gap_rho = read<double>(j, "gap_rho", "", 0.0);
  if (j.contains("dsg_step")) {
    const json& d = j.at("dsg_step");
    reject_unknown(d, "dsg_step", {"numerator", "offset"});
    c.dsg_numerator = read<double>(d, "numerator", "dsg_step", c.dsg_numerator);
    c.dsg_offset = read<double>(d, "offset", "dsg_step", c.dsg_offset);
  }
  c.record_time = read<bool>(j, "record_time", "", c.record_time);
  c.output = read<std::string>(j, "output", "", c.output);
  c.cache_dir = read<std::string>(j, "cache_dir", "", c.cache_dir);
  c.threads = read<int>(j, "threads", "", c.threads);
  validate(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json in = {{"n", c.instance.agents}, {"m", c.instance.dim}, {"k", c.instance.rows}, {"nu", c.instance.nu}};
  if (c.instance.seed) in["seed"] = *c.instance.seed;
  if (!c.instance.file.empty()) in["file"] = c.instance.file;
  j["instance"] = in;
  json t = {{"radius", c.topology.radius}};
  if (c.topology.seed) t["seed"] = *c.topology.seed;
  if (c.topology.graph) {
    t["n"] = c.topology.graph->at("n");
    t["edges"] = c.topology.graph->at("edges");
  }
  j["topology"] = t;
  if (!c.activation.dynamic)
    j["activation"] = "static";
  else if (!c.activation.per_edge.empty())
    j["activation"] = {{"p", edge_map_json(c.activation.per_edge)}};
  else
    j["activation"] = {{"p", c.activation.p}};
  j["kernel"] = to_string(c.kernel);
  json p;
  if (c.penalty.rho_edges.empty())
    p["rho"] = c.penalty.rho;
  else
    p["rho"] = {{"default", c.penalty.rho}, {"edges", edge_map_json(c.penalty.rho_edges)}};
  if (c.penalty.omega_rule == "explicit")
    p["omega"] = c.penalty.omega;
  else
    p["omega"] = c.penalty.omega_rule;
  p["omega_scale"] = c.penalty.omega_scale;
  if (c.penalty.beta) p["beta"] = *c.penalty.beta;
  j["penalty"] = p;
  j["sigma2"] = c.sigma2;
  j["eta0"] = c.eta0;
  j["iterations"] = c.iterations;
  j["log_every"] = c.log_every;
  j["seeds"] = c.seeds;
  if (c.gap_rho) j["gap_rho"] = *c.gap_rho;
  j["dsg_step"] = {{"numerator", c.dsg_numerator}, {"offset", c.dsg_offset}};
  j["record_time"] = c.record_time;
  j["output"] = c.output;
  j["cache_dir"] = c.cache_dir;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::ConfigError, "cannot read config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ConfigError, path + ": " + ex.what());
  }
  return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
  if (c.instance.file.empty()) {
    if (c.instance.agents < 1) config_error("instance.n", "must be positive");
    if (c.instance.dim < 1) config_error("instance.m", "must be positive");
    if (c.instance.rows < 1) config_error("instance.k", "must be positive");
    if (c.instance.nu < 0) config_error("instance.nu", "must be nonnegative");
  }
  if (!c.topology.graph && !(c.topology.radius > 0 && c.topology.radius <= std::sqrt(2.0)))
    config_error("topology.radius", "must lie in (0, sqrt 2]");
  if (c.activation.dynamic) {
    if (!(c.activation.p > 0 && c.activation.p <= 1)) config_error("activation.p", "must lie in (0, 1]");
    for (const auto& [k, p] : c.activation.per_edge)
      if (!(p > 0 && p <= 1)) config_error("activation.p", "probabilities must lie in (0, 1]");
  }
  if (!(c.penalty.rho > 0)) config_error("penalty.rho", "must be positive");
  for (const auto& [k, r] : c.penalty.rho_edges)
    if (!(r > 0)) config_error("penalty.rho.edges", "must be positive");
  if (c.penalty.omega_rule == "explicit" && c.penalty.omega.empty()) config_error("penalty.omega", "empty list");
  for (double w : c.penalty.omega)
    if (w < 0) config_error("penalty.omega", "entries must be nonnegative");
  if (!(c.penalty.omega_scale > 0)) config_error("penalty.omega_scale", "must be positive");
  if (c.penalty.beta && !(*c.penalty.beta > 0)) config_error("penalty.beta", "must be positive");
  if (c.sigma2 < 0) config_error("sigma2", "must be nonnegative");
  if (c.eta0 < 0) config_error("eta0", "must be nonnegative");
  if (c.iterations < 1) config_error("iterations", "must be positive");
  if (c.log_every < 1) config_error("log_every", "must be positive");
  if (c.seeds.empty()) config_error("seeds", "at least one seed is required");
  if (c.gap_rho && *c.gap_rho < 0) config_error("gap_rho", "must be nonnegative");
  if (!(c.dsg_numerator > 0) || !(c.dsg_offset >= 0)) config_error("dsg_step", "needs numerator > 0, offset >= 0");
  if (c.threads < 0) config_error("threads", "must be nonnegative");

  const std::string k = "kernel " + to_string(c.kernel);
  if (c.kernel != Kernel::dyspgc && c.activation.dynamic)
    config_error("activation", k + " requires the static graph (use dyspgc for random activation)");
  const bool exact_only = c.kernel == Kernel::pgc || c.kernel == Kernel::pgc_sv || c.kernel == Kernel::dlm ||
                          c.kernel == Kernel::dsg;
  if (exact_only && c.sigma2 > 0) config_error("sigma2", k + " requires exact gradients");
  const bool smooth_only = c.kernel == Kernel::extra || c.kernel == Kernel::dlm;
  if (smooth_only && c.instance.file.empty() && c.instance.nu > 0)
    config_error("instance.nu", k + " handles smooth problems only (nu = 0)");
}

// ---------------------------------------------------------------------------
// Presets

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    const std::vector<std::string> base = {"case1",         "case2",         "smooth",        "spgc-sigma0.1",
                                           "spgc-sigma10",  "dynamic-p1.0", "dynamic-p0.5", "dynamic-p0.2"};
    std::vector<std::string> out;
    for (const auto& b : base) {
      out.push_back(b);
      out.push_back(b + "-desk");
    }
    return out;
  }();
  return names;
}

// Curvature scales like (sqrt K + sqrt M)^2: about 2094 at (K, M) = (200, 1000)
// and 105 at (10, 50). Desk presets shrink rho = 1e3 and eta0 = 2500 by that ratio.
static constexpr double kDeskScale = 0.05;

ExperimentConfig scenario_preset(const std::string& requested) {
  std::string name = requested;
  std::optional<Kernel> kernel;
  if (std::find(preset_names().begin(), preset_names().end(), name) == preset_names().end()) {
    // "<preset>-<kernel>" selects a kernel as well.
    for (const auto& kn : kernel_names()) {
      const std::string suffix = "-" + kn;
      if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const std::string stem = name.substr(0, name.size() - suffix.size());
        if (std::find(preset_names().begin(), preset_names().end(), stem) != preset_names().end()) {
          name = stem;
          kernel = kernel_from_name(kn);
          break;
        }
      }
    }
  }
  if (std::find(preset_names().begin(), preset_names().end(), name) == preset_names().end())
    throw Error(ErrorCode::UnknownPreset, "unknown preset \"" + requested + "\"");

  const bool desk = name.size() > 5 && name.compare(name.size() - 5, 5, "-desk") == 0;
  const std::string base = desk ? name.substr(0, name.size() - 5) : name;

  ExperimentConfig c;
  c.name = name;
  c.instance = {16, 1000, 200, 0.1, std::nullopt, {}};
  c.topology.radius = 0.4;
  c.kernel = Kernel::pgc;
  c.penalty.rho = 1e3;
  c.iterations = 2000;
  c.log_every = 10;
  if (base == "case2") {
    c.instance.rows = 50;
    c.instance.nu = 50;
  } else if (base == "smooth") {
    c.instance.nu = 0.0;
  } else if (base.rfind("spgc-sigma", 0) == 0 || base.rfind("dynamic-p", 0) == 0) {
    c.kernel = Kernel::dyspgc;
    c.sigma2 = base == "spgc-sigma10" ? 10.0 : 0.1;
    c.eta0 = 2500.0;
    c.iterations = 10000;
    c.log_every = 50;
    if (base.rfind("dynamic-p", 0) == 0) {
      c.activation.dynamic = true;
      c.activation.p = std::stod(base.substr(9));
    }
  }
  if (desk) {
    c.instance.agents = 8;
    c.instance.dim = 50;
    c.instance.rows = 10;
    c.iterations = 5000;
    c.log_every = 10;
    c.penalty.rho *= kDeskScale;
    c.eta0 *= kDeskScale;
  }
  if (kernel) {
    c.kernel = *kernel;
    if (c.kernel == Kernel::accelerated && c.sigma2 == 0) c.eta0 = 1.0;  // eta^r = sqrt(r + 1)
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Runs

Setup prepare(const ExperimentConfig& c, std::uint64_t seed, bool with_reference) {
  validate(c);
  Setup s{};
  if (!c.instance.file.empty()) {
    s.problem = load_problem(c.instance.file);
  } else {
    Rng rng = make_stream(c.instance.seed.value_or(seed), 0);
    s.problem = generate_lasso<double>(c.instance.agents, c.instance.dim, c.instance.rows, c.instance.nu, rng);
  }
  const int n = s.problem.agent_count();
  if (c.topology.graph) {
    s.topology = topology_from_json(*c.topology.graph);
    if (s.topology.node_count() != n) config_error("topology.n", "does not match the instance agent count");
  } else {
    Rng rng = make_stream(c.topology.seed.value_or(seed), 1);
    s.topology = random_geometric_graph(n, c.topology.radius, rng);
  }
  if (c.activation.dynamic) {
    std::vector<double> p(s.topology.edge_count(), c.activation.p);
    for (const auto& [key, value] : c.activation.per_edge) {
      auto q = s.topology.arc_index(key.first, key.second);
      if (!q) config_error("activation.p", "(" + std::to_string(key.first) + "," + std::to_string(key.second) + ") is not an edge");
      p[s.topology.edge_of_arc(*q)] = value;
    }
    s.activation = ActivationModel::per_edge(s.topology, p);
  } else {
    s.activation = ActivationModel::always_on(s.topology);
  }

  const Vector<double> P = s.problem.lipschitz_vector();
  if (extra_family(c.kernel) || dsg_family(c.kernel)) {
    s.W = metropolis_weights<double>(s.topology);
    s.beta = c.penalty.beta.value_or(extra_beta(s.W, P) * c.penalty.omega_scale);
    const auto mapped = weights_to_penalties(s.topology, s.W, s.beta);
    s.penalties = penalty_config<double>(s.topology, mapped.rho, mapped.omega);
  } else {
    Vector<double> omega;
    const OmegaRule rule = resolve_omega_rule(c);
    if (rule == OmegaRule::explicit_values) {
      if (static_cast<int>(c.penalty.omega.size()) != n) config_error("penalty.omega", "needs one value per agent");
      omega = Eigen::Map<const Vector<double>>(c.penalty.omega.data(), n) * c.penalty.omega_scale;
    } else {
      omega = omega_from_rule(rule, P, c.penalty.omega_scale);
    }
    Vector<double> rho;
    try {
      rho = rho_per_arc<double>(s.topology, c.penalty.rho, c.penalty.rho_edges);
    } catch (const Error& e) {
      config_error("penalty.rho", e.what());
    }
    s.penalties = penalty_config<double>(s.topology, rho, omega);
    s.W = s.penalties.W;
    s.beta = s.penalties.beta.maxCoeff();
  }
  for (ConditionVariant v : kAllConditionVariants) s.verdicts.push_back(check_condition(s.topology, s.penalties, P, v));
  s.checked_condition = applicable_condition(c);
  if (with_reference) {
    s.reference = cached_reference(s.problem, c.cache_dir);
    if (!s.reference.converged)
      std::cerr << "warning: reference solver stopped at " << s.reference.iterations
                << " iterations with residual " << s.reference.residual << '\n';
  }
  return s;
}

Setup prepare(const ExperimentConfig& config, std::uint64_t seed) { return prepare(config, seed, true); }

RepetitionResult run_repetition(const ExperimentConfig& c, std::uint64_t seed, const RecordSink& sink) {
  const auto t0 = std::chrono::steady_clock::now();
  Setup s = prepare(c, seed, true);
  const auto& problem = s.problem;
  const auto& topo = s.topology;
  const double f_star = s.reference.value;

  RepetitionResult out;
  out.seed = seed;
  out.f_star = f_star;
  out.verdicts = s.verdicts;
  out.checked_condition = s.checked_condition;
  for (const auto& v : s.verdicts)
    if (v.name == s.checked_condition && !v.holds)
      std::cerr << "warning: " << c.name << " seed " << seed << ": condition " << v.name
                << " fails (margin " << v.margin << ")\n";

  SolverState<double> st = init_state(problem, topo);
  Rng activation_rng = make_stream(seed, 2);
  Rng noise_rng = make_stream(seed, 3);
  GradientSource<double> source{c.sigma2, &noise_rng};
  const Matrix<double> W_tilde = half_lazy(s.W);
  const Vector<double> beta_vec = Vector<double>::Constant(topo.node_count(), s.beta);
  const bool links = uses_links(c.kernel);
  const ScheduleMode mode = c.eta0 > 0 ? ScheduleMode::stochastic : ScheduleMode::exact;

  RunningAverage<double> x_avg, z_avg;
  x_avg.add(st.x);
  z_avg.add(st.z);
  const auto start = std::chrono::steady_clock::now();
  int active_nodes = topo.node_count(), active_edges = topo.edge_count();

  for (int r = 0; r < c.iterations; ++r) {
    try {
      switch (c.kernel) {
        case Kernel::dyspgc: {
          IterationInputs<double> in;
          ActivationDraw draw;
          if (c.activation.dynamic) {
            draw = sample_activation(topo, s.activation, activation_rng);
            in.draw = &draw;
            active_nodes = draw.active_nodes;
            active_edges = draw.active_edges();
          }
          in.gradient = source;
          in.schedule = schedules<double>(r, mode, c.eta0);
          in.sqrt_schedule = mode == ScheduleMode::stochastic;
          dyspgc_iterate(st, in, problem, topo, s.penalties);
          break;
        }
        case Kernel::pgc:
        case Kernel::dlm: pgc_iterate(st, problem, topo, s.penalties); break;
        case Kernel::pgc_sv: pgc_single_variable_iterate(st, IterationInputs<double>{}, problem, topo, s.penalties); break;
        case Kernel::accelerated: {
          IterationInputs<double> in;
          in.gradient = source;
          in.schedule = schedules<double>(r + 1, ScheduleMode::accelerated, c.eta0);
          accelerated_iterate(st, in, problem, topo, s.penalties);
          break;
        }
        case Kernel::extra:
        case Kernel::pg_extra: {
          IterationInputs<double> in;
          in.gradient = source;
          if (c.kernel == Kernel::extra)
            extra_iterate(st, s.W, W_tilde, beta_vec, in, problem);
          else
            pg_extra_iterate(st, s.W, W_tilde, beta_vec, in, problem);
          break;
        }
        case Kernel::dsg:
        case Kernel::dsgd: {
          const Matrix<double> d = subgradient_direction(problem, st.x, source);
          dsg_iterate(st, s.W, dsg_stepsize(r, c.dsg_numerator, c.dsg_offset), d);
          break;
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "iteration " + std::to_string(r + 1) + ": " + e.what());
    }

    if (links) {
      x_avg.add(st.x);
      z_avg.add(st.z);
    } else {
      x_avg.add(st.x);
      z_avg.add(implied_links(topo, st.x));
    }

    const int it = r + 1;
    if (it % c.log_every != 0 && it != c.iterations) continue;
    const bool acc = c.kernel == Kernel::accelerated;
    const Matrix<double>& x_rep = acc ? st.x_ag : st.x;
    const Matrix<double> z_rep = acc ? st.z_ag : (links ? st.z : implied_links(topo, st.x));
    const double rho_gap = c.gap_rho.value_or(acc ? default_gap_rho(st.delta_ag, st.gamma_ag)
                                                  : default_gap_rho(st.delta, st.gamma));
    TraceRecord rec;
    rec.r = it;
    rec.accuracy = accuracy(problem, x_rep, f_star);
    rec.consensus_error = consensus_error(x_rep);
    rec.gap = acc ? optimality_gap(problem, topo, st.x_ag, st.z_ag, rho_gap, f_star)
                  : optimality_gap(problem, topo, x_avg.mean(), z_avg.mean(), rho_gap, f_star);
    rec.residual = constraint_residual(topo, x_rep, z_rep);
    rec.active_nodes = active_nodes;
    rec.active_edges = active_edges;
    rec.eta = st.last_eta;
    rec.seconds = c.record_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() : 0.0;
    if (!std::isfinite(rec.accuracy) || !std::isfinite(rec.consensus_error) || !std::isfinite(*rec.gap))
      throw Error(ErrorCode::NumericalFailure, "iteration " + std::to_string(it) + ": non-finite metrics");
    out.trace.push_back(rec);
    if (sink) sink(rec);
  }
  const Matrix<double>& x_final = c.kernel == Kernel::accelerated ? st.x_ag : st.x;
  out.final_accuracy = out.trace.back().accuracy;
  out.final_consensus_error = out.trace.back().consensus_error;
  out.final_gap = out.trace.back().gap;
  out.final_worst_agent_accuracy = worst_agent_accuracy(problem, x_final, f_star);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

namespace {

std::string repetition_csv_name(const ExperimentConfig& c, std::uint64_t seed) {
  return c.name + "-" + to_string(c.kernel) + "-seed" + std::to_string(seed) + ".csv";
}

json verdicts_json(const std::vector<ConditionVerdict>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back({{"name", v.name}, {"holds", v.holds}, {"margin", v.margin}});
  return a;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate(c);
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.repetitions.resize(c.seeds.size());
  if (!c.output.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(c.output, ec);
    require(!ec, ErrorCode::IoError, "cannot create output directory " + c.output);
  }

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(c.threads > 0 ? c.threads : hw, static_cast<unsigned>(c.seeds.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(c.seeds.size());
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < c.seeds.size();) {
      try {
        auto rep = run_repetition(c, c.seeds[k]);
        if (!c.output.empty()) {
          rep.csv_path = (std::filesystem::path(c.output) / repetition_csv_name(c, c.seeds[k])).string();
          write_trace_csv(rep.csv_path, rep.trace);
        }
        result.repetitions[k] = std::move(rep);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!c.output.empty()) {
    result.summary_path =
        (std::filesystem::path(c.output) / (c.name + "-" + to_string(c.kernel) + "-summary.json")).string();
    std::ofstream os(result.summary_path);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + result.summary_path);
    os << std::setw(2) << summary_json(c, result) << '\n';
  }
  return result;
}

json summary_json(const ExperimentConfig& c, const ExperimentResult& result) {
  json j;
  j["config"] = config_to_json(c);
  j["wall_seconds"] = result.seconds;
  json reps = json::array();
  double mean_acc = 0;
  for (const auto& r : result.repetitions) {
    json e;
    e["seed"] = r.seed;
    e["csv"] = r.csv_path;
    e["f_star"] = r.f_star;
    e["iterations"] = r.trace.empty() ? 0 : r.trace.back().r;
    e["final_accuracy"] = r.final_accuracy;
    e["final_worst_agent_accuracy"] = r.final_worst_agent_accuracy;
    e["final_consensus_error"] = r.final_consensus_error;
    if (r.final_gap) e["final_gap"] = *r.final_gap;
    e["seconds"] = r.seconds;
    e["checked_condition"] = r.checked_condition;
    e["conditions"] = verdicts_json(r.verdicts);
    reps.push_back(e);
    mean_acc += r.final_accuracy;
  }
  j["repetitions"] = reps;
  if (!result.repetitions.empty()) j["mean_final_accuracy"] = mean_acc / result.repetitions.size();
  return j;
}

// ---------------------------------------------------------------------------
// Comparison and condition reports

std::vector<ComparisonRow> compare_runs(const std::vector<std::string>& labels,
                                        const std::vector<std::vector<TraceRecord>>& traces,
                                        const ComparisonOptions& options) {
  require(traces.size() >= 2, ErrorCode::InvalidArgument, "comparison needs at least two traces");
  require(labels.size() == traces.size(), ErrorCode::DimensionMismatch, "one label per trace");
  for (std::size_t k = 0; k < traces.size(); ++k) {
    require(!traces[k].empty(), ErrorCode::GridMismatch, labels[k] + " is empty");
    bool same = traces[k].size() == traces[0].size();
    for (std::size_t t = 0; same && t < traces[k].size(); ++t) same = traces[k][t].r == traces[0][t].r;
    require(same, ErrorCode::GridMismatch, labels[k] + " is logged on a different iteration grid than " + labels[0]);
  }
  std::vector<ComparisonRow> rows;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto& t = traces[k];
    ComparisonRow row;
    row.label = labels[k];
    row.final_accuracy = t.back().accuracy;
    row.final_consensus_error = t.back().consensus_error;
    for (const auto& rec : t)
      if (rec.accuracy <= options.threshold) {
        row.iterations_to_threshold = rec.r;
        break;
      }
    try {
      row.accuracy_slope = trace_slope(t, TraceMetric::accuracy, options.slope_from, options.slope_to);
    } catch (const Error&) {
    }
    try {
      row.gap_slope = trace_slope(t, TraceMetric::gap, options.slope_from, options.slope_to);
    } catch (const Error&) {
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt(std::optional<double> v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::setprecision(4) << *v;
  return os.str();
}

}  // namespace

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "| run | final accuracy | final consensus error | iterations to threshold | accuracy slope | gap slope |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    os << "| " << r.label << " | " << fmt(r.final_accuracy) << " | " << fmt(r.final_consensus_error) << " | "
       << (r.iterations_to_threshold ? std::to_string(*r.iterations_to_threshold) : "-") << " | "
       << fmt(r.accuracy_slope) << " | " << fmt(r.gap_slope) << " |\n";
  return os.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "run,final_accuracy,final_consensus_error,iterations_to_threshold,accuracy_slope,gap_slope\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.label << ',' << r.final_accuracy << ',' << r.final_consensus_error << ',';
    if (r.iterations_to_threshold) os << *r.iterations_to_threshold;
    os << ',';
    if (r.accuracy_slope) os << *r.accuracy_slope;
    os << ',';
    if (r.gap_slope) os << *r.gap_slope;
    os << '\n';
  }
  return os.str();
}

std::vector<ConditionVerdict> check_conditions(const ExperimentConfig& config, std::uint64_t seed) {
  return prepare(config, seed, false).verdicts;
}

}  // namespace spgc
