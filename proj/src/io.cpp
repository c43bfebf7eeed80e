#include "spgc/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace spgc {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'G', 'C', 'I', 'N', 'S', 'T'};
constexpr std::uint32_t kBinaryVersion = 1;
constexpr int kCheckpointVersion = 1;

const char* kind_name(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::zero: return "zero";
    case RegularizerKind::l1: return "l1";
    case RegularizerKind::ball: return "ball";
  }
  return "zero";
}

Regularizer<double> regularizer_from_json(const nlohmann::json& h) {
  const std::string kind = h.at("kind").get<std::string>();
  if (kind == "zero") return Regularizer<double>::zero();
  if (kind == "l1") return Regularizer<double>::l1(h.at("weight").get<double>());
  if (kind == "ball") return Regularizer<double>::ball(h.at("radius").get<double>());
  return regularizer_from_name<double>(kind, 0.0);
}

void serialize(std::ostream& os, const ConsensusProblem<double>& p) {
  auto put_u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_f64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  os.write(kMagic, sizeof kMagic);
  put_u32(kBinaryVersion);
  put_u32(static_cast<std::uint32_t>(p.agent_count()));
  put_u32(static_cast<std::uint32_t>(p.dim));
  for (int i = 0; i < p.agent_count(); ++i) {
    const auto& g = p.smooth[i];
    put_u32(static_cast<std::uint32_t>(g.A.rows()));
    os.write(reinterpret_cast<const char*>(g.A.data()), static_cast<std::streamsize>(g.A.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(g.b.data()), static_cast<std::streamsize>(g.b.size() * sizeof(double)));
    put_u32(static_cast<std::uint32_t>(p.nonsmooth[i].kind));
    put_f64(p.nonsmooth[i].weight);
    put_f64(p.nonsmooth[i].radius);
  }
}

ConsensusProblem<double> deserialize(std::istream& is, const std::string& what) {
  auto fail = [&](const std::string& msg) { throw Error(ErrorCode::IoError, what + ": " + msg); };
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) fail("truncated");
    return v;
  };
  auto get_f64 = [&] {
    double v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) fail("truncated");
    return v;
  };
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) fail("not an instance file");
  if (get_u32() != kBinaryVersion) fail("unsupported version");
  const std::uint32_t n = get_u32(), m = get_u32();
  if (n == 0 || m == 0 || n > (1u << 20) || m > (1u << 24)) fail("implausible dimensions");
  std::vector<LeastSquares<double>> g(n);
  std::vector<Regularizer<double>> h(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t k = get_u32();
    g[i].A.resize(k, m);
    g[i].b.resize(k);
    if (!is.read(reinterpret_cast<char*>(g[i].A.data()), static_cast<std::streamsize>(g[i].A.size() * sizeof(double))))
      fail("truncated");
    if (!is.read(reinterpret_cast<char*>(g[i].b.data()), static_cast<std::streamsize>(g[i].b.size() * sizeof(double))))
      fail("truncated");
    const std::uint32_t kind = get_u32();
    const double weight = get_f64(), radius = get_f64();
    if (kind > 2) fail("unknown regularizer");
    h[i].kind = static_cast<RegularizerKind>(kind);
    h[i].weight = weight;
    h[i].radius = radius;
  }
  return ConsensusProblem<double>::make(std::move(g), std::move(h), "loaded");
}

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const nlohmann::json& j) {
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(end != nullptr && *end == '\0', ErrorCode::IoError, "bad number \"" + s + "\" in checkpoint");
  return v;
}

nlohmann::json matrix_to_json(const Matrix<double>& a) {
  nlohmann::json j;
  j["rows"] = a.rows();
  j["cols"] = a.cols();
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index k = 0; k < a.size(); ++k) data.push_back(hex_double(a.data()[k]));
  j["data"] = std::move(data);
  return j;
}

Matrix<double> matrix_from_json(const nlohmann::json& j) {
  Matrix<double> a(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  require(static_cast<Eigen::Index>(data.size()) == a.size(), ErrorCode::IoError, "checkpoint matrix size");
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = parse_hex_double(data[k]);
  return a;
}

}  // namespace

nlohmann::json problem_to_json(const ConsensusProblem<double>& p) {
  nlohmann::json j;
  j["n"] = p.agent_count();
  j["m"] = p.dim;
  j["description"] = p.description;
  nlohmann::json agents = nlohmann::json::array();
  for (int i = 0; i < p.agent_count(); ++i) {
    nlohmann::json a;
    const auto& g = p.smooth[i];
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < g.A.rows(); ++r) {
      std::vector<double> row(g.A.cols());
      for (Eigen::Index c = 0; c < g.A.cols(); ++c) row[c] = g.A(r, c);
      rows.push_back(row);
    }
    a["A"] = std::move(rows);
    a["b"] = std::vector<double>(g.b.data(), g.b.data() + g.b.size());
    a["h"] = {{"kind", kind_name(p.nonsmooth[i].kind)}, {"weight", p.nonsmooth[i].weight},
              {"radius", p.nonsmooth[i].radius}};
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  if (p.planted) j["planted"] = std::vector<double>(p.planted->data(), p.planted->data() + p.planted->size());
  return j;
}

ConsensusProblem<double> problem_from_json(const nlohmann::json& j) {
  try {
    const int m = j.at("m").get<int>();
    std::vector<LeastSquares<double>> g;
    std::vector<Regularizer<double>> h;
    for (const auto& a : j.at("agents")) {
      LeastSquares<double> gi;
      const auto& rows = a.at("A");
      gi.A.resize(static_cast<Eigen::Index>(rows.size()), m);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        require(static_cast<int>(rows[r].size()) == m, ErrorCode::DimensionMismatch, "instance row length");
        for (int c = 0; c < m; ++c) gi.A(static_cast<Eigen::Index>(r), c) = rows[r][c].get<double>();
      }
      const auto b = a.at("b").get<std::vector<double>>();
      gi.b = Eigen::Map<const Vector<double>>(b.data(), static_cast<Eigen::Index>(b.size()));
      g.push_back(std::move(gi));
      h.push_back(a.contains("h") ? regularizer_from_json(a.at("h")) : Regularizer<double>::zero());
    }
    require(!j.contains("n") || j.at("n").get<int>() == static_cast<int>(g.size()), ErrorCode::DimensionMismatch,
            "instance agent count");
    auto p = ConsensusProblem<double>::make(std::move(g), std::move(h), j.value("description", std::string("loaded")));
    if (j.contains("planted")) {
      const auto c = j.at("planted").get<std::vector<double>>();
      p.planted = Eigen::Map<const Vector<double>>(c.data(), static_cast<Eigen::Index>(c.size()));
    }
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("instance: ") + ex.what());
  }
}

void write_problem_binary(const std::string& path, const ConsensusProblem<double>& problem) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path);
  serialize(os, problem);
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

ConsensusProblem<double> read_problem_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot read " + path);
  return deserialize(is, path);
}

ConsensusProblem<double> load_problem(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".json") {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::IoError, "cannot read " + path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ConfigError, path + ": " + ex.what());
    }
    return problem_from_json(j);
  }
  return read_problem_binary(path);
}

void save_problem(const std::string& path, const ConsensusProblem<double>& problem) {
  if (std::filesystem::path(path).extension() == ".json") {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path);
    os << problem_to_json(problem).dump() << '\n';
    return;
  }
  write_problem_binary(path, problem);
}

std::uint64_t instance_hash(const ConsensusProblem<double>& problem) {
  std::ostringstream os(std::ios::binary);
  serialize(os, problem);
  const std::string bytes = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ReferenceCache::path_for(std::uint64_t hash) const {
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.json", static_cast<unsigned long long>(hash));
  return (std::filesystem::path(dir_) / name).string();
}

std::optional<ReferenceSolution<double>> ReferenceCache::load(std::uint64_t hash) const {
  std::ifstream is(path_for(hash));
  if (!is) return std::nullopt;
  try {
    nlohmann::json j;
    is >> j;
    ReferenceSolution<double> s;
    const Matrix<double> x = matrix_from_json(j.at("x"));
    s.x = x.col(0);
    s.value = parse_hex_double(j.at("value"));
    s.residual = parse_hex_double(j.at("residual"));
    s.iterations = j.at("iterations").get<int>();
    s.converged = j.at("converged").get<bool>();
    return s;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are recomputed
  }
}

void ReferenceCache::store(std::uint64_t hash, const ReferenceSolution<double>& s) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  nlohmann::json j;
  j["x"] = matrix_to_json(s.x);
  j["value"] = hex_double(s.value);
  j["residual"] = hex_double(s.residual);
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  // Write then rename so concurrent readers never see a partial file.
  const std::string target = path_for(hash);
  const std::string tmp = target + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream os(tmp);
    if (!os) return;
    os << j.dump();
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

ReferenceSolution<double> cached_reference(const ConsensusProblem<double>& problem, const std::string& cache_dir) {
  if (cache_dir.empty()) return reference_optimum(problem);
  const ReferenceCache cache(cache_dir);
  const std::uint64_t h = instance_hash(problem);
  if (auto hit = cache.load(h)) return *hit;
  auto s = reference_optimum(problem);
  cache.store(h, s);
  return s;
}

nlohmann::json state_to_json(const SolverState<double>& s) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["r"] = s.r;
  j["x"] = matrix_to_json(s.x);
  j["x_prev"] = matrix_to_json(s.x_prev);
  j["z"] = matrix_to_json(s.z);
  j["delta"] = matrix_to_json(s.delta);
  j["gamma"] = matrix_to_json(s.gamma);
  j["zeta"] = matrix_to_json(s.zeta);
  j["grad_prev"] = matrix_to_json(s.grad_prev);
  j["x_ag"] = matrix_to_json(s.x_ag);
  j["z_ag"] = matrix_to_json(s.z_ag);
  j["delta_ag"] = matrix_to_json(s.delta_ag);
  j["gamma_ag"] = matrix_to_json(s.gamma_ag);
  j["mix_sum"] = matrix_to_json(s.mix_sum);
  j["last_eta"] = hex_double(s.last_eta);
  j["active_nodes"] = s.active_nodes;
  j["active_arcs"] = s.active_arcs;
  return j;
}

SolverState<double> state_from_json(const nlohmann::json& j) {
  try {
    require(j.at("version").get<int>() == kCheckpointVersion, ErrorCode::IoError, "unsupported checkpoint version");
    SolverState<double> s;
    s.r = j.at("r").get<int>();
    s.x = matrix_from_json(j.at("x"));
    s.x_prev = matrix_from_json(j.at("x_prev"));
    s.z = matrix_from_json(j.at("z"));
    s.delta = matrix_from_json(j.at("delta"));
    s.gamma = matrix_from_json(j.at("gamma"));
    s.zeta = matrix_from_json(j.at("zeta"));
    s.grad_prev = matrix_from_json(j.at("grad_prev"));
    s.x_ag = matrix_from_json(j.at("x_ag"));
    s.z_ag = matrix_from_json(j.at("z_ag"));
    s.delta_ag = matrix_from_json(j.at("delta_ag"));
    s.gamma_ag = matrix_from_json(j.at("gamma_ag"));
    s.mix_sum = matrix_from_json(j.at("mix_sum"));
    s.last_eta = parse_hex_double(j.at("last_eta"));
    s.active_nodes = j.at("active_nodes").get<int>();
    s.active_arcs = j.at("active_arcs").get<int>();
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoError, std::string("checkpoint: ") + ex.what());
  }
}

}  // namespace spgc
