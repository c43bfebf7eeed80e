#include "spgc/diagnostics.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace spgc {

double rate_slope(const std::vector<double>& r, const std::vector<double>& value, double r0, double r1) {
  require(r.size() == value.size(), ErrorCode::DimensionMismatch, "slope needs paired samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] < r0 || r[k] > r1) continue;
    require(r[k] > 0, ErrorCode::NonpositiveMetric, "iteration index must be positive on a log axis");
    require(value[k] > 0 && std::isfinite(value[k]), ErrorCode::NonpositiveMetric,
            "metric is not positive at r = " + std::to_string(r[k]));
    const double lx = std::log(r[k]), ly = std::log(value[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  require(n >= 2, ErrorCode::InvalidArgument, "slope window holds fewer than two samples");
  const double denom = n * sxx - sx * sx;
  require(denom > 0, ErrorCode::InvalidArgument, "slope window is degenerate");
  return (n * sxy - sx * sy) / denom;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << kTraceHeader << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const TraceRecord& t : trace) {
    os << t.r << ',' << t.accuracy << ',' << t.consensus_error << ',';
    if (t.gap) os << *t.gap;
    os << ',' << t.residual << ',' << t.active_nodes << ',' << t.active_edges << ',' << t.eta << ',' << t.seconds
       << '\n';
  }
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path);
  write_trace_csv(os, trace);
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::IoError, "trace line " + std::to_string(line) + ": bad number \"" + s + "\"");
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::IoError, "empty trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kTraceHeader, ErrorCode::IoError, "unexpected trace header \"" + line + "\"");
  std::vector<TraceRecord> trace;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    require(f.size() == 9, ErrorCode::IoError, "trace line " + std::to_string(lineno) + " needs 9 fields");
    TraceRecord t;
    t.r = static_cast<int>(parse_double(f[0], lineno));
    t.accuracy = parse_double(f[1], lineno);
    t.consensus_error = parse_double(f[2], lineno);
    if (!f[3].empty()) t.gap = parse_double(f[3], lineno);
    t.residual = parse_double(f[4], lineno);
    t.active_nodes = static_cast<int>(parse_double(f[5], lineno));
    t.active_edges = static_cast<int>(parse_double(f[6], lineno));
    t.eta = parse_double(f[7], lineno);
    t.seconds = parse_double(f[8], lineno);
    require(trace.empty() || t.r > trace.back().r, ErrorCode::IoError,
            "trace line " + std::to_string(lineno) + ": r must increase");
    trace.push_back(t);
  }
  return trace;
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot read " + path);
  return read_trace_csv(is);
}

TraceMetric trace_metric_from_name(const std::string& name) {
  if (name == "accuracy") return TraceMetric::accuracy;
  if (name == "consensus_error") return TraceMetric::consensus_error;
  if (name == "gap") return TraceMetric::gap;
  if (name == "residual") return TraceMetric::residual;
  throw Error(ErrorCode::ConfigError, "unknown trace metric \"" + name + "\"");
}

double metric_of(const TraceRecord& rec, TraceMetric metric) {
  switch (metric) {
    case TraceMetric::accuracy: return rec.accuracy;
    case TraceMetric::consensus_error: return rec.consensus_error;
    case TraceMetric::gap: return rec.gap ? *rec.gap : std::numeric_limits<double>::quiet_NaN();
    case TraceMetric::residual: return rec.residual;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double trace_slope(const std::vector<TraceRecord>& trace, TraceMetric metric, double r0, double r1) {
  std::vector<double> r, v;
  for (const TraceRecord& t : trace) {
    const double m = metric_of(t, metric);
    if (std::isnan(m)) continue;
    r.push_back(t.r);
    v.push_back(m);
  }
  return rate_slope(r, v, r0, r1);
}

}  // namespace spgc
