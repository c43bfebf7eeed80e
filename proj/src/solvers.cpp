#include "spgc/solvers.hpp"

namespace spgc {

namespace {

const std::vector<std::pair<Kernel, std::string>>& kernel_table() {
  static const std::vector<std::pair<Kernel, std::string>> table = {
      {Kernel::dyspgc, "dyspgc"}, {Kernel::pgc, "pgc"},   {Kernel::pgc_sv, "pgc-sv"},
      {Kernel::accelerated, "accelerated"}, {Kernel::extra, "extra"}, {Kernel::pg_extra, "pg-extra"},
      {Kernel::dlm, "dlm"},       {Kernel::dsg, "dsg"},   {Kernel::dsgd, "dsgd"},
  };
  return table;
}

}  // namespace

Kernel kernel_from_name(const std::string& name) {
  for (const auto& [k, n] : kernel_table())
    if (n == name) return k;
  throw Error(ErrorCode::UnknownKernel, "unknown kernel \"" + name + "\"");
}

std::string to_string(Kernel kernel) {
  for (const auto& [k, n] : kernel_table())
    if (k == kernel) return n;
  return "unknown";
}

const std::vector<std::string>& kernel_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : kernel_table()) out.push_back(entry.second);
    return out;
  }();
  return names;
}

}  // namespace spgc
