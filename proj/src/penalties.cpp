#include "spgc/penalties.hpp"

namespace spgc {

OmegaRule omega_rule_from_name(const std::string& name) {
  if (name == "half-lipschitz") return OmegaRule::half_lipschitz;
  if (name == "lipschitz") return OmegaRule::lipschitz;
  if (name == "uniform-max-lipschitz") return OmegaRule::uniform_max_lipschitz;
  throw Error(ErrorCode::ConfigError, "unknown omega rule \"" + name + "\"");
}

std::string to_string(OmegaRule rule) {
  switch (rule) {
    case OmegaRule::half_lipschitz: return "half-lipschitz";
    case OmegaRule::lipschitz: return "lipschitz";
    case OmegaRule::uniform_max_lipschitz: return "uniform-max-lipschitz";
    case OmegaRule::explicit_values: return "explicit";
  }
  return "explicit";
}

std::string to_string(ConditionVariant v) {
  switch (v) {
    case ConditionVariant::static_exact: return "static-exact";
    case ConditionVariant::static_rate: return "static-rate";
    case ConditionVariant::static_stochastic: return "static-stochastic";
    case ConditionVariant::random_exact: return "random-exact";
    case ConditionVariant::random_exact_rate: return "random-exact-rate";
    case ConditionVariant::random_stochastic: return "random-stochastic";
    case ConditionVariant::accelerated: return "accelerated";
  }
  return "unknown";
}

ConditionVariant condition_variant_from_name(const std::string& name) {
  for (ConditionVariant v : kAllConditionVariants)
    if (to_string(v) == name) return v;
  throw Error(ErrorCode::ConfigError, "unknown condition variant \"" + name + "\"");
}

ScheduleMode schedule_mode_from_name(const std::string& name) {
  if (name == "exact") return ScheduleMode::exact;
  if (name == "stochastic") return ScheduleMode::stochastic;
  if (name == "accelerated") return ScheduleMode::accelerated;
  throw Error(ErrorCode::ConfigError, "unknown schedule mode \"" + name + "\"");
}

AccelerationWeights acceleration_weights(int r) {
  require(r >= 1, ErrorCode::InvalidArgument, "acceleration weights start at r = 1");
  const std::int64_t rr = r;
  return {Fraction{2, rr + 1} * Fraction{1, 1}, Fraction{2, rr * (rr + 1)} * Fraction{1, 1}};
}

}  // namespace spgc
