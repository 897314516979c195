#pragma once
// Scenario/method configuration files (JSON, strict schema) and enum names.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pragsim/dgp.hpp"
#include "pragsim/estimators.hpp"
#include "pragsim/harness.hpp"

namespace pragsim {

struct RunConfig {
  std::vector<ScenarioConfig> scenarios;
  std::vector<ModelSpec> methods;
  OracleSettings oracle;
};

/// Parses and validates a configuration document. The optional top-level
/// "defaults" object is merged into every scenario (scenario fields win).
/// Relative cohort paths resolve against `base_dir`. Throws ConfigError with
/// the JSON pointer of the offending field.
RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig parse_config(const std::filesystem::path& path);

std::string_view to_string(Selection s);
std::string_view to_string(TimeAdjust t);
std::string_view to_string(EffectModel e);
std::string_view to_string(Engine e);
std::string_view to_string(EstimandRefKind k);

}  // namespace pragsim
