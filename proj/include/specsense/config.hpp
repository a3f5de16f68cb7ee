#pragma once

#include <string>
#include <utility>
#include <vector>

#include "specsense/harness.hpp"

namespace specsense {

/// Flat `key = value` configuration text, `#` starts a comment. Lists are
/// comma separated. Unknown keys are rejected with the offending line number.
ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base = {});

/// Applies one `key value` override on top of a resolved config.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Every key with its current value; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& config);

/// Canonical key names accepted by parse_config, in dump order.
const std::vector<std::string>& config_keys();

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace specsense
