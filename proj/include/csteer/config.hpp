#pragma once

#include <filesystem>
#include <string_view>

#include "csteer/experiment.hpp"

namespace csteer {

/// Parses an experiment config from TOML. Unknown keys are rejected. Relative
/// cache paths are kept as written and resolved against ACTCACHE_DIR on load.
ExperimentConfig parse_config(std::string_view toml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace csteer
