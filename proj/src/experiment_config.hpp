#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "crpsreg/experiments.hpp"

namespace crpsreg::cli {

struct ExperimentFile {
  ExperimentConfig config;
  std::optional<std::uint64_t> seed;
  std::size_t bootstrap_draws = 1000;
  double slope_tolerance = 0.15;
  nlohmann::json echo;  // every key as written, by section
};

/// Parses the INI-style experiment configuration. Unknown sections or keys
/// throw crpsreg::Error listing the valid ones.
ExperimentFile parse_experiment_config(const std::string& text);

}  // namespace crpsreg::cli
