#pragma once

#include <cstdint>
#include <string>

#include "randse/dgp.hpp"

namespace randse::config {

/// Canonical flat key=value rendering of a scenario; stable across runs and
/// used for the spec hash in run metadata.
std::string serialize_scenario(const dgp::ScenarioSpec& spec);

/// Parses scenario text. Keys mirror the scenario fields; unknown or
/// duplicated keys are hard errors.
dgp::ScenarioSpec parse_scenario_config(const std::string& text);

/// Applies one key=value override to an existing scenario. Overriding `n` on
/// a group-level scenario retiles uniform group sizes.
void apply_override(dgp::ScenarioSpec& spec, const std::string& key, const std::string& value);

std::uint64_t scenario_hash(const dgp::ScenarioSpec& spec);

}  // namespace randse::config
