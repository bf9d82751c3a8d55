#pragma once
// Scenario configuration files.
//
// Scenarios are JSON documents with a fixed schema (see README for the
// field catalogue).  Parsing is strict: unknown keys anywhere in the
// document are an error, and every physical parameter must be spelled out
// (only analysis knobs such as coincidence binning carry defaults).

#include <filesystem>
#include <string>

#include "qtwtt/sim.hpp"

namespace qtwtt {

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// FNV-1a 64-bit digest of the raw configuration text, as 16 hex digits.
// Recorded in reports so results can be traced to an exact input.
std::string text_digest(const std::string& text);

}  // namespace qtwtt
