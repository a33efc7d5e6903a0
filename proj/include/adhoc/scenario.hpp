#pragma once

#include "adhoc/engine.hpp"

#include <string>

namespace adhoc {

/// Parses a YAML scenario. Throws ConfigInvalid naming the offending field
/// (and its line when known); the result is validated before it is returned.
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");

Scenario load_scenario(const std::string& path);

}  // namespace adhoc
