#pragma once

#include <filesystem>
#include <iosfwd>

#include "critr/regimes.hpp"

namespace critr {

// JSON form of a RegimeSet: blip coefficients with their column lists, the
// cause model, cost and interactions. Fit diagnostics are not stored.
void write_regime_json(const RegimeSet& rs, std::ostream& out);
RegimeSet read_regime_json(std::istream& in);

void save_regime(const RegimeSet& rs, const std::filesystem::path& path);
RegimeSet load_regime(const std::filesystem::path& path);

}  // namespace critr
